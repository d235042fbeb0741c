"""Sparse multivariate polynomials with exact rational coefficients.

A monomial is a tuple of ``(param_index, exponent)`` pairs sorted by index;
the empty tuple is the constant monomial.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

Monomial = tuple  # tuple[tuple[int, int], ...]

CONSTANT: Monomial = ()


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    exps = dict(m1)
    for i, e in m2:
        exps[i] = exps.get(i, 0) + e
    return tuple(sorted(exps.items()))


def mono_factors(mono: Monomial) -> list[int]:
    """Expand a monomial into its factor list, e.g. th0^2*th1 -> [0, 0, 1]."""
    out = []
    for i, e in mono:
        out.extend([i] * e)
    return out


def mono_degree(mono: Monomial) -> int:
    return sum(e for _, e in mono)


class Polynomial:
    """Immutable polynomial over indexed parameters.

    Zero coefficients are never stored, so structural equality of the term
    maps is the equality used for expression pooling.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Rational] | None = None):
        clean = {}
        for mono, c in (terms or {}).items():
            c = Fraction(c)
            if c != 0:
                key = tuple(sorted((int(i), int(e)) for i, e in mono if e != 0))
                clean[key] = clean.get(key, Fraction(0)) + c
        self._terms = {k: v for k, v in sorted(clean.items()) if v != 0}
        self._hash = None

    # construction helpers
    @classmethod
    def const(cls, c) -> "Polynomial":
        return cls({CONSTANT: Fraction(c)})

    @classmethod
    def var(cls, index: int) -> "Polynomial":
        return cls({((index, 1),): Fraction(1)})

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    # algebra
    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, Fraction(0)) + c
        return Polynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        out: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, Fraction(0)) + c1 * c2
        return Polynomial(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self._terms == other._terms
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(self._terms.items()))
        return self._hash

    # queries
    def is_constant(self) -> bool:
        return all(m == CONSTANT for m in self._terms)

    def constant_value(self) -> Fraction:
        return self._terms.get(CONSTANT, Fraction(0))

    def degree(self) -> int:
        return max((mono_degree(m) for m in self._terms), default=0)

    def is_linear(self) -> bool:
        return self.degree() <= 1

    def is_multilinear(self) -> bool:
        return all(e == 1 for m in self._terms for _, e in m)

    def variables(self) -> set[int]:
        return {i for m in self._terms for i, _ in m}

    def evaluate(self, v: Sequence[float]) -> float:
        """Evaluate at a parameter vector, summing terms in canonical key order."""
        total = 0.0
        for mono, c in self._terms.items():
            t = float(c)
            for i, e in mono:
                t *= float(v[i]) ** e
            total += t
        return total

    def evaluate_many(self, points):
        """Vectorised evaluation over an (n, n_params) array."""
        import numpy as np

        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[0])
        for mono, c in self._terms.items():
            t = np.full(pts.shape[0], float(c))
            for i, e in mono:
                t = t * pts[:, i] ** e
            out = out + t
        return out

    def to_string(self, names: Sequence[str] | None = None) -> str:
        def name(i):
            return names[i] if names is not None else f"p{i}"

        if not self._terms:
            return "0"
        parts = []
        for mono, c in self._terms.items():
            factors = [name(i) for i in mono_factors(mono)]
            mag = abs(c)
            if not factors:
                body = _fmt_rational(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([_fmt_rational(mag)] + factors)
            parts.append((c < 0, body))
        neg, body = parts[0]
        text = ("-" if neg else "") + body
        for neg, body in parts[1:]:
            text += (" - " if neg else " + ") + body
        return text

    def __repr__(self):
        return f"Polynomial({self.to_string()!r})"


def _fmt_rational(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def _coerce(x):
    if isinstance(x, Polynomial):
        return x
    if isinstance(x, (int, Fraction)):
        return Polynomial.const(x)
    if isinstance(x, float):
        return Polynomial.const(Fraction(x).limit_denominator(10**12))
    return NotImplemented


def poly_sum(polys: Iterable[Polynomial]) -> Polynomial:
    out: dict = {}
    for p in polys:
        for m, c in p.items():
            out[m] = out.get(m, Fraction(0)) + c
    return Polynomial(out)
