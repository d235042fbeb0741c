"""Parametric and concrete MDP data model."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .polynomial import Polynomial, poly_sum

BOX_TOL = 1e-12
PROB_TOL = 1e-9


class ModelError(ValueError):
    """Semantic error in a (parametric) model."""


@dataclass(frozen=True)
class ParameterSpace:
    names: tuple
    bounds: tuple  # ((lo, hi), ...) as Fractions
    # standing linear rows: (coeffs tuple, rhs) meaning sum c_i*theta_i <= rhs
    constraints: tuple = ()

    def __post_init__(self):
        if len(self.names) != len(self.bounds):
            raise ModelError("one bound pair per parameter required")
        if len(set(self.names)) != len(self.names):
            raise ModelError("duplicate parameter name")
        for name, (lo, hi) in zip(self.names, self.bounds):
            if not (np.isfinite(float(lo)) and np.isfinite(float(hi))) or lo > hi:
                raise ModelError(f"invalid bounds for parameter {name}")

    def __len__(self):
        return len(self.names)

    @property
    def lower(self) -> np.ndarray:
        return np.array([float(lo) for lo, _ in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([float(hi) for _, hi in self.bounds])

    def index(self, name: str) -> int:
        return self.names.index(name)

    def contains(self, v, tol: float = BOX_TOL) -> bool:
        v = np.asarray(v, dtype=float)
        if v.shape != (len(self),):
            return False
        if np.any(v < self.lower - tol) or np.any(v > self.upper + tol):
            return False
        for coeffs, rhs in self.constraints:
            if float(np.dot([float(c) for c in coeffs], v)) > float(rhs) + tol:
                return False
        return True

    def check_points(self) -> np.ndarray:
        """Points at which expressions are checked to lie in [0, 1].

        Box vertices (or vertices of the box cut by the standing rows), plus
        a grid for nonlinear expressions handled by the caller.
        """
        lo, hi = self.lower, self.upper
        if not self.constraints:
            return np.array(list(itertools.product(*zip(lo, hi))), dtype=float).reshape(-1, len(self))
        from .geometry.polytope import Polytope
        from .geometry.vertices import enumerate_vertices

        A = np.array([[float(c) for c in coeffs] for coeffs, _ in self.constraints])
        b = np.array([float(r) for _, r in self.constraints])
        poly = Polytope(list(self.names), A, b, lo, hi)
        return np.asarray(enumerate_vertices(poly))

    def grid_points(self, per_dim: int = 5, max_points: int = 4096, seed: int = 0) -> np.ndarray:
        lo, hi = self.lower, self.upper
        d = len(self)
        if per_dim**d <= max_points:
            axes = [np.linspace(l, h, per_dim) for l, h in zip(lo, hi)]
            pts = np.array(list(itertools.product(*axes))).reshape(-1, d)
        else:
            rng = np.random.default_rng(seed)
            pts = lo + (hi - lo) * rng.random((max_points, d))
        if self.constraints:
            pts = np.array([p for p in pts if self.contains(p)]).reshape(-1, d)
        return pts


@dataclass(frozen=True)
class PMDP:
    states: tuple
    actions: tuple
    enabled: tuple  # per state: tuple of action indices (may be empty: sink)
    initial: int
    params: ParameterSpace
    trans: dict  # (s, a) -> tuple of (successor, Polynomial)
    rewards: dict = field(default_factory=dict)  # (s, a) -> Fraction
    targets: frozenset | None = None
    sense: str | None = None

    @cached_property
    def sa_pairs(self) -> list:
        return [(s, a) for s in range(len(self.states)) for a in self.enabled[s]]

    @cached_property
    def sa_index(self) -> dict:
        return {sa: i for i, sa in enumerate(self.sa_pairs)}

    @property
    def n_states(self) -> int:
        return len(self.states)

    def n_transitions(self) -> int:
        return sum(len(v) for v in self.trans.values())

    def canonical(self) -> tuple:
        """Name-keyed view used for structural comparison (index-order free)."""
        st, ac = self.states, self.actions
        trans = {
            (st[s], ac[a]): tuple(sorted((st[t], f.to_string(self.params.names)) for t, f in d))
            for (s, a), d in self.trans.items()
        }
        return (
            self.params,
            st[self.initial],
            tuple(sorted(st)),
            tuple(sorted(trans.items())),
            tuple(sorted((st[s], ac[a], r) for (s, a), r in self.rewards.items())),
            None if self.targets is None else tuple(sorted(st[t] for t in self.targets)),
            self.sense,
        )

    def validate(self) -> None:
        """Enforce the structural invariants; raise ModelError on violation."""
        n = len(self.states)
        if not 0 <= self.initial < n:
            raise ModelError("initial state out of range")
        one = Polynomial.const(1)
        for s, a in self.sa_pairs:
            where = f"state {self.states[s]}, action {self.actions[a]}"
            dist = self.trans.get((s, a))
            if not dist:
                raise ModelError(f"{where}: empty distribution")
            succs = [t for t, _ in dist]
            if len(set(succs)) != len(succs):
                raise ModelError(f"{where}: duplicate successor")
            exprs = [f for _, f in dist]
            if len(set(exprs)) != len(exprs):
                raise ModelError(f"{where}: duplicate expression within distribution")
            total = poly_sum(exprs)
            if total != one:
                raise ModelError(
                    f"{where}: probabilities sum to {total.to_string(self.params.names)}, not 1"
                )
        self._check_ranges()

    def _check_ranges(self) -> None:
        # exact for multilinear expressions on a box (extrema at vertices);
        # nonlinear ones are additionally checked on a grid
        exprs = {}
        for (s, a), dist in self.trans.items():
            for _, f in dist:
                if not f.is_constant():
                    exprs.setdefault(f, (s, a))
                elif not 0 <= f.constant_value() <= 1:
                    raise ModelError(
                        f"state {self.states[s]}, action {self.actions[a]}: "
                        f"constant probability {f.constant_value()} outside [0,1]"
                    )
        if not exprs:
            return
        verts = self.params.check_points()
        grid = None
        for f, (s, a) in exprs.items():
            vals = f.evaluate_many(verts)
            if not f.is_multilinear() or (self.params.constraints and not f.is_linear()):
                if grid is None:
                    grid = self.params.grid_points()
                vals = np.concatenate([vals, f.evaluate_many(grid)])
            if vals.min() < -PROB_TOL or vals.max() > 1 + PROB_TOL:
                raise ModelError(
                    f"state {self.states[s]}, action {self.actions[a]}: expression "
                    f"{f.to_string(self.params.names)} leaves [0,1] on the parameter space"
                )


@dataclass(frozen=True)
class MDP:
    states: tuple
    actions: tuple
    enabled: tuple
    initial: int
    trans: dict  # (s, a) -> tuple of (successor, float)
    rewards: dict = field(default_factory=dict)
    targets: frozenset | None = None
    sense: str | None = None

    @cached_property
    def sa_pairs(self) -> list:
        return [(s, a) for s in range(len(self.states)) for a in self.enabled[s]]

    @cached_property
    def sa_index(self) -> dict:
        return {sa: i for i, sa in enumerate(self.sa_pairs)}

    @property
    def n_states(self) -> int:
        return len(self.states)

    def validate(self) -> None:
        for (s, a), dist in self.trans.items():
            total = sum(p for _, p in dist)
            if abs(total - 1.0) > PROB_TOL or any(p < -PROB_TOL for _, p in dist):
                raise ModelError(f"state {self.states[s]}, action {self.actions[a]}: not a distribution")


def instantiate(m: PMDP, v: Sequence[float]) -> MDP:
    v = np.asarray(v, dtype=float)
    if not m.params.contains(v):
        raise ModelError("instantiation outside parameter space")
    cache: dict = {}
    trans = {}
    for (s, a), dist in m.trans.items():
        probs = []
        for t, f in dist:
            p = cache.get(f)
            if p is None:
                p = cache[f] = f.evaluate(v)
            if p < -PROB_TOL or p > 1 + PROB_TOL:
                raise ModelError(
                    f"state {m.states[s]}, action {m.actions[a]}: probability {p} outside [0,1]"
                )
            probs.append(min(max(p, 0.0), 1.0))
        total = sum(probs)
        if abs(total - 1.0) > PROB_TOL:
            raise ModelError(f"state {m.states[s]}, action {m.actions[a]}: probabilities sum to {total}")
        trans[(s, a)] = tuple((t, p / total) for (t, _), p in zip(dist, probs))
    return MDP(
        states=m.states,
        actions=m.actions,
        enabled=m.enabled,
        initial=m.initial,
        trans=trans,
        rewards={k: float(r) for k, r in m.rewards.items()},
        targets=m.targets,
        sense=m.sense,
    )


@dataclass(frozen=True)
class ExpressionIndex:
    exprs: list  # deduplicated Polynomials, first-occurrence order
    occ: list  # per expression: list of (s, a, s')
    unknown: list  # indices of non-constant expressions
    of: dict  # (s, a) -> tuple of expression ids aligned with m.trans[(s, a)]

    @cached_property
    def lookup(self) -> dict:
        return {f: i for i, f in enumerate(self.exprs)}

    def is_known(self, i: int) -> bool:
        return self.exprs[i].is_constant()


def index_expressions(m: PMDP) -> ExpressionIndex:
    lookup: dict = {}
    exprs, occ, of = [], [], {}
    for s, a in m.sa_pairs:
        ids = []
        for t, f in m.trans[(s, a)]:
            i = lookup.get(f)
            if i is None:
                i = lookup[f] = len(exprs)
                exprs.append(f)
                occ.append([])
            occ[i].append((s, a, t))
            ids.append(i)
        of[(s, a)] = tuple(ids)
    unknown = [i for i, f in enumerate(exprs) if not f.is_constant()]
    return ExpressionIndex(exprs=exprs, occ=occ, unknown=unknown, of=of)


def render(m: PMDP) -> str:
    """Serialise to the textual model format (inverse of parse_model)."""
    names = m.params.names
    lines = []
    ps = ", ".join(
        f"{n} in [{_q(lo)},{_q(hi)}]" for n, (lo, hi) in zip(names, m.params.bounds)
    )
    lines.append(f"params: {ps};")
    for coeffs, rhs in m.params.constraints:
        lhs = Polynomial({((i, 1),): c for i, c in enumerate(coeffs)}).to_string(names)
        lines.append(f"constraint: {lhs} <= {_q(rhs)};")
    lines.append(f"init {m.states[m.initial]};")
    if m.targets is not None:
        lines.append("target: " + ", ".join(m.states[t] for t in sorted(m.targets)) + ";")
    if m.sense is not None:
        lines.append(f"sense: {m.sense};")
    for s, sname in enumerate(m.states):
        if not m.enabled[s]:
            lines.append(f"state {sname} {{ }}")
            continue
        lines.append(f"state {sname} {{")
        for a in m.enabled[s]:
            lines.append(f"  action {m.actions[a]} {{")
            for t, f in m.trans[(s, a)]:
                lines.append(f"    -> {m.states[t]} : {f.to_string(names)};")
            lines.append("  }")
        lines.append("}")
    for (s, a), r in sorted(m.rewards.items()):
        lines.append(f"reward {m.states[s]} {m.actions[a]} = {_q(r)};")
    return "\n".join(lines) + "\n"


def _q(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
