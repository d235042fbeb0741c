"""Uncertainty regions in parameter space, their McCormick lift and OBBT."""

from __future__ import annotations

import numpy as np

from ..polynomial import CONSTANT, Polynomial, mono_factors
from .lp import lp_solve
from .polytope import TOL, Polytope


def interval_product(a_lo, a_hi, b_lo, b_hi, same=False):
    if same:  # x*x over [lo, hi]
        if a_lo >= 0:
            return a_lo * a_lo, a_hi * a_hi
        if a_hi <= 0:
            return a_hi * a_hi, a_lo * a_lo
        return 0.0, max(a_lo * a_lo, a_hi * a_hi)
    c = (a_lo * b_lo, a_lo * b_hi, a_hi * b_lo, a_hi * b_hi)
    return min(c), max(c)


class Lifter:
    """Assigns auxiliary variables to monomials of degree >= 2.

    theta1*theta2*theta3 is chained left to right: z12 = theta1*theta2,
    z123 = z12*theta3.  Every auxiliary is defined by one bilinear product.
    """

    def __init__(self, names, lo, hi):
        self.names = list(names)
        self.n_params = len(self.names)
        self.lo = [float(x) for x in lo]
        self.hi = [float(x) for x in hi]
        self.var_of = {((i, 1),): i for i in range(self.n_params)}
        self.monomial_map = {}
        self.products = []

    def _mul(self, mono, idx):
        out = dict(mono)
        out[idx] = out.get(idx, 0) + 1
        return tuple(sorted(out.items()))

    def register(self, mono) -> int:
        if mono in self.var_of:
            return self.var_of[mono]
        factors = mono_factors(mono)
        prefix = ((factors[0], 1),)
        cur = factors[0]
        for f in factors[1:]:
            prefix = self._mul(prefix, f)
            if prefix not in self.var_of:
                z = len(self.names)
                lo, hi = interval_product(self.lo[cur], self.hi[cur], self.lo[f], self.hi[f], cur == f)
                self.names.append("z[" + "*".join(self.names[i] for i in mono_factors(prefix)) + "]")
                self.lo.append(lo)
                self.hi.append(hi)
                self.var_of[prefix] = z
                self.monomial_map[z] = prefix
                self.products.append((z, cur, f))
            cur = self.var_of[prefix]
        return cur

    def register_poly(self, f: Polynomial):
        for mono, _ in f.items():
            if mono != CONSTANT:
                self.register(mono)


def lift(p: Polytope, f: Polynomial):
    """Linear form (coefficients, constant) of f over the lifted variables."""
    var_of = {((i, 1),): i for i in range(p.n_params)}
    var_of.update({m: z for z, m in p.monomial_map.items()})
    row = np.zeros(p.dim)
    const = 0.0
    for mono, c in f.items():
        if mono == CONSTANT:
            const += float(c)
        else:
            row[var_of[mono]] += float(c)
    return row, const


def build_region(idx, ivals, params, exprs=None) -> Polytope:
    """Polytope of parameters consistent with every expression interval.

    ``exprs`` optionally restricts which expression ids contribute rows.
    Rows implied by the parameter box alone (a linear expression against
    the bound 0 or 1 it already satisfies) are omitted.
    """
    ids = idx.unknown if exprs is None else [i for i in exprs if not idx.is_known(i)]
    lifter = Lifter(params.names, params.lower, params.upper)
    for i in ids:
        lifter.register_poly(idx.exprs[i])
    n = len(lifter.names)
    rows, rhs = [], []
    for coeffs, r in params.constraints:
        row = np.zeros(n)
        row[: len(coeffs)] = [float(c) for c in coeffs]
        rows.append(row)
        rhs.append(float(r))
    shell = Polytope(lifter.names, np.zeros((0, n)), [], lifter.lo, lifter.hi, lifter.products, lifter.monomial_map, lifter.n_params)
    for i in ids:
        f = idx.exprs[i]
        lo, hi = float(ivals.lo[i]), float(ivals.hi[i])
        slack = TOL.equality_slack if hi - lo <= 0 else 0.0
        row, c = lift(shell, f)
        linear = f.is_linear()
        if not (linear and hi >= 1.0):
            rows.append(row)
            rhs.append(hi - c + slack)
        if not (linear and lo <= 0.0):
            rows.append(-row)
            rhs.append(-(lo - c) + slack)
    A = np.array(rows).reshape(-1, n)
    return Polytope(lifter.names, A, rhs, lifter.lo, lifter.hi, lifter.products, lifter.monomial_map, lifter.n_params)


def _propagate(p: Polytope, lo, hi):
    # products follow registration order, so factors are already updated
    for z, x, y in p.products:
        plo, phi = interval_product(lo[x], hi[x], lo[y], hi[y], x == y)
        lo[z] = max(lo[z], plo)
        hi[z] = min(hi[z], phi)


def obbt(p: Polytope, tol: float = 1e-6, max_rounds: int = 10, history: list | None = None) -> Polytope:
    """Optimisation-based bound tightening.

    Each round minimises and maximises every variable over the current
    relaxation, shrinks the bounds (padded outwards by a tiny margin so
    the true set is never cut) and regenerates the McCormick rows.
    Returns a polytope flagged ``infeasible`` if an LP proves emptiness.
    """
    cur = p
    if history is not None:
        history.append((cur.lo.copy(), cur.hi.copy()))
    for _ in range(max_rounds):
        lo, hi = cur.lo.copy(), cur.hi.copy()
        for i in range(cur.dim):
            e = np.zeros(cur.dim)
            e[i] = 1.0
            rmin = lp_solve(cur, e, "min")
            if not rmin.ok:
                return cur.with_bounds(cur.lo, cur.hi, infeasible=True)
            rmax = lp_solve(cur, e, "max")
            lo[i] = max(lo[i], rmin.value - TOL.obbt_margin)
            hi[i] = min(hi[i], rmax.value + TOL.obbt_margin)
        _propagate(cur, lo, hi)
        if np.any(lo > hi + TOL.feas):
            return cur.with_bounds(cur.lo, cur.hi, infeasible=True)
        hi = np.maximum(hi, lo)
        gain = max(np.max(lo - cur.lo), np.max(cur.hi - hi), 0.0)
        cur = cur.with_bounds(lo, hi)
        if history is not None:
            history.append((lo.copy(), hi.copy()))
        if gain < tol:
            break
    return cur
