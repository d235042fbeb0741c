"""Confidence intervals for pooled expression counts and L1 regions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.special import betainc

from .model import ExpressionIndex, PMDP

QUANTILE_TOL = 1e-10
MAX_L1_SUPPORT = 4


def beta_quantile(p, a, b, tol: float = QUANTILE_TOL, max_iter: int = 60):
    """Inverse of the regularised incomplete beta by bisection (vectorised)."""
    p, a, b = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (p, a, b)))
    lo = np.zeros(p.shape)
    hi = np.ones(p.shape)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        below = betainc(a, b, mid) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo, initial=0.0) < tol:
            break
    return 0.5 * (lo + hi)


def clopper_pearson_many(k, n, gamma):
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    if np.any(k < 0) or np.any(k > n):
        raise ValueError("need 0 <= k <= n")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    # the beta parameters must stay positive; the edge cases are masked below
    lo_q = beta_quantile(gamma / 2, np.maximum(k, 1), np.maximum(n - k + 1, 1))
    hi_q = beta_quantile(1 - gamma / 2, k + 1, np.maximum(n - k, 1))
    lo = np.where(k == 0, 0.0, lo_q)
    hi = np.where(k == n, 1.0, hi_q)
    lo = np.where(n == 0, 0.0, lo)
    hi = np.where(n == 0, 1.0, hi)
    return lo, hi


def clopper_pearson(k: int, n: int, gamma: float) -> tuple[float, float]:
    """Exact two-sided binomial interval with coverage >= 1 - gamma."""
    lo, hi = clopper_pearson_many([k], [n], gamma)
    return float(lo[0]), float(hi[0])


@dataclass(frozen=True)
class ConfidenceConfig:
    delta: float = 0.001
    eps_floor: float = 0.0
    interval_kind: str = "clopper_pearson"
    l1_enabled: bool = False

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not 0 <= self.eps_floor < 1:
            raise ValueError("eps_floor must lie in [0, 1)")
        if self.interval_kind != "clopper_pearson":
            raise ValueError(f"unsupported interval kind {self.interval_kind!r}")


@dataclass
class IntervalTable:
    exprs: list
    lo: np.ndarray
    hi: np.ndarray
    K: np.ndarray
    N: np.ndarray
    trivial: np.ndarray
    constant: np.ndarray
    gamma: float | None = None
    names: tuple = field(default=())

    def __len__(self):
        return len(self.exprs)

    def to_dict(self) -> dict:
        out = {}
        for i, f in enumerate(self.exprs):
            out[f.to_string(self.names or None)] = {
                "l": float(self.lo[i]),
                "u": float(self.hi[i]),
                "K": int(self.K[i]),
                "N": int(self.N[i]),
                "trivial": bool(self.trivial[i]),
                "constant": bool(self.constant[i]),
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def contains(self, m: PMDP, v, tol: float = 1e-12) -> bool:
        """True if every expression at v lies in its interval."""
        vals = np.array([f.evaluate(v) for f in self.exprs])
        return bool(np.all(vals >= self.lo - tol) and np.all(vals <= self.hi + tol))


def learn_intervals(idx: ExpressionIndex, counts, cfg: ConfidenceConfig | None = None, names=()) -> IntervalTable:
    """Per-expression intervals at gamma = delta / |unknown expressions|."""
    cfg = cfg or ConfidenceConfig()
    n_expr = len(idx.exprs)
    K = np.asarray(counts.K, dtype=np.int64)
    N = np.asarray(counts.N, dtype=np.int64)
    lo = np.zeros(n_expr)
    hi = np.ones(n_expr)
    const = np.array([idx.is_known(i) for i in range(n_expr)], dtype=bool)
    unk = np.array(idx.unknown, dtype=int)
    gamma = None
    if len(unk):
        gamma = cfg.delta / len(unk)
        l, u = clopper_pearson_many(K[unk], N[unk], gamma)
        if cfg.eps_floor > 0:
            l = np.where(l <= 0, cfg.eps_floor, l)
            u = np.maximum(u, l)
        lo[unk], hi[unk] = l, u
    for i in np.flatnonzero(const):
        lo[i] = hi[i] = float(idx.exprs[i].constant_value())
    trivial = (~const) & (N == 0)
    return IntervalTable(list(idx.exprs), lo, hi, K, N, trivial, const, gamma, tuple(names))


def weissman_radius(n: int, m: int, gamma: float) -> float:
    """L1 deviation radius for an m-outcome empirical distribution from n draws."""
    if m < 2:
        raise ValueError("support size must be at least 2")
    if n <= 0:
        return 2.0
    eps = math.sqrt(2.0 * (math.log(2.0**m - 2.0) + math.log(1.0 / gamma)) / n)
    return min(eps, 2.0)


def l1_region(m: PMDP, idx: ExpressionIndex, counts, delta: float):
    """Parameter polytope of all v whose local distributions stay in L1 balls.

    Each ball sum_j |f_j[v] - p_j| <= eps is written as one row per sign
    pattern (the all-equal patterns are implied by sum f_j = 1).  The
    failure budget is split evenly over the state-action pairs whose
    distribution is not constant.
    """
    from .geometry.polytope import Polytope
    from .geometry.region import Lifter, lift

    pairs = [i for i, sa in enumerate(m.sa_pairs) if any(not idx.is_known(e) for e in idx.of[sa])]
    if not pairs:
        raise ValueError("no uncertain distributions")
    gamma = delta / len(pairs)
    lifter = Lifter(m.params.names, m.params.lower, m.params.upper)
    for f in idx.exprs:
        lifter.register_poly(f)
    shell = Polytope(lifter.names, np.zeros((0, len(lifter.names))), [], lifter.lo, lifter.hi,
                     lifter.products, lifter.monomial_map, lifter.n_params)
    rows, rhs = [], []
    for coeffs, r in m.params.constraints:
        row = np.zeros(shell.dim)
        row[: len(coeffs)] = [float(c) for c in coeffs]
        rows.append(row)
        rhs.append(float(r))
    radii = {}
    for i in pairs:
        sa = m.sa_pairs[i]
        n = int(counts.sa[i])
        k = len(m.trans[sa])
        eps = weissman_radius(n, k, gamma)
        radii[sa] = eps
        if eps >= 2.0:
            continue
        if k > MAX_L1_SUPPORT:
            raise ValueError(f"L1 region needs at most {MAX_L1_SUPPORT} successors, got {k}")
        phat = counts.sas[i] / n
        lifted = [lift(shell, idx.exprs[e]) for e in idx.of[sa]]
        for signs in product((1.0, -1.0), repeat=k):
            if all(s == signs[0] for s in signs):
                continue
            row = sum(s * r for s, (r, _) in zip(signs, lifted))
            const = sum(s * (c - p) for s, (_, c), p in zip(signs, lifted, phat))
            rows.append(row)
            rhs.append(eps - const)
    A = np.array(rows).reshape(-1, shell.dim)
    poly = Polytope(lifter.names, A, rhs, lifter.lo, lifter.hi, lifter.products, lifter.monomial_map, lifter.n_params)
    return poly, radii
