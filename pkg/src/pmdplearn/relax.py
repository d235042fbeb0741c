"""Uncertainty models built from learned expression intervals.

Four constructions, from loosest to tightest (up to incomparability of
the parameter box):

* ``P_I``      tied intervals: each transition gets its expression's interval
* ``P_Theta``  bounding box of the region, pushed through each expression
* ``P_Lambda`` per-expression min/max over the region
* ``P_R``      the region itself, coupled within each state-action pair
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry.lp import lp_solve
from .geometry.polytope import EmptyRegion, Polytope
from .geometry.region import build_region, interval_product, lift, obbt
from .geometry.vertices import VertexEnumerationUnavailable, enumerate_vertices
from .model import MDP, PMDP, ExpressionIndex
from .polynomial import CONSTANT, mono_factors
from .timing import NO_DEADLINE

P_I, P_THETA, P_LAMBDA, P_R = "P_I", "P_Theta", "P_Lambda", "P_R"
KINDS = (P_I, P_THETA, P_LAMBDA, P_R)
ALIASES = {
    "interval": P_I,
    "param_box": P_THETA,
    "expr_proj": P_LAMBDA,
    "region": P_R,
    "p_i": P_I,
    "p_theta": P_THETA,
    "p_lambda": P_LAMBDA,
    "p_r": P_R,
}
SUM_TOL = 1e-9


def canonical_kind(kind: str) -> str:
    if kind in KINDS:
        return kind
    try:
        return ALIASES[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown relaxation {kind!r}") from None


@dataclass
class UncertainModel:
    """Per state-action uncertainty description over a fixed structure.

    Local data are indexed by position in ``sa_pairs``; ``succ[i]`` lists
    successor states in the order of the underlying transition list.
    """

    kind: str  # "interval" or "region"
    provenance: str
    states: tuple
    actions: tuple
    enabled: tuple
    initial: int
    sa_pairs: list
    succ: list
    lo: list | None = None  # interval kind: per pair arrays
    hi: list | None = None
    expr_lo: np.ndarray | None = None  # per expression, where defined
    expr_hi: np.ndarray | None = None
    region: Polytope | None = None
    rows: list | None = None  # region kind: per pair (R, c), probabilities = R @ x + c
    vertices: np.ndarray | None = None
    vertex_probs: list | None = None
    fallback_used: bool = False
    widened: list = field(default_factory=list)
    box: tuple | None = None  # P_Theta: bounding box of the region
    hull_bounds: list | None = None  # region kind: per pair (lo, hi) projections

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def sa_index(self) -> dict:
        return {sa: i for i, sa in enumerate(self.sa_pairs)}

    def hull(self, i: int):
        """Per-successor probability bounds of pair i (exact for intervals)."""
        if self.kind == "interval":
            return self.lo[i], self.hi[i]
        return self.hull_bounds[i]

    def to_dict(self, names=None) -> dict:
        out = {
            "provenance": self.provenance,
            "kind": self.kind,
            "fallback_used": self.fallback_used,
            "widened": [f"{self.states[s]}/{self.actions[a]}" for s, a in self.widened],
        }
        if self.expr_lo is not None:
            out["expressions"] = [[float(l), float(u)] for l, u in zip(self.expr_lo, self.expr_hi)]
        if self.box is not None:
            out["box"] = [[float(l), float(u)] for l, u in zip(*self.box)]
        if self.kind == "interval":
            out["transitions"] = {
                f"{self.states[s]}/{self.actions[a]}": {
                    self.states[t]: [float(l), float(u)] for t, l, u in zip(self.succ[i], self.lo[i], self.hi[i])
                }
                for i, (s, a) in enumerate(self.sa_pairs)
            }
        else:
            out["region"] = self.region.dump()
            out["n_vertices"] = None if self.vertices is None else int(len(self.vertices))
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _skeleton(m):
    pairs = list(m.sa_pairs)
    succ = [np.array([t for t, _ in m.trans[sa]], dtype=int) for sa in pairs]
    return dict(
        states=m.states, actions=m.actions, enabled=m.enabled, initial=m.initial, sa_pairs=pairs, succ=succ
    )


def _locals_from_exprs(m: PMDP, idx: ExpressionIndex, elo, ehi):
    lo, hi, bad = [], [], []
    for sa in m.sa_pairs:
        ids = list(idx.of[sa])
        l = np.clip(elo[ids], 0.0, 1.0)
        u = np.clip(ehi[ids], 0.0, 1.0)
        if l.sum() > 1 + SUM_TOL or u.sum() < 1 - SUM_TOL:
            bad.append(sa)
        lo.append(l)
        hi.append(u)
    return lo, hi, bad


def point_model(mdp: MDP) -> UncertainModel:
    """A concrete MDP as a degenerate interval model."""
    lo = [np.array([p for _, p in mdp.trans[sa]]) for sa in mdp.sa_pairs]
    return UncertainModel("interval", "point", lo=lo, hi=[x.copy() for x in lo], **_skeleton(mdp))


def build_interval_model(m: PMDP, idx: ExpressionIndex, ivals) -> UncertainModel:
    """Tied interval model; locally empty pairs are widened to [0,1] and reported."""
    elo, ehi = np.asarray(ivals.lo, float), np.asarray(ivals.hi, float)
    lo, hi, bad = _locals_from_exprs(m, idx, elo, ehi)
    for sa in bad:
        i = m.sa_index[sa]
        known = np.array([idx.is_known(e) for e in idx.of[sa]])
        lo[i] = np.where(known, lo[i], 0.0)
        hi[i] = np.where(known, hi[i], 1.0)
    return UncertainModel(
        "interval", P_I, lo=lo, hi=hi, expr_lo=elo.copy(), expr_hi=ehi.copy(), widened=bad, **_skeleton(m)
    )


def param_box(region: Polytope, deadline=NO_DEADLINE):
    """Bounding box of the region over the parameter coordinates."""
    lo, hi = [], []
    for i in range(region.n_params):
        deadline.check()
        e = np.zeros(region.dim)
        e[i] = 1.0
        rmin = lp_solve(region, e, "min")
        rmax = lp_solve(region, e, "max")
        if not (rmin.ok and rmax.ok):
            raise EmptyRegion("uncertainty region is empty")
        lo.append(rmin.value)
        hi.append(rmax.value)
    return np.array(lo), np.array(hi)


def poly_range_on_box(f, lo, hi):
    """Interval arithmetic over a box, multiplying monomial factors left to right."""
    tot_lo = tot_hi = 0.0
    for mono, c in f.items():
        if mono == CONSTANT:
            tot_lo += float(c)
            tot_hi += float(c)
            continue
        facs = mono_factors(mono)
        mlo, mhi = lo[facs[0]], hi[facs[0]]
        for k, j in enumerate(facs[1:]):
            # only the first product can be an exact square of one variable
            mlo, mhi = interval_product(mlo, mhi, lo[j], hi[j], same=(k == 0 and j == facs[0]))
        a, b = float(c) * mlo, float(c) * mhi
        tot_lo += min(a, b)
        tot_hi += max(a, b)
    return tot_lo, tot_hi


def build_param_box_model(region, m: PMDP, idx: ExpressionIndex, ivals=None, intersect=False, deadline=NO_DEADLINE):
    """Expression bounds over the bounding box of the region.

    ``intersect`` also clips them to the learned intervals, which is still
    sound and never looser than either construction alone.
    """
    if region.infeasible:
        raise EmptyRegion("uncertainty region is empty")
    blo, bhi = param_box(region, deadline)
    n = len(idx.exprs)
    elo, ehi = np.zeros(n), np.ones(n)
    for i, f in enumerate(idx.exprs):
        if f.is_constant():
            elo[i] = ehi[i] = float(f.constant_value())
            continue
        l, u = poly_range_on_box(f, blo, bhi)
        l, u = max(l, 0.0), min(u, 1.0)
        if intersect and ivals is not None:
            l, u = max(l, float(ivals.lo[i])), min(u, float(ivals.hi[i]))
        elo[i], ehi[i] = l, max(u, l)
    lo, hi, bad = _locals_from_exprs(m, idx, elo, ehi)
    if bad:
        raise EmptyRegion("projected local set is empty")
    return UncertainModel(
        "interval", P_THETA, lo=lo, hi=hi, expr_lo=elo, expr_hi=ehi, box=(blo, bhi), **_skeleton(m)
    )


def expression_projection(region: Polytope, idx: ExpressionIndex, ivals=None, deadline=NO_DEADLINE):
    """Tightest interval of every expression over the (lifted) region."""
    n = len(idx.exprs)
    elo, ehi = np.zeros(n), np.ones(n)
    for i, f in enumerate(idx.exprs):
        if f.is_constant():
            elo[i] = ehi[i] = float(f.constant_value())
            continue
        deadline.check()
        row, c = lift(region, f)
        rmin = lp_solve(region, row, "min")
        rmax = lp_solve(region, row, "max")
        if not (rmin.ok and rmax.ok):
            raise EmptyRegion("uncertainty region is empty")
        l, u = max(rmin.value + c, 0.0), min(rmax.value + c, 1.0)
        if ivals is not None:
            l, u = max(l, float(ivals.lo[i])), min(u, float(ivals.hi[i]))
        elo[i], ehi[i] = l, max(u, l)
    return elo, ehi


def build_expr_proj_model(region, m: PMDP, idx: ExpressionIndex, ivals=None, deadline=NO_DEADLINE):
    if region.infeasible:
        raise EmptyRegion("uncertainty region is empty")
    elo, ehi = expression_projection(region, idx, ivals, deadline)
    lo, hi, bad = _locals_from_exprs(m, idx, elo, ehi)
    if bad:
        raise EmptyRegion("projected local set is empty")
    return UncertainModel("interval", P_LAMBDA, lo=lo, hi=hi, expr_lo=elo, expr_hi=ehi, **_skeleton(m))


def build_region_model(
    region, m: PMDP, idx: ExpressionIndex, ivals=None, backend="auto", deadline=NO_DEADLINE
):
    """Region-coupled model: nature picks one point of the region per pair.

    With ``backend`` "auto" or "vertex" the region's vertices are cached
    when the lifted dimension allows; "lp" never enumerates.
    """
    if region.infeasible:
        raise EmptyRegion("uncertainty region is empty")
    elo, ehi = expression_projection(region, idx, ivals, deadline)
    rows = []
    for sa in m.sa_pairs:
        pairs = [lift(region, idx.exprs[e]) for e in idx.of[sa]]
        rows.append((np.array([r for r, _ in pairs]), np.array([c for _, c in pairs])))
    verts = None
    if backend in ("auto", "vertex"):
        try:
            verts = enumerate_vertices(region)
        except VertexEnumerationUnavailable:
            if backend == "vertex":
                raise
        if verts is not None and len(verts) == 0:
            raise EmptyRegion("uncertainty region is empty")
    vprobs = None
    if verts is not None:
        vprobs = [verts @ R.T + c for R, c in rows]
    u = UncertainModel(
        "region", P_R, expr_lo=elo, expr_hi=ehi, region=region, rows=rows, vertices=verts, vertex_probs=vprobs,
        **_skeleton(m),
    )
    lo, hi, _ = _locals_from_exprs(m, idx, elo, ehi)
    u.hull_bounds = list(zip(lo, hi))
    return u


def learned_region(m: PMDP, idx: ExpressionIndex, ivals, obbt_rounds: int = 3, deadline=NO_DEADLINE) -> Polytope:
    """Region of the learned intervals; nonlinear lifts are tightened by OBBT."""
    region = build_region(idx, ivals, m.params)
    if region.products and obbt_rounds > 0:
        deadline.check()
        region = obbt(region, max_rounds=obbt_rounds)
    return region


def check_and_fallback(region, m: PMDP, idx: ExpressionIndex, ivals, kind=P_LAMBDA, backend="auto",
                       intersect=False, deadline=NO_DEADLINE):
    """Requested model, or the tied interval model when the region is empty."""
    kind = canonical_kind(kind)
    if kind == P_I:
        return build_interval_model(m, idx, ivals), False
    try:
        if region is None or region.infeasible or not lp_solve(region, np.zeros(region.dim)).ok:
            raise EmptyRegion("uncertainty region is empty")
        if kind == P_THETA:
            u = build_param_box_model(region, m, idx, ivals, intersect=intersect, deadline=deadline)
        elif kind == P_LAMBDA:
            u = build_expr_proj_model(region, m, idx, ivals, deadline=deadline)
        else:
            u = build_region_model(region, m, idx, ivals, backend=backend, deadline=deadline)
        return u, False
    except EmptyRegion:
        u = build_interval_model(m, idx, ivals)
        u.fallback_used = True
        return u, True


def build_model(m: PMDP, idx: ExpressionIndex, ivals, kind, backend="auto", intersect=False,
                obbt_rounds=3, region=None, deadline=NO_DEADLINE):
    """Region construction plus the requested relaxation with fallback."""
    kind = canonical_kind(kind)
    if kind != P_I and region is None:
        region = learned_region(m, idx, ivals, obbt_rounds, deadline)
    return check_and_fallback(region, m, idx, ivals, kind, backend, intersect, deadline)
