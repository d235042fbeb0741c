"""Brute-force vertex enumeration for low-dimensional polytopes."""

from __future__ import annotations

import itertools
from math import comb

import numpy as np

from .lp import lp_solve
from .polytope import TOL, Polytope

MAX_DIM = 6
MAX_SUBSETS = 2_000_000
_PRUNE_ABOVE = 20_000
_CHUNK = 20_000


class VertexEnumerationUnavailable(RuntimeError):
    pass


def _halfspaces(p: Polytope):
    n = p.dim
    eye = np.eye(n)
    G = np.vstack([p.A, eye, -eye])
    h = np.concatenate([p.b, p.hi, -p.lo])
    keep = np.abs(G).max(axis=1) > 0
    if np.any(h[~keep] < -TOL.feas):
        return G[:0], h[:0], False
    G, h = G[keep], h[keep]
    # scale and drop duplicate rows
    scale = np.abs(G).max(axis=1)
    G, h = G / scale[:, None], h / scale
    _, first = np.unique(np.round(np.column_stack([G, h]), 12), axis=0, return_index=True)
    first = np.sort(first)
    return G[first], h[first], True


def _prune_inactive(p: Polytope, G, h):
    # rows that never become tight cannot define a vertex
    keep = []
    for j in range(len(h)):
        res = lp_solve(p, G[j], "max")
        if not res.ok:
            return None
        if res.value >= h[j] - 1e-7:
            keep.append(j)
    return G[keep], h[keep]


def enumerate_vertices(p: Polytope, max_dim: int = MAX_DIM, max_subsets: int = MAX_SUBSETS) -> np.ndarray:
    """All vertices of a bounded polytope as an (k, dim) array.

    Every dim-subset of the halfspaces (rows and bound rows) is solved as a
    square system; feasible solutions are kept and merged within 1e-7.
    """
    d = p.dim
    if d > max_dim:
        raise VertexEnumerationUnavailable(
            f"vertex enumeration unavailable: dimension {d} exceeds {max_dim}; use the lp backend"
        )
    empty = np.zeros((0, d))
    if p.infeasible:
        return empty
    G, h, ok = _halfspaces(p)
    if not ok:
        return empty
    if comb(len(h), d) > _PRUNE_ABOVE:
        pruned = _prune_inactive(p, G, h)
        if pruned is None:
            return empty
        G, h = pruned
    if comb(len(h), d) > max_subsets:
        raise VertexEnumerationUnavailable(
            f"vertex enumeration unavailable: {comb(len(h), d)} row subsets; use the lp backend"
        )
    found = []
    combos = itertools.combinations(range(len(h)), d)
    while True:
        chunk = np.array(list(itertools.islice(combos, _CHUNK)), dtype=int).reshape(-1, d)
        if len(chunk) == 0:
            break
        mats = G[chunk]
        dets = np.linalg.det(mats)
        good = np.abs(dets) > 1e-10
        if not np.any(good):
            continue
        sols = np.linalg.solve(mats[good], h[chunk[good]][..., None])[..., 0]
        feas = np.all(sols @ G.T <= h + TOL.feas, axis=1)
        found.append(sols[feas])
    if not found:
        return empty
    return dedupe(np.vstack(found))


def dedupe(points, tol: float = TOL.feas) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        return pts
    order = np.lexsort(pts.T[::-1])
    kept: list = []
    for x in pts[order]:
        if not kept or not np.any(np.all(np.abs(np.array(kept) - x) <= tol, axis=1)):
            kept.append(x)
    return np.array(kept)
