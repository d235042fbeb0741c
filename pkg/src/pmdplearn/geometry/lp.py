"""Dense revised simplex with Bland's rule.

Region LPs have few variables (parameters plus auxiliaries) and many rows,
so ``lp_solve`` works on the dual: for a bounded primal
``max c.x  s.t.  G x <= h`` the dual ``min h.y  s.t.  G^T y = c, y >= 0``
has only ``dim`` equality rows, and picking the upper or lower bound row
of every variable gives a feasible starting basis.  An unbounded dual
certifies an infeasible primal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polytope import TOL, Polytope

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


@dataclass
class LPResult:
    status: str
    value: float = float("nan")
    x: np.ndarray | None = None
    basis: tuple | None = None
    pivots: int = 0

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def simplex_standard(A, b, cost, basis=None, tol=TOL.pivot, max_iter=50_000):
    """Minimise ``cost.y`` s.t. ``A y = b, y >= 0``.

    Returns ``(status, y, basis, pivots)``.  Without a feasible starting
    basis a phase-1 problem with artificial columns is solved first.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    cost = np.asarray(cost, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    if basis is None or not _basis_feasible(A, b, basis, tol):
        A1 = np.hstack([A, np.eye(m)])
        c1 = np.concatenate([np.zeros(n), np.ones(m)])
        st, y1, basis1, piv1 = _revised(A1, b, c1, list(range(n, n + m)), tol, max_iter)
        if st != OPTIMAL or c1 @ y1 > 1e-7 * max(1.0, np.abs(b).max(initial=0)):
            return INFEASIBLE, None, None, piv1
        basis = _drive_out_artificials(A1, basis1, n)
        if basis is None:
            return INFEASIBLE, None, None, piv1
        pivots = piv1
    else:
        pivots = 0
    st, y, basis, piv2 = _revised(A, b, cost, list(basis), tol, max_iter)
    return st, y, basis, pivots + piv2


def _basis_feasible(A, b, basis, tol) -> bool:
    basis = list(basis)
    if len(basis) != A.shape[0] or len(set(basis)) != len(basis):
        return False
    B = A[:, basis]
    if np.linalg.cond(B) > 1e12:
        return False
    xB = np.linalg.solve(B, b)
    return bool(np.all(xB >= -tol))


def _drive_out_artificials(A1, basis, n):
    # swap basic artificials (at zero level) for structural columns
    basis = list(basis)
    m = A1.shape[0]
    for i in range(m):
        if basis[i] < n:
            continue
        Binv = np.linalg.inv(A1[:, basis])
        row = Binv[i] @ A1[:, :n]
        cand = [j for j in range(n) if j not in basis and abs(row[j]) > 1e-9]
        if not cand:
            return None  # redundant equality row; not expected for our duals
        basis[i] = cand[0]
    return basis


def _revised(A, b, cost, basis, tol, max_iter):
    m, n = A.shape
    in_basis = np.zeros(n, dtype=bool)
    in_basis[basis] = True
    for it in range(max_iter):
        Binv = np.linalg.inv(A[:, basis])
        xB = Binv @ b
        pi = cost[basis] @ Binv
        reduced = cost - pi @ A
        reduced[in_basis] = 0.0
        cand = np.flatnonzero(reduced < -tol)
        if cand.size == 0:
            y = np.zeros(n)
            y[basis] = np.maximum(xB, 0.0)
            return OPTIMAL, y, basis, it
        j = int(cand[0])  # Bland: lowest index entering
        d = Binv @ A[:, j]
        pos = d > tol
        if not np.any(pos):
            return UNBOUNDED, None, basis, it
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(xB[pos], 0.0) / d[pos]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + 1e-12)
        leave = min(ties, key=lambda i: basis[i])  # Bland: lowest index leaving
        in_basis[basis[leave]] = False
        basis[leave] = j
        in_basis[j] = True
    raise RuntimeError("simplex iteration limit reached")


def _stack(p: Polytope):
    n = p.dim
    eye = np.eye(n)
    G = np.vstack([p.A, eye, -eye])
    h = np.concatenate([p.b, p.hi, -p.lo])
    return G, h


def default_basis(p: Polytope, c) -> list:
    k = len(p.b)
    n = p.dim
    return [k + i if c[i] >= 0 else k + n + i for i in range(n)]


def lp_solve(p: Polytope, objective, sense: str = "min", basis=None, stacked=None) -> LPResult:
    """Optimise a linear objective over the polytope.

    ``basis`` (indices into rows + upper-bound rows + lower-bound rows) is a
    warm start from a previous solve over the same region; an invalid one
    is silently replaced by the bound basis.
    """
    c = np.asarray(objective, dtype=float)
    if c.shape != (p.dim,):
        raise ValueError("objective length must equal the number of variables")
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    if p.infeasible:
        return LPResult(INFEASIBLE)
    if sense == "min":
        c = -c
    G, h = stacked if stacked is not None else _stack(p)
    start = default_basis(p, c)
    if basis is not None and list(basis) != start:
        basis = list(basis)
        if not _dual_basis_ok(G, c, basis):
            basis = start
    else:
        basis = start
    st, y, basis, piv = simplex_standard(G.T, c, h, basis)
    if st == UNBOUNDED:
        return LPResult(INFEASIBLE, pivots=piv)
    if st != OPTIMAL:
        return LPResult(INFEASIBLE, pivots=piv)
    # complementary slackness: the basic rows are tight at the primal optimum
    x = np.linalg.solve(G[basis], h[basis])
    x = np.clip(x, p.lo, p.hi)
    val = float(np.asarray(objective, dtype=float) @ x)
    return LPResult(OPTIMAL, val, x, tuple(basis), piv)


def _dual_basis_ok(G, c, basis) -> bool:
    n = G.shape[1]
    if len(basis) != n or len(set(basis)) != n or max(basis) >= G.shape[0]:
        return False
    B = G[basis].T
    try:
        if np.linalg.cond(B) > 1e12:
            return False
        y = np.linalg.solve(B, c)
    except np.linalg.LinAlgError:
        return False
    return bool(np.all(y >= -TOL.pivot))


def is_feasible(p: Polytope) -> bool:
    return lp_solve(p, np.zeros(p.dim), "min").ok
