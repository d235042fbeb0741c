"""Robust / optimistic value iteration and exact policy evaluation."""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry.lp import _stack, lp_solve
from .geometry.polytope import EmptyRegion
from .model import MDP, PMDP
from .timing import NO_DEADLINE

REACH, TOTAL = "reach", "total_reward"
V_MAX = 1e4
SUM_TOL = 1e-9


@dataclass(frozen=True)
class Objective:
    kind: str
    targets: frozenset
    rewards: dict = field(default_factory=dict)  # (s, a) -> nonnegative reward or cost
    sense: str = "max"

    def __post_init__(self):
        if self.kind not in (REACH, TOTAL):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")
        if self.kind == REACH and not self.targets:
            raise ValueError("reachability needs a nonempty target set")
        if any(r < 0 for r in self.rewards.values()):
            raise ValueError("rewards must be nonnegative")

    @classmethod
    def for_model(cls, m) -> "Objective":
        """Total reward if the model declares rewards, else reachability."""
        targets = frozenset(m.targets or ())
        sense = m.sense or "max"
        if m.rewards:
            return cls(TOTAL, targets, {k: float(v) for k, v in m.rewards.items()}, sense)
        return cls(REACH, targets, {}, sense)


@dataclass
class SolveResult:
    values: np.ndarray
    policy: np.ndarray  # action index per state, -1 where nothing is chosen
    iterations: int
    residual: float
    converged: bool
    nature_mode: str
    capped: np.ndarray | None = None

    def to_dict(self, states=None, actions=None, initial=0, truncate=None) -> dict:
        vals = self.values.tolist()
        pol = [int(a) for a in self.policy]
        if actions is not None:
            pol = [actions[a] if a >= 0 else None for a in pol]
        if truncate is not None:
            vals, pol = vals[:truncate], pol[:truncate]
        return {
            "values": vals,
            "policy": pol,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "nature_mode": self.nature_mode,
            "value_initial": float(self.values[initial]),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw), indent=2)


def inner_interval(lo, hi, values, mode="min"):
    """Extremal expectation over {mu : lo <= mu <= hi, sum mu = 1}.

    Starts from the lower bounds and pours the free mass into successors in
    ascending (min) or descending (max) order of value.
    """
    lo = [float(x) for x in lo]
    hi = [float(x) for x in hi]
    values = [float(x) for x in values]
    if sum(lo) > 1 + SUM_TOL or sum(hi) < 1 - SUM_TOL:
        raise EmptyRegion("local interval set is empty")
    order = sorted(range(len(lo)), key=values.__getitem__, reverse=(mode == "max"))
    mu = list(lo)
    rem = 1.0 - sum(lo)
    for j in order:
        if rem <= 0:
            break
        add = min(hi[j] - lo[j], rem)
        mu[j] += add
        rem -= add
    return sum(p * v for p, v in zip(mu, values)), np.array(mu)


def inner_region(u, i: int, values, mode="min", backend="lp", basis_cache=None, stacked=None):
    """Extremal expectation for pair i of a region model."""
    vals = np.asarray(values, dtype=float)
    if backend == "vertex":
        if u.vertex_probs is None:
            raise ValueError("no cached vertices for this region; use the lp backend")
        q = u.vertex_probs[i] @ vals
        return float(q.min() if mode == "min" else q.max())
    R, c = u.rows[i]
    obj = vals @ R
    basis = None if basis_cache is None else basis_cache.get(i)
    res = lp_solve(u.region, obj, mode, basis=basis, stacked=stacked)
    if not res.ok:
        raise EmptyRegion("uncertainty region is empty")
    if basis_cache is not None:
        basis_cache[i] = res.basis
    return float(res.value + vals @ c)


def sweep_order(n, enabled, succ, sa_index, initial):
    """Reverse breadth-first discovery order from the initial state."""
    seen = [False] * n
    order = []
    q = deque([initial])
    seen[initial] = True
    while q:
        s = q.popleft()
        order.append(s)
        for a in enabled[s]:
            for t in succ[sa_index[(s, a)]]:
                if not seen[t]:
                    seen[t] = True
                    q.append(t)
    order.reverse()
    order.extend(s for s in range(n) if not seen[s])
    return order


def _as_sure(u, obj, terminal, adversarial, policy=None):
    """States from which the terminal set is reached with probability one.

    Nature picks supports: adversarially it may drop any successor whose
    lower bound is zero, cooperatively it may drop any it can.
    """
    n = u.n_states
    sa_index = u.sa_index
    Y = np.ones(n, dtype=bool)
    while True:
        X = terminal.copy()
        changed = True
        while changed:
            changed = False
            for s in range(n):
                if X[s] or not Y[s]:
                    continue
                acts = u.enabled[s] if policy is None else [policy[s]]
                for a in acts:
                    i = sa_index[(s, a)]
                    lo, hi = u.hull(i)
                    succ = u.succ[i]
                    possible = hi > 0
                    forced = lo > 0
                    if adversarial:
                        ok = bool(np.all(Y[succ[possible]])) and (
                            bool(np.any(X[succ[forced]]))
                            or float(hi[possible & ~X[succ]].sum()) < 1 - 1e-12
                        )
                    else:
                        ok = (
                            bool(np.all(Y[succ[forced]]))
                            and float(hi[possible & Y[succ]].sum()) >= 1 - 1e-12
                            and bool(np.any(X[succ[possible]] & Y[succ[possible]]))
                        )
                    if ok:
                        X[s] = True
                        changed = True
                        break
        if np.array_equal(X, Y):
            return X
        Y = X


def solve(
    u,
    obj: Objective,
    mode: str = "robust",
    vi_tol: float = 1e-6,
    max_iter: int = 100_000,
    backend: str = "auto",
    policy=None,
    v_max: float = V_MAX,
    deadline=NO_DEADLINE,
) -> SolveResult:
    """Gauss-Seidel value iteration with nature minimising (robust) or
    maximising (optimistic) the agent's objective.

    ``policy`` fixes the agent's action per state (policy evaluation).
    """
    if mode not in ("robust", "optimistic"):
        raise ValueError("mode must be 'robust' or 'optimistic'")
    n = u.n_states
    sa_index = u.sa_index
    agent_max = obj.sense == "max"
    nature = ("min" if agent_max else "max") if mode == "robust" else ("max" if agent_max else "min")
    if u.kind == "region":
        if backend == "auto":
            backend = "vertex" if u.vertex_probs is not None else "lp"
        if backend == "vertex" and u.vertex_probs is None:
            raise ValueError("vertex backend unavailable for this region; use the lp backend")
    sinks = np.array([len(u.enabled[s]) == 0 for s in range(n)])
    targets = np.zeros(n, dtype=bool)
    targets[list(obj.targets)] = True
    terminal = targets | sinks
    V = np.zeros(n)
    if obj.kind == REACH:
        V[targets] = 1.0
    fixed = terminal.copy()
    capped = np.zeros(n, dtype=bool)
    if obj.kind == TOTAL and not agent_max:
        win = _as_sure(u, obj, terminal, adversarial=(mode == "robust"), policy=policy)
        capped = ~win
        if np.any(capped[u.initial]):
            warnings.warn("target not reached almost surely from the initial state; values capped", RuntimeWarning)
        V[capped] = v_max
        fixed |= capped
    rew = np.zeros(len(u.sa_pairs))
    for i, sa in enumerate(u.sa_pairs):
        rew[i] = obj.rewards.get(sa, 0.0) if obj.kind == TOTAL else 0.0
    order = [s for s in sweep_order(n, u.enabled, u.succ, sa_index, u.initial) if not fixed[s]]
    acts = {s: (list(u.enabled[s]) if policy is None else [int(policy[s])]) for s in order}
    basis_cache: dict = {}
    stacked = _stack(u.region) if (u.kind == "region" and backend == "lp") else None
    lo_l = hi_l = None
    if u.kind == "interval":
        lo_l = [x.tolist() for x in u.lo]
        hi_l = [x.tolist() for x in u.hi]
        for i in range(len(lo_l)):
            if sum(lo_l[i]) > 1 + SUM_TOL or sum(hi_l[i]) < 1 - SUM_TOL:
                raise EmptyRegion(f"local set of pair {u.sa_pairs[i]} is empty")

    def q_value(i):
        succ = u.succ[i]
        vals = V[succ]
        if lo_l is not None:
            return rew[i] + inner_interval(lo_l[i], hi_l[i], vals, nature)[0]
        return rew[i] + inner_region(u, i, vals, nature, backend, basis_cache, stacked)

    clip = obj.kind == TOTAL
    residual = np.inf
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        deadline.check()
        residual = 0.0
        for s in order:
            best = None
            for a in acts[s]:
                q = q_value(sa_index[(s, a)])
                if best is None or (q > best if agent_max else q < best):
                    best = q
            if clip:
                best = min(best, v_max)
            d = abs(best - V[s])
            if d > residual:
                residual = d
            V[s] = best
        if residual < vi_tol:
            converged = True
            break
    if not order:
        it, residual, converged = 0, 0.0, True
    if policy is not None:
        pol = np.array([int(policy[s]) if not terminal[s] else -1 for s in range(n)])
    else:
        pol = _extract_policy(u, obj, V, terminal, capped, q_value, agent_max, nature, backend, sa_index)
    return SolveResult(V, pol, it, float(residual), converged, mode, capped)


def _extract_policy(u, obj, V, terminal, capped, q_value, agent_max, nature, backend, sa_index, tol=1e-9):
    n = u.n_states
    pol = np.full(n, -1)
    qs = {}
    for s in range(n):
        if terminal[s]:
            continue
        q = [q_value(sa_index[(s, a)]) for a in u.enabled[s]]
        qs[s] = q
        best = max(q) if agent_max else min(q)
        pol[s] = u.enabled[s][next(j for j, x in enumerate(q) if abs(x - best) <= tol)]
    if obj.kind != REACH or not agent_max or u.kind != "interval":
        return pol
    # among optimal actions prefer ones that make progress towards resolved states
    resolved = np.zeros(n, dtype=bool)
    resolved[list(obj.targets)] = True
    pending = [s for s in qs if V[s] > tol]
    while pending:
        progress = []
        for s in pending:
            best = max(qs[s])
            for j, a in enumerate(u.enabled[s]):
                if abs(qs[s][j] - best) > tol:
                    continue
                i = sa_index[(s, a)]
                _, mu = inner_interval(u.lo[i], u.hi[i], V[u.succ[i]], nature)
                if np.any((mu > 0) & resolved[u.succ[i]]):
                    pol[s] = a
                    progress.append(s)
                    break
        if not progress:
            break
        resolved[progress] = True
        pending = [s for s in pending if not resolved[s]]
    return pol


def evaluate_policy(mdp: MDP, policy, obj: Objective) -> np.ndarray:
    """Exact value of a memoryless policy via a sparse linear solve.

    Reachability states that cannot reach the target get 0; total reward
    is infinite where the terminal states are not reached almost surely.
    """
    n = mdp.n_states
    targets = np.zeros(n, dtype=bool)
    targets[list(obj.targets)] = True
    sinks = np.array([len(mdp.enabled[s]) == 0 for s in range(n)])
    terminal = targets | sinks if obj.kind == TOTAL else targets.copy()
    rows, cols, data = [], [], []
    r = np.zeros(n)
    for s in range(n):
        if terminal[s] or sinks[s]:
            continue
        a = int(policy[s])
        if a not in mdp.enabled[s]:
            raise ValueError(f"policy picks a disabled action in state {mdp.states[s]}")
        for t, p in mdp.trans[(s, a)]:
            if p > 0:
                rows.append(s)
                cols.append(t)
                data.append(p)
        if obj.kind == TOTAL:
            r[s] = obj.rewards.get((s, a), 0.0)
    P = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    # states with a path to the terminal set
    can = terminal.copy()
    PT = P.T.tocsr()
    stack = list(np.flatnonzero(terminal))
    while stack:
        t = stack.pop()
        for s in PT.indices[PT.indptr[t] : PT.indptr[t + 1]]:
            if not can[s]:
                can[s] = True
                stack.append(s)
    V = np.zeros(n)
    if obj.kind == REACH:
        V[targets] = 1.0
        live = np.flatnonzero(can & ~terminal)
        if len(live):
            A = sp.identity(len(live), format="csr") - P[live][:, live]
            b = np.asarray(P[live][:, np.flatnonzero(targets)].sum(axis=1)).ravel()
            V[live] = spla.spsolve(A.tocsc(), b) if len(live) > 1 else b / A.toarray()[0, 0]
        return V
    # total reward: almost-sure states are those that cannot reach a state without a path
    bad = ~can
    sure = ~bad.copy()
    stack = list(np.flatnonzero(bad))
    while stack:
        t = stack.pop()
        for s in PT.indices[PT.indptr[t] : PT.indptr[t + 1]]:
            if sure[s]:
                sure[s] = False
                stack.append(s)
    V[~sure] = np.inf
    live = np.flatnonzero(sure & ~terminal)
    if len(live):
        A = sp.identity(len(live), format="csr") - P[live][:, live]
        sol = spla.spsolve(A.tocsc(), r[live]) if len(live) > 1 else r[live] / A.toarray()[0, 0]
        V[live] = sol
    return V


def optimal_policy(mdp: MDP, obj: Objective, vi_tol: float = 1e-9, max_iter: int = 1_000_000):
    """Optimal policy of a concrete MDP and its exact value."""
    from .relax import point_model

    res = solve(point_model(mdp), obj, "robust", vi_tol=vi_tol, max_iter=max_iter)
    return res.policy, evaluate_policy(mdp, res.policy, obj)


def robust_bounds(u, obj: Objective, policy=None, backend="auto", vi_tol=1e-6, deadline=NO_DEADLINE):
    """Robust and optimistic values at the initial state, as (lower, upper)."""
    r = solve(u, obj, "robust", vi_tol=vi_tol, backend=backend, policy=policy, deadline=deadline)
    o = solve(u, obj, "optimistic", vi_tol=vi_tol, backend=backend, policy=policy, deadline=deadline)
    a, b = float(r.values[u.initial]), float(o.values[u.initial])
    return (min(a, b), max(a, b)), r, o
