"""Simulation of the hidden system, count tables and the online learning loop."""

from __future__ import annotations

import io
import math
import time
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .model import MDP, PMDP, ExpressionIndex, index_expressions
from .stats import ConfidenceConfig, learn_intervals

EPISODIC, GENERATIVE = "episodic", "generative"
MAX_EPISODE_LEN = 200


def default_episode_len(n_states: int) -> int:
    return max(1, min(MAX_EPISODE_LEN, int(4 * math.sqrt(n_states))))


def episode_rng(seed: int, episode: int) -> np.random.Generator:
    """Counter-based stream for one episode; draws within it follow the step counter."""
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), episode]))


@dataclass
class CountTable:
    sa: np.ndarray  # visits per state-action pair (index into sa_pairs)
    sas: list  # per pair, successor counts aligned with the transition list
    K: np.ndarray | None = None  # pooled successes per expression
    N: np.ndarray | None = None  # pooled trials per expression
    known: np.ndarray | None = None  # constant expressions

    @classmethod
    def zeros(cls, m) -> "CountTable":
        pairs = m.sa_pairs
        return cls(np.zeros(len(pairs), dtype=np.int64), [np.zeros(len(m.trans[sa]), dtype=np.int64) for sa in pairs])

    def copy(self) -> "CountTable":
        return CountTable(
            self.sa.copy(),
            [x.copy() for x in self.sas],
            None if self.K is None else self.K.copy(),
            None if self.N is None else self.N.copy(),
            None if self.known is None else self.known.copy(),
        )

    def merge(self, other: "CountTable") -> "CountTable":
        out = CountTable(self.sa + other.sa, [a + b for a, b in zip(self.sas, other.sas)])
        return out

    @property
    def total(self) -> int:
        return int(self.sa.sum())

    def check(self) -> None:
        for i, row in enumerate(self.sas):
            if int(row.sum()) != int(self.sa[i]):
                raise AssertionError(f"successor counts of pair {i} do not add up")


@dataclass
class SamplingConfig:
    mode: str = EPISODIC
    budget: int = 1000  # trajectories (episodic) or samples per pair (generative)
    episode_len: int | None = None
    seed: int = 0
    policy: object = "uniform"  # "uniform" or an action index per state

    def __post_init__(self):
        if self.mode not in (EPISODIC, GENERATIVE):
            raise ValueError("mode must be 'episodic' or 'generative'")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")


class Simulator:
    """Episode runner over a concrete MDP with cached cumulative tables."""

    def __init__(self, truth: MDP, episode_len: int | None = None):
        self.truth = truth
        self.L = episode_len or default_episode_len(truth.n_states)
        idx = truth.sa_index
        self.enabled = [list(a) for a in truth.enabled]
        self.pair = [[idx[(s, a)] for a in truth.enabled[s]] for s in range(truth.n_states)]
        self.succ = [[t for t, _ in truth.trans[sa]] for sa in truth.sa_pairs]
        self.cum = []
        for sa in truth.sa_pairs:
            c = np.cumsum([p for _, p in truth.trans[sa]])
            c[-1] = 1.0
            self.cum.append(c.tolist())

    def episode(self, counts: CountTable, rng: np.random.Generator, policy=None) -> int:
        s = self.truth.initial
        draws = rng.random(2 * self.L).tolist()
        steps = 0
        for k in range(self.L):
            pairs = self.pair[s]
            if not pairs:
                break  # absorbing: restart
            if policy is None or policy[s] < 0:
                j = int(draws[2 * k] * len(pairs))
            else:
                j = self.enabled[s].index(int(policy[s]))
            i = pairs[j]
            cum = self.cum[i]
            pos = min(bisect_right(cum, draws[2 * k + 1]), len(cum) - 1)
            counts.sa[i] += 1
            counts.sas[i][pos] += 1
            s = self.succ[i][pos]
            steps += 1
        return steps


def collect(truth: MDP, cfg: SamplingConfig, counts: CountTable | None = None) -> CountTable:
    """Sample transitions from the truth; deterministic for a fixed seed."""
    counts = CountTable.zeros(truth) if counts is None else counts
    if cfg.mode == GENERATIVE:
        for i, sa in enumerate(truth.sa_pairs):
            rng = episode_rng(cfg.seed, i)
            p = np.array([q for _, q in truth.trans[sa]])
            draw = rng.multinomial(cfg.budget, p / p.sum())
            counts.sa[i] += cfg.budget
            counts.sas[i] += draw
        return counts
    sim = Simulator(truth, cfg.episode_len)
    policy = None if isinstance(cfg.policy, str) and cfg.policy == "uniform" else np.asarray(cfg.policy)
    for e in range(cfg.budget):
        sim.episode(counts, episode_rng(cfg.seed, e), policy)
    return counts


def pool(m: PMDP, idx: ExpressionIndex, raw: CountTable) -> CountTable:
    """Pooled (K_f, N_f) per expression over all its occurrences."""
    K = np.zeros(len(idx.exprs), dtype=np.int64)
    N = np.zeros(len(idx.exprs), dtype=np.int64)
    for i, sa in enumerate(m.sa_pairs):
        ids = idx.of[sa]
        n = raw.sa[i]
        for j, e in enumerate(ids):
            N[e] += n
            K[e] += raw.sas[i][j]
    out = raw.copy()
    out.K, out.N = K, N
    out.known = np.array([idx.is_known(i) for i in range(len(idx.exprs))], dtype=bool)
    return out


@dataclass
class TraceRow:
    trajectories: int
    robust_bound: float
    true_value: float
    relaxation: str
    rebuilds: int
    wallclock_s: float
    fallback: bool = False


@dataclass
class LearningTrace:
    rows: list = field(default_factory=list)

    COLUMNS = ("trajectories", "robust_bound", "true_value", "relaxation", "rebuilds", "wallclock_s", "fallback")

    def to_csv(self, timing: bool = False) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.COLUMNS) + "\n")
        for r in self.rows:
            buf.write(
                f"{r.trajectories},{_num(r.robust_bound)},{_num(r.true_value)},{r.relaxation},{r.rebuilds},"
                f"{f'{r.wallclock_s:.3f}' if timing else ''},{int(r.fallback)}\n"
            )
        return buf.getvalue()


def _num(x: float) -> str:
    return f"{x:.10g}"


def rebuild_due(sa: np.ndarray, last: np.ndarray) -> bool:
    """Some pair's count has (at least) doubled since the last rebuild."""
    return bool(np.any((sa > 0) & (sa >= np.maximum(1, 2 * last))))


def ofu_learn(
    m: PMDP,
    truth: MDP,
    budget: int,
    delta: float = 0.001,
    relaxation: str = "P_Lambda",
    seed: int = 0,
    episode_len: int | None = None,
    backend: str = "auto",
    deadline=None,
    vi_tol: float = 1e-6,
) -> LearningTrace:
    """Optimism-driven online learning with model rebuilds on count doubling.

    Exploration follows the optimistic policy of the current model (uniform
    before any rebuild); after each rebuild the robust policy's certified
    bound and its true value are recorded.  A final entry uses all data.
    """
    from .relax import build_model, canonical_kind
    from .rvi import Objective, evaluate_policy, solve
    from .timing import NO_DEADLINE

    deadline = deadline or NO_DEADLINE
    kind = canonical_kind(relaxation)
    idx = index_expressions(m)
    obj = Objective.for_model(m)
    cfg = ConfidenceConfig(delta=delta)
    counts = CountTable.zeros(m)
    last = counts.sa.copy()
    sim = Simulator(truth, episode_len)
    trace = LearningTrace()
    t0 = time.perf_counter()
    rebuilds = 0
    explore = None

    def checkpoint(n_traj):
        pooled = pool(m, idx, counts)
        ivals = learn_intervals(idx, pooled, cfg, m.params.names)
        u, fell_back = build_model(m, idx, ivals, kind, backend=backend, deadline=deadline)
        robust = solve(u, obj, "robust", vi_tol=vi_tol, backend=backend, deadline=deadline)
        cert = solve(u, obj, "robust", vi_tol=vi_tol, backend=backend, policy=robust.policy, deadline=deadline)
        true_v = evaluate_policy(truth, robust.policy, obj)[m.initial]
        opt = solve(u, obj, "optimistic", vi_tol=vi_tol, backend=backend, deadline=deadline)
        trace.rows.append(
            TraceRow(n_traj, float(cert.values[m.initial]), float(true_v), kind, rebuilds,
                     time.perf_counter() - t0, fell_back)
        )
        return opt.policy

    explore = checkpoint(0) if budget == 0 else None
    if budget == 0:
        return trace
    for ep in range(budget):
        deadline.check()
        sim.episode(counts, episode_rng(seed, ep), explore)
        if rebuild_due(counts.sa, last) and ep < budget - 1:
            rebuilds += 1
            last = counts.sa.copy()
            explore = checkpoint(ep + 1)
    if rebuild_due(counts.sa, last):
        rebuilds += 1
    checkpoint(budget)
    return trace
