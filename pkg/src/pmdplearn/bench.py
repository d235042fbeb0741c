"""Generators for small instances of the benchmark families.

Constants the families need but that are not pinned down elsewhere
(capital caps, current zones, costs, response tables) are fixed here and
reported by ``family_constants``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction as Q

import numpy as np

from .model import PMDP, ModelError, ParameterSpace, instantiate
from .polynomial import Polynomial
from .rvi import Objective

FAMILIES = ("chain", "betting_game", "parallel_betting", "glider", "engagement")

BET_SIZES = (0, 1, 2, 5, 10)
BIG_BET = 5  # bets of this size and above use the capital-dependent win rate
START_CAPITAL = 10
CAPITAL_CAP = 100
PARALLEL_CAP = 20
ZONE_CURRENTS = (Q(1, 4), Q(1, 2), Q(3, 4))
GLIDER_FAIL_MAX = Q(1, 2)
# base win rate range: keeps the hidden rate near a fair coin so betting is worthwhile
WIN_RANGE = (Q(1, 2), Q(3, 4))
ENGAGEMENT_COSTS = {"light": Q(0), "medium": Q(1, 2), "aggressive": Q(1)}
CHURN_PENALTY = Q(20)
TRUE_MARGIN = 0.05


def family_constants() -> dict:
    return {
        "bet_sizes": list(BET_SIZES),
        "big_bet_threshold": BIG_BET,
        "start_capital": START_CAPITAL,
        "capital_cap": CAPITAL_CAP,
        "parallel_capital_cap": PARALLEL_CAP,
        "zone_currents": [str(c) for c in ZONE_CURRENTS],
        "glider_failure_max": str(GLIDER_FAIL_MAX),
        "base_win_range": [str(x) for x in WIN_RANGE],
        "engagement_action_costs": {k: str(v) for k, v in ENGAGEMENT_COSTS.items()},
        "churn_penalty": str(CHURN_PENALTY),
        "true_param_margin": TRUE_MARGIN,
    }


@dataclass
class BenchmarkSpec:
    family: str
    size: tuple = ()
    seed: int = 0
    true_params: tuple | None = None


@dataclass
class Benchmark:
    model: PMDP
    truth: object
    objective: Objective
    true_params: np.ndarray
    spec: BenchmarkSpec
    info: dict = field(default_factory=dict)

    def truth_json(self) -> str:
        return json.dumps(
            {
                "family": self.spec.family,
                "size": list(self.spec.size),
                "seed": self.spec.seed,
                "params": dict(zip(self.model.params.names, map(float, self.true_params))),
            },
            indent=2,
        )


class _Builder:
    """Collects named states and polynomial transitions, merging duplicates."""

    def __init__(self, params: ParameterSpace):
        self.params = params
        self.state_ids: dict = {}
        self.action_ids: dict = {}
        self.trans: dict = {}
        self.rewards: dict = {}
        self.enabled: dict = {}

    def state(self, name) -> int:
        if name not in self.state_ids:
            self.state_ids[name] = len(self.state_ids)
            self.enabled[self.state_ids[name]] = []
        return self.state_ids[name]

    def add(self, s, action, outcomes, reward=0):
        a = self.action_ids.setdefault(action, len(self.action_ids))
        merged: dict = {}
        for t, f in outcomes:
            t = self.state(t) if not isinstance(t, int) else t
            merged[t] = merged.get(t, Polynomial()) + f
        dist = tuple((t, f) for t, f in merged.items() if f != Polynomial())
        self.trans[(s, a)] = dist
        self.enabled[s].append(a)
        if reward:
            self.rewards[(s, a)] = Q(reward)

    def build(self, initial, targets, sense) -> PMDP:
        names = [None] * len(self.state_ids)
        for k, i in self.state_ids.items():
            names[i] = k
        anames = [None] * len(self.action_ids)
        for k, i in self.action_ids.items():
            anames[i] = k
        m = PMDP(
            states=tuple(names),
            actions=tuple(anames),
            enabled=tuple(tuple(sorted(self.enabled[s])) for s in range(len(names))),
            initial=initial,
            params=self.params,
            trans=self.trans,
            rewards=self.rewards,
            targets=frozenset(targets),
            sense=sense,
        )
        m.validate()
        return m


def _theta(i):
    return Polynomial.var(i)


def chain(k: int) -> PMDP:
    """k states in a row; "go" advances w.p. theta, "b" half as fast but may stay."""
    if not 2 <= k <= 200:
        raise ValueError("chain length must lie in [2, 200]")
    th = _theta(0)
    b = _Builder(ParameterSpace(("theta",), ((Q(0), Q(1)),)))
    for i in range(k):
        b.state(f"s{i}")
    fail = b.state("fail")
    for i in range(k - 1):
        s, nxt = b.state(f"s{i}"), f"s{i + 1}"
        b.add(s, "go", [(nxt, th), (fail, 1 - th)])
        b.add(s, "b", [(nxt, th * Q(1, 2)), (s, Polynomial.const(Q(1, 2))), (fail, Q(1, 2) - th * Q(1, 2))])
    return b.build(0, [b.state(f"s{k - 1}")], "max")


def _win_prob(bet, capital, cap, base, slope):
    # big bets: base rate shifted by up to slope/4, better when rich, worse when poor
    if bet >= BIG_BET:
        return base + slope * Q(2 * capital - cap, 4 * cap)
    return base


def betting_game(n: int) -> PMDP:
    """Maximise final capital after n rounds of bets in {0,1,2,5,10}.

    Small bets win with theta1; big bets win with
    theta1 + theta2*(2m - M)/(4M) at capital m (cap M).  After the last round the capital is cashed out.
    """
    if not 1 <= n <= 50:
        raise ValueError("betting horizon must lie in [1, 50]")
    M = CAPITAL_CAP
    t1, t2 = _theta(0), _theta(1)
    b = _Builder(ParameterSpace(("theta1", "theta2"), (WIN_RANGE, (Q(0), Q(1)))))
    start = b.state((0, START_CAPITAL))
    done = b.state("done")
    q = deque([(0, START_CAPITAL)])
    seen = {(0, START_CAPITAL)}
    while q:
        r, m = q.popleft()
        s = b.state((r, m))
        if r == n or m == 0:
            b.add(s, "cash", [(done, Polynomial.const(1))], reward=m)
            continue
        for bet in BET_SIZES:
            if bet > m:
                continue
            if bet == 0:
                outs = [((r + 1, m), Polynomial.const(1))]
            else:
                p = _win_prob(bet, m, M, t1, t2)
                outs = [((r + 1, min(m + bet, M)), p), ((r + 1, m - bet), 1 - p)]
            for nxt, _ in outs:
                if nxt not in seen:
                    seen.add(nxt)
                    q.append(nxt)
            b.add(s, f"bet{bet}", outs)
    # state names must be identifiers in the text format
    m = b.build(start, [done], "max")
    return _rename(m, lambda x: x if isinstance(x, str) else f"r{x[0]}_m{x[1]}")


def parallel_betting(n: int) -> PMDP:
    """Two betting games played with one shared bet per round.

    Game 1 wins with theta1 (big bets: theta1 + theta3*(2*m1 - M)/(4M));
    game 2 wins with theta2 (big bets: theta2*(1/2 + theta3*m2/(2M))),
    so joint outcomes carry products of all three parameters.
    """
    if not 1 <= n <= 10:
        raise ValueError("parallel betting horizon must lie in [1, 10]")
    M = PARALLEL_CAP
    t1, t2, t3 = _theta(0), _theta(1), _theta(2)
    b = _Builder(ParameterSpace(("theta1", "theta2", "theta3"), (WIN_RANGE, WIN_RANGE, (Q(0), Q(1)))))
    init = (0, START_CAPITAL, START_CAPITAL)
    start = b.state(init)
    done = b.state("done")
    q = deque([init])
    seen = {init}
    while q:
        r, m1, m2 = q.popleft()
        s = b.state((r, m1, m2))
        if r == n or min(m1, m2) == 0:
            b.add(s, "cash", [(done, Polynomial.const(1))], reward=m1 + m2)
            continue
        for bet in BET_SIZES:
            if bet > min(m1, m2):
                continue
            if bet == 0:
                outs = [((r + 1, m1, m2), Polynomial.const(1))]
            else:
                p1 = _win_prob(bet, m1, M, t1, t3)
                p2 = t2 if bet < BIG_BET else t2 * (Q(1, 2) + t3 * Q(m2, 2 * M))
                outs = []
                for w1, f1 in ((1, p1), (-1, 1 - p1)):
                    for w2, f2 in ((1, p2), (-1, 1 - p2)):
                        nxt = (r + 1, min(m1 + w1 * bet, M), min(m2 + w2 * bet, M))
                        outs.append((nxt, f1 * f2))
            for nxt, _ in outs:
                if nxt not in seen:
                    seen.add(nxt)
                    q.append(nxt)
            b.add(s, f"bet{bet}", outs)
    m = b.build(start, [done], "max")
    return _rename(m, lambda x: x if isinstance(x, str) else f"r{x[0]}_a{x[1]}_b{x[2]}")


def _zone(x, y):
    return ZONE_CURRENTS[(2 * x + y) % 3]


def glider(X: int, Y: int) -> PMDP:
    """Grid navigation from (0,0) to (X-1,Y-1) under uncertain currents.

    A commanded move fails along its axis with probability theta_fh
    (horizontal) or theta_fv (vertical), and independently drifts one cell
    along the other axis with probability c*theta_v or c*theta_h, where c
    is the cell's current strength.  Each step costs 1.
    """
    if not (2 <= X <= 15 and 2 <= Y <= 15):
        raise ValueError("glider grid must be between 2x2 and 15x15")
    names = ("theta_h", "theta_v", "theta_fh", "theta_fv")
    bounds = ((Q(0), Q(1)), (Q(0), Q(1)), (Q(0), GLIDER_FAIL_MAX), (Q(0), GLIDER_FAIL_MAX))
    th, tv, fh, fv = (_theta(i) for i in range(4))
    b = _Builder(ParameterSpace(names, bounds))
    for x in range(X):
        for y in range(Y):
            b.state(f"x{x}_y{y}")
    goal = b.state(f"x{X - 1}_y{Y - 1}")

    def cell(x, y):
        return f"x{min(max(x, 0), X - 1)}_y{min(max(y, 0), Y - 1)}"

    for x in range(X):
        for y in range(Y):
            s = b.state(f"x{x}_y{y}")
            if s == goal:
                continue
            c = _zone(x, y)
            hdrift = 1 if x < X // 2 else -1
            vdrift = 1 if y < Y // 2 else -1
            for act, (dx, dy) in (("east", (1, 0)), ("west", (-1, 0)), ("north", (0, 1)), ("south", (0, -1))):
                if dx:
                    fail, drift = fh, tv * c
                    ddx, ddy = 0, vdrift
                else:
                    fail, drift = fv, th * c
                    ddx, ddy = hdrift, 0
                outs = [
                    (cell(x + dx, y + dy), (1 - fail) * (1 - drift)),
                    (cell(x + dx + ddx, y + dy + ddy), (1 - fail) * drift),
                    (cell(x, y), fail * (1 - drift)),
                    (cell(x + ddx, y + ddy), fail * drift),
                ]
                b.add(s, act, outs, reward=1)
    return b.build(0, [goal], "min")


# response tables: per customer type, (up, stay, down) chances by zone and action
_RESPONSES = {
    "light": [(Q(3, 10), Q(6, 10), Q(1, 10)), (Q(1, 10), Q(8, 10), Q(1, 10)), (Q(2, 10), Q(5, 10), Q(3, 10)),
              (Q(4, 10), Q(4, 10), Q(2, 10)), (Q(1, 10), Q(6, 10), Q(3, 10))],
    "medium": [(Q(4, 10), Q(4, 10), Q(2, 10)), (Q(2, 10), Q(7, 10), Q(1, 10)), (Q(3, 10), Q(3, 10), Q(4, 10)),
               (Q(5, 10), Q(3, 10), Q(2, 10)), (Q(2, 10), Q(5, 10), Q(3, 10))],
    "aggressive": [(Q(6, 10), Q(1, 10), Q(3, 10)), (Q(3, 10), Q(5, 10), Q(2, 10)), (Q(4, 10), Q(1, 10), Q(5, 10)),
                   (Q(7, 10), Q(1, 10), Q(2, 10)), (Q(3, 10), Q(3, 10), Q(4, 10))],
}
_ZONE_SHIFT = (Q(-1, 10), Q(0), Q(1, 10))  # cold, warm, hot: moves mass between down and up


def _response(action, zone, k, cooldown):
    up, stay, down = _RESPONSES[action][k]
    shift = _ZONE_SHIFT[zone]
    if action == "aggressive" and cooldown:
        shift -= Q(1, 10)
    # move |shift| from down to up (or back) without leaving [0,1]
    shift = min(shift, down) if shift > 0 else max(shift, -up)
    return up + shift, stay, down - shift


def engagement(L: int) -> PMDP:
    """Customer ladder 0..L with churn at 0 and purchase at L.

    Five response types mix with weights theta1..theta4 and
    theta5 = 1 - (theta1 + ... + theta4); the last one is substituted.
    Aggressive actions set a one-step cooldown that weakens the next
    aggressive action.  Costs: 1 per step plus action cost, and a churn
    penalty paid on exit from level 0.
    """
    if not 3 <= L <= 100:
        raise ValueError("engagement ladder length must lie in [3, 100]")
    names = ("theta1", "theta2", "theta3", "theta4")
    ps = ParameterSpace(names, ((Q(0), Q(1)),) * 4, ((tuple([Q(1)] * 4), Q(1)),))
    thetas = [_theta(i) for i in range(4)]
    weights = thetas + [1 - (thetas[0] + thetas[1] + thetas[2] + thetas[3])]
    b = _Builder(ps)
    start = b.state(f"l{L // 2}_c0")
    done = b.state("done")
    churn = b.state("churned")
    buy = b.state("bought")
    b.add(churn, "exit", [(done, Polynomial.const(1))], reward=CHURN_PENALTY)
    b.add(buy, "exit", [(done, Polynomial.const(1))])

    def name(level, cd):
        if level <= 0:
            return churn
        if level >= L:
            return buy
        return f"l{level}_c{cd}"

    for level in range(1, L):
        zone = 0 if 3 * level < L else (1 if 3 * level < 2 * L else 2)
        for cd in (0, 1):
            s = b.state(f"l{level}_c{cd}")
            for act in ("light", "medium", "aggressive"):
                up = stay = down = Polynomial()
                for k, w in enumerate(weights):
                    pu, pst, pd = _response(act, zone, k, cd)
                    up, stay, down = up + w * pu, stay + w * pst, down + w * pd
                nxt_cd = 1 if act == "aggressive" else 0
                outs = [(name(level + 1, nxt_cd), up), (name(level, nxt_cd), stay), (name(level - 1, nxt_cd), down)]
                b.add(s, act, outs, reward=1 + ENGAGEMENT_COSTS[act])
    return b.build(start, [done], "min")


def _rename(m: PMDP, fn) -> PMDP:
    return PMDP(
        states=tuple(fn(s) for s in m.states),
        actions=m.actions,
        enabled=m.enabled,
        initial=m.initial,
        params=m.params,
        trans=m.trans,
        rewards=m.rewards,
        targets=m.targets,
        sense=m.sense,
    )


def draw_true_params(params: ParameterSpace, seed: int, margin: float = TRUE_MARGIN) -> np.ndarray:
    """Uniform point of D shrunk by the margin (rejection for standing rows)."""
    rng = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0x7E57]))
    lo, hi = params.lower + margin, params.upper - margin
    for _ in range(100_000):
        v = lo + (hi - lo) * rng.random(len(lo))
        if all(float(np.dot([float(c) for c in co], v)) <= float(r) - margin for co, r in params.constraints):
            return v
    raise ModelError("could not draw interior parameters")


def make_model(family: str, size) -> PMDP:
    size = tuple(int(x) for x in size)
    try:
        if family == "chain":
            return chain(*size)
        if family == "betting_game":
            return betting_game(*size)
        if family == "parallel_betting":
            return parallel_betting(*size)
        if family == "glider":
            return glider(*size)
        if family == "engagement":
            return engagement(*size)
    except TypeError:
        raise ValueError(f"wrong number of size arguments for {family}") from None
    raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")


def generate(spec: BenchmarkSpec) -> Benchmark:
    m = make_model(spec.family, spec.size)
    if spec.true_params is not None:
        u = np.asarray(spec.true_params, dtype=float)
    else:
        u = draw_true_params(m.params, spec.seed)
    truth = instantiate(m, u)
    info = {"states": m.n_states, "transitions": m.n_transitions(), "params": len(m.params)}
    return Benchmark(m, truth, Objective.for_model(m), u, spec, info)
