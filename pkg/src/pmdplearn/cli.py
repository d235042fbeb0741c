"""Command-line front end: generate, sample, learn, inspect, solve, offline, online."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import FAMILIES, BenchmarkSpec, family_constants, generate
from .model import PMDP, ModelError, index_expressions, instantiate, render
from .parser import load_model
from .relax import KINDS, build_model, canonical_kind
from .rvi import Objective, optimal_policy, solve
from .sampling import (
    EPISODIC,
    GENERATIVE,
    CountTable,
    SamplingConfig,
    collect,
    default_episode_len,
    ofu_learn,
    pool,
)
from .stats import ConfidenceConfig, learn_intervals
from .timing import Deadline, PhaseTimeout

OFFLINE_COLUMNS = (
    "benchmark", "size", "seed", "relaxation", "v_lower", "v_upper", "v_star", "gap",
    "fallback", "status", "build_s", "solve_s",
)


# ---------------------------------------------------------------- file helpers


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def counts_to_json(m: PMDP, counts: CountTable) -> str:
    out = {}
    for i, (s, a) in enumerate(m.sa_pairs):
        if counts.sa[i] == 0:
            continue
        out[f"{m.states[s]}/{m.actions[a]}"] = {
            m.states[t]: int(k) for (t, _), k in zip(m.trans[(s, a)], counts.sas[i]) if k
        }
    return json.dumps(out, indent=1, sort_keys=True)


def counts_from_json(m: PMDP, text: str) -> CountTable:
    data = json.loads(text)
    counts = CountTable.zeros(m)
    sidx = {n: i for i, n in enumerate(m.states)}
    aidx = {n: i for i, n in enumerate(m.actions)}
    for key, succ in data.items():
        sname, aname = key.rsplit("/", 1)
        i = m.sa_index[(sidx[sname], aidx[aname])]
        pos = {m.states[t]: j for j, (t, _) in enumerate(m.trans[m.sa_pairs[i]])}
        for tname, k in succ.items():
            counts.sas[i][pos[tname]] += int(k)
        counts.sa[i] = int(counts.sas[i].sum())
    return counts


def load_truth(m: PMDP, path) -> np.ndarray:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    params = data.get("params", data)
    return np.array([float(params[n]) for n in m.params.names])


def manifest(args, extra=None) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    text = json.dumps(cfg, sort_keys=True, default=str)
    out = {
        "version": __version__,
        "config": cfg,
        "config_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "seed": args.seed,
        "constants": family_constants(),
    }
    if extra:
        out.update(extra)
    return out


def _emit(args, payload: dict, text: str | None = None) -> None:
    if args.json or text is None:
        print(json.dumps(payload, indent=2, default=float))
    else:
        print(text)


# ---------------------------------------------------------------- problem setup


def _parse_size(text: str) -> tuple:
    return tuple(int(x) for x in str(text).replace("x", ",").split(",") if x)


def _problem(args):
    """(model, truth MDP or None, true params or None, label)."""
    if getattr(args, "model", None):
        m = load_model(args.model)
        u = load_truth(m, args.truth) if getattr(args, "truth", None) else None
        return m, (instantiate(m, u) if u is not None else None), u, Path(args.model).stem
    if not getattr(args, "family", None):
        raise SystemExit("either --model or --family is required")
    b = generate(BenchmarkSpec(args.family, _parse_size(args.size), args.seed))
    return b.model, b.truth, b.true_params, args.family


def _sampling_cfg(args, m, seed) -> SamplingConfig:
    return SamplingConfig(
        mode=args.mode, budget=args.budget, episode_len=args.episode_len or None, seed=seed, policy="uniform"
    )


def _learned(m, counts, args):
    idx = index_expressions(m)
    pooled = pool(m, idx, counts)
    ivals = learn_intervals(idx, pooled, ConfidenceConfig(delta=args.delta), m.params.names)
    return idx, ivals


# ---------------------------------------------------------------- subcommands


def cmd_generate(args) -> int:
    b = generate(BenchmarkSpec(args.family, _parse_size(args.size), args.seed))
    out = Path(args.out_dir) / (args.out or f"{args.family}.pmdp")
    truth = Path(args.out_dir) / (args.truth or f"{args.family}.truth.json")
    _write(out, render(b.model))
    _write(truth, b.truth_json() + "\n")
    _emit(args, {"model": str(out), "truth": str(truth), **b.info},
          f"wrote {out} ({b.info['states']} states, {b.info['transitions']} transitions, {b.info['params']} params)")
    return 0


def cmd_sample(args) -> int:
    m, truth, _, label = _problem(args)
    if truth is None:
        raise SystemExit("sampling needs the hidden truth (--truth)")
    counts = collect(truth, _sampling_cfg(args, m, args.seed))
    out = Path(args.out_dir) / (args.out or f"{label}.counts.json")
    _write(out, counts_to_json(m, counts) + "\n")
    _emit(args, {"counts": str(out), "transitions_sampled": counts.total}, f"wrote {out} ({counts.total} transitions)")
    return 0


def _counts_for(args, m, truth):
    if getattr(args, "counts", None):
        return counts_from_json(m, Path(args.counts).read_text(encoding="utf-8"))
    if truth is None:
        raise SystemExit("need --counts or a truth to sample from")
    return collect(truth, _sampling_cfg(args, m, args.seed))


def cmd_learn(args) -> int:
    m, truth, _, label = _problem(args)
    counts = _counts_for(args, m, truth)
    _, ivals = _learned(m, counts, args)
    text = ivals.to_json()
    if args.out:
        _write(Path(args.out_dir) / args.out, text + "\n")
    print(text)
    return 0


def cmd_inspect(args) -> int:
    m, truth, _, _ = _problem(args)
    counts = _counts_for(args, m, truth)
    idx, ivals = _learned(m, counts, args)
    u, fell_back = build_model(m, idx, ivals, args.relaxation, backend=args.backend)
    d = u.to_dict()
    d["expression_names"] = [f.to_string(m.params.names) for f in idx.exprs]
    print(json.dumps(d, indent=2))
    return 0


def cmd_solve(args) -> int:
    m, truth, _, _ = _problem(args)
    counts = _counts_for(args, m, truth)
    idx, ivals = _learned(m, counts, args)
    deadline = Deadline(args.timeout_s)
    u, fell_back = build_model(m, idx, ivals, args.relaxation, backend=args.backend, deadline=deadline)
    obj = Objective.for_model(m)
    res = solve(u, obj, args.nature, backend=args.backend, deadline=deadline)
    d = res.to_dict(states=m.states, actions=m.actions, initial=m.initial, truncate=args.truncate)
    d["fallback_used"] = fell_back
    d["relaxation"] = u.provenance
    _emit(args, d, f"{u.provenance} {args.nature} value at {m.states[m.initial]}: {res.values[m.initial]:.6g}"
          f" ({res.iterations} sweeps, residual {res.residual:.2e})")
    return 0


def offline_rows(m, truth, obj, counts, args, label, size, seed, timing=False):
    """One row per relaxation with the certified interval of the true-optimal policy."""
    idx, ivals = _learned(m, counts, args)
    pol_star, v_true = optimal_policy(truth, obj)
    v_star = float(v_true[m.initial])
    rows = []
    for kind in args.relaxations:
        row = dict(benchmark=label, size=size, seed=seed, relaxation=kind, v_star=v_star)
        deadline = Deadline(args.timeout_s)
        try:
            t0 = time.perf_counter()
            u, fell_back = build_model(m, idx, ivals, kind, backend=args.backend, deadline=deadline)
            t1 = time.perf_counter()
            if args.robust_policy:
                policy = solve(u, obj, "robust", backend=args.backend, deadline=deadline).policy
            else:
                policy = pol_star
            lo = solve(u, obj, "robust", backend=args.backend, policy=policy, deadline=deadline)
            hi = solve(u, obj, "optimistic", backend=args.backend, policy=policy, deadline=deadline)
            t2 = time.perf_counter()
            a, b = float(lo.values[m.initial]), float(hi.values[m.initial])
            v_lo, v_hi = min(a, b), max(a, b)
            row.update(
                v_lower=v_lo, v_upper=v_hi, gap=(v_hi - v_lo) / abs(v_star) if v_star else float("inf"),
                fallback=int(fell_back), status="ok",
                build_s=(t1 - t0) if timing else None, solve_s=(t2 - t1) if timing else None,
            )
        except PhaseTimeout:
            row.update(v_lower=None, v_upper=None, gap=None, fallback=0, status="TO", build_s=None, solve_s=None)
        rows.append(row)
    return rows


def rows_to_csv(rows) -> str:
    lines = [",".join(OFFLINE_COLUMNS)]
    for r in rows:
        vals = []
        for c in OFFLINE_COLUMNS:
            v = r.get(c)
            if isinstance(v, float):
                vals.append(f"{v:.10g}" if c not in ("build_s", "solve_s") else f"{v:.3f}")
            elif v is None:
                vals.append("")
            else:
                vals.append(str(v))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def cmd_offline(args) -> int:
    args.relaxations = [canonical_kind(k) for k in args.relaxations.split(",")]
    out_dir = Path(args.out_dir)
    all_rows = []
    for seed in _seeds(args):
        m, truth, u, label = _problem_seeded(args, seed)
        if truth is None:
            raise SystemExit("offline runs need the hidden truth (--truth)")
        obj = Objective.for_model(m)
        counts = collect(truth, _sampling_cfg(args, m, seed))
        size = "x".join(str(x) for x in _parse_size(args.size)) if args.size else ""
        all_rows += offline_rows(m, truth, obj, counts, args, label, size, seed, args.timing)
    csv = rows_to_csv(all_rows)
    _write(out_dir / "offline.csv", csv)
    ep = args.episode_len or default_episode_len(m.n_states)
    _write(out_dir / "manifest.json", json.dumps(manifest(args, {"episode_len": ep}), indent=2, sort_keys=True) + "\n")
    if args.json:
        print(json.dumps(all_rows, indent=2, default=float))
    else:
        print(csv, end="")
    return 0


def cmd_online(args) -> int:
    args.relaxations = [canonical_kind(k) for k in args.relaxations.split(",")]
    out_dir = Path(args.out_dir)
    written = []
    for seed in _seeds(args):
        m, truth, u, label = _problem_seeded(args, seed)
        if truth is None:
            raise SystemExit("online runs need the hidden truth (--truth)")
        for kind in args.relaxations:
            trace = ofu_learn(
                m, truth, args.budget, args.delta, kind, seed=seed, episode_len=args.episode_len or None,
                backend=args.backend, deadline=Deadline(args.timeout_s),
            )
            path = out_dir / f"trace_{label}_{kind}_seed{seed}.csv"
            _write(path, trace.to_csv(timing=args.timing))
            written.append(str(path))
    ep = args.episode_len or default_episode_len(m.n_states)
    _write(out_dir / "manifest.json", json.dumps(manifest(args, {"episode_len": ep, "traces": written}),
                                                 indent=2, sort_keys=True) + "\n")
    _emit(args, {"traces": written}, "\n".join(written))
    return 0


def _seeds(args):
    return [args.seed + i for i in range(args.reruns)]


def _problem_seeded(args, seed):
    saved = args.seed
    args.seed = seed
    try:
        return _problem(args)
    finally:
        args.seed = saved


# ---------------------------------------------------------------- argument parsing


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # the subcommand copy must not overwrite values given before the subcommand
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--delta", type=float, default=d(0.001), help="overall failure probability")
    g.add_argument("--seed", type=int, default=d(0))
    g.add_argument("--timeout-s", type=float, default=d(None), help="per-phase wall-clock limit")
    g.add_argument("--out-dir", default=d("."))
    g.add_argument("--backend", choices=("auto", "lp", "vertex"), default=d("auto"))
    g.add_argument("--json", action="store_true", default=d(False), help="machine-readable output")
    g.add_argument("--timing", action="store_true", default=d(False),
                   help="fill runtime columns (breaks byte-identity)")
    return g


def build_parser() -> argparse.ArgumentParser:
    top, common = _global_flags(False), _global_flags(True)

    p = argparse.ArgumentParser(prog="pmdplearn", description=__doc__, parents=[top])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def problem(sp, truth=True):
        sp.add_argument("--model", help="model file")
        if truth:
            sp.add_argument("--truth", help="JSON with the hidden parameter values")
        sp.add_argument("--family", choices=FAMILIES)
        sp.add_argument("--size", default="", help="family size, e.g. 25 or 5,5")

    def sampling(sp):
        sp.add_argument("--budget", type=int, default=10_000, help="trajectories, or samples per pair")
        sp.add_argument("--mode", choices=(EPISODIC, GENERATIVE), default=EPISODIC)
        sp.add_argument("--episode-len", type=int, default=0)

    g = sub.add_parser("generate", parents=[common], help="write a benchmark model and its hidden truth")
    g.add_argument("--family", choices=FAMILIES, required=True)
    g.add_argument("--size", required=True)
    g.add_argument("--out")
    g.add_argument("--truth")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sample", parents=[common], help="simulate the truth and store transition counts")
    problem(s)
    sampling(s)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    for name, fn, helptext in (
        ("learn", cmd_learn, "print learned expression intervals"),
        ("inspect", cmd_inspect, "dump an uncertainty model"),
        ("solve", cmd_solve, "robust or optimistic value iteration"),
    ):
        c = sub.add_parser(name, parents=[common], help=helptext)
        problem(c)
        sampling(c)
        c.add_argument("--counts", help="counts JSON from 'sample'")
        if name == "learn":
            c.add_argument("--out")
        if name in ("inspect", "solve"):
            c.add_argument("--relaxation", default="P_Lambda", help=f"one of {', '.join(KINDS)}")
        if name == "solve":
            c.add_argument("--nature", choices=("robust", "optimistic"), default="robust")
            c.add_argument("--truncate", type=int, default=None, help="show only the first N states")
        c.set_defaults(func=fn)

    for name, fn, helptext in (
        ("offline", cmd_offline, "uniform sampling then certified bounds per relaxation"),
        ("online", cmd_online, "optimistic online learning traces"),
    ):
        c = sub.add_parser(name, parents=[common], help=helptext)
        problem(c)
        sampling(c)
        c.add_argument("--relaxations", default=",".join(KINDS))
        c.add_argument("--reruns", type=int, default=1, help="consecutive seeds starting at --seed")
        if name == "offline":
            c.add_argument("--robust-policy", action="store_true",
                           help="bound the robust policy instead of the true-optimal one")
        c.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
