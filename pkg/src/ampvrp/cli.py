"""Command line interface: solve, bench, study, oracle and tensor.

Every flag can also come from the environment with the ``AMPVRP_`` prefix
(``AMPVRP_SEED``, ``AMPVRP_BUDGET_S``, ...); explicit flags win.  A YAML
configuration file carries every algorithm default (round structure,
parameter bands, iteration limits, strategy weights, study grids), so
protocol runs are fully declarative.  All randomness flows from the one
``--seed`` value through named per-component streams; identical command
lines therefore produce byte-identical solution, study and round reports
(benchmark reports additionally contain measured wall-clock columns).
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import yaml

from . import amp, io, plotting
from .evaluator import evaluate
from .localsearch import DEFAULT_WEIGHTS, LsConfig, run as ls_run
from .model import Instance, Solution, validate_instance
from .oracle import solve_exact
from .preprocess import split_demands
from .rccw import RccwConfig, construct
from .seeding import stream_seed
from .timedep import build_from_profiles

ENV_PREFIX = "AMPVRP_"

_EXIT_OK = 0
_EXIT_INFEASIBLE = 1
_EXIT_USAGE = 2


def _env(name: str, cast, fallback):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None or raw == "":
        return fallback
    try:
        return cast(raw)
    except ValueError:
        raise SystemExit(
            f"environment variable {ENV_PREFIX}{name} is not a valid "
            f"{cast.__name__}: {raw!r}")


# ---------------------------------------------------------------------------
# configuration file


def default_config() -> Dict[str, dict]:
    """Every tunable the solver honours, at its built-in default."""
    base_amp = amp.AmpConfig()
    base_ls = LsConfig()
    return {
        "amp": {
            "rounds": base_amp.rounds,
            "starts_per_round": base_amp.starts_per_round,
            "retention": base_amp.retention,
            "diversification_rounds": base_amp.diversification_rounds,
            "diversification_lam": list(base_amp.diversification_lam),
            "diversification_dropout": list(base_amp.diversification_dropout),
            "intensification_lam": list(base_amp.intensification_lam),
            "intensification_dropout": list(base_amp.intensification_dropout),
        },
        "localsearch": {
            "max_iterations": base_ls.max_iterations,
            "combos_per_iteration": base_ls.combos_per_iteration,
            "cycle_ceiling": base_ls.cycle_ceiling,
            "strategy_weights": {name: w for name, w in DEFAULT_WEIGHTS},
        },
        "study": {
            "lams": [1.0],
            "dropouts": [0.0, 0.1, 0.3, 0.5],
            "reps": 15,
        },
    }


def load_config(path: Optional[str]) -> Dict[str, dict]:
    """Defaults overlaid with the given YAML file; unknown keys rejected."""
    cfg = default_config()
    if path is None:
        return cfg
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise SystemExit(f"{path}: not valid YAML: {exc}")
    if doc is None:
        return cfg
    if not isinstance(doc, dict):
        raise SystemExit(f"{path}: configuration root must be a mapping")
    for section, values in doc.items():
        if section not in cfg:
            raise SystemExit(
                f"{path}: unknown section {section!r} "
                f"(expected one of {sorted(cfg)})")
        if not isinstance(values, dict):
            raise SystemExit(f"{path}: section {section!r} must be a mapping")
        for key, value in values.items():
            if key not in cfg[section]:
                raise SystemExit(
                    f"{path}: unknown key {section}.{key} "
                    f"(expected one of {sorted(cfg[section])})")
            cfg[section][key] = value
    return cfg


def _ls_config(cfg: Mapping, seed: int) -> LsConfig:
    ls = cfg["localsearch"]
    weights = ls["strategy_weights"]
    if isinstance(weights, Mapping):
        weights = tuple(sorted(weights.items()))
    return LsConfig(
        max_iterations=int(ls["max_iterations"]),
        combos_per_iteration=int(ls["combos_per_iteration"]),
        cycle_ceiling=int(ls["cycle_ceiling"]),
        strategy_weights=weights,
        rng_seed=seed,
    )


def _amp_config(cfg: Mapping, seed: int, budget: Optional[float],
                workers: int) -> amp.AmpConfig:
    a = cfg["amp"]
    return amp.AmpConfig(
        rounds=int(a["rounds"]),
        starts_per_round=int(a["starts_per_round"]),
        retention=float(a["retention"]),
        diversification_rounds=int(a["diversification_rounds"]),
        diversification_lam=a["diversification_lam"],
        diversification_dropout=a["diversification_dropout"],
        intensification_lam=a["intensification_lam"],
        intensification_dropout=a["intensification_dropout"],
        ls=_ls_config(cfg, 0),
        rng_seed=seed,
        budget_seconds=budget,
        workers=workers,
    )


# ---------------------------------------------------------------------------
# shared plumbing


def load_instance(path: str) -> Instance:
    suffix = Path(path).suffix.lower()
    if suffix in (".yaml", ".yml"):
        return io.parse_rich(path)
    return io.parse_cmt(path)


def _validated(path: str) -> Instance:
    instance = load_instance(path)
    problems = validate_instance(instance)
    if problems:
        for problem in problems:
            print(f"validation: {problem}", file=sys.stderr)
        raise SystemExit(_EXIT_USAGE)
    return instance


def _solution_figures(instance: Instance, solution: Solution, out: Path,
                      stem: str, written: List[str]) -> None:
    try:
        plotting.plot_solution(instance, solution, out / f"{stem}.routes.png")
        written.append(f"{stem}.routes.png")
    except ValueError:
        pass


def _arc_diversity(solutions: Sequence[Solution]) -> float:
    """Distinct directed arcs across solutions over mean arcs per solution."""
    union = set()
    sizes = []
    for sol in solutions:
        arcs = set()
        for drive in sol.drives:
            seq = drive.visit_sequence
            arcs.update(zip(seq, seq[1:]))
        union |= arcs
        sizes.append(len(arcs))
    if not sizes or not union:
        return 0.0
    return len(union) / float(np.mean(sizes))


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    instance = _validated(args.instance)
    split, _ = split_demands(instance)

    reps = args.seeds if args.seeds is not None else 1
    t0 = time.monotonic()
    result = None
    for rep in range(reps):
        root = args.seed if reps == 1 else stream_seed(args.seed, "solve", rep)
        budget = None
        if args.budget_s is not None:
            budget = args.budget_s - (time.monotonic() - t0)
            if budget <= 0.0 and result is not None:
                result = amp.AmpResult(result.solution, result.cost,
                                       result.rounds, result.reductions, True)
                break
        acfg = _amp_config(cfg, root, budget, args.workers)
        candidate = amp.solve_detailed(split, acfg)
        if result is None or candidate.cost < result.cost:
            result = candidate
    breakdown = evaluate(split, result.solution)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.instance).stem
    written = [f"{stem}.solution.txt", f"{stem}.rounds.txt"]
    io.emit_solution(split, result.solution, breakdown,
                     out / f"{stem}.solution.txt",
                     extras={"budget_truncated":
                             "yes" if result.truncated else "no"})
    amp.write_round_log(result, out / f"{stem}.rounds.txt")
    _solution_figures(split, result.solution, out, stem, written)
    if result.rounds:
        plotting.plot_rounds(result.rounds, out / f"{stem}.rounds.png",
                             title=instance.name)
        written.append(f"{stem}.rounds.png")

    print(f"instance\t{instance.name}")
    print(f"total\t{breakdown.total:.6f}")
    print(f"feasible\t{'yes' if breakdown.feasible else 'no'}")
    print(f"budget_truncated\t{'yes' if result.truncated else 'no'}")
    for name in written:
        print(f"wrote\t{out / name}")
    return _EXIT_OK if breakdown.feasible else _EXIT_INFEASIBLE


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        print(f"bench: {corpus} is not a directory", file=sys.stderr)
        return _EXIT_USAGE
    paths = sorted(p for p in corpus.iterdir()
                   if p.suffix.lower() in (".txt", ".yaml", ".yml")
                   and p.stem != "best_known")
    known_path = corpus / "best_known.csv"
    known = io.load_best_known(known_path) if known_path.exists() else {}

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows: List[Dict] = []
    failures = 0
    for path in paths:
        try:
            instance = load_instance(str(path))
            problems = validate_instance(instance)
            if problems:
                raise ValueError("; ".join(problems[:3]))
        except (ValueError, OSError) as exc:
            print(f"bench: skipping {path.name}: {exc}", file=sys.stderr)
            failures += 1
            continue
        split, _ = split_demands(instance)
        totals = []
        seconds = []
        for rep in range(args.seeds):
            root = stream_seed(args.seed, "bench", instance.name, rep)
            acfg = _amp_config(cfg, root, args.budget_s, args.workers)
            t0 = time.monotonic()
            result = amp.solve_detailed(split, acfg)
            seconds.append(time.monotonic() - t0)
            totals.append(result.cost)
        row: Dict = {
            "instance": instance.name,
            "runs": args.seeds,
            "best": float(np.min(totals)),
            "mean": float(np.mean(totals)),
            "std": float(np.std(totals)),
            "mean_seconds": float(np.mean(seconds)),
        }
        bk = known.get(instance.name)
        if bk:
            row["best_known"] = bk
            row["best_gap_pct"] = (row["best"] / bk - 1.0) * 100.0
            row["mean_gap_pct"] = (row["mean"] / bk - 1.0) * 100.0
        rows.append(row)
        print(f"bench\t{instance.name}\tbest={row['best']:.4f}"
              f"\tmean={row['mean']:.4f}", flush=True)

    io.emit_report(rows, out / "bench.txt")
    print(f"wrote\t{out / 'bench.txt'}")
    if any("best_gap_pct" in r for r in rows):
        plotting.plot_gaps(rows, out / "bench.png")
        print(f"wrote\t{out / 'bench.png'}")
    return _EXIT_USAGE if failures and not rows else _EXIT_OK


def cmd_study(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    grid = cfg["study"]
    reps = args.seeds if args.seeds is not None else int(grid["reps"])
    lams = [float(v) for v in grid["lams"]]
    dropouts = [float(v) for v in grid["dropouts"]]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records: List[Dict] = []
    for path in args.instances:
        instance = _validated(path)
        split, _ = split_demands(instance)
        for lam in lams:
            for dropout in dropouts:
                built: List[Solution] = []
                refined: List[Solution] = []
                for rep in range(reps):
                    seed = stream_seed(args.seed, "study", instance.name,
                                       f"{lam:.6g}", f"{dropout:.6g}", rep)
                    rcfg = RccwConfig(lam=lam, dropout=dropout, rng_seed=seed)
                    sol = construct(split, rcfg)
                    built.append(sol)
                    refined.append(ls_run(split, sol,
                                          _ls_config(cfg, seed)))
                records.append({
                    "instance": instance.name,
                    "lam": lam,
                    "dropout": dropout,
                    "reps": reps,
                    "initial_mean": float(np.mean(
                        [evaluate(split, s).total for s in built])),
                    "initial_diversity": _arc_diversity(built),
                    "final_mean": float(np.mean(
                        [evaluate(split, s).total for s in refined])),
                    "final_diversity": _arc_diversity(refined),
                })
                print(f"study\t{instance.name}\tlam={lam:g}"
                      f"\tdropout={dropout:g}", flush=True)

    io.emit_plotdata(records, out / "study.txt")
    plotting.plot_diversity(records, out / "study.png")
    print(f"wrote\t{out / 'study.txt'}")
    print(f"wrote\t{out / 'study.png'}")
    return _EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    instance = _validated(args.instance)
    split, _ = split_demands(instance)
    try:
        result = solve_exact(split)
    except ValueError as exc:
        print(f"oracle: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    if not result.feasible or result.solution is None:
        print("oracle: no hard-feasible solution exists", file=sys.stderr)
        return _EXIT_INFEASIBLE

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.instance).stem
    breakdown = evaluate(split, result.solution)
    io.emit_solution(split, result.solution, breakdown,
                     out / f"{stem}.oracle.txt")
    print(f"instance\t{instance.name}")
    print(f"optimum\t{result.cost:.6f}")
    print(f"explored\t{result.explored}")
    print(f"wrote\t{out / f'{stem}.oracle.txt'}")
    return _EXIT_OK


def cmd_tensor(args: argparse.Namespace) -> int:
    try:
        static, clusters, profiles, step, horizon = io.parse_profiles(
            args.profiles)
        tensor = build_from_profiles(static, clusters, profiles, step, horizon)
    except (io.FormatError, ValueError, OSError) as exc:
        print(f"tensor: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.profiles).stem
    target = out / f"{stem}.npz"
    io.write_tensor(target, tensor)
    print(f"sections\t{tensor.section_count}")
    print(f"locations\t{tensor.n_locations}")
    print(f"horizon\t{tensor.horizon[0]:g}\t{tensor.horizon[1]:g}")
    print(f"wrote\t{target}")
    return _EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring


def _add_common(parser: argparse.ArgumentParser, seeds_default=None) -> None:
    parser.add_argument("--seed", type=int, default=_env("SEED", int, 0),
                        help="root random seed (default 0)")
    parser.add_argument("--seeds", type=int,
                        default=_env("SEEDS", int, seeds_default),
                        help="number of seeded repetitions")
    parser.add_argument("--budget-s", type=float,
                        default=_env("BUDGET_S", float, None),
                        help="cooperative wall-clock budget in seconds")
    parser.add_argument("--config", default=_env("CONFIG", str, None),
                        help="YAML configuration file")
    parser.add_argument("--out", default=_env("OUT", str, "."),
                        help="output directory (default current)")
    parser.add_argument("--workers", type=int,
                        default=_env("WORKERS", int, os.cpu_count() or 1),
                        help="worker processes (default: available cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ampvrp",
        description="Multi-variant vehicle routing: constructive savings, "
                    "phased local search and adaptive-memory restarts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one instance")
    p_solve.add_argument("instance")
    _add_common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_bench = sub.add_parser("bench", help="benchmark a corpus directory")
    p_bench.add_argument("corpus")
    _add_common(p_bench, seeds_default=10)
    p_bench.set_defaults(func=cmd_bench)

    p_study = sub.add_parser("study",
                             help="construction parameter study grid")
    p_study.add_argument("instances", nargs="+")
    _add_common(p_study)
    p_study.set_defaults(func=cmd_study)

    p_oracle = sub.add_parser("oracle", help="exact optimum of a tiny instance")
    p_oracle.add_argument("instance")
    _add_common(p_oracle)
    p_oracle.set_defaults(func=cmd_oracle)

    p_tensor = sub.add_parser("tensor",
                              help="expand congestion profiles into a tensor")
    p_tensor.add_argument("profiles")
    _add_common(p_tensor)
    p_tensor.set_defaults(func=cmd_tensor)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except io.FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
