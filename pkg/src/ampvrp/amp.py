"""Adaptive memory multi-start driver.

Runs rounds of independent construction plus local search starts, keeps the
best fraction of each round, freezes the vertex sequences those elite
solutions agree on, and restarts on a smaller instance where every frozen
sequence is one merged vertex.  Early rounds draw construction parameters
from wide diversification bands, later rounds from narrow intensification
bands.  Each round's best start and the final best get a deep reconnection
polish on the way to the incumbent (the memory pool itself keeps raw
local-search results); every merge level is expanded back, and the best
solution seen on the original instance is returned.

Merged-vertex bookkeeping keeps reduced instances exactly equivalent for
single-section travel times: demands add up, hard windows intersect, skill
requirements accumulate, and the frozen internal travel of a sequence rides
on its outgoing arcs.  With several time sections the internal travel is
cached per departure section, a close approximation; every candidate is
re-evaluated on the original instance before it can become the incumbent,
so reported totals are always exact.
"""

from __future__ import annotations

import logging
import math
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .evaluator import evaluate
from .localsearch import LsConfig, polish, run as ls_run
from .model import (
    Drive,
    Instance,
    Location,
    Solution,
    TimeWindow,
    validate_instance,
)
from .rccw import RccwConfig, construct
from .timedep import TravelTimeTensor

logger = logging.getLogger(__name__)

DIVERSIFICATION = ((0.1, 1.7), (0.3, 0.8))
INTENSIFICATION = ((0.6, 1.2), (0.1, 0.15))


@dataclass(frozen=True)
class AmpConfig:
    """Protocol knobs: round structure, retention, bands and randomness."""

    rounds: int = 4
    starts_per_round: int = 15
    retention: float = 0.4
    diversification_rounds: int = 2
    diversification_lam: Tuple[float, float] = DIVERSIFICATION[0]
    diversification_dropout: Tuple[float, ...] = DIVERSIFICATION[1]
    intensification_lam: Tuple[float, float] = INTENSIFICATION[0]
    intensification_dropout: Tuple[float, ...] = INTENSIFICATION[1]
    ls: LsConfig = field(default_factory=LsConfig)
    rng_seed: int = 0
    budget_seconds: Optional[float] = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.starts_per_round < 1:
            raise ValueError("starts_per_round must be at least 1")
        if not 0.0 < self.retention <= 1.0:
            raise ValueError("retention must lie in (0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        for label in ("diversification", "intensification"):
            lam = tuple(float(v) for v in getattr(self, label + "_lam"))
            drop = tuple(float(v) for v in getattr(self, label + "_dropout"))
            object.__setattr__(self, label + "_lam", lam)
            object.__setattr__(self, label + "_dropout", drop)
            if len(lam) != 2 or not 0.0 < lam[0] <= lam[1]:
                raise ValueError(
                    f"{label} lambda band must be (low, high) with 0 < low <= high")
            if not drop or any(not 0.0 <= p < 1.0 for p in drop):
                raise ValueError(
                    f"{label} dropout choices must lie in [0, 1)")


@dataclass(frozen=True)
class SegmentMap:
    """One merge level: reduced vertex id to its parent-level id sequence."""

    members: Tuple[Tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not self.members or self.members[0] != (0,):
            raise ValueError("members[0] must be the depot singleton (0,)")

    @property
    def is_identity(self) -> bool:
        return all(len(m) == 1 for m in self.members)

    def expand_sequence(self, visits: Sequence[int]) -> Tuple[int, ...]:
        out: List[int] = []
        for v in visits:
            out.extend(self.members[v])
        return tuple(out)


@dataclass
class MemoryPool:
    """Cost-sorted start results of one round plus the retention fraction."""

    solutions: List[Tuple[Solution, float]]
    retention: float
    reduction: Optional[SegmentMap] = None

    def __post_init__(self) -> None:
        self.solutions = sorted(self.solutions, key=lambda sc: sc[1])

    def retain(self) -> List[Tuple[Solution, float]]:
        keep = math.ceil(self.retention * len(self.solutions))
        return self.solutions[:keep]


@dataclass
class RoundStats:
    """Cost distribution of one round's starts, on original-instance terms."""

    round_index: int
    costs: List[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.costs))

    @property
    def std(self) -> float:
        return float(np.std(self.costs))

    @property
    def best(self) -> float:
        return float(np.min(self.costs))


@dataclass
class AmpResult:
    solution: Solution
    cost: float
    rounds: List[RoundStats]
    reductions: int
    truncated: bool = False


# ---------------------------------------------------------------------------
# segment selection


def _arc_sets(solutions: Sequence[Solution]) -> List[Dict[int, int]]:
    successors = []
    for sol in solutions:
        succ: Dict[int, int] = {}
        for drive in sol.drives:
            interior = drive.interior
            for a, b in zip(interior, interior[1:]):
                succ[a] = b
        successors.append(succ)
    return successors


def select_segments(pool: MemoryPool) -> List[List[int]]:
    """Maximal vertex sequences whose arcs appear in every retained solution.

    Only customer-to-customer arcs count; sequences have length two or more
    and are pairwise disjoint by construction (each vertex has at most one
    predecessor and successor per solution).
    """
    retained = pool.retain()
    if len(retained) < 2:
        raise ValueError("segment selection needs at least 2 retained solutions")
    succs = _arc_sets([sol for sol, _ in retained])
    common: Dict[int, int] = {}
    for a, b in succs[0].items():
        if all(s.get(a) == b for s in succs[1:]):
            common[a] = b
    has_pred = set(common.values())
    segments: List[List[int]] = []
    for a in sorted(common):
        if a in has_pred:
            continue
        seq = [a]
        while seq[-1] in common:
            seq.append(common[seq[-1]])
        segments.append(seq)
    return segments


# ---------------------------------------------------------------------------
# instance reduction


def _window_intersection(windows: Sequence[TimeWindow]) -> Optional[TimeWindow]:
    begin = max(w.begin for w in windows)
    end = min(w.end for w in windows)
    if begin < end:
        return TimeWindow(begin, end)
    return None


def reduce(instance: Instance,
           segments: Sequence[Sequence[int]]) -> Tuple[Instance, SegmentMap]:
    """Merge each segment into one vertex; returns the smaller instance.

    A segment whose hard windows have an empty intersection is skipped with
    a log record rather than merged infeasibly.  With no usable segments the
    original instance is returned with an identity map.
    """
    locs = instance.locations
    usable: List[List[int]] = []
    taken = set()
    for seg in segments:
        if len(seg) < 2 or any(v in taken for v in seg) or 0 in seg:
            continue
        if _window_intersection([locs[v].hard_window for v in seg]) is None:
            logger.info("segment %s skipped: empty hard-window intersection",
                        list(seg))
            continue
        usable.append(list(seg))
        taken.update(seg)

    members: List[Tuple[int, ...]] = [(0,)]
    starts = {seg[0]: seg for seg in usable}
    for v in range(1, instance.n_locations):
        if v in taken and v not in starts:
            continue
        members.append(tuple(starts[v]) if v in starts else (v,))
    smap = SegmentMap(tuple(members))
    if smap.is_identity:
        return instance, smap

    n_new = len(members)
    tensor = instance.travel_time
    k = tensor.section_count
    dist = np.zeros((n_new, n_new))
    times = np.zeros((k, n_new, n_new))
    internal_dist = np.zeros(n_new)
    internal_time = np.zeros((k, n_new))
    first = np.zeros(n_new, dtype=int)
    last = np.zeros(n_new, dtype=int)
    for rid, group in enumerate(members):
        first[rid] = group[0]
        last[rid] = group[-1]
        for a, b in zip(group, group[1:]):
            internal_dist[rid] += instance.distance_matrix[a, b]
            for s in range(k):
                internal_time[s, rid] += tensor.times[s, a, b]
    for a in range(n_new):
        for b in range(n_new):
            if a == b:
                continue
            dist[a, b] = internal_dist[a] + instance.distance_matrix[
                last[a], first[b]]
            for s in range(k):
                times[s, a, b] = internal_time[s, a] + tensor.times[
                    s, last[a], first[b]]

    new_locs: List[Location] = [locs[0]]
    for rid in range(1, n_new):
        group = members[rid]
        if len(group) == 1:
            src = locs[group[0]]
            new_locs.append(replace(src, id=rid))
            continue
        parts = [locs[v] for v in group]
        hard = _window_intersection([p.hard_window for p in parts])
        soft = _window_intersection([p.soft_window for p in parts]) or hard
        skills = frozenset().union(*(p.required_skills for p in parts))
        head = parts[0]
        new_locs.append(Location(
            id=rid,
            demand_mass=sum(p.demand_mass for p in parts),
            demand_volume=sum(p.demand_volume for p in parts),
            service_duration=sum(p.service_duration for p in parts),
            hard_window=hard,
            soft_window=soft,
            required_skills=skills,
            cluster=head.cluster,
            x=head.x,
            y=head.y,
        ))

    reduced = Instance(
        locations=tuple(new_locs),
        vehicles=instance.vehicles,
        distance_matrix=dist,
        travel_time=TravelTimeTensor(tensor.section_boundaries.copy(), times),
        location_penalties=instance.location_penalties,
        vehicle_penalties=instance.vehicle_penalties,
        objective_kind=instance.objective_kind,
        name=f"{instance.name}+r{n_new}",
    )
    problems = validate_instance(reduced)
    if problems:
        raise ValueError("reduced instance failed validation: "
                         + "; ".join(problems))
    return reduced, smap


def expand(solution: Solution, smap: SegmentMap) -> Solution:
    """Replace merged vertices by their frozen sequences."""
    drives = tuple(
        Drive(d.vehicle_id, smap.expand_sequence(d.visit_sequence))
        for d in solution.drives
    )
    return Solution(drives)


def expand_through(solution: Solution, maps: Sequence[SegmentMap]) -> Solution:
    for smap in reversed(maps):
        solution = expand(solution, smap)
    return solution


# ---------------------------------------------------------------------------
# the multi-start protocol


def _one_start(instance: Instance, cfg: RccwConfig,
               ls_cfg: LsConfig) -> Solution:
    initial = construct(instance, cfg)
    return ls_run(instance, initial, ls_cfg)


def _start_args(config: AmpConfig, round_index: int,
                rng: random.Random) -> List[Tuple[RccwConfig, LsConfig]]:
    if round_index < config.diversification_rounds:
        lam_range = config.diversification_lam
        dropout_choices = config.diversification_dropout
    else:
        lam_range = config.intensification_lam
        dropout_choices = config.intensification_dropout
    args = []
    for _ in range(config.starts_per_round):
        cfg = RccwConfig(
            lam=rng.uniform(*lam_range),
            dropout=rng.choice(dropout_choices),
            rng_seed=rng.getrandbits(32),
        )
        ls_cfg = replace(config.ls, rng_seed=rng.getrandbits(32))
        args.append((cfg, ls_cfg))
    return args


def solve_detailed(instance: Instance, config: AmpConfig) -> AmpResult:
    """Run the full multi-start protocol and report per-round statistics."""
    rng = random.Random(config.rng_seed)
    t_start = time.monotonic()

    def out_of_time() -> bool:
        return (config.budget_seconds is not None
                and time.monotonic() - t_start >= config.budget_seconds)

    level = instance
    maps: List[SegmentMap] = []
    reductions = 0
    best_sol: Optional[Solution] = None
    best_cost = float("inf")
    stats: List[RoundStats] = []
    last_level_starts: List[Tuple[Solution, float]] = []

    for round_index in range(config.rounds):
        args = _start_args(config, round_index, rng)
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(
                    _one_start,
                    [level] * len(args),
                    [a[0] for a in args],
                    [a[1] for a in args],
                ))
        else:
            results = []
            for cfg, ls_cfg in args:
                results.append(_one_start(level, cfg, ls_cfg))
                if out_of_time():
                    break

        level_starts: List[Tuple[Solution, float]] = []
        costs: List[float] = []
        for sol in results:
            level_cost = evaluate(level, sol).total
            level_starts.append((sol, level_cost))
            original = expand_through(sol, maps)
            bd = evaluate(instance, original)
            costs.append(bd.total)
            if bd.total < best_cost:
                best_cost = bd.total
                best_sol = original
        if costs:
            stats.append(RoundStats(round_index + 1, costs))
            last_level_starts = level_starts

        if out_of_time() or round_index == config.rounds - 1:
            break
        if level_starts:
            # Incumbent tap: deep-polish this round's best.  The polished
            # solution only competes for the returned incumbent; the memory
            # pool keeps the raw local-search results.
            top_sol, _ = min(level_starts, key=lambda sc: sc[1])
            original = polish(instance, expand_through(polish(level, top_sol),
                                                       maps))
            bd = evaluate(instance, original)
            if bd.total < best_cost:
                best_cost = bd.total
                best_sol = original
        pool_round = MemoryPool(level_starts, config.retention)
        if len(pool_round.retain()) < 2:
            continue
        segments = select_segments(pool_round)
        if not segments:
            logger.info("round %d: no common segments, level kept",
                        round_index + 1)
            continue
        reduced, smap = reduce(level, segments)
        if smap.is_identity:
            continue
        level = reduced
        maps.append(smap)
        reductions += 1
        logger.info("round %d: froze %d segments, %d vertices remain",
                    round_index + 1, sum(1 for m in smap.members if len(m) > 1),
                    reduced.n_locations - 1)

    if last_level_starts and not out_of_time():
        top, _ = min(last_level_starts, key=lambda sc: sc[1])
        refined = polish(level, top)
        original = polish(instance, expand_through(refined, maps))
        cost = evaluate(instance, original).total
        if cost < best_cost:
            best_cost = cost
            best_sol = original

    if best_sol is None:
        raise RuntimeError("no start produced a solution within the budget")
    return AmpResult(best_sol, best_cost, stats, reductions, out_of_time())


def solve(instance: Instance, config: AmpConfig) -> Solution:
    """Best solution of the multi-start protocol on the original instance."""
    return solve_detailed(instance, config).solution


def write_round_log(result: AmpResult, path: str) -> None:
    """Tabular per-round mean/std/best costs of one run."""
    lines = ["round\tstarts\tmean\tstd\tbest"]
    for rs in result.rounds:
        lines.append(f"{rs.round_index}\t{len(rs.costs)}\t{rs.mean:.4f}"
                     f"\t{rs.std:.4f}\t{rs.best:.4f}")
    lines.append(f"final\t-\t-\t-\t{result.cost:.4f}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
