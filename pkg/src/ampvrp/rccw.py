"""Randomized constrained savings construction.

Classical parallel savings with two randomization knobs: a shape parameter
lambda weighting the direct arc inside the savings formula, and a dropout
fraction that deletes a random share of the savings list before merging.
Lambda = 1 with dropout 0 reproduces the deterministic textbook algorithm.
Merges respect capacities, hard time windows and skill compatibility, so
the walk never creates hard violations; a final compression step maps the
open-ended route set onto the actual fleet, chaining extra trips onto
vehicles that return early enough.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from .engine import Working, arrays_for
from .evaluator import arc_cost
from .model import Drive, Instance, Solution


class ConstructionError(RuntimeError):
    """Raised when no fleet vehicle can ever serve some customer."""


@dataclass(frozen=True)
class RccwConfig:
    """Construction knobs: savings shape, list dropout and random stream."""

    lam: float = 1.0
    dropout: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.lam <= 0.0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")


def sample_config(rng: random.Random,
                  lam_range: Tuple[float, float] = (0.4, 1.6),
                  dropout_range: Tuple[float, float] = (0.2, 0.4)) -> RccwConfig:
    """Draw a construction configuration from continuous parameter bands."""
    return RccwConfig(
        lam=rng.uniform(*lam_range),
        dropout=rng.uniform(*dropout_range),
        rng_seed=rng.getrandbits(32),
    )


class SavingsEntry(NamedTuple):
    i: int
    j: int
    value: float


def compute_savings(instance: Instance, lam: float) -> List[SavingsEntry]:
    """Directed savings for every ordered customer pair, best first.

    The saving of serving j directly after i is c(i,0) + c(0,j) - lam*c(i,j),
    with costs taken in the instance objective at a departure fixed to the
    horizon start.  Ties break on (i, j) ascending so the order is total.
    """
    t0 = instance.travel_time.horizon[0]
    n = instance.n_locations
    veh = instance.vehicles[0] if instance.vehicles else None
    out: List[SavingsEntry] = []
    to_depot = [0.0] * n
    from_depot = [0.0] * n
    for i in range(1, n):
        to_depot[i] = arc_cost(instance, veh, i, 0, t0) if veh else 0.0
        from_depot[i] = arc_cost(instance, veh, 0, i, t0) if veh else 0.0
    for i in range(1, n):
        for j in range(1, n):
            if i == j:
                continue
            cij = arc_cost(instance, veh, i, j, t0) if veh else 0.0
            out.append(SavingsEntry(i, j, to_depot[i] + from_depot[j] - lam * cij))
    out.sort(key=lambda e: (-e.value, e.i, e.j))
    return out


def apply_dropout(savings: Sequence[SavingsEntry], dropout: float,
                  rng: random.Random) -> List[SavingsEntry]:
    """Remove floor(dropout * len) entries uniformly; survivors keep order."""
    if not 0.0 <= dropout <= 1.0:
        raise ValueError(f"dropout must lie in [0, 1], got {dropout}")
    k = int(dropout * len(savings))
    if k == 0:
        return list(savings)
    doomed = set(rng.sample(range(len(savings)), k))
    return [e for x, e in enumerate(savings) if x not in doomed]


class _Route:
    __slots__ = ("seq", "dm", "dv")

    def __init__(self, seq: List[int], dm: float, dv: float) -> None:
        self.seq = seq
        self.dm = dm
        self.dv = dv


def _vehicle_classes(instance: Instance) -> List[int]:
    """Representative vehicle index per distinct vehicle parameter set."""
    seen: Dict[tuple, int] = {}
    reps: List[int] = []
    for v in instance.vehicles:
        key = (v.capacity_mass, v.capacity_volume,
               v.hard_window.begin, v.hard_window.end,
               v.soft_window.begin, v.soft_window.end,
               tuple(sorted(v.skills)), v.cost_model)
        if key not in seen:
            seen[key] = v.id
            reps.append(v.id)
    return reps


def construct(instance: Instance, config: RccwConfig,
              rng_seed: Optional[int] = None) -> Solution:
    """Build a solution: savings walk over singleton routes, then compression.

    Deterministic for a fixed (instance, config) pair; ``rng_seed`` overrides
    the seed carried in the config.  The result covers every customer exactly
    once; hard violations can only appear when the fleet itself cannot hold
    the routes even after repair splitting, and are then left for the
    evaluator to report.
    """
    n = instance.n_locations
    if n <= 1:
        return Solution(drives=())
    arr = arrays_for(instance)
    for c in range(1, n):
        if not arr.skill_ok[:, c].any():
            raise ConstructionError(
                f"customer {c}: no vehicle in the fleet has the required "
                f"skills {sorted(instance.locations[c].required_skills)}")
    w = Working(arr)
    reps = _vehicle_classes(instance)
    rng = random.Random(config.rng_seed if rng_seed is None else rng_seed)

    savings = apply_dropout(compute_savings(instance, config.lam),
                            config.dropout, rng)

    routes: Dict[int, _Route] = {}
    route_of = [0] * n
    for c in range(1, n):
        routes[c] = _Route([c], arr.dem_m[c], arr.dem_v[c])
        route_of[c] = c

    def route_fits_some_class(seq: List[int], dm: float, dv: float) -> bool:
        for vi in reps:
            if dm > arr.cap_m[vi] + 1e-9 or dv > arr.cap_v[vi] + 1e-9:
                continue
            if w.eval_drives(vi, [seq]).hard == 0:
                return True
        return False

    for entry in savings:
        ri = route_of[entry.i]
        rj = route_of[entry.j]
        if ri == rj:
            continue
        a = routes[ri]
        b = routes[rj]
        if a.seq[-1] != entry.i or b.seq[0] != entry.j:
            continue
        dm = a.dm + b.dm
        dv = a.dv + b.dv
        merged = a.seq + b.seq
        if not route_fits_some_class(merged, dm, dv):
            continue
        a.seq = merged
        a.dm = dm
        a.dv = dv
        for c in b.seq:
            route_of[c] = ri
        del routes[rj]

    # Compression: map routes onto the fleet, first fit in vehicle id order,
    # chaining later trips behind vehicles that have already returned.
    # Routes compatible with few vehicles place first so a skill-gated or
    # heavy route is not crowded out of its only possible carriers.
    def compatible_vehicles(route: _Route) -> List[int]:
        return [vi for vi in range(arr.n_vehicles)
                if route.dm <= arr.cap_m[vi] + 1e-9
                and route.dv <= arr.cap_v[vi] + 1e-9
                and all(arr.skill_ok[vi, c] for c in route.seq)]

    def earliest_start(route: _Route) -> float:
        starts = [arr.vhw_b[vi] for vi in reps
                  if route.dm <= arr.cap_m[vi] + 1e-9
                  and route.dv <= arr.cap_v[vi] + 1e-9]
        return min(starts) if starts else float(arr.vhw_b.min())

    order = sorted(routes.values(),
                   key=lambda r: (len(compatible_vehicles(r)),
                                  earliest_start(r), r.seq[0]))
    queue: List[_Route] = list(order)
    chains: List[List[List[int]]] = [[] for _ in range(arr.n_vehicles)]
    leftovers: List[_Route] = []

    while queue:
        route = queue.pop(0)
        placed = False
        # Idle vehicles first so chaining only happens when the fleet is
        # exhausted; id order within each tier keeps the result deterministic.
        order_vi = sorted(range(arr.n_vehicles),
                          key=lambda v: (bool(chains[v]), v))
        for vi in order_vi:
            if route.dm > arr.cap_m[vi] + 1e-9 or route.dv > arr.cap_v[vi] + 1e-9:
                continue
            cand = chains[vi] + [route.seq]
            if w.eval_drives(vi, cand).hard == 0:
                chains[vi] = cand
                placed = True
                break
        if placed:
            continue
        if len(route.seq) > 1:
            # Repair: split at the depot-nearest customer and retry both parts.
            idx = min(range(len(route.seq)),
                      key=lambda p: (arr.dist[0, route.seq[p]], p))
            if idx == 0:
                idx = 1
            left = route.seq[:idx]
            right = route.seq[idx:]
            for part in (right, left):
                dm = sum(arr.dem_m[c] for c in part)
                dv = sum(arr.dem_v[c] for c in part)
                queue.insert(0, _Route(list(part), dm, dv))
        else:
            leftovers.append(route)

    for route in leftovers:
        # Nothing holds this customer; pin it to the least loaded compatible
        # vehicle (or the least loaded one outright when none is compatible)
        # so the violation surfaces in evaluation instead of vanishing.
        pool = compatible_vehicles(route) or list(range(arr.n_vehicles))
        vi = min(pool, key=lambda v: (len(chains[v]), v))
        chains[vi].append(route.seq)

    drives: List[Drive] = []
    for vi in range(arr.n_vehicles):
        for seq in chains[vi]:
            drives.append(Drive(vi, (0, *seq, 0)))
    return Solution(drives=tuple(drives))
