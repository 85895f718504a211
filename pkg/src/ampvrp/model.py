"""Domain types for multi-variant vehicle routing instances and solutions.

All times are seconds from the start of the planning horizon, all distances
are kilometres, all masses kilograms and volumes cubic metres.  Location 0 is
always the depot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .timedep import TravelTimeTensor, non_passing_violations


class ObjectiveKind(Enum):
    """What the travel part of the cost function measures."""

    TRAVEL_TIME = "travel_time"
    MONETARY = "monetary"


@dataclass(frozen=True)
class TimeWindow:
    """Half-open-ish interval [begin, end]; begin must precede end."""

    begin: float
    end: float

    def __post_init__(self) -> None:
        if not self.begin < self.end:
            raise ValueError(
                f"time window begin must precede end, got [{self.begin}, {self.end}]"
            )

    @property
    def length(self) -> float:
        return self.end - self.begin

    def contains(self, other: "TimeWindow") -> bool:
        return self.begin <= other.begin and other.end <= self.end

    def intersect(self, other: "TimeWindow") -> Optional["TimeWindow"]:
        """Intersection window, or None when the overlap is empty."""
        b = max(self.begin, other.begin)
        e = min(self.end, other.end)
        if b < e:
            return TimeWindow(b, e)
        return None


@dataclass(frozen=True)
class Location:
    """A depot or customer vertex.

    ``demand_mass``/``demand_volume`` are what has to be delivered in one
    visit (already aggregated over packages).  ``required_skills`` restricts
    which vehicles may serve the vertex.  ``cluster`` ties the vertex to a
    congestion zone for time-dependent travel and is purely informational
    for evaluation.
    """

    id: int
    demand_mass: float
    demand_volume: float
    service_duration: float
    hard_window: TimeWindow
    soft_window: TimeWindow
    required_skills: frozenset = frozenset()
    cluster: Optional[int] = None
    x: Optional[float] = None
    y: Optional[float] = None


@dataclass(frozen=True)
class FuelCostModel:
    """Per-vehicle fuel consumption parameters.

    Consumption on an arc is ``(base_rate + mass_factor * load_mass) *
    (1 - speed_factor * speed_kmh)`` litres per kilometre, converted to money
    with ``fuel_price``.  ``speed_factor`` must stay small enough that the
    speed term is positive for every speed the instance can produce.
    """

    base_rate: float
    mass_factor: float
    speed_factor: float
    fuel_price: float


@dataclass(frozen=True)
class Vehicle:
    id: int
    capacity_mass: float
    capacity_volume: float
    hard_window: TimeWindow
    soft_window: TimeWindow
    skills: frozenset = frozenset()
    cost_model: FuelCostModel = FuelCostModel(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class PenaltyParams:
    """Soft-window penalty coefficients.

    An early visit (arrival ``b`` before the soft begin) costs
    ``early_fixed + early_per_second * (soft_begin - b)
    + early_duration_per_second * (min(e, soft_begin) - b)``.
    A late visit (departure ``e`` after the soft end) costs
    ``late_fixed + late_per_second * (e - soft_end)
    + late_duration_per_second * (e - max(b, soft_end))``.
    """

    early_fixed: float = 0.0
    early_per_second: float = 0.0
    early_duration_per_second: float = 0.0
    late_fixed: float = 0.0
    late_per_second: float = 0.0
    late_duration_per_second: float = 0.0


@dataclass(frozen=True, eq=False)
class Instance:
    """A complete routing problem.

    ``distance_matrix`` is (n, n) kilometres, ``travel_time`` holds one
    (n, n) second matrix per time section.  Both are stored read-only.
    """

    locations: Tuple[Location, ...]
    vehicles: Tuple[Vehicle, ...]
    distance_matrix: np.ndarray
    travel_time: TravelTimeTensor
    location_penalties: PenaltyParams = PenaltyParams()
    vehicle_penalties: PenaltyParams = PenaltyParams()
    objective_kind: ObjectiveKind = ObjectiveKind.TRAVEL_TIME
    name: str = ""

    def __post_init__(self) -> None:
        dm = np.asarray(self.distance_matrix, dtype=float)
        dm.setflags(write=False)
        object.__setattr__(self, "distance_matrix", dm)

    @property
    def n_locations(self) -> int:
        return len(self.locations)

    @property
    def depot(self) -> Location:
        return self.locations[0]

    @property
    def customers(self) -> Tuple[Location, ...]:
        return self.locations[1:]


@dataclass(frozen=True)
class Drive:
    """One depot-to-depot trip: the visit sequence includes both depot ends."""

    vehicle_id: int
    visit_sequence: Tuple[int, ...]

    def __post_init__(self) -> None:
        seq = tuple(self.visit_sequence)
        object.__setattr__(self, "visit_sequence", seq)
        if len(seq) < 3 or seq[0] != 0 or seq[-1] != 0:
            raise ValueError(
                f"drive must run depot to depot with at least one customer, got {seq}"
            )
        if any(v == 0 for v in seq[1:-1]):
            raise ValueError(f"drive interior may not contain the depot, got {seq}")

    @property
    def interior(self) -> Tuple[int, ...]:
        return self.visit_sequence[1:-1]


@dataclass(frozen=True)
class Solution:
    """Drives in execution order (grouped per vehicle, earliest first).

    ``schedule`` aligns with ``drives``: for every drive a tuple of
    (arrival, departure) pairs, one per entry of the visit sequence.  For the
    opening depot entry both values equal the depot departure; for the
    closing one both equal the return time.  A solution without a schedule is
    valid input everywhere; evaluation recomputes schedules from scratch.
    """

    drives: Tuple[Drive, ...]
    schedule: Optional[Tuple[Tuple[Tuple[float, float], ...], ...]] = None

    def visited_customers(self) -> Tuple[int, ...]:
        out = []
        for d in self.drives:
            out.extend(d.interior)
        return tuple(out)


def validate_instance(instance: Instance) -> list:
    """Check structural soundness; returns a list of violation descriptions.

    Violations are data, not exceptions: an empty list means the instance is
    well formed.  Every entry names the offending entity and the broken rule.
    """
    out: list = []
    locs = instance.locations
    n = len(locs)

    if n == 0:
        return ["instance: no locations"]

    for idx, loc in enumerate(locs):
        if loc.id != idx:
            out.append(f"location {loc.id}: id must equal its index {idx}")
        if loc.demand_mass < 0 or loc.demand_volume < 0:
            out.append(f"location {loc.id}: negative demand")
        if loc.service_duration < 0:
            out.append(f"location {loc.id}: negative service duration")
        if not loc.hard_window.contains(loc.soft_window):
            out.append(
                f"location {loc.id}: soft window [{loc.soft_window.begin}, "
                f"{loc.soft_window.end}] extends outside hard window "
                f"[{loc.hard_window.begin}, {loc.hard_window.end}]"
            )

    depot = locs[0]
    if depot.demand_mass != 0 or depot.demand_volume != 0:
        out.append("location 0: depot demand must be zero")
    if depot.service_duration != 0:
        out.append("location 0: depot service duration must be zero")

    if len(instance.vehicles) == 0:
        out.append("instance: no vehicles")
    for idx, veh in enumerate(instance.vehicles):
        if veh.id != idx:
            out.append(f"vehicle {veh.id}: id must equal its index {idx}")
        if veh.capacity_mass <= 0 and veh.capacity_volume <= 0:
            out.append(f"vehicle {veh.id}: no positive capacity in any dimension")
        if veh.capacity_mass < 0 or veh.capacity_volume < 0:
            out.append(f"vehicle {veh.id}: negative capacity")
        if not veh.hard_window.contains(veh.soft_window):
            out.append(f"vehicle {veh.id}: soft window extends outside hard window")
        cm = veh.cost_model
        if cm.base_rate < 0 or cm.mass_factor < 0 or cm.fuel_price < 0:
            out.append(f"vehicle {veh.id}: negative fuel model coefficient")

    dm = instance.distance_matrix
    if dm.shape != (n, n):
        out.append(f"distance matrix: shape {dm.shape} does not match {n} locations")
    else:
        if np.any(np.diag(dm) != 0):
            out.append("distance matrix: nonzero diagonal")
        if np.any(dm < 0):
            out.append("distance matrix: negative entry")

    tt = instance.travel_time
    k = tt.section_count
    if tt.times.shape != (k, n, n):
        out.append(
            f"travel time tensor: shape {tt.times.shape} does not match "
            f"{k} sections over {n} locations"
        )
    else:
        if np.any(tt.times < 0):
            out.append("travel time tensor: negative entry")
        for s in range(k):
            if np.any(np.diag(tt.times[s]) != 0):
                out.append(f"travel time tensor: nonzero diagonal in section {s}")
                break
        out.extend(non_passing_violations(tt))

        # Fastest attainable speed anywhere decides whether a fuel model can
        # ever drive its speed term negative.  Skipped when the distance
        # matrix shape is already known to be wrong.
        vmax = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            for s in range(k if dm.shape == (n, n) else 0):
                t = tt.times[s]
                mask = (dm > 0) & (t > 0)
                if np.any(mask):
                    vmax = max(vmax, float(np.max(dm[mask] / t[mask])) * 3600.0)
                bad = (dm > 0) & (t <= 0)
                if np.any(bad):
                    i, j = np.argwhere(bad)[0]
                    out.append(
                        f"travel time tensor: section {s} arc ({i}, {j}) has zero "
                        "time over positive distance"
                    )
        for veh in instance.vehicles:
            sf = veh.cost_model.speed_factor
            if sf < 0:
                out.append(f"vehicle {veh.id}: negative speed factor")
            elif sf > 0 and vmax > 0 and sf * vmax >= 1.0:
                out.append(
                    f"vehicle {veh.id}: speed factor {sf} times maximum speed "
                    f"{vmax:.3f} km/h reaches 1; fuel consumption would go negative"
                )

    return out
