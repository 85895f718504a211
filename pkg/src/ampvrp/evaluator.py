"""Schedule propagation and cost evaluation.

The cost of a solution splits into travel cost (seconds or money depending
on the instance objective), soft-window penalties for locations and for
vehicles, and a list of hard-constraint violations.  Evaluation is a pure
function of (instance, solution): identical inputs produce bit-identical
breakdowns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .engine import EvaluationError, HARD_EPS, Working, arrays_for
from .model import Instance, ObjectiveKind, PenaltyParams, Solution, TimeWindow, Vehicle
from .timedep import lookup, section_of

__all__ = [
    "CostBreakdown", "EvaluationError", "arc_cost", "soft_window_penalty",
    "propagate_schedule", "evaluate",
]


@dataclass(frozen=True)
class CostBreakdown:
    """Additive cost report; ``total`` is exactly the sum of the five terms."""

    travel_cost: float
    location_early_penalty: float
    location_late_penalty: float
    vehicle_early_penalty: float
    vehicle_late_penalty: float
    total: float
    hard_violations: Tuple[str, ...] = ()
    exceeded_soft_seconds: float = 0.0
    clamped_lookups: int = 0

    @property
    def feasible(self) -> bool:
        return not self.hard_violations


def soft_window_penalty(params: PenaltyParams, window: TimeWindow,
                        b: float, e: float) -> Tuple[float, float]:
    """Early and late penalty for a visit arriving at ``b``, leaving at ``e``.

    Early (b before the soft begin): fixed part, linear part in how early the
    arrival is, and a part for the time spent on site before the window
    opens.  Late (e after the soft end): fixed part, linear part in how late
    the departure is, and a part for the time spent on site after the window
    closes.
    """
    early = 0.0
    late = 0.0
    if b < window.begin:
        early = (params.early_fixed
                 + params.early_per_second * (window.begin - b)
                 + params.early_duration_per_second * (min(e, window.begin) - b))
    if e > window.end:
        late = (params.late_fixed
                + params.late_per_second * (e - window.end)
                + params.late_duration_per_second * (e - max(b, window.end)))
    return early, late


def arc_cost(instance: Instance, vehicle: Vehicle, i: int, j: int,
             departure: float, load_mass: float = 0.0) -> float:
    """Cost of one arc for the given vehicle, load and departure time.

    Time objective: the travel time itself.  Monetary objective: fuel price
    times distance times consumption, where consumption grows linearly with
    the carried mass and shrinks linearly with speed.  Raises
    :class:`EvaluationError` when the speed term is not positive.
    """
    t = lookup(instance.travel_time, i, j, departure)
    if instance.objective_kind is ObjectiveKind.TRAVEL_TIME:
        return t
    d = float(instance.distance_matrix[i, j])
    if d <= 0.0:
        return 0.0
    if t <= 0.0:
        raise EvaluationError(
            f"arc ({i}, {j}): zero travel time over positive distance"
        )
    cm = vehicle.cost_model
    term = 1.0 - cm.speed_factor * (d / t * 3600.0)
    if term <= 0.0:
        raise EvaluationError(
            f"arc ({i}, {j}): speed term of the fuel model is not positive"
        )
    return cm.fuel_price * d * (cm.base_rate + cm.mass_factor * load_mass) * term


def _group_by_vehicle(instance: Instance, solution: Solution
                      ) -> Tuple[Dict[int, List[int]], Dict[int, List[List[int]]]]:
    """Map vehicle id to its drive indices and interiors, in solution order."""
    n = instance.n_locations
    nv = len(instance.vehicles)
    drive_idx: Dict[int, List[int]] = {}
    interiors: Dict[int, List[List[int]]] = {}
    for di, drive in enumerate(solution.drives):
        if not 0 <= drive.vehicle_id < nv:
            raise ValueError(f"drive {di}: unknown vehicle {drive.vehicle_id}")
        for loc in drive.interior:
            if not 0 < loc < n:
                raise ValueError(f"drive {di}: unknown location {loc}")
        drive_idx.setdefault(drive.vehicle_id, []).append(di)
        interiors.setdefault(drive.vehicle_id, []).append(list(drive.interior))
    return drive_idx, interiors


def _describe_vehicle(instance: Instance, vid: int, drive_ids: List[int],
                      chains: List[List[int]]) -> List[str]:
    """Slow schedule re-walk that names each hard violation of one vehicle."""
    out: List[str] = []
    veh = instance.vehicles[vid]
    locs = instance.locations
    prev_end = veh.hard_window.begin
    for di, interior in zip(drive_ids, chains):
        load_m = sum(locs[c].demand_mass for c in interior)
        load_v = sum(locs[c].demand_volume for c in interior)
        if load_m > veh.capacity_mass + HARD_EPS:
            out.append(
                f"drive {di} on vehicle {vid}: mass load {load_m:g} exceeds "
                f"capacity {veh.capacity_mass:g}"
            )
        if load_v > veh.capacity_volume + HARD_EPS:
            out.append(
                f"drive {di} on vehicle {vid}: volume load {load_v:g} exceeds "
                f"capacity {veh.capacity_volume:g}"
            )
        t_now = max(prev_end, veh.hard_window.begin)
        cur = 0
        for c in interior:
            if not locs[c].required_skills <= veh.skills:
                missing = sorted(locs[c].required_skills - veh.skills)
                out.append(
                    f"location {c} on drive {di}: vehicle {vid} lacks required "
                    f"skills {missing}"
                )
            arr = t_now + lookup(instance.travel_time, cur, c, t_now)
            start = max(arr, locs[c].hard_window.begin)
            e_t = start + locs[c].service_duration
            if e_t > locs[c].hard_window.end + HARD_EPS:
                out.append(
                    f"location {c} on drive {di}: departure {e_t:.3f} after hard "
                    f"window end {locs[c].hard_window.end:g}"
                )
            t_now = e_t
            cur = c
        t_now += lookup(instance.travel_time, cur, 0, t_now)
        prev_end = t_now
    if prev_end > veh.hard_window.end + HARD_EPS:
        out.append(
            f"vehicle {vid}: returns at {prev_end:.3f} after hard window end "
            f"{veh.hard_window.end:g}"
        )
    return out


def evaluate(instance: Instance, solution: Solution) -> CostBreakdown:
    """Full cost breakdown of a solution; recomputes all schedules."""
    arr = arrays_for(instance)
    drive_ids, interiors = _group_by_vehicle(instance, solution)
    w = Working(arr)

    travel = loc_e = loc_l = veh_e = veh_l = exceeded = 0.0
    clamps = 0
    hard: List[str] = []

    for vid in sorted(interiors):
        ev = w.eval_drives(vid, interiors[vid])
        travel += ev.travel
        loc_e += ev.loc_early
        loc_l += ev.loc_late
        veh_e += ev.veh_early
        veh_l += ev.veh_late
        exceeded += ev.exceeded
        clamps += ev.clamps
        if ev.hard:
            hard.extend(_describe_vehicle(instance, vid, drive_ids[vid],
                                          interiors[vid]))

    counts = np.zeros(instance.n_locations, dtype=int)
    for drive in solution.drives:
        for c in drive.interior:
            counts[c] += 1
    for c in range(1, instance.n_locations):
        if counts[c] == 0:
            hard.append(f"location {c}: never visited")
        elif counts[c] > 1:
            hard.append(f"location {c}: visited {counts[c]} times, must be exactly 1")

    total = travel + loc_e + loc_l + veh_e + veh_l
    return CostBreakdown(
        travel_cost=travel,
        location_early_penalty=loc_e,
        location_late_penalty=loc_l,
        vehicle_early_penalty=veh_e,
        vehicle_late_penalty=veh_l,
        total=total,
        hard_violations=tuple(hard),
        exceeded_soft_seconds=exceeded,
        clamped_lookups=clamps,
    )


def propagate_schedule(instance: Instance, solution: Solution) -> Solution:
    """Return the same drives with arrival/departure pairs filled in.

    A vehicle's first drive leaves the depot at its hard window begin; each
    further drive leaves when the previous one returns (never before the
    window begin).  Arrivals before a location's hard begin wait; departure
    is service start plus service duration.
    """
    arr = arrays_for(instance)
    drive_ids, interiors = _group_by_vehicle(instance, solution)
    w = Working(arr)
    per_drive: Dict[int, Tuple[Tuple[float, float], ...]] = {}

    for vid in sorted(interiors):
        chains = interiors[vid]
        total = sum(len(c) for c in chains) + 2 * len(chains)
        sb = np.empty(total, dtype=np.float64)
        se = np.empty(total, dtype=np.float64)
        w.eval_drives(vid, chains, sched_out=(sb, se))
        pos = 0
        for di, chain in zip(drive_ids[vid], chains):
            m = len(chain) + 2
            per_drive[di] = tuple(
                (float(sb[pos + t]), float(se[pos + t])) for t in range(m)
            )
            pos += m

    schedule = tuple(per_drive[di] for di in range(len(solution.drives)))
    return Solution(drives=solution.drives, schedule=schedule)
