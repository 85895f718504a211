"""Demand splitting: turn oversized orders into vehicle-sized split visits.

A customer whose demand exceeds the largest vehicle capacity in either
dimension can never be served in one visit.  Splitting replaces it by
several co-located split vertices whose demands sum exactly to the original;
routing then treats them as ordinary customers, which is what makes split
delivery possible downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .model import Instance, Location, Solution
from .timedep import TravelTimeTensor


@dataclass(frozen=True)
class SplitMap:
    """Maps expanded location ids back to the originals.

    ``origin[i]`` is the original id of expanded location i; co-located
    splits share an origin.  ``part_mass``/``part_volume`` record what each
    expanded location receives, so reports can be written without the
    expanded instance at hand.
    """

    origin: Tuple[int, ...]
    part_mass: Tuple[float, ...]
    part_volume: Tuple[float, ...]

    def parts_of(self, original_id: int) -> Tuple[int, ...]:
        return tuple(i for i, o in enumerate(self.origin) if o == original_id)

    @property
    def is_identity(self) -> bool:
        return all(i == o for i, o in enumerate(self.origin))


@dataclass(frozen=True)
class DeliveryRecord:
    """One visit of the expanded solution, expressed in original ids."""

    original_id: int
    vehicle_id: int
    drive_index: int
    mass: float
    volume: float


@dataclass(frozen=True)
class MergedReport:
    """Per-visit delivery list over original location ids."""

    deliveries: Tuple[DeliveryRecord, ...]

    def by_location(self) -> Dict[int, List[DeliveryRecord]]:
        out: Dict[int, List[DeliveryRecord]] = {}
        for rec in self.deliveries:
            out.setdefault(rec.original_id, []).append(rec)
        return out

    def delivered_mass(self, original_id: int) -> float:
        return sum(r.mass for r in self.deliveries if r.original_id == original_id)

    def delivered_volume(self, original_id: int) -> float:
        return sum(r.volume for r in self.deliveries if r.original_id == original_id)


def _split_parts(mass: float, volume: float, qm: float, qv: float
                 ) -> List[Tuple[float, float]]:
    """Greedy proportional parts, each within (qm, qv), summing exactly.

    Caps of zero or less mean the dimension is unconstrained for splitting
    purposes (nothing positive would ever fit, so splitting cannot help).
    """
    parts: List[Tuple[float, float]] = []
    rem_m, rem_v = mass, volume
    while True:
        if len(parts) > 10_000:
            raise ValueError(
                "demand would need more than 10000 split parts; fleet "
                "capacities are far too small for it")
        f = 1.0
        if qm > 0 and rem_m > qm:
            f = min(f, qm / rem_m)
        if qv > 0 and rem_v > qv:
            f = min(f, qv / rem_v)
        if f >= 1.0:
            break
        pm = min(rem_m * f, qm) if qm > 0 else rem_m * f
        pv = min(rem_v * f, qv) if qv > 0 else rem_v * f
        parts.append((pm, pv))
        rem_m -= pm
        rem_v -= pv
    # Last part carries the exact remainder so the sum reproduces the input.
    last_m = mass - sum(p[0] for p in parts)
    last_v = volume - sum(p[1] for p in parts)
    parts.append((last_m, last_v))
    return parts


def split_demands(instance: Instance) -> Tuple[Instance, SplitMap]:
    """Expand oversized customers into split vertices.

    The threshold per dimension is the largest capacity among the vehicles
    whose skills cover the customer, so every part can actually board an
    allowed vehicle; when no vehicle qualifies the fleet-wide maximum is
    used and the skill gap surfaces later in evaluation.  Split vertices
    copy the original's windows, skills, service duration, cluster and
    coordinates; travel time and distance between co-located splits are
    zero.  Returns the expanded instance and the id map; instances with
    nothing to split come back unchanged with an identity map.
    """
    fleet_qm = max((v.capacity_mass for v in instance.vehicles), default=0.0)
    fleet_qv = max((v.capacity_volume for v in instance.vehicles), default=0.0)

    def thresholds(skills) -> Tuple[float, float]:
        able = [v for v in instance.vehicles if skills <= v.skills]
        if not able:
            return fleet_qm, fleet_qv
        return (max(v.capacity_mass for v in able),
                max(v.capacity_volume for v in able))

    plan: List[Tuple[int, List[Tuple[float, float]]]] = []
    any_split = False
    for loc in instance.locations:
        qm, qv = thresholds(loc.required_skills)
        needs = ((qm > 0 and loc.demand_mass > qm)
                 or (qv > 0 and loc.demand_volume > qv))
        if needs:
            parts = _split_parts(loc.demand_mass, loc.demand_volume, qm, qv)
            any_split = True
        else:
            parts = [(loc.demand_mass, loc.demand_volume)]
        plan.append((loc.id, parts))

    if not any_split:
        ident = tuple(range(instance.n_locations))
        return instance, SplitMap(
            origin=ident,
            part_mass=tuple(l.demand_mass for l in instance.locations),
            part_volume=tuple(l.demand_volume for l in instance.locations),
        )

    origin: List[int] = []
    new_locs: List[Location] = []
    for orig_id, parts in plan:
        src = instance.locations[orig_id]
        for pm, pv in parts:
            new_locs.append(Location(
                id=len(new_locs),
                demand_mass=pm,
                demand_volume=pv,
                service_duration=src.service_duration,
                hard_window=src.hard_window,
                soft_window=src.soft_window,
                required_skills=src.required_skills,
                cluster=src.cluster,
                x=src.x,
                y=src.y,
            ))
            origin.append(orig_id)

    idx = np.array(origin, dtype=int)
    dist = instance.distance_matrix[np.ix_(idx, idx)].copy()
    tt = instance.travel_time
    times = tt.times[:, idx][:, :, idx].copy()
    # Co-located splits cost nothing to hop between.
    same = idx[:, None] == idx[None, :]
    dist[same] = 0.0
    times[:, same] = 0.0

    expanded = Instance(
        locations=tuple(new_locs),
        vehicles=instance.vehicles,
        distance_matrix=dist,
        travel_time=TravelTimeTensor(tt.section_boundaries.copy(), times),
        location_penalties=instance.location_penalties,
        vehicle_penalties=instance.vehicle_penalties,
        objective_kind=instance.objective_kind,
        name=instance.name,
    )
    smap = SplitMap(
        origin=tuple(origin),
        part_mass=tuple(l.demand_mass for l in new_locs),
        part_volume=tuple(l.demand_volume for l in new_locs),
    )
    return expanded, smap


def merge_back(solution: Solution, split_map: SplitMap) -> MergedReport:
    """Express an expanded-instance solution in original location ids.

    Pure reporting: the solution itself (drives, costs) is untouched.  Each
    visit becomes one delivery record carrying the split part quantities, so
    a split customer shows up once per serving drive with quantities summing
    to its original demand.
    """
    records: List[DeliveryRecord] = []
    for di, drive in enumerate(solution.drives):
        for loc in drive.interior:
            records.append(DeliveryRecord(
                original_id=split_map.origin[loc],
                vehicle_id=drive.vehicle_id,
                drive_index=di,
                mass=split_map.part_mass[loc],
                volume=split_map.part_volume[loc],
            ))
    return MergedReport(deliveries=tuple(records))
