"""Shared builders for compact test instances."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from ampvrp.model import (
    FuelCostModel,
    Instance,
    Location,
    ObjectiveKind,
    PenaltyParams,
    TimeWindow,
    Vehicle,
)
from ampvrp.timedep import TravelTimeTensor

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
CMT_DIR = DATA_DIR / "cmt"

OPEN = TimeWindow(0.0, 1.0e6)

# The published optimal CMT1 routes (cost 524.61 with real-valued distances).
CMT1_OPTIMAL_ROUTES = (
    (32, 1, 22, 20, 35, 36, 3, 28, 31, 26, 8),
    (6, 14, 25, 24, 43, 7, 23, 48, 27),
    (11, 2, 29, 21, 16, 50, 34, 30, 9, 38),
    (12, 37, 44, 15, 45, 33, 39, 10, 49, 5, 46),
    (47, 4, 17, 42, 19, 40, 41, 13, 18),
)


def cmt_path(name: str) -> Path:
    return CMT_DIR / f"{name}.txt"


def has_cmt(name: str) -> bool:
    return cmt_path(name).exists()


def _windows(value, count: int, fallback: TimeWindow):
    if value is None:
        return [fallback] * count
    if isinstance(value, TimeWindow):
        return [value] * count
    return list(value)


def make_instance(
    coords: Sequence[Tuple[float, float]] = ((0.0, 0.0), (1.0, 0.0), (2.0, 0.0)),
    demands: Optional[Sequence[float]] = None,
    volumes: Optional[Sequence[float]] = None,
    service: float = 0.0,
    capacity: float = 10.0,
    capacity_volume: float = 0.0,
    n_vehicles: int = 2,
    hard=None,
    soft=None,
    vehicle_hard: Optional[TimeWindow] = None,
    vehicle_soft: Optional[TimeWindow] = None,
    speed_kmh: float = 3600.0,
    section_scalers: Optional[Sequence[float]] = None,
    boundaries: Optional[Sequence[float]] = None,
    skills: Optional[Sequence[frozenset]] = None,
    vehicle_skills: Optional[Sequence[frozenset]] = None,
    location_penalties: PenaltyParams = PenaltyParams(),
    vehicle_penalties: PenaltyParams = PenaltyParams(),
    objective: ObjectiveKind = ObjectiveKind.TRAVEL_TIME,
    fuel: Optional[FuelCostModel] = None,
    name: str = "toy",
) -> Instance:
    """Small instance builder; defaults give time equal to distance.

    ``coords[0]`` is the depot.  Scalar window arguments apply to every
    customer; sequences must cover each customer separately.
    """
    pts = np.asarray(coords, dtype=float)
    n = len(pts)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))

    base_time = dist / speed_kmh * 3600.0
    scalers = [1.0] if section_scalers is None else list(section_scalers)
    times = np.stack([base_time * s for s in scalers])
    if boundaries is None:
        boundaries = np.linspace(0.0, OPEN.end, len(scalers) + 1)
    tensor = TravelTimeTensor(np.asarray(boundaries, dtype=float), times)

    n_cust = n - 1
    demands = [5.0] * n_cust if demands is None else list(demands)
    volumes = [0.0] * n_cust if volumes is None else list(volumes)
    hards = _windows(hard, n_cust, OPEN)
    softs = _windows(soft, n_cust, None)
    skills = [frozenset()] * n_cust if skills is None else list(skills)

    locations = [Location(id=0, demand_mass=0.0, demand_volume=0.0,
                          service_duration=0.0, hard_window=OPEN,
                          soft_window=OPEN, x=pts[0, 0], y=pts[0, 1])]
    for i in range(1, n):
        hw = hards[i - 1]
        sw = softs[i - 1] or hw
        locations.append(Location(
            id=i, demand_mass=demands[i - 1], demand_volume=volumes[i - 1],
            service_duration=service, hard_window=hw, soft_window=sw,
            required_skills=skills[i - 1], x=pts[i, 0], y=pts[i, 1]))

    vhw = vehicle_hard or OPEN
    vsw = vehicle_soft or vhw
    vskills = ([frozenset()] * n_vehicles if vehicle_skills is None
               else list(vehicle_skills))
    cost = fuel or FuelCostModel(0.0, 0.0, 0.0, 0.0)
    vehicles = tuple(Vehicle(id=v, capacity_mass=capacity,
                             capacity_volume=capacity_volume,
                             hard_window=vhw, soft_window=vsw,
                             skills=vskills[v], cost_model=cost)
                     for v in range(n_vehicles))

    return Instance(
        locations=tuple(locations),
        vehicles=vehicles,
        distance_matrix=dist,
        travel_time=tensor,
        location_penalties=location_penalties,
        vehicle_penalties=vehicle_penalties,
        objective_kind=objective,
        name=name,
    )


def line_instance(n_customers: int, spacing: float = 1.0, **kwargs) -> Instance:
    """Customers in a row right of the depot, one unit apart by default."""
    coords = [(0.0, 0.0)] + [(spacing * (i + 1), 0.0)
                             for i in range(n_customers)]
    return make_instance(coords=coords, **kwargs)
