"""Synthetic instance generators covering every supported routing variant.

``make_rich_instance`` builds one fixed delivery-day scenario: a depot and
117 customers spread over 15 clusters (city centre, districts, suburbs,
outlying towns, two ferry islands), a heterogeneous six-vehicle fleet with
fuel-based costs, hard and soft time windows, a skill-gated island area, one
order too large for any single vehicle, and rush-hour congestion expanded
into 96 travel-time sections.  ``random_variant_instance`` draws small
instances with a random mix of the same features, sized for the exact
reference solver, and ``make_clustered_cvrp`` produces classic clustered
capacity-only instances of any size.
"""

from __future__ import annotations

import math
import random
from typing import Dict, List, Optional, Tuple

import numpy as np

from .model import (
    FuelCostModel,
    Instance,
    Location,
    ObjectiveKind,
    PenaltyParams,
    TimeWindow,
    Vehicle,
)
from .timedep import TimeProfile, TravelTimeTensor, build_from_profiles

DAY_BEGIN = 21600.0
DAY_END = 61200.0
SOFT_RETURN = 48600.0
FERRY_SECONDS = 2100.0
ROAD_FACTOR = 1.3

_CLUSTER_CENTRES = (
    (0.0, 0.0),
    (4.5, 2.0), (-3.8, 3.4), (-2.9, -4.2), (3.6, -3.9),
    (9.5, 6.5), (-10.2, 2.8), (1.5, -10.8),
    (19.0, 14.5), (-21.5, 8.0), (-14.0, -19.5), (24.0, -6.5), (8.5, 23.0),
    (30.0, -20.0), (36.5, -13.5),
)
_CLUSTER_SIZES = (12, 11, 11, 11, 11, 10, 10, 10, 5, 5, 5, 5, 5, 3, 3)
_CLUSTER_RADII = (2.2, 1.8, 1.8, 1.8, 1.8, 2.0, 2.0, 2.0,
                  1.6, 1.6, 1.6, 1.6, 1.6, 1.1, 1.1)

_KIND_OF_CLUSTER = ("city",) * 5 + ("suburb",) * 3 + ("town",) * 5 + ("island",) * 2

_SPEED_KMH = {
    ("city", "city"): 29.0,
    ("city", "suburb"): 36.0,
    ("suburb", "suburb"): 41.0,
    ("city", "town"): 47.0,
    ("suburb", "town"): 50.0,
    ("town", "town"): 56.0,
    ("city", "island"): 46.0,
    ("suburb", "island"): 49.0,
    ("town", "island"): 54.0,
    ("island", "island"): 38.0,
}

_PEAK_SCALER = {
    ("city", "city"): 1.55,
    ("city", "suburb"): 1.42,
    ("suburb", "suburb"): 1.32,
    ("city", "town"): 1.18,
    ("suburb", "town"): 1.15,
    ("town", "town"): 1.10,
    ("city", "island"): 1.12,
    ("suburb", "island"): 1.10,
    ("town", "island"): 1.06,
    ("island", "island"): 1.04,
}


def _kind_pair(a: str, b: str) -> Tuple[str, str]:
    order = ("city", "suburb", "town", "island")
    return (a, b) if order.index(a) <= order.index(b) else (b, a)


def _euclid_matrix(coords: List[Tuple[float, float]]) -> np.ndarray:
    pts = np.asarray(coords, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


def _rush_profile(peak: float) -> TimeProfile:
    """Congestion shape: free flow overnight, ramp from 06:00, peak held.

    The scaler never decreases over the day, so the expanded section tensor
    already satisfies the non-passing property without any repair.
    """
    d = peak - 1.0
    return TimeProfile(samples=(
        (0.0, 1.0),
        (21600.0, 1.0 + 0.15 * d),
        (23400.0, 1.0 + 0.45 * d),
        (25200.0, 1.0 + 0.75 * d),
        (27000.0, 1.0 + 0.92 * d),
        (28800.0, 1.0 + d),
    ))


def rich_cluster_kind(cluster: int) -> str:
    """Terrain class of a cluster in the delivery-day scenario."""
    return _KIND_OF_CLUSTER[cluster]


def _is_water_crossing(ca: int, cb: int) -> bool:
    if ca == cb:
        return False
    return rich_cluster_kind(ca) == "island" or rich_cluster_kind(cb) == "island"


def make_rich_instance(seed: int = 7) -> Instance:
    """Deterministic 118-location delivery day exercising every variant.

    The two island clusters are reachable only by ferry: their customers
    require the "ferry" skill (held by two vehicles) and every arc touching
    an island carries a fixed crossing supplement in the time matrices.  One
    city customer orders more than any vehicle can carry and must be split
    before solving.  All soft windows leave ample slack, so a good solution
    finishes with no soft-window lateness at all.
    """
    rng = random.Random(seed)

    coords: List[Tuple[float, float]] = [(0.0, 0.0)]
    cluster_of: List[int] = [0]
    for ci, (centre, count, radius) in enumerate(
            zip(_CLUSTER_CENTRES, _CLUSTER_SIZES, _CLUSTER_RADII)):
        for _ in range(count):
            ang = rng.uniform(0.0, 2.0 * math.pi)
            rad = radius * math.sqrt(rng.uniform(0.04, 1.0))
            coords.append((centre[0] + rad * math.cos(ang),
                           centre[1] + rad * math.sin(ang)))
            cluster_of.append(ci)
    n = len(coords)

    dist = _euclid_matrix(coords) * ROAD_FACTOR
    np.fill_diagonal(dist, 0.0)

    static = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            pair = _kind_pair(rich_cluster_kind(cluster_of[i]),
                              rich_cluster_kind(cluster_of[j]))
            static[i, j] = dist[i, j] / _SPEED_KMH[pair] * 3600.0
            if _is_water_crossing(cluster_of[i], cluster_of[j]):
                static[i, j] += FERRY_SECONDS

    profiles: Dict[Tuple[int, int], TimeProfile] = {}
    shapes = {pair: _rush_profile(peak) for pair, peak in _PEAK_SCALER.items()}
    n_clusters = len(_CLUSTER_CENTRES)
    for ca in range(n_clusters):
        for cb in range(n_clusters):
            pair = _kind_pair(rich_cluster_kind(ca), rich_cluster_kind(cb))
            profiles[(ca, cb)] = shapes[pair]

    tensor = build_from_profiles(static, cluster_of, profiles,
                                 sampling_step=900.0, horizon=(0.0, 86400.0))

    day = TimeWindow(DAY_BEGIN, DAY_END)
    locations = [Location(id=0, demand_mass=0.0, demand_volume=0.0,
                          service_duration=0.0, hard_window=day,
                          soft_window=day, cluster=0,
                          x=coords[0][0], y=coords[0][1])]
    split_customer = None
    for i in range(1, n):
        mass = round(rng.uniform(18.0, 150.0), 1)
        volume = round(rng.uniform(0.12, 1.55), 2)
        service = 60.0 * rng.randint(2, 10)
        soft_end = 46800.0 if rng.random() < 0.35 else 59400.0
        skills = frozenset()
        if rich_cluster_kind(cluster_of[i]) == "island":
            skills = frozenset({"ferry"})
        if split_customer is None and cluster_of[i] == 4:
            # One order exceeds every vehicle: forces demand splitting.
            mass, volume, service = 2600.0, 5.4, 900.0
            split_customer = i
        locations.append(Location(
            id=i, demand_mass=mass, demand_volume=volume,
            service_duration=service, hard_window=day,
            soft_window=TimeWindow(DAY_BEGIN, soft_end),
            required_skills=skills, cluster=cluster_of[i],
            x=coords[i][0], y=coords[i][1]))

    late_only = PenaltyParams(late_fixed=1.5, late_per_second=0.001,
                              late_duration_per_second=0.0007)
    soft_day = TimeWindow(DAY_BEGIN, SOFT_RETURN)
    fleet_spec = (
        (1400.0, 14.0, 0.31, 7.0e-5, 0.0045, False),
        (1200.0, 12.0, 0.28, 6.5e-5, 0.0050, True),
        (1000.0, 10.0, 0.25, 6.0e-5, 0.0050, False),
        (1000.0, 10.0, 0.25, 6.0e-5, 0.0055, False),
        (800.0, 8.0, 0.21, 5.0e-5, 0.0055, True),
        (800.0, 8.0, 0.21, 5.0e-5, 0.0055, False),
    )
    vehicles = []
    for vid, (cm, cv, base, mum, muv, ferry) in enumerate(fleet_spec):
        vehicles.append(Vehicle(
            id=vid, capacity_mass=cm, capacity_volume=cv,
            hard_window=day, soft_window=soft_day,
            skills=frozenset({"ferry"}) if ferry else frozenset(),
            cost_model=FuelCostModel(base_rate=base, mass_factor=mum,
                                     speed_factor=muv, fuel_price=1.52)))

    return Instance(
        locations=tuple(locations),
        vehicles=tuple(vehicles),
        distance_matrix=dist,
        travel_time=tensor,
        location_penalties=PenaltyParams(
            early_fixed=1.5, early_per_second=0.001,
            early_duration_per_second=0.0007,
            late_fixed=1.5, late_per_second=0.001,
            late_duration_per_second=0.0007),
        vehicle_penalties=late_only,
        objective_kind=ObjectiveKind.MONETARY,
        name="day118",
    )


def random_variant_instance(rng: random.Random, max_customers: int = 7,
                            monetary: Optional[bool] = None) -> Instance:
    """Small random instance mixing windows, skills, fleets and congestion.

    Sized for exhaustive cross-checking: at most ``max_customers`` customers
    before any demand splitting.  Hard windows are drawn generously enough
    that serving every customer on its own trip always fits, so a feasible
    solution is guaranteed to exist.  With some probability one customer gets
    a demand above the largest capacity and needs splitting (adding at most
    one extra visit), one skill gates part of the fleet, and the objective
    switches to fuel money instead of travel time.
    """
    n_cust = rng.randint(3, max_customers)
    coords = [(rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0))
              for _ in range(n_cust + 1)]
    dist = _euclid_matrix(coords)
    n = n_cust + 1

    speed = rng.uniform(20.0, 60.0)
    base_time = dist / speed * 3600.0
    np.fill_diagonal(base_time, 0.0)
    k = rng.randint(1, 4)
    scalers = np.cumsum([1.0] + [rng.uniform(0.0, 0.3) for _ in range(k - 1)])
    times = np.stack([base_time * s for s in scalers])
    boundaries = np.linspace(0.0, 21600.0, k + 1)
    tensor = TravelTimeTensor(boundaries, times)

    nv = rng.randint(2, 3)
    horizon = TimeWindow(0.0, 50000.0)

    use_skill = rng.random() < 0.4
    skilled_vehicles = set()
    if use_skill:
        skilled_vehicles = set(rng.sample(range(nv), rng.randint(1, nv)))

    vehicles = []
    if monetary is None:
        monetary = rng.random() < 0.5
    for vid in range(nv):
        cost = FuelCostModel(0.0, 0.0, 0.0, 0.0)
        if monetary:
            cost = FuelCostModel(base_rate=rng.uniform(0.2, 0.32),
                                 mass_factor=rng.uniform(4e-5, 9e-5),
                                 speed_factor=rng.uniform(0.003, 0.006),
                                 fuel_price=rng.uniform(1.3, 1.7))
        soft_end = rng.uniform(25000.0, 45000.0)
        vehicles.append(Vehicle(
            id=vid,
            capacity_mass=rng.uniform(40.0, 80.0),
            capacity_volume=rng.uniform(2.0, 5.0),
            hard_window=horizon,
            soft_window=TimeWindow(0.0, soft_end),
            skills=frozenset({"lift"}) if vid in skilled_vehicles else frozenset(),
            cost_model=cost))

    locations = [Location(id=0, demand_mass=0.0, demand_volume=0.0,
                          service_duration=0.0, hard_window=horizon,
                          soft_window=horizon, x=coords[0][0], y=coords[0][1])]
    gated = set()
    if use_skill:
        gated = set(rng.sample(range(1, n), rng.randint(1, min(2, n_cust))))
    split_pick = 0
    if n_cust <= 5 and rng.random() < 0.25:
        split_pick = rng.randint(1, n_cust)
    for i in range(1, n):
        mass = rng.uniform(5.0, 25.0)
        volume = rng.uniform(0.05, 1.0)
        if i == split_pick:
            top = max(v.capacity_mass for v in vehicles)
            mass = top * rng.uniform(1.2, 1.8)
        style = rng.random()
        if style < 0.5:
            hard = horizon
        elif style < 0.75:
            hard = TimeWindow(rng.uniform(0.0, 4000.0), 50000.0)
        else:
            hard = TimeWindow(0.0, rng.uniform(15000.0, 30000.0))
        sb = hard.begin + rng.uniform(0.0, 1000.0)
        se = max(sb + 1000.0, hard.end - rng.uniform(0.0, 6000.0))
        soft = TimeWindow(sb, min(se, hard.end))
        locations.append(Location(
            id=i, demand_mass=mass, demand_volume=volume,
            service_duration=rng.uniform(60.0, 300.0),
            hard_window=hard, soft_window=soft,
            required_skills=frozenset({"lift"}) if i in gated else frozenset(),
            x=coords[i][0], y=coords[i][1]))

    def pen() -> PenaltyParams:
        return PenaltyParams(
            early_fixed=rng.uniform(0.5, 2.0),
            early_per_second=rng.uniform(0.0005, 0.002),
            early_duration_per_second=rng.uniform(0.0003, 0.001),
            late_fixed=rng.uniform(0.5, 2.0),
            late_per_second=rng.uniform(0.0005, 0.002),
            late_duration_per_second=rng.uniform(0.0003, 0.001))

    return Instance(
        locations=tuple(locations),
        vehicles=tuple(vehicles),
        distance_matrix=dist,
        travel_time=tensor,
        location_penalties=pen(),
        vehicle_penalties=PenaltyParams(
            late_fixed=rng.uniform(0.5, 2.0),
            late_per_second=rng.uniform(0.0005, 0.002),
            late_duration_per_second=rng.uniform(0.0003, 0.001)),
        objective_kind=ObjectiveKind.MONETARY if monetary
        else ObjectiveKind.TRAVEL_TIME,
        name=f"variant{n_cust}",
    )


def make_clustered_cvrp(n_customers: int = 100, n_clusters: int = 10,
                        capacity: float = 200.0, seed: int = 0,
                        name: str = "clustered") -> Instance:
    """Clustered capacity-only instance in the classic benchmark style.

    Customers concentrate around ring-placed cluster centres, one vehicle is
    available per customer, travel time numerically equals distance, and no
    window ever binds.  Useful as a stand-in where the published clustered
    benchmark files are not available.
    """
    rng = random.Random(seed)
    horizon = TimeWindow(0.0, 1.0e7)

    centres = []
    ring = 30.0
    for ci in range(n_clusters):
        ang = 2.0 * math.pi * ci / n_clusters + rng.uniform(-0.15, 0.15)
        rad = ring * rng.uniform(0.55, 1.0)
        centres.append((rad * math.cos(ang), rad * math.sin(ang)))

    coords = [(0.0, 0.0)]
    cluster_of = [0]
    for i in range(n_customers):
        ci = i % n_clusters
        coords.append((centres[ci][0] + rng.gauss(0.0, 2.5),
                       centres[ci][1] + rng.gauss(0.0, 2.5)))
        cluster_of.append(ci)

    dist = _euclid_matrix(coords)
    tensor = TravelTimeTensor(np.array([0.0, 1.0e7]), dist[None, :, :].copy())

    locations = [Location(id=0, demand_mass=0.0, demand_volume=0.0,
                          service_duration=0.0, hard_window=horizon,
                          soft_window=horizon, cluster=0,
                          x=coords[0][0], y=coords[0][1])]
    for i in range(1, n_customers + 1):
        locations.append(Location(
            id=i, demand_mass=float(rng.randint(8, 30)), demand_volume=0.0,
            service_duration=0.0, hard_window=horizon, soft_window=horizon,
            cluster=cluster_of[i], x=coords[i][0], y=coords[i][1]))

    vehicles = tuple(Vehicle(id=v, capacity_mass=capacity, capacity_volume=0.0,
                             hard_window=horizon, soft_window=horizon)
                     for v in range(n_customers))

    return Instance(
        locations=tuple(locations),
        vehicles=vehicles,
        distance_matrix=dist,
        travel_time=tensor,
        objective_kind=ObjectiveKind.TRAVEL_TIME,
        name=name,
    )
