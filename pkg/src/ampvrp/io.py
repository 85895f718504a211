"""Instance parsing and all file emission.

Two instance formats are supported.  The classic benchmark layout is plain
whitespace-separated numbers: a header line ``n capacity max_route_duration
service_time`` (duration 0 means unlimited), one depot coordinate line, then
n lines ``x y demand``.  Distances are unrounded Euclidean, travel time
equals distance at unit speed, and a positive duration limit becomes the
vehicle hard window [0, limit].

The rich format is a versioned YAML document covering every variant:
packages, two capacity dimensions, hard/soft windows, skills, heterogeneous
fleets, fuel models and a time-section tensor, inline or in an ``.npz``
sidecar.  Parsing rejects unknown fields and reports errors with a path to
the offending field.

All emitters produce deterministic, diff-stable text: identical inputs give
byte-identical files.
"""

from __future__ import annotations

import os
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import yaml

from .evaluator import CostBreakdown
from .model import (
    FuelCostModel,
    Instance,
    Location,
    ObjectiveKind,
    PenaltyParams,
    Solution,
    TimeWindow,
    Vehicle,
)
from .timedep import TimeProfile, TravelTimeTensor

CMT_HORIZON = 1.0e7


class FormatError(ValueError):
    """Parse failure with a dotted path or file position of the bad field."""

    def __init__(self, where: str, message: str) -> None:
        super().__init__(f"{where}: {message}")
        self.where = where


# ---------------------------------------------------------------------------
# classic benchmark layout


def parse_cmt(path: str) -> Instance:
    """Read an instance in the classic benchmark layout."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    rows = [(no + 1, ln.split()) for no, ln in enumerate(lines) if ln]
    if not rows:
        raise FormatError(path, "empty instance file")

    def numbers(row: Tuple[int, List[str]], count: int, what: str) -> List[float]:
        no, toks = row
        if len(toks) < count:
            raise FormatError(f"{path}:{no}",
                              f"expected {count} numbers for {what}, "
                              f"got {len(toks)}")
        try:
            return [float(t) for t in toks[:count]]
        except ValueError as exc:
            raise FormatError(f"{path}:{no}",
                              f"non-numeric value in {what}") from exc

    header = numbers(rows[0], 4, "header n/capacity/duration/service")
    n = int(header[0])
    capacity, duration, service = header[1], header[2], header[3]
    if n <= 0:
        raise FormatError(f"{path}:1",
                          f"customer count must be positive, got {n}")
    if capacity <= 0:
        raise FormatError(f"{path}:1",
                          f"capacity must be positive, got {capacity}")
    if len(rows) < n + 2:
        raise FormatError(path, f"file ends after {len(rows)} lines, "
                                f"need {n + 2} for {n} customers")

    depot_xy = numbers(rows[1], 2, "depot coordinates")
    xs = [depot_xy[0]]
    ys = [depot_xy[1]]
    dem = [0.0]
    for c in range(n):
        x, y, q = numbers(rows[2 + c], 3, f"customer {c + 1}")
        if q < 0:
            raise FormatError(f"{path}:{rows[2 + c][0]}",
                              f"negative demand {q}")
        xs.append(x)
        ys.append(y)
        dem.append(q)

    xa = np.array(xs)
    ya = np.array(ys)
    dist = np.hypot(xa[:, None] - xa[None, :], ya[:, None] - ya[None, :])
    tensor = TravelTimeTensor(np.array([0.0, CMT_HORIZON]), dist[None, :, :].copy())

    open_window = TimeWindow(0.0, CMT_HORIZON)
    veh_window = TimeWindow(0.0, duration if duration > 0 else CMT_HORIZON)
    locs = [Location(0, 0.0, 0.0, 0.0, open_window, open_window,
                     x=xs[0], y=ys[0])]
    for c in range(1, n + 1):
        locs.append(Location(c, dem[c], 0.0, service, open_window, open_window,
                             x=xs[c], y=ys[c]))
    vehicles = tuple(
        Vehicle(v, capacity, 0.0, veh_window, veh_window) for v in range(n)
    )
    name = os.path.splitext(os.path.basename(path))[0]
    return Instance(
        locations=tuple(locs),
        vehicles=vehicles,
        distance_matrix=dist,
        travel_time=tensor,
        objective_kind=ObjectiveKind.TRAVEL_TIME,
        name=name,
    )


# ---------------------------------------------------------------------------
# rich YAML format

RICH_VERSION = 1

_PENALTY_KEYS = ("early_fixed", "early_per_second", "early_duration_per_second",
                 "late_fixed", "late_per_second", "late_duration_per_second")


def _need(mapping: Mapping, key: str, where: str):
    if key not in mapping:
        raise FormatError(where, f"missing required field '{key}'")
    return mapping[key]


def _check_keys(mapping: Mapping, allowed: Sequence[str], where: str) -> None:
    if not isinstance(mapping, dict):
        raise FormatError(where, f"expected a mapping, got {type(mapping).__name__}")
    for key in mapping:
        if key not in allowed:
            raise FormatError(where, f"unknown field '{key}'")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(where, f"expected a number, got {value!r}")
    return float(value)


def _window(value, where: str) -> TimeWindow:
    if (not isinstance(value, (list, tuple)) or len(value) != 2):
        raise FormatError(where, f"expected [begin, end], got {value!r}")
    b = _number(value[0], where + "[0]")
    e = _number(value[1], where + "[1]")
    if not b < e:
        raise FormatError(where, f"begin {b} must precede end {e}")
    return TimeWindow(b, e)


def _skills(value, where: str) -> frozenset:
    if value is None:
        return frozenset()
    if not isinstance(value, list) or any(not isinstance(s, str) for s in value):
        raise FormatError(where, "expected a list of skill names")
    return frozenset(value)


def _penalties(value, where: str) -> PenaltyParams:
    if value is None:
        return PenaltyParams()
    _check_keys(value, _PENALTY_KEYS, where)
    kw = {k: _number(value[k], f"{where}.{k}") for k in value}
    return PenaltyParams(**kw)


def _matrix(value, where: str, base_dir: str, key: str) -> np.ndarray:
    if isinstance(value, str):
        full = os.path.join(base_dir, value)
        if not os.path.exists(full):
            raise FormatError(where, f"referenced file not found: {value}")
        with np.load(full) as data:
            if key not in data:
                raise FormatError(where, f"array '{key}' missing in {value}")
            return np.asarray(data[key], dtype=float)
    try:
        return np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise FormatError(where, "expected a matrix or a file reference") from None


def parse_rich(path: str) -> Instance:
    """Read a rich-format instance document."""
    base_dir = os.path.dirname(os.path.abspath(path))
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise FormatError(path, f"not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(path, "document root must be a mapping")

    _check_keys(doc, ("format_version", "name", "objective", "penalties",
                      "locations", "vehicles", "travel"), "document")
    version = _need(doc, "format_version", "document")
    if version != RICH_VERSION:
        raise FormatError("format_version",
                          f"unsupported version {version!r}, expected {RICH_VERSION}")

    name = doc.get("name", "")
    if not isinstance(name, str):
        raise FormatError("name", "expected a string")

    objective_raw = doc.get("objective", "travel_time")
    try:
        objective = ObjectiveKind(objective_raw)
    except ValueError:
        raise FormatError(
            "objective",
            f"unknown objective {objective_raw!r}; use 'travel_time' or 'monetary'",
        ) from None

    pen = doc.get("penalties") or {}
    _check_keys(pen, ("location", "vehicle"), "penalties")
    loc_pen = _penalties(pen.get("location"), "penalties.location")
    veh_pen = _penalties(pen.get("vehicle"), "penalties.vehicle")

    raw_locs = _need(doc, "locations", "document")
    if not isinstance(raw_locs, list) or not raw_locs:
        raise FormatError("locations", "expected a non-empty list")
    locations: List[Location] = []
    for pos, raw in enumerate(raw_locs):
        where = f"locations[{pos}]"
        _check_keys(raw, ("id", "x", "y", "cluster", "service_duration",
                          "hard_window", "soft_window", "required_skills",
                          "packages"), where)
        lid = raw.get("id", pos)
        if lid != pos:
            raise FormatError(f"{where}.id", f"ids must run 0..{len(raw_locs) - 1} "
                                             f"in order, got {lid}")
        mass = 0.0
        volume = 0.0
        packages = raw.get("packages") or []
        if not isinstance(packages, list):
            raise FormatError(f"{where}.packages", "expected a list")
        for pp, pkg in enumerate(packages):
            pw = f"{where}.packages[{pp}]"
            _check_keys(pkg, ("mass", "volume"), pw)
            mass += _number(pkg.get("mass", 0.0), pw + ".mass")
            volume += _number(pkg.get("volume", 0.0), pw + ".volume")
        hard = _window(_need(raw, "hard_window", where), f"{where}.hard_window")
        soft_raw = raw.get("soft_window")
        soft = _window(soft_raw, f"{where}.soft_window") if soft_raw else hard
        cluster = raw.get("cluster")
        if cluster is not None and not isinstance(cluster, int):
            raise FormatError(f"{where}.cluster", "expected an integer")
        locations.append(Location(
            id=pos,
            demand_mass=mass,
            demand_volume=volume,
            service_duration=_number(raw.get("service_duration", 0.0),
                                     f"{where}.service_duration"),
            hard_window=hard,
            soft_window=soft,
            required_skills=_skills(raw.get("required_skills"),
                                    f"{where}.required_skills"),
            cluster=cluster,
            x=_number(raw["x"], f"{where}.x") if "x" in raw else None,
            y=_number(raw["y"], f"{where}.y") if "y" in raw else None,
        ))

    raw_vehs = _need(doc, "vehicles", "document")
    if not isinstance(raw_vehs, list) or not raw_vehs:
        raise FormatError("vehicles", "expected a non-empty list")
    vehicles: List[Vehicle] = []
    for pos, raw in enumerate(raw_vehs):
        where = f"vehicles[{pos}]"
        _check_keys(raw, ("id", "capacity_mass", "capacity_volume", "hard_window",
                          "soft_window", "skills", "fuel"), where)
        vid = raw.get("id", pos)
        if vid != pos:
            raise FormatError(f"{where}.id", f"ids must run 0..{len(raw_vehs) - 1} "
                                             f"in order, got {vid}")
        hard = _window(_need(raw, "hard_window", where), f"{where}.hard_window")
        soft_raw = raw.get("soft_window")
        soft = _window(soft_raw, f"{where}.soft_window") if soft_raw else hard
        fuel = raw.get("fuel") or {}
        _check_keys(fuel, ("base_rate", "mass_factor", "speed_factor", "price"),
                    f"{where}.fuel")
        vehicles.append(Vehicle(
            id=pos,
            capacity_mass=_number(raw.get("capacity_mass", 0.0),
                                  f"{where}.capacity_mass"),
            capacity_volume=_number(raw.get("capacity_volume", 0.0),
                                    f"{where}.capacity_volume"),
            hard_window=hard,
            soft_window=soft,
            skills=_skills(raw.get("skills"), f"{where}.skills"),
            cost_model=FuelCostModel(
                base_rate=_number(fuel.get("base_rate", 0.0),
                                  f"{where}.fuel.base_rate"),
                mass_factor=_number(fuel.get("mass_factor", 0.0),
                                    f"{where}.fuel.mass_factor"),
                speed_factor=_number(fuel.get("speed_factor", 0.0),
                                     f"{where}.fuel.speed_factor"),
                fuel_price=_number(fuel.get("price", 0.0),
                                   f"{where}.fuel.price"),
            ),
        ))

    travel = _need(doc, "travel", "document")
    _check_keys(travel, ("distance_matrix", "section_boundaries", "time_tensor"),
                "travel")
    n = len(locations)
    dist = _matrix(_need(travel, "distance_matrix", "travel"),
                   "travel.distance_matrix", base_dir, "distance")
    if dist.shape != (n, n):
        raise FormatError("travel.distance_matrix",
                          f"shape {dist.shape} does not match {n} locations")
    bounds = np.asarray(_need(travel, "section_boundaries", "travel"), dtype=float) \
        if not isinstance(travel.get("section_boundaries"), str) else \
        _matrix(travel["section_boundaries"], "travel.section_boundaries",
                base_dir, "boundaries")
    times = _matrix(_need(travel, "time_tensor", "travel"),
                    "travel.time_tensor", base_dir, "times")
    if times.ndim == 2:
        times = times[None, :, :]
    try:
        tensor = TravelTimeTensor(bounds, times)
    except ValueError as exc:
        raise FormatError("travel", str(exc)) from None
    if tensor.n_locations != n:
        raise FormatError("travel.time_tensor",
                          f"covers {tensor.n_locations} locations, document has {n}")

    return Instance(
        locations=tuple(locations),
        vehicles=tuple(vehicles),
        distance_matrix=dist,
        travel_time=tensor,
        location_penalties=loc_pen,
        vehicle_penalties=veh_pen,
        objective_kind=objective,
        name=name,
    )


_INLINE_LIMIT = 50_000


def emit_rich(instance: Instance, path: str) -> None:
    """Write an instance as a rich-format document; parse_rich inverts it.

    Package lists collapse to one package per location (the instance only
    stores summed demands).  Large travel data goes to an ``.npz`` sidecar
    next to the document; small instances inline everything.
    """

    def win(w: TimeWindow) -> List[float]:
        return [float(w.begin), float(w.end)]

    def pen(p: PenaltyParams) -> Dict[str, float]:
        return {k: float(getattr(p, k)) for k in _PENALTY_KEYS}

    doc: Dict = {
        "format_version": RICH_VERSION,
        "name": instance.name,
        "objective": instance.objective_kind.value,
        "penalties": {
            "location": pen(instance.location_penalties),
            "vehicle": pen(instance.vehicle_penalties),
        },
        "locations": [],
        "vehicles": [],
    }
    for loc in instance.locations:
        row: Dict = {
            "id": loc.id,
            "service_duration": float(loc.service_duration),
            "hard_window": win(loc.hard_window),
            "soft_window": win(loc.soft_window),
            "packages": [] if loc.demand_mass == 0 and loc.demand_volume == 0
            else [{"mass": float(loc.demand_mass),
                   "volume": float(loc.demand_volume)}],
        }
        if loc.required_skills:
            row["required_skills"] = sorted(loc.required_skills)
        if loc.cluster is not None:
            row["cluster"] = loc.cluster
        if loc.x is not None:
            row["x"] = float(loc.x)
        if loc.y is not None:
            row["y"] = float(loc.y)
        doc["locations"].append(row)
    for veh in instance.vehicles:
        row = {
            "id": veh.id,
            "capacity_mass": float(veh.capacity_mass),
            "capacity_volume": float(veh.capacity_volume),
            "hard_window": win(veh.hard_window),
            "soft_window": win(veh.soft_window),
        }
        if veh.skills:
            row["skills"] = sorted(veh.skills)
        cm = veh.cost_model
        if cm != FuelCostModel(0.0, 0.0, 0.0, 0.0):
            row["fuel"] = {
                "base_rate": float(cm.base_rate),
                "mass_factor": float(cm.mass_factor),
                "speed_factor": float(cm.speed_factor),
                "price": float(cm.fuel_price),
            }
        doc["vehicles"].append(row)

    tensor = instance.travel_time
    if tensor.times.size + instance.distance_matrix.size <= _INLINE_LIMIT:
        doc["travel"] = {
            "distance_matrix": instance.distance_matrix.tolist(),
            "section_boundaries": tensor.section_boundaries.tolist(),
            "time_tensor": tensor.times.tolist(),
        }
    else:
        sidecar = os.path.splitext(path)[0] + ".tensors.npz"
        np.savez_compressed(
            sidecar,
            distance=instance.distance_matrix,
            boundaries=tensor.section_boundaries,
            times=tensor.times,
        )
        rel = os.path.basename(sidecar)
        doc["travel"] = {
            "distance_matrix": rel,
            "section_boundaries": rel,
            "time_tensor": rel,
        }

    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False, default_flow_style=None, width=100)


# ---------------------------------------------------------------------------
# tensor and profile files


def write_tensor(path: str, tensor: TravelTimeTensor) -> None:
    np.savez_compressed(path, boundaries=tensor.section_boundaries,
                        times=tensor.times)


def read_tensor(path: str) -> TravelTimeTensor:
    with np.load(path) as data:
        for key in ("boundaries", "times"):
            if key not in data:
                raise ValueError(f"{path}: array '{key}' missing")
        return TravelTimeTensor(np.asarray(data["boundaries"], dtype=float),
                                np.asarray(data["times"], dtype=float))


def parse_profiles(path: str):
    """Read a profile specification for tensor construction.

    Returns (static_times, cluster_of, profiles, sampling_step, horizon).
    """
    base_dir = os.path.dirname(os.path.abspath(path))
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise FormatError(path, f"not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(path, "document root must be a mapping")
    _check_keys(doc, ("static_times", "clusters", "sampling_step", "horizon",
                      "profiles"), "document")
    static = _matrix(_need(doc, "static_times", "document"), "static_times",
                     base_dir, "static")
    clusters = _need(doc, "clusters", "document")
    if not isinstance(clusters, list):
        raise FormatError("clusters", "expected a list of cluster ids")
    step = _number(_need(doc, "sampling_step", "document"), "sampling_step")
    horizon_raw = _need(doc, "horizon", "document")
    if not isinstance(horizon_raw, (list, tuple)) or len(horizon_raw) != 2:
        raise FormatError("horizon", "expected [begin, end]")
    horizon = (_number(horizon_raw[0], "horizon[0]"),
               _number(horizon_raw[1], "horizon[1]"))
    raw_profiles = _need(doc, "profiles", "document")
    if not isinstance(raw_profiles, list):
        raise FormatError("profiles", "expected a list")
    profiles: Dict[Tuple[int, int], TimeProfile] = {}
    for pos, raw in enumerate(raw_profiles):
        where = f"profiles[{pos}]"
        _check_keys(raw, ("from_cluster", "to_cluster", "base_time", "samples"),
                    where)
        key = (_need(raw, "from_cluster", where), _need(raw, "to_cluster", where))
        samples = _need(raw, "samples", where)
        if not isinstance(samples, list) or not samples:
            raise FormatError(f"{where}.samples", "expected a non-empty list")
        try:
            profiles[key] = TimeProfile(
                samples=tuple((float(s[0]), float(s[1])) for s in samples),
                base_time=_number(raw.get("base_time", 1.0), f"{where}.base_time"),
            )
        except (TypeError, ValueError, IndexError) as exc:
            raise FormatError(where, f"bad profile: {exc}") from None
    return static, clusters, profiles, step, horizon


# ---------------------------------------------------------------------------
# emitters


def emit_solution(instance: Instance, solution: Solution,
                  breakdown: CostBreakdown, path: str,
                  extras: Optional[Mapping[str, str]] = None) -> None:
    """Write one solution with its cost breakdown as stable text.

    ``extras`` adds caller-defined header lines (sorted by key), for flags
    like budget truncation.
    """
    lines: List[str] = []
    lines.append(f"instance\t{instance.name}")
    lines.append(f"objective\t{instance.objective_kind.value}")
    lines.append(f"total\t{breakdown.total:.6f}")
    lines.append(f"travel\t{breakdown.travel_cost:.6f}")
    lines.append(f"location_early_penalty\t{breakdown.location_early_penalty:.6f}")
    lines.append(f"location_late_penalty\t{breakdown.location_late_penalty:.6f}")
    lines.append(f"vehicle_early_penalty\t{breakdown.vehicle_early_penalty:.6f}")
    lines.append(f"vehicle_late_penalty\t{breakdown.vehicle_late_penalty:.6f}")
    lines.append(f"exceeded_soft_seconds\t{breakdown.exceeded_soft_seconds:.6f}")
    lines.append(f"feasible\t{'yes' if breakdown.feasible else 'no'}")
    for key in sorted(extras or {}):
        lines.append(f"{key}\t{extras[key]}")
    lines.append(f"drives\t{len(solution.drives)}")
    for di, drive in enumerate(solution.drives):
        seq = " ".join(str(v) for v in drive.visit_sequence)
        lines.append(f"drive\t{di}\tvehicle\t{drive.vehicle_id}\t{seq}")
        if solution.schedule is not None:
            times = " ".join(f"{b:.3f}/{e:.3f}"
                             for b, e in solution.schedule[di])
            lines.append(f"times\t{di}\t{times}")
    for viol in breakdown.hard_violations:
        lines.append(f"violation\t{viol}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


BENCH_COLUMNS = ("instance", "runs", "best", "mean", "std", "best_known",
                 "best_gap_pct", "mean_gap_pct", "mean_seconds")


def emit_report(rows: Sequence[Mapping], path: str) -> None:
    """Write a benchmark report as a tab-separated table.

    One row per instance plus a closing ``average`` row over the numeric gap
    and time columns when more than one instance is present.
    """
    lines = ["\t".join(BENCH_COLUMNS)]

    def fmt(row: Mapping) -> str:
        parts = []
        for col in BENCH_COLUMNS:
            val = row.get(col)
            if val is None:
                parts.append("-")
            elif isinstance(val, float):
                parts.append(f"{val:.4f}")
            else:
                parts.append(str(val))
        return "\t".join(parts)

    for row in rows:
        lines.append(fmt(row))
    if len(rows) > 1:
        avg: Dict[str, object] = {"instance": "average"}
        for col in ("best_gap_pct", "mean_gap_pct", "mean_seconds"):
            vals = [row[col] for row in rows
                    if isinstance(row.get(col), (int, float))]
            if vals:
                avg[col] = float(np.mean(vals))
        lines.append(fmt(avg))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


STUDY_COLUMNS = ("instance", "lam", "dropout", "reps", "initial_mean",
                 "initial_diversity", "final_mean", "final_diversity")


def emit_plotdata(records: Sequence[Mapping], path: str) -> None:
    """Write parameter-study grid records as a tab-separated table."""
    lines = ["\t".join(STUDY_COLUMNS)]
    for rec in records:
        parts = []
        for col in STUDY_COLUMNS:
            val = rec.get(col)
            if val is None:
                parts.append("-")
            elif isinstance(val, float):
                parts.append(f"{val:.6f}")
            else:
                parts.append(str(val))
        lines.append("\t".join(parts))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_best_known(path: str) -> Dict[str, float]:
    """Read an ``instance,cost`` table (comma or whitespace separated)."""
    out: Dict[str, float] = {}
    with open(path) as fh:
        for no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) < 2:
                raise ValueError(f"{path}:{no}: expected 'instance cost'")
            try:
                out[parts[0]] = float(parts[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{no}: bad cost {parts[1]!r}") from exc
    return out
