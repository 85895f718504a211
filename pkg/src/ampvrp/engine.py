"""Array-backed evaluation core shared by construction, search and memory.

The public evaluator API lives in :mod:`ampvrp.evaluator`; this module holds
the flattened instance arrays, the jitted per-vehicle schedule/cost kernel
and the mutable working representation the search stages edit in place.
Everything here is internal to the package.
"""

from __future__ import annotations

import weakref
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .model import Drive, Instance, ObjectiveKind, Solution

# Tolerance for hard-constraint boundary comparisons; schedules are float
# chains, so exact boundary hits must not count as violations.
HARD_EPS = 1e-9


class EvaluationError(Exception):
    """Raised when a cost model cannot price an arc (nonpositive speed term)."""


class InstanceArrays:
    """Flat numpy view of an instance, built once and shared."""

    __slots__ = (
        "n", "n_vehicles", "dist", "tt", "bounds", "dem_m", "dem_v", "service",
        "lhw_b", "lhw_e", "lsw_b", "lsw_e", "cap_m", "cap_v", "vhw_b", "vhw_e",
        "vsw_b", "vsw_e", "c0", "mu_m", "mu_v", "price", "skill_ok", "lp", "vp",
        "objective", "__weakref__",
    )

    def __init__(self, inst: Instance) -> None:
        locs = inst.locations
        vehs = inst.vehicles
        n = len(locs)
        self.n = n
        self.n_vehicles = len(vehs)
        self.dist = np.ascontiguousarray(inst.distance_matrix, dtype=np.float64)
        self.tt = np.ascontiguousarray(inst.travel_time.times, dtype=np.float64)
        self.bounds = np.ascontiguousarray(
            inst.travel_time.section_boundaries, dtype=np.float64
        )
        self.dem_m = np.array([l.demand_mass for l in locs], dtype=np.float64)
        self.dem_v = np.array([l.demand_volume for l in locs], dtype=np.float64)
        self.service = np.array([l.service_duration for l in locs], dtype=np.float64)
        self.lhw_b = np.array([l.hard_window.begin for l in locs], dtype=np.float64)
        self.lhw_e = np.array([l.hard_window.end for l in locs], dtype=np.float64)
        self.lsw_b = np.array([l.soft_window.begin for l in locs], dtype=np.float64)
        self.lsw_e = np.array([l.soft_window.end for l in locs], dtype=np.float64)
        self.cap_m = np.array([v.capacity_mass for v in vehs], dtype=np.float64)
        self.cap_v = np.array([v.capacity_volume for v in vehs], dtype=np.float64)
        self.vhw_b = np.array([v.hard_window.begin for v in vehs], dtype=np.float64)
        self.vhw_e = np.array([v.hard_window.end for v in vehs], dtype=np.float64)
        self.vsw_b = np.array([v.soft_window.begin for v in vehs], dtype=np.float64)
        self.vsw_e = np.array([v.soft_window.end for v in vehs], dtype=np.float64)
        self.c0 = np.array([v.cost_model.base_rate for v in vehs], dtype=np.float64)
        self.mu_m = np.array([v.cost_model.mass_factor for v in vehs], dtype=np.float64)
        self.mu_v = np.array([v.cost_model.speed_factor for v in vehs], dtype=np.float64)
        self.price = np.array([v.cost_model.fuel_price for v in vehs], dtype=np.float64)
        self.skill_ok = np.zeros((len(vehs), n), dtype=np.bool_)
        for vi, v in enumerate(vehs):
            for li, l in enumerate(locs):
                self.skill_ok[vi, li] = l.required_skills <= v.skills
        p = inst.location_penalties
        self.lp = np.array(
            [p.early_fixed, p.early_per_second, p.early_duration_per_second,
             p.late_fixed, p.late_per_second, p.late_duration_per_second],
            dtype=np.float64,
        )
        q = inst.vehicle_penalties
        self.vp = np.array(
            [q.early_fixed, q.early_per_second, q.early_duration_per_second,
             q.late_fixed, q.late_per_second, q.late_duration_per_second],
            dtype=np.float64,
        )
        self.objective = 0 if inst.objective_kind is ObjectiveKind.TRAVEL_TIME else 1


_ARRAYS_CACHE: "weakref.WeakKeyDictionary[Instance, InstanceArrays]" = (
    weakref.WeakKeyDictionary()
)


def arrays_for(inst: Instance) -> InstanceArrays:
    arr = _ARRAYS_CACHE.get(inst)
    if arr is None:
        arr = InstanceArrays(inst)
        _ARRAYS_CACHE[inst] = arr
    return arr


@njit(cache=True)
def _eval_vehicle(
    seq, offs,
    dist, tt, bounds,
    dem_m, dem_v, service,
    lhw_b, lhw_e, lsw_b, lsw_e,
    skill_row,
    cap_m, cap_v, vhw_b, vhw_e, vsw_b, vsw_e,
    c0, mu_m, mu_v, price,
    lp, vp, objective,
    sched_b, sched_e,
):
    """Schedule and cost one vehicle's chain of drives.

    ``seq`` holds the concatenated drive interiors, ``offs`` delimits them.
    Schedules land in the provided buffers laid out per drive as
    [depot departure, visits..., depot arrival].  Returns
    (travel, loc_early, loc_late, veh_early, veh_late, exceeded_late_s,
    hard_count, clamp_count, first_departure, end_time, err, err_i, err_j).
    """
    n_sections = tt.shape[0]
    ndr = offs.shape[0] - 1
    travel = 0.0
    loc_early = 0.0
    loc_late = 0.0
    exceeded = 0.0
    hard = 0
    clamps = 0
    err = 0
    err_i = -1
    err_j = -1
    ksec = 0
    prev_end = vhw_b
    first_dep = vhw_b
    pos = 0

    for d in range(ndr):
        a = offs[d]
        b = offs[d + 1]
        dep = prev_end
        if vhw_b > dep:
            dep = vhw_b
        if d == 0:
            first_dep = dep

        load_m = 0.0
        load_v = 0.0
        for p in range(a, b):
            load_m += dem_m[seq[p]]
            load_v += dem_v[seq[p]]
        if load_m > cap_m + HARD_EPS:
            hard += 1
        if load_v > cap_v + HARD_EPS:
            hard += 1

        sched_b[pos] = dep
        sched_e[pos] = dep
        pos += 1
        cur = 0
        t_now = dep
        rem_m = load_m

        for p in range(a, b + 1):
            if p < b:
                nxt = seq[p]
            else:
                nxt = 0
            # section of the departure time; cursor only moves forward
            if t_now < bounds[0]:
                k = 0
                clamps += 1
            elif t_now >= bounds[n_sections]:
                k = n_sections - 1
                clamps += 1
            else:
                k = ksec
                if t_now < bounds[k]:
                    k = 0
                while bounds[k + 1] <= t_now:
                    k += 1
                ksec = k
            tleg = tt[k, cur, nxt]

            if objective == 0:
                travel += tleg
            else:
                d_km = dist[cur, nxt]
                if d_km > 0.0:
                    if tleg <= 0.0:
                        if err == 0:
                            err = 1
                            err_i = cur
                            err_j = nxt
                    else:
                        term = 1.0 - mu_v * (d_km / tleg * 3600.0)
                        if term <= 0.0:
                            if err == 0:
                                err = 1
                                err_i = cur
                                err_j = nxt
                        else:
                            travel += price * d_km * (c0 + mu_m * rem_m) * term

            arr_t = t_now + tleg
            if p < b:
                if not skill_row[nxt]:
                    hard += 1
                hb = lhw_b[nxt]
                start = arr_t
                if hb > start:
                    start = hb
                e_t = start + service[nxt]
                if e_t > lhw_e[nxt] + HARD_EPS:
                    hard += 1
                sb = lsw_b[nxt]
                se = lsw_e[nxt]
                if arr_t < sb:
                    mn = e_t
                    if sb < mn:
                        mn = sb
                    loc_early += lp[0] + lp[1] * (sb - arr_t) + lp[2] * (mn - arr_t)
                if e_t > se:
                    mx = arr_t
                    if se > mx:
                        mx = se
                    loc_late += lp[3] + lp[4] * (e_t - se) + lp[5] * (e_t - mx)
                    exceeded += e_t - se
                sched_b[pos] = arr_t
                sched_e[pos] = e_t
                pos += 1
                rem_m -= dem_m[nxt]
                cur = nxt
                t_now = e_t
            else:
                sched_b[pos] = arr_t
                sched_e[pos] = arr_t
                pos += 1
                prev_end = arr_t

    end_time = prev_end
    veh_early = 0.0
    veh_late = 0.0
    if ndr > 0:
        if end_time > vhw_e + HARD_EPS:
            hard += 1
        if first_dep < vsw_b:
            mn = end_time
            if vsw_b < mn:
                mn = vsw_b
            veh_early = vp[0] + vp[1] * (vsw_b - first_dep) + vp[2] * (mn - first_dep)
        if end_time > vsw_e:
            mx = first_dep
            if vsw_e > mx:
                mx = vsw_e
            veh_late = vp[3] + vp[4] * (end_time - vsw_e) + vp[5] * (end_time - mx)

    return (travel, loc_early, loc_late, veh_early, veh_late, exceeded,
            hard, clamps, first_dep, end_time, err, err_i, err_j)


class VehicleEval:
    """Cached result of scheduling one vehicle's drive chain."""

    __slots__ = ("travel", "loc_early", "loc_late", "veh_early", "veh_late",
                 "exceeded", "hard", "clamps", "first_dep", "end_time")

    def __init__(self, travel, loc_early, loc_late, veh_early, veh_late,
                 exceeded, hard, clamps, first_dep, end_time):
        self.travel = travel
        self.loc_early = loc_early
        self.loc_late = loc_late
        self.veh_early = veh_early
        self.veh_late = veh_late
        self.exceeded = exceeded
        self.hard = hard
        self.clamps = clamps
        self.first_dep = first_dep
        self.end_time = end_time

    @property
    def cost(self) -> float:
        return (self.travel + self.loc_early + self.loc_late
                + self.veh_early + self.veh_late)


ZERO_EVAL = VehicleEval(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0, 0.0, 0.0)


def pack(drives: Sequence[Sequence[int]]) -> Tuple[np.ndarray, np.ndarray]:
    """Flatten drive interiors into (seq, offsets) kernel inputs."""
    offs = np.empty(len(drives) + 1, dtype=np.int64)
    offs[0] = 0
    total = 0
    for i, d in enumerate(drives):
        total += len(d)
        offs[i + 1] = total
    seq = np.empty(total, dtype=np.int64)
    pos = 0
    for d in drives:
        for v in d:
            seq[pos] = v
            pos += 1
    return seq, offs


class Working:
    """Mutable per-vehicle drive lists plus cached vehicle evaluations.

    The search stages edit this in place; candidate edits are costed through
    :meth:`eval_drives` without mutation and applied with :meth:`set_drives`.
    Visit multiplicity is the caller's responsibility (all search moves
    preserve it), so totals here cover schedule-dependent terms only.
    """

    def __init__(self, arr: InstanceArrays,
                 vehicles: Optional[List[List[List[int]]]] = None) -> None:
        self.arr = arr
        if vehicles is None:
            vehicles = [[] for _ in range(arr.n_vehicles)]
        self.vehicles = vehicles
        cap = arr.n + 2 * (arr.n + 1)
        self._sb = np.empty(cap, dtype=np.float64)
        self._se = np.empty(cap, dtype=np.float64)
        self.evals: List[VehicleEval] = [ZERO_EVAL] * arr.n_vehicles
        for vi in range(arr.n_vehicles):
            if vehicles[vi]:
                self.evals[vi] = self.eval_drives(vi, vehicles[vi])

    def eval_drives(self, vi: int, drives: Sequence[Sequence[int]],
                    sched_out: Optional[Tuple[np.ndarray, np.ndarray]] = None
                    ) -> VehicleEval:
        """Cost the given drive chain on vehicle ``vi`` without mutating."""
        if not drives:
            return ZERO_EVAL
        arr = self.arr
        seq, offs = pack(drives)
        if sched_out is not None:
            sb, se = sched_out
        else:
            sb, se = self._sb, self._se
        res = _eval_vehicle(
            seq, offs, arr.dist, arr.tt, arr.bounds,
            arr.dem_m, arr.dem_v, arr.service,
            arr.lhw_b, arr.lhw_e, arr.lsw_b, arr.lsw_e,
            arr.skill_ok[vi],
            arr.cap_m[vi], arr.cap_v[vi], arr.vhw_b[vi], arr.vhw_e[vi],
            arr.vsw_b[vi], arr.vsw_e[vi],
            arr.c0[vi], arr.mu_m[vi], arr.mu_v[vi], arr.price[vi],
            arr.lp, arr.vp, arr.objective,
            sb, se,
        )
        if res[10] != 0:
            raise EvaluationError(
                f"arc ({res[11]}, {res[12]}): speed term of the fuel model is "
                "not positive; cannot price this arc"
            )
        return VehicleEval(*res[:10])

    def set_drives(self, vi: int, drives: List[List[int]],
                   ev: Optional[VehicleEval] = None) -> None:
        drives = [list(d) for d in drives if d]
        self.vehicles[vi] = drives
        self.evals[vi] = ev if ev is not None else self.eval_drives(vi, drives)

    def total_cost(self) -> float:
        return sum(ev.cost for ev in self.evals)

    def hard_count(self) -> int:
        return sum(ev.hard for ev in self.evals)

    def copy(self) -> "Working":
        w = Working.__new__(Working)
        w.arr = self.arr
        w.vehicles = [[list(d) for d in v] for v in self.vehicles]
        w._sb = np.empty_like(self._sb)
        w._se = np.empty_like(self._se)
        w.evals = list(self.evals)
        return w

    def used_vehicles(self) -> List[int]:
        return [vi for vi, v in enumerate(self.vehicles) if v]

    def customer_count(self) -> int:
        return sum(len(d) for v in self.vehicles for d in v)


def working_from_solution(arr: InstanceArrays, solution: Solution) -> Working:
    """Load a solution into the mutable representation."""
    vehicles: List[List[List[int]]] = [[] for _ in range(arr.n_vehicles)]
    for drive in solution.drives:
        vehicles[drive.vehicle_id].append(list(drive.interior))
    return Working(arr, vehicles)


def solution_from_working(w: Working) -> Solution:
    """Emit the current working state as an immutable solution."""
    drives = []
    for vi, chain in enumerate(w.vehicles):
        for interior in chain:
            drives.append(Drive(vi, (0, *interior, 0)))
    return Solution(tuple(drives))
