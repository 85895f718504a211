"""Exact reference solver for very small instances.

Enumerates every partition of the customers into ordered drives, every
ordering inside a drive, and every assignment of drive chains to vehicles
(multi-trip included).  Time-dependent travel makes order matter, so no
symmetry is assumed anywhere.  Branches are cut only when they are hard
infeasible or when their already-committed cost exceeds the incumbent;
committed cost never decreases by adding visits, so the search stays exact.

Intended for cross-checking the heuristic pipeline; refuses instances with
more customers than the bound (default 9).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

from .engine import HARD_EPS, arrays_for
from .evaluator import evaluate
from .model import Drive, Instance, Solution

_TIE_EPS = 1e-12


@dataclass(frozen=True)
class OracleResult:
    """Outcome of exact enumeration; ``feasible`` is False when nothing fits."""

    solution: Optional[Solution]
    cost: float
    feasible: bool
    explored: int = 0


def solve_exact(instance: Instance, max_customers: int = 9) -> OracleResult:
    """Optimal solution by exhaustive search, or an infeasibility result.

    Ties within 1e-12 relative cost are broken toward the lexicographically
    smallest drive encoding (vehicle id, then visit sequence), making the
    result unique and stable under re-runs.
    """
    arr = arrays_for(instance)
    n = arr.n
    n_cust = n - 1
    if n_cust > max_customers:
        raise ValueError(
            f"exact enumeration bounded at {max_customers} customers, "
            f"instance has {n_cust}"
        )
    nv = arr.n_vehicles
    full_mask = (1 << n_cust) - 1

    tt = arr.tt
    bounds = arr.bounds
    ns = tt.shape[0]
    dist = arr.dist
    dem_m = arr.dem_m
    dem_v = arr.dem_v
    service = arr.service
    lhw_b, lhw_e = arr.lhw_b, arr.lhw_e
    lsw_b, lsw_e = arr.lsw_b, arr.lsw_e
    lp = arr.lp
    vp = arr.vp
    monetary = arr.objective == 1

    best_cost = [float("inf")]
    best_enc: List[Optional[Tuple]] = [None]
    best_drives: List[Optional[List[Tuple[int, Tuple[int, ...]]]]] = [None]
    explored = [0]

    def _margin() -> float:
        b = best_cost[0]
        if b == float("inf"):
            return b
        return b + _TIE_EPS * max(1.0, abs(b))

    def consider(acc: float, drives: List[Tuple[int, Tuple[int, ...]]]) -> None:
        enc = tuple(drives)
        if best_enc[0] is None or acc < best_cost[0] - _TIE_EPS * max(1.0, abs(best_cost[0])):
            best_cost[0] = acc
            best_enc[0] = enc
            best_drives[0] = list(drives)
        elif acc <= _margin() and enc < best_enc[0]:
            best_enc[0] = enc
            best_drives[0] = list(drives)

    def veh_dfs(vi: int, used: int, acc: float,
                drives: List[Tuple[int, Tuple[int, ...]]]) -> None:
        if acc > _margin():
            return
        if vi == nv:
            if used == full_mask:
                consider(acc, drives)
            return
        # Branch 1: this vehicle stays idle.
        veh_dfs(vi + 1, used, acc, drives)
        if used == full_mask:
            return

        vhw_b = arr.vhw_b[vi]
        vhw_e = arr.vhw_e[vi]
        vsw_b = arr.vsw_b[vi]
        vsw_e = arr.vsw_e[vi]
        cap_m = arr.cap_m[vi]
        cap_v = arr.cap_v[vi]
        skill = arr.skill_ok[vi]
        c0 = arr.c0[vi]
        mu_m = arr.mu_m[vi]
        mu_v = arr.mu_v[vi]
        price = arr.price[vi]

        def leg_cost(i: int, j: int, t: float) -> Tuple[float, float, float]:
            """(travel time, base cost, extra cost per kg carried) at t."""
            if t < bounds[0]:
                k = 0
            elif t >= bounds[ns]:
                k = ns - 1
            else:
                k = 0
                while bounds[k + 1] <= t:
                    k += 1
            tl = tt[k, i, j]
            if not monetary:
                return tl, tl, 0.0
            d = dist[i, j]
            if d <= 0.0 or tl <= 0.0:
                return tl, 0.0, 0.0
            term = 1.0 - mu_v * (d / tl * 3600.0)
            return tl, price * d * c0 * term, price * d * mu_m * term

        def close_vehicle(first_dep: float, end_time: float, acc2: float,
                          used2: int, drives2) -> None:
            add = 0.0
            if first_dep < vsw_b:
                mn = min(end_time, vsw_b)
                add += vp[0] + vp[1] * (vsw_b - first_dep) + vp[2] * (mn - first_dep)
            if end_time > vsw_e:
                mx = max(first_dep, vsw_e)
                add += vp[3] + vp[4] * (end_time - vsw_e) + vp[5] * (end_time - mx)
            veh_dfs(vi + 1, used2, acc2 + add, drives2)

        def drive_dfs(cur: int, t_now: float, rem_m: float, rem_v: float,
                      mass_acc: float, used2: int, acc2: float,
                      interior: List[int], first_dep: float,
                      chain_drives) -> None:
            """Either close the open drive (possibly the vehicle) or extend it."""
            explored[0] += 1
            if acc2 > _margin():
                return
            if interior:
                tl, base, _ = leg_cost(cur, 0, t_now)
                ret = t_now + tl
                if ret <= vhw_e + HARD_EPS:
                    acc3 = acc2 + base
                    if acc3 <= _margin():
                        drives3 = chain_drives + [(vi, tuple(interior))]
                        close_vehicle(first_dep, ret, acc3, used2, drives3)
                        if used2 != full_mask:
                            open_drive(ret, used2, acc3, first_dep, drives3)
            for c in range(1, n):
                bit = 1 << (c - 1)
                if used2 & bit or not skill[c]:
                    continue
                if dem_m[c] > rem_m + HARD_EPS or dem_v[c] > rem_v + HARD_EPS:
                    continue
                tl, base, per_kg = leg_cost(cur, c, t_now)
                arr_t = t_now + tl
                start = arr_t if arr_t > lhw_b[c] else lhw_b[c]
                e_t = start + service[c]
                if e_t > lhw_e[c] + HARD_EPS:
                    continue
                mass_acc2 = mass_acc + per_kg
                pen = 0.0
                if arr_t < lsw_b[c]:
                    mn = min(e_t, lsw_b[c])
                    pen += lp[0] + lp[1] * (lsw_b[c] - arr_t) + lp[2] * (mn - arr_t)
                if e_t > lsw_e[c]:
                    mx = max(arr_t, lsw_e[c])
                    pen += lp[3] + lp[4] * (e_t - lsw_e[c]) + lp[5] * (e_t - mx)
                acc3 = acc2 + base + dem_m[c] * mass_acc2 + pen
                interior.append(c)
                drive_dfs(c, e_t, rem_m - dem_m[c], rem_v - dem_v[c],
                          mass_acc2, used2 | bit, acc3, interior,
                          first_dep, chain_drives)
                interior.pop()

        def open_drive(prev_end: float, used2: int, acc2: float,
                       first_dep: Optional[float], chain_drives) -> None:
            dep = prev_end if prev_end > vhw_b else vhw_b
            fd = dep if first_dep is None else first_dep
            drive_dfs(0, dep, cap_m, cap_v, 0.0, used2, acc2, [], fd,
                      chain_drives)

        # Branch 2: vehicle runs at least one drive.
        open_drive(vhw_b, used, acc, None, drives)

    veh_dfs(0, 0, 0.0, [])

    if best_drives[0] is None:
        return OracleResult(None, float("inf"), False, explored[0])

    drives = tuple(Drive(vid, (0, *interior, 0)) for vid, interior in best_drives[0])
    sol = Solution(drives=drives)
    breakdown = evaluate(instance, sol)
    return OracleResult(sol, breakdown.total, True, explored[0])
