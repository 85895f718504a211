"""Phased local search over drive-based solutions.

Five strategy families edit a solution in place: swapping groups of
consecutive vertices between drive positions, moving a group to a new
position, swapping whole drives between vehicles, moving a whole drive to
another vehicle or chain slot, and reversing a drive's direction.

Phase 1 runs a fixed number of iterations, each drawing one strategy from a
weighted schedule and sampling a bounded number of candidate edits; the best
strictly improving candidate is applied.  Phase 2 cycles the strategies with
exhaustive neighborhoods until a full cycle finds nothing, leaving a local
optimum for every family.

A move is accepted only if it lowers the hard-violation count, or keeps it
equal while strictly lowering total cost.  Feasible solutions therefore stay
feasible, and cost never increases.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .engine import (
    InstanceArrays,
    VehicleEval,
    Working,
    ZERO_EVAL,
    arrays_for,
    solution_from_working,
    working_from_solution,
)
from .model import Instance, Solution

EPS = 1e-9

DEFAULT_WEIGHTS: Tuple[Tuple[str, float], ...] = (
    ("swap_2_1", 0.475),
    ("move_1", 0.478),
    ("swap_3_1", 0.030),
    ("swap_2_3", 0.005),
    ("swap_2_2", 0.003),
    ("swap_drives", 0.003),
    ("move_drive", 0.003),
    ("find_best", 0.003),
)

_KNOWN_STRATEGIES = frozenset(name for name, _ in DEFAULT_WEIGHTS)


@dataclass(frozen=True)
class LsConfig:
    """Knobs for one local-search run."""

    max_iterations: int = 2000
    combos_per_iteration: int = 40
    rng_seed: int = 0
    strategy_weights: Tuple[Tuple[str, float], ...] = DEFAULT_WEIGHTS
    cycle_ceiling: int = 200

    def __post_init__(self) -> None:
        if self.max_iterations < 0:
            raise ValueError("max_iterations must not be negative")
        if self.combos_per_iteration <= 0:
            raise ValueError("combos_per_iteration must be positive")
        if self.cycle_ceiling <= 0:
            raise ValueError("cycle_ceiling must be positive")
        total = 0.0
        for name, weight in self.strategy_weights:
            if name not in _KNOWN_STRATEGIES:
                raise ValueError(f"unknown strategy {name!r}")
            if weight < 0:
                raise ValueError(f"negative weight for {name!r}")
            total += weight
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"strategy weights sum to {total}, expected 1")


# One candidate edit: per-vehicle replacement drive lists with their
# evaluations, plus the lexicographic (hard, cost) delta it causes.
_Updates = List[Tuple[int, List[List[int]]]]
_Move = Tuple[int, float, _Updates, List[VehicleEval]]


def _improving(dh: int, dc: float) -> bool:
    return dh < 0 or (dh == 0 and dc < -EPS)


def _better(dh: int, dc: float, move: Optional[_Move]) -> bool:
    return move is None or dh < move[0] or (dh == move[0] and dc < move[1])


class _Search:
    """Mutable search state bound to one working solution."""

    def __init__(self, w: Working, rng: random.Random) -> None:
        self.w = w
        self.rng = rng
        self.applied = 0
        arr = w.arr
        classes: Dict[tuple, int] = {}
        self.vehicle_class: List[int] = []
        for vi in range(arr.n_vehicles):
            key = (arr.cap_m[vi], arr.cap_v[vi], arr.vhw_b[vi], arr.vhw_e[vi],
                   arr.vsw_b[vi], arr.vsw_e[vi], arr.c0[vi], arr.mu_m[vi],
                   arr.mu_v[vi], arr.price[vi], arr.skill_ok[vi].tobytes())
            self.vehicle_class.append(classes.setdefault(key, len(classes)))

    # ------------------------------------------------------------------
    # bookkeeping

    def groups(self, g_s: int) -> List[Tuple[int, int, int]]:
        """All (vehicle, drive, start) slots holding g_s consecutive visits."""
        out = []
        for vi, chain in enumerate(self.w.vehicles):
            for di, drive in enumerate(chain):
                for start in range(len(drive) - g_s + 1):
                    out.append((vi, di, start))
        return out

    def drive_slots(self) -> List[Tuple[int, int]]:
        return [(vi, di) for vi, chain in enumerate(self.w.vehicles)
                for di in range(len(chain))]

    def target_vehicles(self) -> List[int]:
        """Used vehicles plus one idle representative per vehicle class."""
        out = []
        seen_idle = set()
        for vi, chain in enumerate(self.w.vehicles):
            if chain:
                out.append(vi)
            else:
                cls = self.vehicle_class[vi]
                if cls not in seen_idle:
                    seen_idle.add(cls)
                    out.append(vi)
        return out

    def evaluate(self, updates: _Updates) -> Optional[_Move]:
        dh = 0
        dc = 0.0
        evals = []
        for vi, drives in updates:
            clean = [d for d in drives if d]
            ev = self.w.eval_drives(vi, clean) if clean else ZERO_EVAL
            old = self.w.evals[vi]
            dh += ev.hard - old.hard
            dc += ev.cost - old.cost
            evals.append(ev)
        return (dh, dc, updates, evals)

    def apply(self, move: _Move) -> None:
        _, _, updates, evals = move
        for (vi, drives), ev in zip(updates, evals):
            clean = [d for d in drives if d]
            self.w.set_drives(vi, clean, ev)
        self.applied += 1

    # ------------------------------------------------------------------
    # edit builders

    def copy_chain(self, vi: int) -> List[List[int]]:
        return [list(d) for d in self.w.vehicles[vi]]

    def splice(self, slots: Sequence[Tuple[int, int, int]],
               contents: Sequence[Sequence[int]]) -> _Updates:
        """Replace equal-sized groups at the given slots with new contents."""
        by: Dict[int, List[List[int]]] = {}
        for (vi, di, start), seg in zip(slots, contents):
            if vi not in by:
                by[vi] = self.copy_chain(vi)
            by[vi][di][start:start + len(seg)] = list(seg)
        return list(by.items())

    def move_updates(self, src: Tuple[int, int, int], g_s: int,
                     dst: Tuple[int, int, int],
                     reverse: bool = False) -> _Updates:
        vi, di, start = src
        vj, dj, ip = dst
        by: Dict[int, List[List[int]]] = {vi: self.copy_chain(vi)}
        seg = by[vi][di][start:start + g_s]
        if reverse:
            seg = seg[::-1]
        del by[vi][di][start:start + g_s]
        if vj not in by:
            by[vj] = self.copy_chain(vj)
        by[vj][dj][ip:ip] = seg
        return list(by.items())

    def swap_drive_updates(self, a: Tuple[int, int],
                           b: Tuple[int, int]) -> _Updates:
        (vi, di), (vj, dj) = a, b
        by = {vi: self.copy_chain(vi)}
        if vj not in by:
            by[vj] = self.copy_chain(vj)
        by[vi][di], by[vj][dj] = list(self.w.vehicles[vj][dj]), \
            list(self.w.vehicles[vi][di])
        return list(by.items())

    def move_drive_updates(self, src: Tuple[int, int], vj: int,
                           slot: int) -> _Updates:
        vi, di = src
        by = {vi: self.copy_chain(vi)}
        drive = by[vi].pop(di)
        if vj not in by:
            by[vj] = self.copy_chain(vj)
        by[vj][slot:slot] = [drive]
        return list(by.items())

    # ------------------------------------------------------------------
    # sampled neighborhoods (phase 1)

    @staticmethod
    def _disjoint(slots: Sequence[Tuple[int, int, int]], g_s: int) -> bool:
        for a in range(len(slots)):
            for b in range(a + 1, len(slots)):
                if (slots[a][0] == slots[b][0] and slots[a][1] == slots[b][1]
                        and abs(slots[a][2] - slots[b][2]) < g_s):
                    return False
        return True

    def sample_swap(self, g_n: int, g_s: int, budget: int) -> Optional[_Move]:
        groups = self.groups(g_s)
        if len(groups) < g_n:
            return None
        best: Optional[_Move] = None
        for _ in range(budget):
            slots = self.rng.sample(groups, g_n)
            if not self._disjoint(slots, g_s):
                continue
            segs = [self.w.vehicles[vi][di][start:start + g_s]
                    for vi, di, start in slots]
            for perm in permutations(range(g_n)):
                if all(p == k for k, p in enumerate(perm)):
                    continue
                updates = self.splice(slots, [segs[p] for p in perm])
                cand = self.evaluate(updates)
                if cand and _better(cand[0], cand[1], best):
                    best = cand
        if best and _improving(best[0], best[1]):
            return best
        return None

    def sample_move(self, g_s: int, budget: int) -> Optional[_Move]:
        groups = self.groups(g_s)
        if not groups:
            return None
        slots = self.drive_slots()
        best: Optional[_Move] = None
        for _ in range(budget):
            vi, di, start = groups[self.rng.randrange(len(groups))]
            vj, dj = slots[self.rng.randrange(len(slots))]
            if (vj, dj) == (vi, di):
                reduced = len(self.w.vehicles[vi][di]) - g_s
                if reduced <= 0:
                    continue
                ip = self.rng.randint(0, reduced)
                if ip == start:
                    continue
            else:
                ip = self.rng.randint(0, len(self.w.vehicles[vj][dj]))
            updates = self.move_updates((vi, di, start), g_s, (vj, dj, ip))
            cand = self.evaluate(updates)
            if cand and _better(cand[0], cand[1], best):
                best = cand
        if best and _improving(best[0], best[1]):
            return best
        return None

    def sample_swap_drives(self, budget: int) -> Optional[_Move]:
        slots = self.drive_slots()
        if len(slots) < 2:
            return None
        best: Optional[_Move] = None
        for _ in range(budget):
            a, b = self.rng.sample(slots, 2)
            cand = self.evaluate(self.swap_drive_updates(a, b))
            if cand and _better(cand[0], cand[1], best):
                best = cand
        if best and _improving(best[0], best[1]):
            return best
        return None

    def sample_move_drive(self, budget: int) -> Optional[_Move]:
        slots = self.drive_slots()
        if not slots:
            return None
        targets = self.target_vehicles()
        best: Optional[_Move] = None
        for _ in range(budget):
            vi, di = slots[self.rng.randrange(len(slots))]
            vj = targets[self.rng.randrange(len(targets))]
            limit = len(self.w.vehicles[vj]) - (1 if vj == vi else 0)
            slot = self.rng.randint(0, max(limit, 0))
            if vj == vi and slot == di:
                continue
            cand = self.evaluate(self.move_drive_updates((vi, di), vj, slot))
            if cand and _better(cand[0], cand[1], best):
                best = cand
        if best and _improving(best[0], best[1]):
            return best
        return None

    # ------------------------------------------------------------------
    # exhaustive neighborhoods (phase 2)

    def _stabilize(self, rows: Callable[[], Sequence],
                   row_moves: Callable[[object], Iterable[_Updates]],
                   ceiling: int) -> bool:
        """First-improvement sweep with circular resume until stable.

        ``rows`` lists row keys for the current state; ``row_moves`` yields
        candidate edits within one row.  After an applied edit the rows are
        rebuilt and scanning resumes at the same position, so one clean lap
        certifies the neighborhood is exhausted.
        """
        improved = False
        keys = list(rows())
        if not keys:
            return False
        a = 0
        streak = 0
        while streak < len(keys):
            found = None
            for updates in row_moves(keys[a]):
                cand = self.evaluate(updates)
                if cand and _improving(cand[0], cand[1]):
                    found = cand
                    break
            if found:
                self.apply(found)
                improved = True
                if self.applied > ceiling * 1000:
                    raise RuntimeError("local search exceeded its move ceiling; "
                                       "improvement cycle suspected")
                keys = list(rows())
                if not keys:
                    break
                a %= len(keys)
                streak = 0
            else:
                a = (a + 1) % len(keys)
                streak += 1
        return improved

    def exhaustive_swap(self, g_s: int, ceiling: int = 200) -> bool:
        # For groups longer than one visit both insertion orientations are
        # tried; direction matters under asymmetric and time-dependent costs.
        flips = ((False, False),) if g_s == 1 else (
            (False, False), (False, True), (True, False), (True, True))

        def row_moves(slot):
            groups = self.groups(g_s)
            vi, di, start = slot
            if start + g_s > len(self.w.vehicles[vi][di]):
                return
            seg_a = self.w.vehicles[vi][di][start:start + g_s]
            for other in groups:
                if other == slot:
                    continue
                if (other[0] == vi and other[1] == di
                        and abs(other[2] - start) < g_s):
                    continue
                seg_b = self.w.vehicles[other[0]][other[1]][
                    other[2]:other[2] + g_s]
                for rev_a, rev_b in flips:
                    yield self.splice(
                        (slot, other),
                        (seg_b[::-1] if rev_a else seg_b,
                         seg_a[::-1] if rev_b else seg_a))

        return self._stabilize(lambda: self.groups(g_s), row_moves, ceiling)

    def exhaustive_move(self, g_s: int, ceiling: int = 200) -> bool:
        # Reinsertion in reversed orientation subsumes short in-place
        # segment reversals (the same-position reversed case).
        orientations = (False,) if g_s == 1 else (False, True)

        def row_moves(slot):
            vi, di, start = slot
            if start + g_s > len(self.w.vehicles[vi][di]):
                return
            for vj, dj in self.drive_slots():
                same = (vj, dj) == (vi, di)
                if same:
                    count = len(self.w.vehicles[vi][di]) - g_s + 1
                else:
                    count = len(self.w.vehicles[vj][dj]) + 1
                for ip in range(count):
                    for rev in orientations:
                        if same and ip == start and not rev:
                            continue
                        yield self.move_updates(slot, g_s, (vj, dj, ip), rev)

        return self._stabilize(lambda: self.groups(g_s), row_moves, ceiling)

    def exhaustive_swap_drives(self, ceiling: int = 200) -> bool:
        def row_moves(slot):
            for other in self.drive_slots():
                if other <= slot:
                    continue
                yield self.swap_drive_updates(slot, other)

        return self._stabilize(self.drive_slots, row_moves, ceiling)

    def exhaustive_move_drive(self, ceiling: int = 200) -> bool:
        def row_moves(slot):
            vi, di = slot
            for vj in self.target_vehicles():
                limit = len(self.w.vehicles[vj]) - (1 if vj == vi else 0)
                for pos in range(limit + 1):
                    if vj == vi and pos == di:
                        continue
                    yield self.move_drive_updates(slot, vj, pos)

        return self._stabilize(self.drive_slots, row_moves, ceiling)

    def exhaustive_change_direction(self, ceiling: int = 200) -> bool:
        def row_moves(slot):
            vi, di = slot
            chain = self.copy_chain(vi)
            chain[di] = chain[di][::-1]
            yield [(vi, chain)]

        return self._stabilize(self.drive_slots, row_moves, ceiling)

    # ------------------------------------------------------------------
    # deep passes used by the closing polish, not by the phase-2 cycle

    def exhaustive_three_opt(self, ceiling: int = 200) -> bool:
        """All three-cut reconnections (with reversals) inside each drive."""

        def row_moves(slot):
            vi, di = slot
            d = self.w.vehicles[vi][di]
            L = len(d)
            for i in range(L - 1):
                for j in range(i + 1, L):
                    for k in range(j + 1, L + 1):
                        s1, s2, s3, s4 = d[:i], d[i:j], d[j:k], d[k:]
                        r2, r3 = s2[::-1], s3[::-1]
                        for mid in ((r2, s3), (s2, r3), (r2, r3),
                                    (s3, s2), (s3, r2), (r3, s2), (r3, r2)):
                            chain = self.copy_chain(vi)
                            chain[di] = s1 + mid[0] + mid[1] + s4
                            yield [(vi, chain)]

        return self._stabilize(self.drive_slots, row_moves, ceiling)

    def exhaustive_tail_swap(self, ceiling: int = 200) -> bool:
        """Exchange drive tails across drive pairs (all cut positions)."""

        def row_moves(slot):
            vi, di = slot
            a = self.w.vehicles[vi][di]
            for other in self.drive_slots():
                if other <= slot:
                    continue
                vj, dj = other
                b = self.w.vehicles[vj][dj]
                for ca in range(len(a) + 1):
                    for cb in range(len(b) + 1):
                        if ca == len(a) and cb == len(b):
                            continue
                        if ca == 0 and cb == 0:
                            continue
                        by = {vi: self.copy_chain(vi)}
                        if vj not in by:
                            by[vj] = self.copy_chain(vj)
                        new_a = a[:ca] + b[cb:]
                        new_b = b[:cb] + a[ca:]
                        by[vi][di] = new_a
                        by[vj][dj] = new_b
                        yield list(by.items())

        return self._stabilize(self.drive_slots, row_moves, ceiling)


# ---------------------------------------------------------------------------
# public operations


def _single_pass(instance: Instance, solution: Solution,
                 runner: Callable[[_Search], Optional[_Move]]) -> Solution:
    w = working_from_solution(arrays_for(instance), solution)
    search = _Search(w, random.Random(0))
    move = runner(search)
    if move is None:
        return solution
    search.apply(move)
    return solution_from_working(w)


def swap_vertices(instance: Instance, solution: Solution, g_c: int, g_n: int,
                  g_s: int, rng: random.Random) -> Solution:
    """Exchange up to g_n sampled vertex groups of size g_s, best arrangement.

    Samples g_c selections of disjoint consecutive groups, tries every
    arrangement of each selection and applies the single best strictly
    improving one; returns the input unchanged when nothing improves.
    """
    if g_n < 2:
        raise ValueError("g_n must be at least 2")
    if g_s < 1:
        raise ValueError("g_s must be at least 1")
    w = working_from_solution(arrays_for(instance), solution)
    search = _Search(w, rng)
    move = search.sample_swap(g_n, g_s, g_c)
    if move is None:
        return solution
    search.apply(move)
    return solution_from_working(w)


def move_vertices(instance: Instance, solution: Solution, g_s: int,
                  rng: random.Random, g_c: int = 40) -> Solution:
    """Relocate one sampled group of g_s consecutive vertices if it improves."""
    if g_s < 1:
        raise ValueError("g_s must be at least 1")
    w = working_from_solution(arrays_for(instance), solution)
    search = _Search(w, rng)
    move = search.sample_move(g_s, g_c)
    if move is None:
        return solution
    search.apply(move)
    return solution_from_working(w)


def swap_drives(instance: Instance, solution: Solution) -> Solution:
    """Exchange the two drives whose swap improves the solution most."""

    def runner(search: _Search) -> Optional[_Move]:
        best: Optional[_Move] = None
        slots = search.drive_slots()
        for a in range(len(slots)):
            for b in range(a + 1, len(slots)):
                cand = search.evaluate(
                    search.swap_drive_updates(slots[a], slots[b]))
                if cand and _better(cand[0], cand[1], best):
                    best = cand
        if best and _improving(best[0], best[1]):
            return best
        return None

    return _single_pass(instance, solution, runner)


def move_drive(instance: Instance, solution: Solution) -> Solution:
    """Reassign the drive whose move to another vehicle or slot helps most."""

    def runner(search: _Search) -> Optional[_Move]:
        best: Optional[_Move] = None
        for slot in search.drive_slots():
            vi, di = slot
            for vj in search.target_vehicles():
                limit = len(search.w.vehicles[vj]) - (1 if vj == vi else 0)
                for pos in range(limit + 1):
                    if vj == vi and pos == di:
                        continue
                    cand = search.evaluate(
                        search.move_drive_updates(slot, vj, pos))
                    if cand and _better(cand[0], cand[1], best):
                        best = cand
        if best and _improving(best[0], best[1]):
            return best
        return None

    return _single_pass(instance, solution, runner)


def change_direction(instance: Instance, solution: Solution) -> Solution:
    """Keep or reverse each drive, whichever schedules cheaper."""
    w = working_from_solution(arrays_for(instance), solution)
    search = _Search(w, random.Random(0))
    search.exhaustive_change_direction()
    return solution_from_working(w)


# ---------------------------------------------------------------------------
# the two-phase driver


def _phase1_step(search: _Search, name: str, g_c: int,
                 ceiling: int) -> Optional[_Move]:
    if name == "swap_2_1":
        return search.sample_swap(2, 1, g_c)
    if name == "move_1":
        return search.sample_move(1, g_c)
    if name == "swap_3_1":
        return search.sample_swap(3, 1, g_c)
    if name == "swap_2_3":
        return search.sample_swap(2, 3, g_c)
    if name == "swap_2_2":
        return search.sample_swap(2, 2, g_c)
    if name == "swap_drives":
        return search.sample_swap_drives(g_c)
    if name == "move_drive":
        return search.sample_move_drive(g_c)
    if name == "find_best":
        search.exhaustive_swap(1, ceiling)
        return None
    raise ValueError(f"unknown strategy {name!r}")


def run(instance: Instance, initial: Solution, config: LsConfig) -> Solution:
    """Improve a solution with sampled phase 1 then exhaustive phase 2."""
    arr = arrays_for(instance)
    w = working_from_solution(arr, initial)
    rng = random.Random(config.rng_seed)
    search = _Search(w, rng)
    ceiling = config.cycle_ceiling

    names = [name for name, _ in config.strategy_weights]
    weights = [weight for _, weight in config.strategy_weights]
    for _ in range(config.max_iterations):
        name = rng.choices(names, weights)[0]
        move = _phase1_step(search, name, config.combos_per_iteration, ceiling)
        if move is not None:
            search.apply(move)

    passes = (
        lambda: search.exhaustive_move(1, ceiling),
        lambda: search.exhaustive_swap(1, ceiling),
        lambda: search.exhaustive_move(2, ceiling),
        lambda: search.exhaustive_swap(2, ceiling),
        lambda: search.exhaustive_move(3, ceiling),
        lambda: search.exhaustive_swap(3, ceiling),
        lambda: search.exhaustive_change_direction(ceiling),
        lambda: search.exhaustive_swap_drives(ceiling),
        lambda: search.exhaustive_move_drive(ceiling),
    )
    for cycle in range(ceiling):
        improved = False
        for sweep in passes:
            if sweep():
                improved = True
        if not improved:
            break
    else:
        raise RuntimeError("phase 2 exceeded its cycle ceiling; "
                           "improvement cycle suspected")
    return solution_from_working(w)


def polish(instance: Instance, solution: Solution,
           ceiling: int = 200) -> Solution:
    """Drive the deep reconnection passes to a combined fixpoint.

    Cycles three-cut reconnections inside drives, tail exchanges across
    drives and the standard neighborhoods until none of them improves.
    Considerably more thorough than :func:`run`'s phase 2 and meant for a
    closing refinement of one good solution, not for every search start.
    """
    w = working_from_solution(arrays_for(instance), solution)
    search = _Search(w, random.Random(0))
    passes = (
        lambda: search.exhaustive_three_opt(ceiling),
        lambda: search.exhaustive_tail_swap(ceiling),
        lambda: search.exhaustive_move(1, ceiling),
        lambda: search.exhaustive_move(2, ceiling),
        lambda: search.exhaustive_move(3, ceiling),
        lambda: search.exhaustive_swap(1, ceiling),
        lambda: search.exhaustive_swap(2, ceiling),
        lambda: search.exhaustive_swap(3, ceiling),
        lambda: search.exhaustive_change_direction(ceiling),
        lambda: search.exhaustive_swap_drives(ceiling),
        lambda: search.exhaustive_move_drive(ceiling),
    )
    for _ in range(ceiling):
        if not any(sweep() for sweep in passes):
            break
    else:
        raise RuntimeError("polish exceeded its cycle ceiling; "
                           "improvement cycle suspected")
    return solution_from_working(w)
