"""End-to-end quality gates.

Each test prints one ``ACCEPTANCE criterion N: PASS/FAIL (...)`` line with
its measured numbers and then asserts the criterion.  Heavy runs are shared:
the ten cmt01 pipeline runs feed criteria 1, 2 and 8.  Criteria defined over
benchmark files not present under data/cmt run on the available members and
say so on their line; they widen automatically when files are added.
"""

from __future__ import annotations

import math
import random
import time

import numpy as np
import pytest

from ampvrp import amp
from ampvrp.evaluator import arc_cost, evaluate, soft_window_penalty
from ampvrp.io import load_best_known, parse_cmt
from ampvrp.localsearch import LsConfig, run as ls_run
from ampvrp.model import (
    Drive,
    FuelCostModel,
    ObjectiveKind,
    PenaltyParams,
    Solution,
    TimeWindow,
)
from ampvrp.oracle import solve_exact
from ampvrp.preprocess import split_demands
from ampvrp.rccw import RccwConfig, construct
from ampvrp.seeding import stream_seed
from ampvrp.synth import (
    make_clustered_cvrp,
    make_rich_instance,
    random_variant_instance,
)
from ampvrp.timedep import (
    TravelTimeTensor,
    enforce_non_passing,
    lookup,
    non_passing_violations,
)

from helpers import DATA_DIR, cmt_path, has_cmt, make_instance
from test_rccw import reference_parallel_savings, route_arcs, solution_arcs

ROOT = 2026

CMT1_BEST_BOUND = 535.10
RUN_SECONDS_CAP = 600.0
DESK_SUBSET = ("cmt01", "cmt06", "cmt12", "cmt14")
DESK_MEAN_SUBOPT_CAP = 3.0
TREND_SET = ("cmt01", "cmt02", "cmt03", "cmt11", "cmt12")
TREND_REPS = 3
TREND_PASS_RATIO = 12.0 / 15.0
STUDY_SET = ("cmt01", "cmt02", "cmt03")
ORACLE_INSTANCES = 50
ORACLE_MIN_MATCHES = 47
ORACLE_REL_TOL = 1e-6

# Search budget for the tiny oracle-equivalence instances; the full default
# protocol adds nothing but time at 7 customers.
ORACLE_AMP = dict(rounds=3, starts_per_round=10,
                  ls=LsConfig(max_iterations=400, combos_per_iteration=24))


def live(config, message):
    manager = config.pluginmanager.getplugin("capturemanager")
    with manager.global_and_fixture_disabled():
        print(message, flush=True)


def report(config, number, passed, detail):
    line = (f"ACCEPTANCE criterion {number}: "
            f"{'PASS' if passed else 'FAIL'} ({detail})")
    live(config, line)
    assert passed, line


def load_cmt(name):
    instance, _ = split_demands(parse_cmt(str(cmt_path(name))))
    return instance


def pipeline_runs(config, name, instance, count, tag):
    """Timed default-protocol runs, seeded from the shared root."""
    runs = []
    for rep in range(count):
        cfg = amp.AmpConfig(rng_seed=stream_seed(ROOT, tag, name, rep))
        t0 = time.monotonic()
        result = amp.solve_detailed(instance, cfg)
        seconds = time.monotonic() - t0
        runs.append((result, seconds))
        live(config, f"  [{tag}] {name} run {rep + 1}/{count}: "
                     f"cost={result.cost:.2f} seconds={seconds:.0f}")
    return runs


@pytest.fixture(scope="module")
def best_known():
    return load_best_known(str(DATA_DIR / "best_known.csv"))


@pytest.fixture(scope="module")
def cmt1_runs(pytestconfig):
    if not has_cmt("cmt01"):
        pytest.skip("cmt01.txt not present")
    instance = load_cmt("cmt01")
    return pipeline_runs(pytestconfig, "cmt01", instance, 10, "accept")


def test_criterion_1_cmt01_quality_and_runtime(pytestconfig, cmt1_runs):
    best = min(result.cost for result, _ in cmt1_runs)
    slowest = max(seconds for _, seconds in cmt1_runs)
    passed = best <= CMT1_BEST_BOUND and slowest <= RUN_SECONDS_CAP
    report(pytestconfig, 1,
           passed,
           f"best of 10 = {best:.2f} vs bound {CMT1_BEST_BOUND}, "
           f"slowest run {slowest:.0f}s vs cap {RUN_SECONDS_CAP:.0f}s")


def test_criterion_2_desk_subset_suboptimality(pytestconfig, best_known,
                                               cmt1_runs):
    available = [n for n in DESK_SUBSET if has_cmt(n) and n in best_known]
    if len(available) < 2:
        pytest.skip(f"desk subset needs at least 2 of {DESK_SUBSET}, "
                    f"found {available}")
    subopts = []
    details = []
    for name in available:
        if name == "cmt01":
            best = min(result.cost for result, _ in cmt1_runs)
        else:
            runs = pipeline_runs(pytestconfig, name, load_cmt(name), 10,
                                 "desk")
            best = min(result.cost for result, _ in runs)
        subopt = (best / best_known[name] - 1.0) * 100.0
        subopts.append(subopt)
        details.append(f"{name} {best:.2f} ({subopt:+.2f}%)")
    mean = float(np.mean(subopts))
    missing = sorted(set(DESK_SUBSET) - set(available))
    note = f"; members {missing} not in corpus" if missing else ""
    report(pytestconfig, 2,
           mean <= DESK_MEAN_SUBOPT_CAP,
           f"mean best-of-10 suboptimality {mean:.2f}% vs "
           f"{DESK_MEAN_SUBOPT_CAP}% over {', '.join(details)}{note}")


def test_criterion_3_oracle_equivalence(pytestconfig):
    matches = 0
    solved = 0
    draw = 0
    while solved < ORACLE_INSTANCES:
        draw += 1
        assert draw <= 3 * ORACLE_INSTANCES, "too many infeasible draws"
        rng = random.Random(stream_seed(ROOT, "variants", draw))
        instance = random_variant_instance(rng)
        split, _ = split_demands(instance)
        exact = solve_exact(split)
        if not exact.feasible:
            live(pytestconfig, f"  [oracle] draw {draw}: infeasible, redrawn")
            continue
        solved += 1
        best = math.inf
        for rep in range(10):
            cfg = amp.AmpConfig(
                rng_seed=stream_seed(ROOT, "variants-amp", draw, rep),
                **ORACLE_AMP)
            best = min(best, amp.solve_detailed(split, cfg).cost)
        rel = abs(best - exact.cost) / max(abs(exact.cost), 1e-12)
        if rel <= ORACLE_REL_TOL:
            matches += 1
        else:
            live(pytestconfig,
                 f"  [oracle] draw {draw}: amp {best:.6f} vs "
                 f"optimum {exact.cost:.6f} (rel {rel:.2e})")
    report(pytestconfig, 3,
           matches >= ORACLE_MIN_MATCHES,
           f"{matches}/{ORACLE_INSTANCES} matched the exact optimum within "
           f"{ORACLE_REL_TOL:g} relative, need {ORACLE_MIN_MATCHES}")


def test_criterion_4_classical_savings_conformance(pytestconfig):
    agreements = 0
    total = 20
    for seed in range(total):
        n_customers = 10 + (seed * 7) % 21
        inst = make_clustered_cvrp(
            n_customers=n_customers,
            n_clusters=3 + seed % 4,
            capacity=60.0 + 20.0 * (seed % 4),
            seed=stream_seed(ROOT, "cw", seed) % (2 ** 31))
        sol = construct(inst, RccwConfig(lam=1.0, dropout=0.0))
        demands = [loc.demand_mass for loc in inst.locations[1:]]
        routes = reference_parallel_savings(
            inst.distance_matrix, demands, inst.vehicles[0].capacity_mass)
        agreements += solution_arcs(sol) == route_arcs(routes)
    report(pytestconfig, 4,
           agreements == total,
           f"{agreements}/{total} instances matched the reference "
           f"parallel savings arc for arc")


def test_criterion_5_non_passing_property(pytestconfig):
    rng = np.random.default_rng(stream_seed(ROOT, "fifo") % (2 ** 32))
    samples = 0
    violations = 0
    for _ in range(40):
        k = int(rng.integers(2, 7))
        n = int(rng.integers(3, 9))
        bounds = np.concatenate(
            [[0.0], np.cumsum(rng.uniform(50.0, 300.0, k))])
        raw = TravelTimeTensor(bounds, rng.uniform(1.0, 100.0, (k, n, n)))
        tensor = enforce_non_passing(raw)
        assert non_passing_violations(tensor) == []
        end = float(bounds[-1])
        for _ in range(250):
            i = int(rng.integers(0, n))
            j = int(rng.integers(0, n - 1))
            if j >= i:
                j += 1
            d1 = float(rng.uniform(-100.0, end + 100.0))
            d2 = d1 + float(rng.uniform(1e-9, end))
            arrive_1 = d1 + lookup(tensor, i, j, d1)
            arrive_2 = d2 + lookup(tensor, i, j, d2)
            samples += 1
            violations += arrive_1 > arrive_2
    report(pytestconfig, 5,
           samples == 10_000 and violations == 0,
           f"{violations} arrival-order violations over {samples} "
           f"enforced samples")


def test_criterion_6_cost_formula_vectors(pytestconfig):
    tol = 1e-12
    worst = 0.0

    def check(got, want):
        nonlocal worst
        worst = max(worst, abs(got - want))

    fuel = FuelCostModel(base_rate=0.3, mass_factor=1e-4,
                         speed_factor=0.002, fuel_price=1.5)
    inst = make_instance(coords=((0.0, 0.0), (2.0, 0.0)), speed_kmh=60.0,
                         fuel=fuel, n_vehicles=1,
                         objective=ObjectiveKind.MONETARY)
    # d=2 km in t=120 s is 60 km/h; consumption 0.3 + 1e-4 * load l/km;
    # speed term 1 - 0.002 * 60 = 0.88; price 1.5.
    check(arc_cost(inst, inst.vehicles[0], 0, 1, 0.0, load_mass=500.0), 0.924)
    check(arc_cost(inst, inst.vehicles[0], 0, 1, 0.0, load_mass=0.0), 0.792)
    flat = make_instance(coords=((0.0, 0.0), (2.0, 0.0)), speed_kmh=60.0,
                         fuel=FuelCostModel(0.3, 1e-4, 0.0, 1.5),
                         n_vehicles=1, objective=ObjectiveKind.MONETARY)
    check(arc_cost(flat, flat.vehicles[0], 0, 1, 0.0, load_mass=500.0), 1.05)

    field = PenaltyParams(
        early_fixed=1.5, early_per_second=0.001,
        early_duration_per_second=0.0007,
        late_fixed=1.5, late_per_second=0.001,
        late_duration_per_second=0.0007)
    window = TimeWindow(1000.0, 2000.0)
    for b, e, early, late in (
            (700.0, 900.0, 1.94, 0.0),
            (700.0, 1500.0, 2.01, 0.0),
            (1800.0, 2600.0, 0.0, 2.52),
            (2200.0, 2600.0, 0.0, 2.38),
            (1000.0, 2000.0, 0.0, 0.0),
            (999.0, 999.5, 1.50135, 0.0)):
        got_early, got_late = soft_window_penalty(field, window, b, e)
        check(got_early, early)
        check(got_late, late)

    scenario = make_instance(
        coords=((0.0, 0.0), (1.0, 0.0), (2.0, 0.0)),
        service=100.0, n_vehicles=1,
        soft=[TimeWindow(0.0, 50.0), TimeWindow(150.0, 1.0e6)],
        vehicle_soft=TimeWindow(0.0, 2.0),
        location_penalties=field, vehicle_penalties=field)
    bd = evaluate(scenario, Solution((Drive(0, (0, 1, 2, 0)),)))
    parts = (bd.travel_cost + bd.location_early_penalty
             + bd.location_late_penalty + bd.vehicle_early_penalty
             + bd.vehicle_late_penalty)
    check(bd.total, parts)
    assert bd.location_late_penalty > 0.0 and bd.vehicle_late_penalty > 0.0

    report(pytestconfig, 6,
           worst <= tol,
           f"largest formula deviation {worst:.2e} vs {tol:g} over "
           f"monetary arcs, window penalties and total additivity")


def _shrink(solution, smap):
    """Re-encode an original-instance solution on the reduced instance."""
    heads = {}
    singleton = {}
    for rid, members in enumerate(smap.members):
        if len(members) == 1:
            singleton[members[0]] = rid
        else:
            heads[members[0]] = (rid, members)
    drives = []
    for d in solution.drives:
        seq = d.visit_sequence
        out = [0]
        i = 1
        while i < len(seq) - 1:
            v = seq[i]
            if v in heads:
                rid, members = heads[v]
                window = tuple(seq[i:i + len(members)])
                assert window == members, "segment not contiguous"
                out.append(rid)
                i += len(members)
            else:
                out.append(singleton[v])
                i += 1
        out.append(0)
        drives.append(Drive(d.vehicle_id, tuple(out)))
    return Solution(tuple(drives))


def test_criterion_7_reduction_soundness(pytestconfig):
    if not has_cmt("cmt01"):
        pytest.skip("cmt01.txt not present")
    instance = load_cmt("cmt01")
    round_trips = 0
    worst_rel = 0.0
    frozen_violations = 0
    pools_with_segments = 0
    for group in range(2):
        pool_solutions = []
        for start in range(6):
            seed = stream_seed(ROOT, "reduction", group, start)
            built = construct(instance, RccwConfig(
                lam=1.0, dropout=0.1, rng_seed=seed))
            refined = ls_run(instance, built, LsConfig(rng_seed=seed))
            pool_solutions.append(
                (refined, evaluate(instance, refined).total))
        pool = amp.MemoryPool(pool_solutions, retention=0.4)
        segments = amp.select_segments(pool)
        if not segments:
            continue
        pools_with_segments += 1
        reduced, smap = amp.reduce(instance, segments)
        assert not smap.is_identity
        for original, cost in pool.retain():
            shrunk = _shrink(original, smap)
            expanded = amp.expand(shrunk, smap)
            assert expanded.drives == original.drives
            reduced_bd = evaluate(reduced, shrunk)
            rel = abs(reduced_bd.total - cost) / max(abs(cost), 1e-12)
            worst_rel = max(worst_rel, rel)
            frozen_violations += len(reduced_bd.hard_violations)
            round_trips += 1
            # Freezing must also stay sound under further search.
            seed = stream_seed(ROOT, "reduction-ls", group, round_trips)
            moved = ls_run(reduced, shrunk, LsConfig(rng_seed=seed))
            back = amp.expand(moved, smap)
            frozen_violations += len(evaluate(instance, back).hard_violations)
    passed = (pools_with_segments >= 1 and round_trips >= 3
              and worst_rel <= 1e-9 and frozen_violations == 0)
    report(pytestconfig, 7,
           passed,
           f"{round_trips} reduce/expand round trips over "
           f"{pools_with_segments} pools, worst cost drift "
           f"{worst_rel:.2e} vs 1e-09, {frozen_violations} hard violations "
           f"after freezing")


def test_criterion_8_round_spread_shrinks(pytestconfig, cmt1_runs):
    available = [n for n in TREND_SET if has_cmt(n)]
    if not available:
        pytest.skip(f"none of {TREND_SET} present")
    cells = 0
    shrunk = 0
    details = []
    for name in available:
        if name == "cmt01":
            results = [result for result, _ in cmt1_runs[:TREND_REPS]]
        else:
            instance = load_cmt(name)
            results = [result for result, _ in pipeline_runs(
                pytestconfig, name, instance, TREND_REPS, "trend")]
        for rep, result in enumerate(results):
            first = result.rounds[0].std
            last = result.rounds[-1].std
            cells += 1
            shrunk += last < first
            details.append(f"{name}#{rep + 1} {first:.2f}->{last:.2f}")
    needed = math.ceil(TREND_PASS_RATIO * cells)
    missing = sorted(set(TREND_SET) - set(available))
    note = f"; members {missing} not in corpus" if missing else ""
    live(pytestconfig, "  [trend] " + ", ".join(details))
    report(pytestconfig, 8,
           shrunk >= needed,
           f"final-round std below first-round std in {shrunk}/{cells} "
           f"cells, need {needed}{note}")


def test_criterion_9_dropout_diversity(pytestconfig):
    def arc_diversity(solutions):
        union = set()
        sizes = []
        for sol in solutions:
            arcs = set()
            for d in sol.drives:
                seq = d.visit_sequence
                arcs.update(zip(seq, seq[1:]))
            union |= arcs
            sizes.append(len(arcs))
        return len(union) / float(np.mean(sizes))

    instances = []
    for name in STUDY_SET:
        if has_cmt(name):
            instances.append((name, load_cmt(name)))
    # Stand-ins for the two clustered members of the five-instance study
    # set whose files are not in the corpus.
    for seed, name in ((11, "ring11"), (12, "ring12")):
        inst = make_clustered_cvrp(n_customers=100, n_clusters=10,
                                   capacity=200.0, seed=seed)
        instances.append((name, split_demands(inst)[0]))
    if len(instances) < 5:
        pytest.skip("study set too small")
    rows = []
    all_greater = True
    for name, inst in instances:
        divs = {}
        for dropout in (0.0, 0.3):
            sols = [construct(inst, RccwConfig(
                lam=1.0, dropout=dropout,
                rng_seed=stream_seed(ROOT, "diversity", name, dropout, s)))
                for s in range(15)]
            divs[dropout] = arc_diversity(sols)
        all_greater &= divs[0.3] > divs[0.0]
        rows.append(f"{name} {divs[0.0]:.2f}->{divs[0.3]:.2f}")
    report(pytestconfig, 9,
           all_greater,
           f"dropout 0.3 diversity above dropout 0 on all "
           f"{len(instances)} instances: {', '.join(rows)}")


def test_criterion_10_rich_fixture_feasible(pytestconfig):
    instance, _ = split_demands(make_rich_instance(seed=7))
    cfg = amp.AmpConfig(rng_seed=stream_seed(ROOT, "rich"))
    t0 = time.monotonic()
    result = amp.solve_detailed(instance, cfg)
    seconds = time.monotonic() - t0
    bd = evaluate(instance, result.solution)
    passed = (bd.hard_violations == ()
              and bd.exceeded_soft_seconds == 0.0)
    report(pytestconfig, 10,
           passed,
           f"118-location fixture: cost {result.cost:.2f}, "
           f"{len(bd.hard_violations)} hard violations, "
           f"{bd.exceeded_soft_seconds:.1f} exceeded soft seconds, "
           f"{seconds:.0f}s")
