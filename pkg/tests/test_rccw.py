"""Construction behaviour: savings math, randomization knobs, compression."""

from __future__ import annotations

import random

import pytest

from ampvrp.evaluator import evaluate
from ampvrp.model import TimeWindow
from ampvrp.preprocess import split_demands
from ampvrp.rccw import (
    ConstructionError,
    RccwConfig,
    apply_dropout,
    compute_savings,
    construct,
    sample_config,
)
from ampvrp.synth import make_clustered_cvrp, random_variant_instance

from helpers import line_instance, make_instance


def reference_parallel_savings(dist, demands, capacity):
    """Independently coded textbook parallel savings for plain capacity.

    Starts from singleton routes, walks the directed savings list best
    first with ties on (i, j) ascending, and merges tail-to-head whenever
    the combined demand still fits one vehicle.  Returns customer routes
    without the depot ends.
    """
    n = len(dist)
    routes = {c: [c] for c in range(1, n)}
    load = {c: demands[c - 1] for c in range(1, n)}
    owner = {c: c for c in range(1, n)}
    entries = []
    for i in range(1, n):
        for j in range(1, n):
            if i != j:
                entries.append((dist[i][0] + dist[0][j] - dist[i][j], i, j))
    entries.sort(key=lambda e: (-e[0], e[1], e[2]))
    for _, i, j in entries:
        ri, rj = owner[i], owner[j]
        if ri == rj or routes[ri][-1] != i or routes[rj][0] != j:
            continue
        if load[ri] + load[rj] > capacity + 1e-9:
            continue
        tail = routes.pop(rj)
        for c in tail:
            owner[c] = ri
        routes[ri] = routes[ri] + tail
        load[ri] += load[rj]
    return list(routes.values())


def solution_arcs(solution):
    arcs = set()
    for d in solution.drives:
        seq = d.visit_sequence
        arcs.update(zip(seq, seq[1:]))
    return arcs


def route_arcs(routes):
    arcs = set()
    for r in routes:
        seq = (0, *r, 0)
        arcs.update(zip(seq, seq[1:]))
    return arcs


class TestSavings:
    def test_values_on_a_right_triangle(self):
        inst = make_instance(coords=((0.0, 0.0), (3.0, 0.0), (0.0, 4.0)))
        by_pair = {(e.i, e.j): e.value for e in compute_savings(inst, 1.0)}
        assert by_pair[(1, 2)] == pytest.approx(3.0 + 4.0 - 5.0)
        assert by_pair[(2, 1)] == pytest.approx(4.0 + 3.0 - 5.0)
        assert len(by_pair) == 2

    def test_lambda_scales_the_direct_leg(self):
        inst = make_instance(coords=((0.0, 0.0), (3.0, 0.0), (0.0, 4.0)))
        by_pair = {(e.i, e.j): e.value for e in compute_savings(inst, 0.5)}
        assert by_pair[(1, 2)] == pytest.approx(3.0 + 4.0 - 0.5 * 5.0)

    def test_sorted_best_first_with_total_tie_break(self):
        entries = compute_savings(line_instance(4), 1.0)
        keys = [(-e.value, e.i, e.j) for e in entries]
        assert keys == sorted(keys)
        assert len(entries) == 4 * 3


class TestDropout:
    def _entries(self, count):
        inst = line_instance(4)
        return compute_savings(inst, 1.0)[:count]

    def test_zero_keeps_everything(self):
        entries = self._entries(10)
        assert apply_dropout(entries, 0.0, random.Random(1)) == entries

    def test_drops_the_floor_of_the_fraction(self):
        entries = self._entries(10)
        assert len(apply_dropout(entries, 0.25, random.Random(1))) == 8
        assert len(apply_dropout(entries, 0.09, random.Random(1))) == 10

    def test_survivors_keep_their_relative_order(self):
        entries = self._entries(12)
        kept = apply_dropout(entries, 0.5, random.Random(3))
        positions = [entries.index(e) for e in kept]
        assert positions == sorted(positions)

    def test_everything_can_go(self):
        assert apply_dropout(self._entries(5), 1.0, random.Random(0)) == []

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            apply_dropout(self._entries(5), 1.5, random.Random(0))


class TestConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            RccwConfig(lam=0.0)
        with pytest.raises(ValueError):
            RccwConfig(dropout=1.0)

    def test_sample_stays_in_band(self):
        rng = random.Random(11)
        for _ in range(50):
            cfg = sample_config(rng, (0.4, 1.6), (0.2, 0.4))
            assert 0.4 <= cfg.lam <= 1.6
            assert 0.2 <= cfg.dropout <= 0.4


class TestReferenceEquivalence:
    def test_matches_textbook_savings_arc_for_arc(self):
        for seed in range(6):
            inst = make_clustered_cvrp(n_customers=40, n_clusters=5,
                                       capacity=120.0, seed=seed)
            sol = construct(inst, RccwConfig(lam=1.0, dropout=0.0))
            demands = [loc.demand_mass for loc in inst.locations[1:]]
            routes = reference_parallel_savings(
                inst.distance_matrix, demands,
                inst.vehicles[0].capacity_mass)
            assert solution_arcs(sol) == route_arcs(routes), f"seed {seed}"


class TestConstruct:
    def test_deterministic_for_a_fixed_config(self):
        inst = make_clustered_cvrp(n_customers=30, n_clusters=4, seed=2)
        cfg = RccwConfig(lam=0.8, dropout=0.3, rng_seed=5)
        assert construct(inst, cfg) == construct(inst, cfg)

    def test_seed_argument_overrides_the_config(self):
        inst = make_clustered_cvrp(n_customers=30, n_clusters=4, seed=2)
        cfg = RccwConfig(lam=0.8, dropout=0.3, rng_seed=5)
        assert construct(inst, cfg, rng_seed=5) == construct(inst, cfg)
        others = [construct(inst, cfg, rng_seed=s) for s in range(6)]
        assert any(o != construct(inst, cfg) for o in others)

    def test_dropout_diversifies_the_walk(self):
        inst = make_clustered_cvrp(n_customers=30, n_clusters=4, seed=2)
        base = frozenset(solution_arcs(
            construct(inst, RccwConfig(lam=1.0, dropout=0.0))))
        walks = {frozenset(solution_arcs(construct(
            inst, RccwConfig(lam=1.0, dropout=0.4, rng_seed=s))))
            for s in range(8)}
        assert walks != {base}

    def test_every_customer_served_exactly_once(self):
        rng = random.Random(7)
        for _ in range(25):
            inst, _ = split_demands(random_variant_instance(rng))
            sol = construct(inst, RccwConfig(lam=1.0, dropout=0.2,
                                             rng_seed=1))
            visits = sol.visited_customers()
            assert sorted(visits) == list(range(1, inst.n_locations))

    def test_capacity_only_walks_stay_feasible(self):
        for seed in range(4):
            inst = make_clustered_cvrp(n_customers=35, n_clusters=5,
                                       seed=seed)
            sol = construct(inst, RccwConfig(lam=1.2, dropout=0.3,
                                             rng_seed=seed))
            assert evaluate(inst, sol).hard_violations == ()

    def test_merge_respects_hard_windows(self):
        # Each customer alone fits its window; chaining them does not, so
        # the walk must keep two separate drives.
        inst = make_instance(
            coords=((0.0, 0.0), (1.0, 0.0), (2.0, 0.0)),
            demands=[2.0, 2.0], service=1.0, capacity=10.0, n_vehicles=2,
            hard=[TimeWindow(0.0, 2.2), TimeWindow(0.0, 3.2)])
        sol = construct(inst, RccwConfig())
        assert len(sol.drives) == 2
        assert evaluate(inst, sol).hard_violations == ()

    def test_compression_chains_trips_onto_a_single_vehicle(self):
        inst = line_instance(4, capacity=10.0, n_vehicles=1)
        sol = construct(inst, RccwConfig())
        assert {d.vehicle_id for d in sol.drives} == {0}
        assert len(sol.drives) >= 2
        assert evaluate(inst, sol).hard_violations == ()

    def test_oversized_demand_surfaces_as_a_violation(self):
        inst = make_instance(coords=((0.0, 0.0), (1.0, 0.0)),
                             demands=[15.0], capacity=10.0, n_vehicles=1)
        sol = construct(inst, RccwConfig())
        assert sol.visited_customers() == (1,)
        assert evaluate(inst, sol).hard_violations != ()

    def test_impossible_skill_raises(self):
        inst = make_instance(
            coords=((0.0, 0.0), (1.0, 0.0), (2.0, 0.0)),
            skills=[frozenset({"crane"}), frozenset()])
        with pytest.raises(ConstructionError, match="crane"):
            construct(inst, RccwConfig())

    def test_skill_gated_customer_lands_on_a_skilled_vehicle(self):
        inst = make_instance(
            coords=((0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)),
            demands=[4.0, 4.0, 4.0], capacity=20.0, n_vehicles=2,
            skills=[frozenset({"lift"}), frozenset(), frozenset()],
            vehicle_skills=[frozenset(), frozenset({"lift"})])
        sol = construct(inst, RccwConfig())
        assert evaluate(inst, sol).hard_violations == ()
        for d in sol.drives:
            if 1 in d.interior:
                assert d.vehicle_id == 1
