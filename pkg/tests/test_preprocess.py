"""Demand splitting: thresholds, conservation and reporting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ampvrp.model import Drive, Solution, validate_instance
from ampvrp.preprocess import merge_back, split_demands

from helpers import line_instance, make_instance


class TestSplitDemands:
    def test_identity_when_everything_fits(self):
        inst = line_instance(3, demands=[5.0, 5.0, 5.0], capacity=10.0)
        out, smap = split_demands(inst)
        assert out is inst
        assert smap.is_identity
        assert smap.parts_of(2) == (2,)

    def test_oversized_mass_splits(self):
        inst = line_instance(2, demands=[25.0, 5.0], capacity=10.0)
        out, smap = split_demands(inst)
        parts = smap.parts_of(1)
        assert len(parts) == 3
        masses = [out.locations[p].demand_mass for p in parts]
        assert all(m <= 10.0 + 1e-9 for m in masses)
        assert abs(sum(masses) - 25.0) < 1e-9
        # The untouched customer keeps a single vertex.
        assert len(smap.parts_of(2)) == 1
        assert validate_instance(out) == []

    def test_threshold_is_largest_fleet_capacity(self):
        # 25 fits the big vehicle even though the small one cannot carry it.
        inst = make_instance(coords=((0.0, 0.0), (1.0, 0.0)),
                             demands=[25.0], capacity=10.0, n_vehicles=2)
        big = inst.vehicles[1]
        vehicles = (inst.vehicles[0],
                    type(big)(id=1, capacity_mass=30.0, capacity_volume=0.0,
                              hard_window=big.hard_window,
                              soft_window=big.soft_window))
        inst2 = type(inst)(inst.locations, vehicles, inst.distance_matrix,
                           inst.travel_time)
        out, smap = split_demands(inst2)
        assert smap.is_identity
        assert out is inst2

    def test_volume_dimension_triggers_too(self):
        inst = line_instance(1, demands=[1.0], volumes=[7.0], capacity=100.0,
                             capacity_volume=3.0)
        out, smap = split_demands(inst)
        parts = smap.parts_of(1)
        assert len(parts) == 3
        volumes = [out.locations[p].demand_volume for p in parts]
        assert all(v <= 3.0 + 1e-9 for v in volumes)
        assert abs(sum(volumes) - 7.0) < 1e-9

    def test_split_vertices_are_colocated_and_free_to_hop(self):
        inst = line_instance(2, demands=[25.0, 5.0], capacity=10.0)
        out, smap = split_demands(inst)
        parts = smap.parts_of(1)
        for a in parts:
            for b in parts:
                assert out.distance_matrix[a, b] == 0.0
                assert np.all(out.travel_time.times[:, a, b] == 0.0)
        src = inst.locations[1]
        for p in parts:
            loc = out.locations[p]
            assert (loc.x, loc.y) == (src.x, src.y)
            assert loc.hard_window == src.hard_window
            assert loc.service_duration == src.service_duration

    def test_cross_distances_preserved(self):
        inst = line_instance(2, demands=[25.0, 5.0], capacity=10.0)
        out, smap = split_demands(inst)
        p = smap.parts_of(1)[0]
        q = smap.parts_of(2)[0]
        assert out.distance_matrix[p, q] == inst.distance_matrix[1, 2]

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.5, 200.0), st.floats(0.0, 50.0), st.floats(1.0, 20.0),
           st.one_of(st.just(0.0), st.floats(0.5, 10.0)))
    def test_conservation_property(self, mass, volume, qm, qv):
        inst = line_instance(1, demands=[mass], volumes=[volume],
                             capacity=qm, capacity_volume=qv)
        out, smap = split_demands(inst)
        parts = smap.parts_of(1)
        total_m = sum(out.locations[p].demand_mass for p in parts)
        total_v = sum(out.locations[p].demand_volume for p in parts)
        assert abs(total_m - mass) < 1e-9
        assert abs(total_v - volume) < 1e-9
        for p in parts:
            assert out.locations[p].demand_mass <= qm + 1e-9
            if qv > 0:
                assert out.locations[p].demand_volume <= qv + 1e-9


def test_absurd_part_count_rejected():
    inst = line_instance(1, demands=[1.0e6], capacity=1.0e-2)
    with pytest.raises(ValueError, match="10000 split parts"):
        split_demands(inst)


def test_split_threshold_respects_skills():
    # A gated customer must split to fit the biggest vehicle that is
    # allowed to serve it, not the biggest vehicle overall.
    from dataclasses import replace

    base = line_instance(1, demands=[90.0], capacity=100.0, n_vehicles=2,
                         skills=[frozenset({"lift"})])
    lifter = replace(base.vehicles[1], capacity_mass=40.0,
                     skills=frozenset({"lift"}))
    gated = replace(base, vehicles=(base.vehicles[0], lifter))
    out, smap = split_demands(gated)
    parts = smap.parts_of(1)
    assert len(parts) == 3
    assert all(out.locations[p].demand_mass <= 40.0 + 1e-9 for p in parts)

    # Without the skill gate the 100-capacity vehicle sets the threshold.
    plain = line_instance(1, demands=[90.0], capacity=100.0, n_vehicles=2)
    shrunk = replace(plain.vehicles[1], capacity_mass=40.0)
    _, smap2 = split_demands(replace(plain, vehicles=(plain.vehicles[0],
                                                      shrunk)))
    assert smap2.is_identity


class TestMergeBack:
    def test_split_customer_reported_per_drive(self):
        inst = line_instance(2, demands=[25.0, 5.0], capacity=10.0)
        out, smap = split_demands(inst)
        a, b, c = smap.parts_of(1)
        other = smap.parts_of(2)[0]
        sol = Solution((Drive(0, (0, a, b, 0)), Drive(1, (0, c, other, 0))))
        report = merge_back(sol, smap)
        assert abs(report.delivered_mass(1) - 25.0) < 1e-9
        assert abs(report.delivered_mass(2) - 5.0) < 1e-9
        by_loc = report.by_location()
        assert {r.drive_index for r in by_loc[1]} == {0, 1}
        assert [r.vehicle_id for r in by_loc[2]] == [1]

    def test_identity_map_reporting(self):
        inst = line_instance(2)
        _, smap = split_demands(inst)
        report = merge_back(Solution((Drive(0, (0, 1, 2, 0)),)), smap)
        assert report.delivered_mass(1) == 5.0
        assert report.delivered_volume(1) == 0.0
