import math

import pytest
from hypothesis import given, settings, strategies as st

from mmwave_hbf.phy import McsEntry
from mmwave_hbf.scheduler import (Allocation, Direction, FrameConfig, SchedulerState,
                                  SubframeSchedule, bundle_dimensions, demand_symbols,
                                  pmrs_schedule, tmrs_schedule, validate_schedule)

DL, UL = Direction.DL, Direction.UL


def dl_only(demands):
    return {(u, DL): n for u, n in demands.items()}


class TestFrame:
    def test_defaults(self):
        f = FrameConfig()
        assert f.n_data_symbols == 48
        assert f.slot_duration_us == pytest.approx(249.9)
        assert f.n_grid_symbols == 56

    def test_data_symbol_mapping(self):
        f = FrameConfig()
        assert f.to_grid(0) == 1
        assert f.to_grid(11) == 12
        assert f.to_grid(12) == 15
        assert f.to_data(0) is None and f.to_data(13) is None
        assert all(f.to_data(f.to_grid(i)) == i for i in range(48))
        assert f.is_control(14) and not f.is_control(15)

    def test_invalid(self):
        with pytest.raises(ValueError):
            FrameConfig(n_layers=0)
        with pytest.raises(ValueError):
            FrameConfig(control_symbols=(14,))


class TestDemand:
    def test_one_packet(self):
        assert demand_symbols(1500, McsEntry(0, 3.64, 0.0), 3300) == 1

    def test_empty(self):
        assert demand_symbols(0, 1.0, 3300) == 0

    def test_arithmetic(self):
        assert demand_symbols(3000, 1.0, 3300) == math.ceil(24000 / 3300) == 8

    def test_negative(self):
        with pytest.raises(ValueError):
            demand_symbols(-1, 1.0, 3300)

    def test_bundle_dimensions(self):
        assert bundle_dimensions(7, 4, 48) == (2, 24)
        assert bundle_dimensions(0, 4, 48) == (0, 0)
        assert bundle_dimensions(200, 1, 48) == (48, 1)


class TestPmrs:
    def test_seven_ues_four_layers(self):
        frame = FrameConfig(n_layers=4)
        st_ = SchedulerState.for_ues(range(7))
        s = pmrs_schedule(st_, dl_only({u: 48 for u in range(7)}), frame)
        assert s.bundle_length == 24
        bundles = s.bundles()
        assert [len(b) for b in bundles] == [4, 3]
        assert [b[0].start_symbol for b in bundles] == [1, frame.to_grid(24)]
        assert s.idle_symbols == [0, 0, 0, 24]
        assert validate_schedule(s, frame) == []

    def test_saturated_single_bundle(self):
        frame = FrameConfig(n_layers=4)
        s = pmrs_schedule(SchedulerState.for_ues(range(4)), dl_only({u: 60 for u in range(4)}),
                          frame)
        assert s.bundle_length == 48
        assert {a.start_symbol for a in s.allocations} == {1}
        assert all(a.n_symbols == 48 for a in s.allocations)
        assert s.padding_symbols == [0, 0, 0, 0]

    def test_padding_trace(self):
        frame = FrameConfig(n_layers=2)
        s = pmrs_schedule(SchedulerState.for_ues([0, 1]), dl_only({0: 24, 1: 10}), frame)
        assert len(s.bundles()) == 1
        assert s.allocations[0].start_symbol == s.allocations[1].start_symbol
        assert [a.n_symbols for a in s.allocations] == [24, 10]
        assert s.padding_symbols == [24, 38]

    def test_directions_alternate(self):
        frame = FrameConfig(n_layers=2)
        demands = {(u, d): 3 for u in range(4) for d in Direction}
        s = pmrs_schedule(SchedulerState.for_ues(range(4)), demands, frame)
        dirs = [b[0].direction for b in s.bundles()]
        assert dirs == [DL, UL, DL, UL]
        for b in s.bundles():
            assert len({a.direction for a in b}) == 1

    def test_no_demand(self):
        frame = FrameConfig(n_layers=2)
        s = pmrs_schedule(SchedulerState.for_ues(range(3)), {}, frame)
        assert s.allocations == [] and s.idle_symbols == [48, 48]

    def test_unserved_move_to_head(self):
        frame = FrameConfig(n_layers=1)
        state = SchedulerState.for_ues(range(50))
        pmrs_schedule(state, dl_only({u: 1 for u in range(50)}), frame)
        assert state.rr_queue[:2] == [48, 49]

    def test_beams_split_collisions(self):
        frame = FrameConfig(n_layers=2)
        beams = {0: 5, 1: 5, 2: 9, 3: 9}
        s = pmrs_schedule(SchedulerState.for_ues(range(4)), dl_only({u: 4 for u in range(4)}),
                          frame, beams=beams)
        for b in s.bundles():
            assert len({beams[a.ue_id] for a in b}) == len(b)
        assert [[a.ue_id for a in b] for b in s.bundles()] == [[0, 2], [1, 3]]


class TestTmrs:
    def test_two_ues(self):
        state = SchedulerState.for_ues(["A", "B"])
        s = tmrs_schedule(state, dl_only({"A": 30, "B": 30}), FrameConfig())
        assert [(a.ue_id, a.n_symbols) for a in s.allocations] == [("A", 30), ("B", 18)]
        assert s.allocations[1].start_symbol == FrameConfig().to_grid(30)
        assert state.rr_queue[0] == "B"

    def test_single_small(self):
        s = tmrs_schedule(SchedulerState.for_ues([0]), dl_only({0: 5}), FrameConfig())
        assert len(s.allocations) == 1 and s.allocations[0].n_symbols == 5
        assert s.padding_symbols == [0] and s.idle_symbols == [43]

    def test_empty(self):
        s = tmrs_schedule(SchedulerState.for_ues([0, 1]), {}, FrameConfig())
        assert s.allocations == [] and s.idle_symbols == [48]

    def test_requires_single_layer(self):
        with pytest.raises(ValueError):
            tmrs_schedule(SchedulerState.for_ues([0]), {}, FrameConfig(n_layers=2))

    def test_direction_alternates_per_turn(self):
        state = SchedulerState.for_ues([0])
        demands = {(0, DL): 2, (0, UL): 2}
        first = tmrs_schedule(state, demands, FrameConfig())
        second = tmrs_schedule(state, demands, FrameConfig())
        assert [a.direction for a in first.allocations] == [DL, UL]
        assert [a.direction for a in second.allocations] == [UL, DL]


class TestValidator:
    def test_staggered_starts(self):
        frame = FrameConfig(n_layers=2)
        s = SubframeSchedule(allocations=[Allocation(0, 0, DL, 1, 10), Allocation(1, 1, DL, 4, 10)])
        assert any("different start" in p for p in validate_schedule(s, frame))

    def test_control_symbol(self):
        s = SubframeSchedule(allocations=[Allocation(0, 0, DL, 14, 3)])
        assert any("control" in p for p in validate_schedule(s, FrameConfig()))

    def test_same_layer_overlap(self):
        s = SubframeSchedule(allocations=[Allocation(0, 0, DL, 1, 5), Allocation(1, 0, UL, 3, 5)])
        assert any("overlap" in p for p in validate_schedule(s, FrameConfig()))

    def test_past_end_and_empty(self):
        s = SubframeSchedule(allocations=[Allocation(0, 0, DL, 55, 2), Allocation(1, 0, DL, 1, 0)])
        probs = validate_schedule(s, FrameConfig())
        assert len(probs) == 2

    def test_bad_accounting(self):
        s = SubframeSchedule(allocations=[Allocation(0, 0, DL, 1, 5)], padding_symbols=[0],
                             idle_symbols=[40])
        assert any("accounting" in p for p in validate_schedule(s, FrameConfig()))


demand_maps = st.dictionaries(
    st.tuples(st.integers(0, 29), st.sampled_from(list(Direction))),
    st.integers(0, 60), max_size=60)


class TestProperties:
    @settings(max_examples=300)
    @given(demands=demand_maps, layers=st.integers(1, 4),
           beams=st.none() | st.dictionaries(st.integers(0, 29), st.integers(0, 5)))
    def test_pmrs_valid(self, demands, layers, beams):
        frame = FrameConfig(n_layers=layers)
        s = pmrs_schedule(SchedulerState.for_ues(range(30)), demands, frame, beams=beams)
        assert validate_schedule(s, frame) == []
        assert (s.scheduled_symbols + sum(s.padding_symbols) + sum(s.idle_symbols)
                == 48 * layers)
        for a in s.allocations:
            assert 1 <= a.n_symbols <= demands[(a.ue_id, a.direction)]
            assert s.bundle_length - a.n_symbols <= s.bundle_length - 1
        for b in s.bundles():
            assert len({a.ue_id for a in b}) == len(b)
            if beams is not None:
                used = [beams[a.ue_id] for a in b if a.ue_id in beams]
                assert len(used) == len(set(used))

    @settings(max_examples=100)
    @given(n_ues=st.integers(1, 120), layers=st.integers(1, 4), both=st.booleans(),
           seed=st.integers(0, 1000))
    def test_fairness(self, n_ues, layers, both, seed):
        frame = FrameConfig(n_layers=layers)
        dirs = list(Direction) if both else [DL]
        demands = {(u, d): 1 + (u * 7 + seed) % 30 for u in range(n_ues) for d in dirs}
        window = math.ceil(len(demands) / layers)
        state = SchedulerState.for_ues(range(n_ues))
        served = set()
        for _ in range(window):
            s = pmrs_schedule(state, demands, frame)
            served |= {a.ue_id for a in s.allocations}
        assert served == set(range(n_ues))
        assert sorted(state.rr_queue) == list(range(n_ues))

    @settings(max_examples=200)
    @given(demands=demand_maps)
    def test_tmrs_work_conserving(self, demands):
        frame = FrameConfig()
        s = tmrs_schedule(SchedulerState.for_ues(range(30)), demands, frame)
        assert validate_schedule(s, frame) == []
        assert s.padding_symbols == [0]
        total = sum(demands.values())
        if total >= 48:
            assert s.idle_symbols == [0]
        else:
            assert s.scheduled_symbols == total

    @settings(max_examples=100)
    @given(n_ues=st.integers(1, 48), extra=st.integers(0, 20))
    def test_single_layer_equal_quanta(self, n_ues, extra):
        frame = FrameConfig(n_layers=1)
        n_a = 48 // n_ues
        s = pmrs_schedule(SchedulerState.for_ues(range(n_ues)),
                          dl_only({u: n_a + extra for u in range(n_ues)}), frame)
        assert [a.n_symbols for a in s.allocations] == [n_a] * n_ues
        assert s.padding_symbols == [0]
        starts = [frame.to_data(a.start_symbol) for a in s.allocations]
        assert starts == [i * n_a for i in range(n_ues)]
