import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slicesim.errors import EmptyTrace, GapInTrace, MalformedRow, NonMonotonicTime
from slicesim.link_capacity import (
    RslTrace,
    coefficient_of_variation,
    export_rsl_trace,
    generate_synthetic_rsl,
    ingest_rsl_trace,
    initial_level_for,
    map_rsl_to_capacity,
    normalize_to_table,
)

from simhelpers import toy_table


def make_trace(values, start=0):
    return RslTrace(link_id="t", timestamps=tuple(range(start, start + len(values))),
                    rsl=tuple(float(v) for v in values))


class TestIngest:
    def test_three_row_parse(self):
        trace = ingest_rsl_trace(b"timestamp_min,rsl_dbm\n0,-48.0\n1,-48.5\n2,-49.0\n", "x")
        assert len(trace) == 3
        assert trace.rsl == (-48.0, -48.5, -49.0)

    def test_gap_in_trace(self):
        with pytest.raises(GapInTrace):
            ingest_rsl_trace(b"timestamp_min,rsl_dbm\n0,-48.0\n2,-49.0\n", "x")

    def test_non_monotonic(self):
        with pytest.raises(NonMonotonicTime):
            ingest_rsl_trace(b"timestamp_min,rsl_dbm\n1,-48.0\n0,-49.0\n", "x")

    def test_malformed_field(self):
        with pytest.raises(MalformedRow):
            ingest_rsl_trace(b"timestamp_min,rsl_dbm\n0,abc\n", "x")

    def test_empty(self):
        with pytest.raises(EmptyTrace):
            ingest_rsl_trace(b"timestamp_min,rsl_dbm\n", "x")

    def test_round_trip_byte_identical(self):
        trace = generate_synthetic_rsl(
            {"baseline_dbm": -48.0, "event_count": 1, "event_depth_db": 10.0,
             "event_duration_min": 10, "noise_std_db": 0.3},
            length=60, seed=11)
        blob = export_rsl_trace(trace)
        again = ingest_rsl_trace(blob, trace.link_id)
        assert export_rsl_trace(again) == blob
        assert again.rsl == trace.rsl


class TestAcmMapping:
    # Appendix-style threshold walkthroughs on the bundled af60 table.
    def test_down_transition(self, af60):
        series = map_rsl_to_capacity(make_trace([-53.0]), af60, initial_level=7)
        assert series.levels == (6,)
        assert series.capacity_gbps == (1.2,)

    def test_up_transition(self, af60):
        series = map_rsl_to_capacity(make_trace([-49.0]), af60, initial_level=6)
        assert series.levels == (7,)

    def test_deadband_stay(self, af60):
        # rsl = -53 sits inside level 6's (-55.5, -49.5) deadband
        series = map_rsl_to_capacity(make_trace([-53.0]), af60, initial_level=6)
        assert series.levels == (6,)

    def test_multi_level_drop(self, af60):
        # a severe fade crosses several down thresholds within one slot
        series = map_rsl_to_capacity(make_trace([-75.0]), af60, initial_level=7)
        assert series.levels[0] <= 1

    def test_initial_level_from_first_sample(self, af60):
        assert initial_level_for(-48.0, af60) == 7
        assert initial_level_for(-75.0, af60) == 0

    def test_replay_identical(self, af60):
        trace = generate_synthetic_rsl(
            {"baseline_dbm": -48.0, "event_count": 2, "event_depth_db": 20.0,
             "event_duration_min": 20, "noise_std_db": 0.5},
            length=200, seed=3)
        a = map_rsl_to_capacity(trace, af60, initial_level=7)
        b = map_rsl_to_capacity(trace, af60, initial_level=7)
        assert a.levels == b.levels and a.capacity_gbps == b.capacity_gbps

    @given(st.lists(st.floats(min_value=-80, max_value=-40), min_size=1, max_size=50),
           st.floats(min_value=0.1, max_value=5.0))
    @settings(max_examples=60, deadline=None)
    def test_monotone_response(self, values, drop):
        # a pointwise-lower trace never yields a pointwise-higher series
        table = toy_table(4)
        hi = map_rsl_to_capacity(make_trace(values), table, initial_level=0)
        lo = map_rsl_to_capacity(make_trace([v - drop for v in values]), table,
                                 initial_level=0)
        assert all(a >= b for a, b in zip(hi.levels, lo.levels))

    @given(st.integers(min_value=0, max_value=3),
           st.floats(min_value=0.01, max_value=0.99))
    @settings(max_examples=40, deadline=None)
    def test_hysteresis_deadband_property(self, level, frac):
        table = toy_table(4)
        lv = table.levels[level]
        lo = lv.down_dbm if math.isfinite(lv.down_dbm) else -100.0
        hi = lv.up_dbm if math.isfinite(lv.up_dbm) else -20.0
        rsl = lo + frac * (hi - lo)
        if rsl <= lv.down_dbm or rsl >= lv.up_dbm:
            return
        series = map_rsl_to_capacity(make_trace([rsl]), table, initial_level=level)
        assert series.levels == (level,)


class TestCv:
    def test_constant_trace(self):
        assert coefficient_of_variation(make_trace([-50.0] * 120), 60) == [0.0, 0.0]

    def test_hand_value(self):
        # population stddev of (-50,-50,-60,-60) is 5, mean -55
        (cv,) = coefficient_of_variation(make_trace([-50, -50, -60, -60]), 4)
        assert cv == pytest.approx(5.0 / 55.0)

    def test_scale_invariance(self):
        base = [-50, -52, -54, -51]
        (a,) = coefficient_of_variation(make_trace(base), 4)
        (b,) = coefficient_of_variation(make_trace([2 * v for v in base]), 4)
        assert a == pytest.approx(b)

    def test_zero_mean_sentinel(self):
        (cv,) = coefficient_of_variation(make_trace([-1.0, 1.0]), 2)
        assert math.isinf(cv)

    def test_window_validation(self):
        with pytest.raises(ValueError):
            coefficient_of_variation(make_trace([-50, -50]), 1)
        with pytest.raises(ValueError):
            coefficient_of_variation(make_trace([-50]), 2)


class TestSynthetic:
    def test_degenerate_constant(self):
        trace = generate_synthetic_rsl(
            {"baseline_dbm": -48.0, "event_count": 0, "event_depth_db": 0.0,
             "event_duration_min": 0, "noise_std_db": 0.0}, length=30, seed=0)
        assert set(trace.rsl) == {-48.0}

    def test_seed_determinism(self):
        params = {"baseline_dbm": -48.0, "event_count": 2, "event_depth_db": 15.0,
                  "event_duration_min": 20, "noise_std_db": 1.0}
        a = generate_synthetic_rsl(params, length=100, seed=5)
        b = generate_synthetic_rsl(params, length=100, seed=5)
        assert a.rsl == b.rsl

    def test_event_depth_reached(self):
        sigma = 0.3
        trace = generate_synthetic_rsl(
            {"baseline_dbm": -48.0, "event_count": 1, "event_depth_db": 30.0,
             "event_duration_min": 40, "noise_std_db": sigma}, length=120, seed=1)
        assert -78.0 - 3 * sigma <= min(trace.rsl) <= -78.0 + 3 * sigma


class TestNormalize:
    def test_median_sits_4db_above_first_degradation(self, af60):
        trace = make_trace([-70.0 + 0.1 * i for i in range(31)])
        shifted = normalize_to_table(trace, af60)
        median = float(np.median(shifted.rsl))
        assert median == pytest.approx(af60.levels[-1].down_dbm + 4.0)


class TestBundledTables:
    def test_af60_values(self, af60):
        assert af60.num_levels == 8
        assert af60.capacities_mbps == (0.0, 200.0, 670.0, 800.0, 900.0,
                                        970.0, 1200.0, 1950.0)
        assert af60.levels[7].down_dbm == -52.5
        assert af60.levels[6].up_dbm == -49.5
        assert math.isinf(af60.levels[0].down_dbm)
        assert math.isinf(af60.levels[7].up_dbm)

    def test_wave_values(self, wave):
        assert wave.num_levels == 8
        assert wave.capacities_mbps[0] == 0.0
        assert wave.capacities_mbps[-1] == 1000.0
        assert math.isinf(wave.levels[0].down_dbm)
        assert math.isinf(wave.levels[7].up_dbm)
