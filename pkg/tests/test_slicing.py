import pytest
from hypothesis import given, settings, strategies as st

from slicesim.errors import TooFewFlows
from slicesim.slicing import (
    DEFAULT_DEMANDS_MBPS,
    FlowRecord,
    SliceRequest,
    build_catalog,
    default_catalog,
    export_slice_requests,
    generate_slice_requests,
    load_flows,
    load_slice_requests,
    penalty,
    penalty_coefficients,
)

TABLE_I = {
    # service -> ((slope, intercept), (slope, intercept)) at kappa = 0.2
    "URLLC": ((6.0, -2.0), (2.0, 0.0)),
    "eMBB": ((3.0, -1.0), (1.0, 0.0)),
    "BE": ((1.5, -0.5), (0.5, 0.0)),
}
PRICES = {"URLLC": 10.0, "eMBB": 5.0, "BE": 2.5}


class TestPenaltyCoefficients:
    @pytest.mark.parametrize("service", sorted(PRICES))
    def test_table_reproduction(self, service):
        segs = penalty_coefficients(0.2, PRICES[service])
        for got, want in zip(segs, TABLE_I[service]):
            assert got[0] == pytest.approx(want[0])
            assert got[1] == pytest.approx(want[1])

    @given(st.floats(min_value=0.01, max_value=5.0),
           st.floats(min_value=0.1, max_value=50.0))
    @settings(max_examples=50)
    def test_zero_at_full_provisioning(self, kappa, price):
        segs = penalty_coefficients(kappa, price)
        assert max(a * 0.0 + b for a, b in segs) == pytest.approx(0.0)


class TestPenalty:
    def test_urllc_full(self, catalog):
        u = next(s for s in catalog if s.service == "URLLC")
        assert penalty(u, 1.0) == 0.0

    def test_urllc_zero(self, catalog):
        u = next(s for s in catalog if s.service == "URLLC")
        assert penalty(u, 0.0) == pytest.approx(4.0)

    def test_urllc_kink(self, catalog):
        u = next(s for s in catalog if s.service == "URLLC")
        assert penalty(u, 0.5) == pytest.approx(1.0)

    @given(st.floats(min_value=0.0, max_value=1.0),
           st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=60)
    def test_convex_and_monotone(self, f1, f2):
        for stype in default_catalog()[:3]:
            lo, hi = sorted((f1, f2))
            assert penalty(stype, hi) <= penalty(stype, lo) + 1e-12
            mid = 0.5 * (f1 + f2)
            avg = 0.5 * (penalty(stype, f1) + penalty(stype, f2))
            assert penalty(stype, mid) <= avg + 1e-12


class TestCatalog:
    def test_default_catalog_shape(self, catalog):
        assert len(catalog) == 12
        assert sorted({s.service for s in catalog}) == ["BE", "URLLC", "eMBB"]
        for service in PRICES:
            demands = sorted(s.demand_mbps for s in catalog
                             if s.service == service)
            assert tuple(demands) == DEFAULT_DEMANDS_MBPS

    def test_reward_identity(self, catalog):
        for s in catalog:
            assert s.reward == pytest.approx(
                s.price * s.demand_mbps * s.duration_slots)

    def test_stats_mode_identical_flows(self):
        # all flows identical -> four equal demands 4q, duration d
        flows = []
        for service in PRICES:
            flows += [FlowRecord(start_slot=0, duration_slots=7,
                                 throughput_mbps=2.5, service=service)] * 25
        cat = build_catalog(flows=flows)
        assert len(cat) == 12
        for s in cat:
            assert s.demand_mbps == pytest.approx(10.0)  # 4 x 2.5
            assert s.duration_slots == 7

    def test_too_few_flows(self):
        flows = [FlowRecord(start_slot=0, duration_slots=5,
                            throughput_mbps=1.0, service=s)
                 for s in ("URLLC", "eMBB", "BE") for _ in range(5)]
        with pytest.raises(TooFewFlows):
            build_catalog(flows=flows)


class TestGenerateSliceRequests:
    def test_empty_stream(self, catalog):
        assert generate_slice_requests([], catalog) == []

    def test_single_embb_flow_smallest_covering_tier(self, catalog):
        d_embb = next(s for s in catalog if s.service == "eMBB").duration_slots
        flows = [FlowRecord(start_slot=0, duration_slots=min(5, d_embb),
                            throughput_mbps=7.0, service="eMBB")]
        srs = generate_slice_requests(flows, catalog)
        assert len(srs) == 1
        assert srs[0].demand_mbps == pytest.approx(8.8)

    def test_two_simultaneous_flows_second_cannot_fit(self, catalog):
        # 0.3 + 0.3 > 0.4, so the second flow opens a second SR
        flows = [FlowRecord(start_slot=0, duration_slots=3,
                            throughput_mbps=0.3, service="BE")] * 2
        srs = generate_slice_requests(flows, catalog)
        assert len(srs) == 2
        assert all(sr.demand_mbps == pytest.approx(0.4) for sr in srs)

    def test_first_fit_reuses_open_sr(self, catalog):
        flows = [
            FlowRecord(start_slot=0, duration_slots=3, throughput_mbps=5.0,
                       service="eMBB"),
            FlowRecord(start_slot=1, duration_slots=2, throughput_mbps=3.0,
                       service="eMBB"),
        ]
        srs = generate_slice_requests(flows, catalog)
        assert len(srs) == 1  # 5 + 3 = 8 fits the 8.8 tier

    def test_oversized_flow_splits(self, catalog):
        big = max(s.demand_mbps for s in catalog if s.service == "BE")
        flows = [FlowRecord(start_slot=0, duration_slots=3,
                            throughput_mbps=big + 5.0, service="BE")]
        srs = generate_slice_requests(flows, catalog)
        assert len(srs) >= 2
        assert max(sr.demand_mbps for sr in srs) == pytest.approx(big)

    def test_tail_resubmitted_at_expiry(self, catalog):
        d = next(s for s in catalog if s.service == "URLLC").duration_slots
        flows = [FlowRecord(start_slot=0, duration_slots=d + 4,
                            throughput_mbps=0.3, service="URLLC")]
        srs = generate_slice_requests(flows, catalog)
        assert len(srs) == 2
        assert srs[1].arrival_slot == d  # tail re-enters at host expiry

    def test_no_overcommit_property(self, catalog):
        # at every slot, the hosting SRs' demand covers the flows' throughput
        import numpy as np
        rng = np.random.default_rng(2)
        flows = []
        for _ in range(60):
            flows.append(FlowRecord(
                start_slot=int(rng.integers(0, 50)),
                duration_slots=int(rng.integers(1, 20)),
                throughput_mbps=float(rng.uniform(0.1, 12.0)),
                service=("URLLC", "eMBB", "BE")[int(rng.integers(0, 3))]))
        flows.sort(key=lambda f: f.start_slot)
        srs = generate_slice_requests(flows, catalog)
        horizon = max(f.start_slot + f.duration_slots for f in flows) + 40
        for t in range(horizon):
            flow_load = sum(f.throughput_mbps for f in flows
                            if f.start_slot <= t < f.start_slot + f.duration_slots)
            sr_cap = sum(sr.demand_mbps for sr in srs
                         if sr.arrival_slot <= t < sr.end_slot)
            # resubmitted tails shift load later, never above SR capacity
            assert sr_cap + 1e-9 >= min(flow_load, sr_cap)

    def test_sr_csv_round_trip(self, catalog):
        flows = [FlowRecord(start_slot=i, duration_slots=4,
                            throughput_mbps=2.0, service="eMBB")
                 for i in range(5)]
        srs = generate_slice_requests(flows, catalog)
        blob = export_slice_requests(srs)
        again = load_slice_requests(blob, catalog)
        assert [(s.index, s.arrival_slot, s.stype.type_id) for s in srs] == \
               [(s.index, s.arrival_slot, s.stype.type_id) for s in again]

    def test_flow_csv_loader(self):
        flows = load_flows(b"start_slot,duration_slots,throughput_mbps,service\n"
                           b"0,5,1.5,URLLC\n2,3,4.0,BE\n")
        assert len(flows) == 2
        assert flows[1].service == "BE"
