"""Slice-request economy: the 12-type catalog, penalties, and SR generation.

The catalog has 3 services (URLLC, eMBB, BE) x 4 demand tiers. Each type
carries a convex piecewise-linear underprovisioning penalty built from a
global severity coefficient kappa and the per-service price.
"""

from __future__ import annotations

import csv
import heapq
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingService, TooFewFlows, UnknownService

SERVICES = ("URLLC", "eMBB", "BE")
PRICE_PER_MBPS_SLOT = {"URLLC": 10.0, "eMBB": 5.0, "BE": 2.5}
DEFAULT_KAPPA = 0.2

# Demand tiers measured from the residential traces (25/50/75/95th pct x4)
DEFAULT_DEMANDS_MBPS = (0.4, 8.8, 19.2, 27.2)
# Per-service 90th-percentile duration stand-ins for the canned catalog
DEFAULT_DURATIONS = {"URLLC": 10, "eMBB": 30, "BE": 20}


def penalty_coefficients(kappa: float, price: float) -> tuple[tuple[float, float], ...]:
    """Two (slope, intercept) segments: (3*k*p, -k*p) and (k*p, 0)."""
    if kappa <= 0 or price <= 0:
        raise ValueError("kappa and price must be positive")
    kp = kappa * price  # single product keeps the table values exact
    return ((3.0 * kp, -kp), (kp, 0.0))


@dataclass(frozen=True)
class SliceType:
    type_id: int
    service: str
    demand_mbps: float
    duration_slots: int
    price: float        # per Mbps per slot
    segments: tuple[tuple[float, float], ...]  # (slope a >= 0, intercept b <= 0)

    def __post_init__(self):
        if self.service not in SERVICES:
            raise ValueError(f"unknown service {self.service!r}")
        if self.demand_mbps <= 0 or self.duration_slots < 1 or self.price <= 0:
            raise ValueError("demand, duration and price must be positive")
        for a, b in self.segments:
            if a < 0 or b > 0:
                raise ValueError("segments need slope >= 0 and intercept <= 0")
        at_full = max(b for _, b in self.segments)
        if abs(at_full) > 1e-12:
            raise ValueError("penalty at f=1 must be 0")

    @property
    def reward(self) -> float:
        return self.price * self.demand_mbps * self.duration_slots


def penalty(stype: SliceType, f: float) -> float:
    """Convex piecewise-linear penalty, floored at zero."""
    if not 0.0 <= f <= 1.0 + 1e-12:
        raise ValueError(f"fraction {f} outside [0, 1]")
    u = 1.0 - min(f, 1.0)
    return max(max(a * u + b for a, b in stype.segments), 0.0)


@dataclass(frozen=True)
class SliceRequest:
    index: int
    stype: SliceType
    arrival_slot: int

    @property
    def demand_mbps(self) -> float:
        return self.stype.demand_mbps

    @property
    def duration_slots(self) -> int:
        return self.stype.duration_slots

    @property
    def reward(self) -> float:
        return self.stype.reward

    @property
    def end_slot(self) -> int:
        """First slot after the activity window."""
        return self.arrival_slot + self.stype.duration_slots


@dataclass(frozen=True)
class FlowRecord:
    start_slot: int
    duration_slots: int
    throughput_mbps: float
    service: str

    def __post_init__(self):
        if self.duration_slots < 1:
            raise ValueError("flow duration must be >= 1 slot")
        if self.throughput_mbps <= 0:
            raise ValueError("flow throughput must be positive")


def default_catalog(kappa: float = DEFAULT_KAPPA) -> tuple[SliceType, ...]:
    """Canned 12-type catalog with the measured demand tiers."""
    types = []
    tid = 0
    for service in SERVICES:
        segs = penalty_coefficients(kappa, PRICE_PER_MBPS_SLOT[service])
        for demand in DEFAULT_DEMANDS_MBPS:
            types.append(SliceType(
                type_id=tid,
                service=service,
                demand_mbps=demand,
                duration_slots=DEFAULT_DURATIONS[service],
                price=PRICE_PER_MBPS_SLOT[service],
                segments=segs,
            ))
            tid += 1
    return tuple(types)


def build_catalog(flows: list[FlowRecord] | None = None,
                  config: list[dict] | None = None,
                  kappa: float = DEFAULT_KAPPA) -> tuple[SliceType, ...]:
    """Build the 12-type catalog from flow statistics or an explicit config.

    Stats mode: per service, duration = 90th pct of flow durations and
    demands = {25, 50, 75, 95}th pct of flow throughput scaled by 4x.
    Config mode: a list of 12 dicts with service, demand_mbps,
    duration_slots (price and penalties derived from the service).
    """
    if (flows is None) == (config is None):
        raise ValueError("pass exactly one of flows or config")
    if config is not None:
        if len(config) != 12:
            raise ValueError(f"config must list 12 entries, got {len(config)}")
        types = []
        for tid, entry in enumerate(config):
            service = entry["service"]
            if service not in SERVICES:
                raise MissingService(f"unknown service {service!r}")
            price = float(entry.get("price", PRICE_PER_MBPS_SLOT[service]))
            types.append(SliceType(
                type_id=tid,
                service=service,
                demand_mbps=float(entry["demand_mbps"]),
                duration_slots=int(entry["duration_slots"]),
                price=price,
                segments=penalty_coefficients(kappa, price),
            ))
        return tuple(types)

    per_service: dict[str, list[FlowRecord]] = {s: [] for s in SERVICES}
    for flow in flows:
        if flow.service not in per_service:
            raise UnknownService(f"flow service {flow.service!r}")
        per_service[flow.service].append(flow)
    types = []
    tid = 0
    for service in SERVICES:
        group = per_service[service]
        if len(group) < 20:
            raise TooFewFlows(f"{service}: {len(group)} flows, need >= 20")
        durations = np.array([f.duration_slots for f in group], dtype=float)
        throughputs = np.array([f.throughput_mbps for f in group], dtype=float)
        duration = int(round(float(np.percentile(durations, 90))))
        duration = max(duration, 1)
        segs = penalty_coefficients(kappa, PRICE_PER_MBPS_SLOT[service])
        for pct in (25, 50, 75, 95):
            demand = 4.0 * float(np.percentile(throughputs, pct))
            types.append(SliceType(
                type_id=tid,
                service=service,
                demand_mbps=demand,
                duration_slots=duration,
                price=PRICE_PER_MBPS_SLOT[service],
                segments=segs,
            ))
            tid += 1
    return tuple(types)


@dataclass
class _OpenSlice:
    """Mutable packing state for one generated SR."""
    request: SliceRequest
    hosted: list[tuple[float, int]] = field(default_factory=list)  # (tp, end)

    @property
    def end_slot(self) -> int:
        return self.request.end_slot

    def residual_at(self, slot: int) -> float:
        used = sum(tp for tp, end in self.hosted if end > slot)
        return self.request.demand_mbps - used


def generate_slice_requests(flows: list[FlowRecord],
                            catalog: tuple[SliceType, ...]) -> list[SliceRequest]:
    """Pack chronologically-ordered flows into SRs.

    First-fit over open same-service SRs in creation order; unfittable flows
    open a new SR with the smallest catalog demand covering the throughput
    (largest tier plus a resubmitted remainder for oversized flows). A flow
    outliving its hosting SR re-enters the stream at the SR's expiry slot.
    """
    by_service: dict[str, list[SliceType]] = {}
    for stype in catalog:
        by_service.setdefault(stype.service, []).append(stype)
    for service in by_service:
        by_service[service].sort(key=lambda st: st.demand_mbps)

    # heap entries: (start_slot, seq, duration, throughput, service)
    heap: list[tuple[int, int, int, float, str]] = []
    seq = 0
    prev_start = None
    for flow in flows:
        if flow.service not in by_service:
            raise UnknownService(f"no catalog types for {flow.service!r}")
        if prev_start is not None and flow.start_slot < prev_start:
            raise ValueError("flows must be sorted by start slot")
        prev_start = flow.start_slot
        heapq.heappush(heap, (flow.start_slot, seq, flow.duration_slots,
                              flow.throughput_mbps, flow.service))
        seq += 1

    open_slices: list[_OpenSlice] = []
    requests: list[SliceRequest] = []
    eps = 1e-9

    while heap:
        slot, _, duration, throughput, service = heapq.heappop(heap)
        host = None
        for osl in open_slices:
            if (osl.request.stype.service == service
                    and osl.request.arrival_slot <= slot
                    and osl.end_slot > slot
                    and osl.residual_at(slot) >= throughput - eps):
                host = osl
                break
        if host is None:
            tiers = by_service[service]
            chosen = None
            for stype in tiers:
                if stype.demand_mbps >= throughput - eps:
                    chosen = stype
                    break
            hosted_tp = throughput
            if chosen is None:
                # oversized flow: open the largest tier, resubmit the rest
                chosen = tiers[-1]
                hosted_tp = chosen.demand_mbps
                heapq.heappush(heap, (slot, seq, duration,
                                      throughput - hosted_tp, service))
                seq += 1
            request = SliceRequest(index=len(requests), stype=chosen,
                                   arrival_slot=slot)
            requests.append(request)
            host = _OpenSlice(request=request)
            open_slices.append(host)
            throughput = hosted_tp
        flow_end = slot + duration
        occupancy_end = min(flow_end, host.end_slot)
        host.hosted.append((throughput, occupancy_end))
        if flow_end > host.end_slot:
            # tail outlives the SR: treat it as a fresh flow at expiry
            heapq.heappush(heap, (host.end_slot, seq,
                                  flow_end - host.end_slot, throughput, service))
            seq += 1
    return requests


def load_flows(source) -> list[FlowRecord]:
    """Parse `start_slot,duration_slots,throughput_mbps,service` CSV."""
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    reader = csv.DictReader(io.StringIO(text))
    flows = []
    for row in reader:
        flows.append(FlowRecord(
            start_slot=int(row["start_slot"]),
            duration_slots=int(row["duration_slots"]),
            throughput_mbps=float(row["throughput_mbps"]),
            service=row["service"].strip(),
        ))
    return flows


def export_slice_requests(requests: list[SliceRequest]) -> bytes:
    """SR CSV: index,arrival_slot,type_id,service,demand_mbps,duration_slots,reward."""
    lines = ["index,arrival_slot,type_id,service,demand_mbps,duration_slots,reward"]
    for r in requests:
        lines.append(
            f"{r.index},{r.arrival_slot},{r.stype.type_id},{r.stype.service},"
            f"{r.demand_mbps:g},{r.duration_slots},{r.reward:g}"
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_slice_requests(source, catalog: tuple[SliceType, ...]) -> list[SliceRequest]:
    """Parse the SR CSV back against a catalog (types matched by id)."""
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    by_id = {st.type_id: st for st in catalog}
    reader = csv.DictReader(io.StringIO(text))
    requests = []
    for row in reader:
        stype = by_id[int(row["type_id"])]
        requests.append(SliceRequest(
            index=int(row["index"]),
            stype=stype,
            arrival_slot=int(row["arrival_slot"]),
        ))
    return requests
