"""RSL traces and hysteresis-based ACM capacity mapping.

An RSL (received signal level) trace is a one-minute-resolution series of
received power samples in dBm. The ACM table maps RSL to discrete capacity
levels through per-level up/down hysteresis thresholds. All functions here
are pure; traces and tables are immutable once constructed.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import (
    EmptyTrace,
    GapInTrace,
    MalformedRow,
    NonMonotonicTime,
)


@dataclass(frozen=True)
class RslTrace:
    """One-minute RSL samples for a single link."""

    link_id: str
    timestamps: tuple[int, ...]   # minutes since epoch, unit spacing
    rsl: tuple[float, ...]        # dBm

    def __post_init__(self):
        if len(self.timestamps) == 0:
            raise EmptyTrace(f"trace {self.link_id!r} has no samples")
        if len(self.timestamps) != len(self.rsl):
            raise ValueError("timestamps and rsl lengths differ")
        for v in self.rsl:
            if not math.isfinite(v):
                raise MalformedRow(f"non-finite rsl value {v!r}")
        prev = None
        for t in self.timestamps:
            if prev is not None:
                if t <= prev:
                    raise NonMonotonicTime(f"timestamp {t} after {prev}")
                if t != prev + 1:
                    raise GapInTrace(f"missing minute between {prev} and {t}")
            prev = t

    def __len__(self):
        return len(self.rsl)


@dataclass(frozen=True)
class AcmLevel:
    capacity_gbps: float
    up_dbm: float      # rsl >= up -> move one level up (+inf at top level)
    down_dbm: float    # rsl <= down -> move one level down (-inf at level 0)


@dataclass(frozen=True)
class AcmTable:
    """Ordered capacity levels with hysteresis thresholds."""

    name: str
    levels: tuple[AcmLevel, ...]

    def __post_init__(self):
        if not self.levels:
            raise ValueError("ACM table needs at least one level")
        caps = [lv.capacity_gbps for lv in self.levels]
        if any(b <= a for a, b in zip(caps, caps[1:])):
            raise ValueError("capacities must strictly increase with level")
        for lv in self.levels:
            if not lv.down_dbm < lv.up_dbm:
                raise ValueError("down threshold must be below up threshold")
        if not math.isinf(self.levels[-1].up_dbm):
            raise ValueError("top level up threshold must be +inf")
        if not math.isinf(self.levels[0].down_dbm):
            raise ValueError("level 0 down threshold must be -inf")
        ups = [lv.up_dbm for lv in self.levels if math.isfinite(lv.up_dbm)]
        downs = [lv.down_dbm for lv in self.levels if math.isfinite(lv.down_dbm)]
        if any(b <= a for a, b in zip(ups, ups[1:])):
            raise ValueError("up thresholds must strictly increase")
        if any(b <= a for a, b in zip(downs, downs[1:])):
            raise ValueError("down thresholds must strictly increase")

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def capacity_gbps(self, level: int) -> float:
        return self.levels[level].capacity_gbps

    def capacity_mbps(self, level: int) -> float:
        return self.levels[level].capacity_gbps * 1000.0

    @property
    def capacities_mbps(self) -> tuple[float, ...]:
        return tuple(lv.capacity_gbps * 1000.0 for lv in self.levels)


@dataclass(frozen=True)
class CapacitySeries:
    """Per-slot ACM output: level index and capacity in Gbps."""

    levels: tuple[int, ...]
    capacity_gbps: tuple[float, ...]

    def __len__(self):
        return len(self.levels)


def ingest_rsl_trace(source, link_id: str) -> RslTrace:
    """Parse a `timestamp_min,rsl_dbm` CSV byte/text stream into an RslTrace."""
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise EmptyTrace("empty CSV stream")
    if [h.strip() for h in header] != ["timestamp_min", "rsl_dbm"]:
        raise MalformedRow(f"unexpected header {header!r}")

    timestamps: list[int] = []
    values: list[float] = []
    for row in reader:
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise MalformedRow(f"expected 2 fields, got {row!r}")
        try:
            t = int(row[0])
            v = float(row[1])
        except ValueError as exc:
            raise MalformedRow(f"non-numeric field in {row!r}") from exc
        timestamps.append(t)
        values.append(v)
    return RslTrace(link_id=link_id, timestamps=tuple(timestamps), rsl=tuple(values))


def export_rsl_trace(trace: RslTrace) -> bytes:
    """Inverse of ingest_rsl_trace (byte-exact round trip for our own output)."""
    lines = ["timestamp_min,rsl_dbm"]
    for t, v in zip(trace.timestamps, trace.rsl):
        lines.append(f"{t},{v}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_acm_table(source, name: str = "") -> AcmTable:
    """Parse a `level,capacity_gbps,up_dbm,down_dbm` CSV with inf sentinels."""
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    reader = csv.DictReader(io.StringIO(text))
    rows = sorted(reader, key=lambda r: int(r["level"]))
    if [int(r["level"]) for r in rows] != list(range(len(rows))):
        raise ValueError("levels must be 0..L-1")
    levels = tuple(
        AcmLevel(
            capacity_gbps=float(r["capacity_gbps"]),
            up_dbm=float(r["up_dbm"]),
            down_dbm=float(r["down_dbm"]),
        )
        for r in rows
    )
    return AcmTable(name=name, levels=levels)


def bundled_acm_table(name: str) -> AcmTable:
    """Load one of the shipped tables: 'af60' or 'wave'."""
    fname = {"af60": "acm_af60.csv", "wave": "acm_wave.csv"}[name]
    data = resources.files("slicesim.data").joinpath(fname).read_bytes()
    return load_acm_table(data, name=name)


def initial_level_for(rsl: float, table: AcmTable) -> int:
    """Highest level reachable from level 0 by iterating the up rule."""
    level = 0
    while level < table.num_levels - 1 and rsl >= table.levels[level].up_dbm:
        level += 1
    return level


def _step_level(level: int, rsl: float, table: AcmTable) -> int:
    # Iterate single-level moves to a fixed point; a severe fade can cross
    # several thresholds within one slot.
    if rsl <= table.levels[level].down_dbm:
        while rsl <= table.levels[level].down_dbm:
            level -= 1
    else:
        while rsl >= table.levels[level].up_dbm:
            level += 1
    return level


def map_rsl_to_capacity(trace: RslTrace, table: AcmTable,
                        initial_level: int | None = None) -> CapacitySeries:
    """Run the hysteresis state machine over a trace.

    Down transition on rsl <= down threshold, up on rsl >= up threshold
    (equality included on both sides). When initial_level is None it is
    derived from the first sample by iterating up from level 0.
    """
    if initial_level is None:
        level = initial_level_for(trace.rsl[0], table)
    else:
        if not 0 <= initial_level < table.num_levels:
            raise ValueError(f"initial_level {initial_level} out of range")
        level = initial_level
    out_levels = []
    for v in trace.rsl:
        level = _step_level(level, v, table)
        out_levels.append(level)
    return CapacitySeries(
        levels=tuple(out_levels),
        capacity_gbps=tuple(table.capacity_gbps(l) for l in out_levels),
    )


def coefficient_of_variation(trace: RslTrace, window: int = 60) -> list[float]:
    """|population stddev / mean| per non-overlapping window.

    RSL in dBm is negative, hence the absolute value. A zero-mean window
    yields an inf sentinel.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    n = len(trace)
    if n < window:
        raise ValueError("trace shorter than window")
    values = np.asarray(trace.rsl, dtype=float)
    out = []
    for start in range(0, n - window + 1, window):
        chunk = values[start:start + window]
        mean = chunk.mean()
        std = chunk.std()  # population (ddof=0)
        if mean == 0.0:
            out.append(math.inf)
        else:
            out.append(abs(std / mean))
    return out


def normalize_to_table(trace: RslTrace, table: AcmTable,
                       margin_db: float = 4.0) -> RslTrace:
    """Shift a trace so its clear-sky median sits margin_db above the first
    degradation threshold (the top level's down threshold)."""
    median = float(np.median(np.asarray(trace.rsl)))
    target = table.levels[-1].down_dbm + margin_db
    shift = target - median
    return RslTrace(
        link_id=trace.link_id,
        timestamps=trace.timestamps,
        rsl=tuple(v + shift for v in trace.rsl),
    )


def generate_synthetic_rsl(params: dict, length: int, seed: int,
                           link_id: str = "synthetic") -> RslTrace:
    """Baseline + Gaussian noise with raised-cosine rain-fade dips.

    params keys: baseline_dbm, event_count, event_depth_db,
    event_duration_min, noise_std_db. Deterministic for a fixed seed.
    """
    if length <= 0:
        raise ValueError("length must be positive")
    baseline = float(params["baseline_dbm"])
    event_count = int(params["event_count"])
    depth = float(params["event_depth_db"])
    duration = int(params["event_duration_min"])
    noise_std = float(params["noise_std_db"])
    for v in (baseline, depth, noise_std):
        if not math.isfinite(v):
            raise ValueError("parameters must be finite")

    rng = np.random.default_rng(seed)
    values = np.full(length, baseline, dtype=float)
    if event_count > 0 and duration > 0:
        # Event centers spread evenly with jitter so events do not overlap
        # deterministically for reasonable counts.
        centers = np.linspace(0, length, event_count + 2)[1:-1]
        jitter = rng.uniform(-0.25, 0.25, size=event_count) * (length / (event_count + 1))
        centers = centers + jitter
        for c in centers:
            start = int(round(c - duration / 2))
            for k in range(duration):
                idx = start + k
                if 0 <= idx < length:
                    # raised-cosine dip: 0 at the edges, full depth mid-event
                    values[idx] -= depth * 0.5 * (1 - math.cos(2 * math.pi * (k + 0.5) / duration))
    if noise_std > 0:
        values = values + rng.normal(0.0, noise_std, size=length)
    return RslTrace(
        link_id=link_id,
        timestamps=tuple(range(length)),
        rsl=tuple(float(v) for v in values),
    )
