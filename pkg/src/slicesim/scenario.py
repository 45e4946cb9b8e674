"""Scenario container plus file-based bundle IO.

A scenario fixes everything one simulation needs: the per-slot capacity
realization (ACM levels plus Mbps), the slice-request stream, the level
capacities used for forecasting, and the underprovisioning gate threshold.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from .link_capacity import AcmTable, RslTrace, bundled_acm_table, load_acm_table, map_rsl_to_capacity
from .slicing import SliceRequest, SliceType, default_catalog, load_slice_requests


@dataclass(frozen=True)
class Scenario:
    name: str
    capacity_mbps: tuple[float, ...]           # realized capacity per slot
    levels: tuple[int, ...]                    # realized ACM level per slot
    level_capacities_mbps: tuple[float, ...]   # capacity of each ACM level
    requests: tuple[SliceRequest, ...]         # sorted by arrival slot
    delta: float = 1e-6
    rsl: tuple[float, ...] | None = None       # source RSL, when available

    def __post_init__(self):
        if len(self.capacity_mbps) != len(self.levels):
            raise ValueError("capacity and level series lengths differ")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        prev = None
        for sr in self.requests:
            if not 0 <= sr.arrival_slot < self.horizon:
                raise ValueError(f"SR {sr.index} arrives outside the horizon")
            if prev is not None and sr.arrival_slot < prev:
                raise ValueError("requests must be sorted by arrival slot")
            prev = sr.arrival_slot

    @property
    def horizon(self) -> int:
        return len(self.capacity_mbps)

    def arrivals_at(self, slot: int) -> list[SliceRequest]:
        return [sr for sr in self.requests if sr.arrival_slot == slot]


def scenario_from_trace(name: str, trace: RslTrace, table: AcmTable,
                        requests: list[SliceRequest], delta: float = 1e-6,
                        initial_level: int | None = None) -> Scenario:
    series = map_rsl_to_capacity(trace, table, initial_level)
    return Scenario(
        name=name,
        capacity_mbps=tuple(c * 1000.0 for c in series.capacity_gbps),
        levels=series.levels,
        level_capacities_mbps=table.capacities_mbps,
        requests=tuple(sorted(requests, key=lambda sr: (sr.arrival_slot, sr.index))),
        delta=delta,
        rsl=trace.rsl,
    )


def write_capacity_csv(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,level,capacity_mbps\n")
        for t, (level, cap) in enumerate(zip(scenario.levels, scenario.capacity_mbps)):
            fh.write(f"{t},{level},{cap:g}\n")


def write_bundle(scenario: Scenario, directory, kappa: float = 0.2,
                 acm_table: str | None = None) -> Path:
    """Write the JSON-lines bundle plus the capacity and SR CSVs it references."""
    from .slicing import export_slice_requests

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    cap_path = directory / f"{scenario.name}_capacity.csv"
    sr_path = directory / f"{scenario.name}_requests.csv"
    write_capacity_csv(scenario, cap_path)
    sr_path.write_bytes(export_slice_requests(list(scenario.requests)))
    bundle = directory / f"{scenario.name}.jsonl"
    lines = [json.dumps({
        "type": "scenario",
        "name": scenario.name,
        "delta": scenario.delta,
        "capacity_csv": cap_path.name,
        "sr_csv": sr_path.name,
        "kappa": kappa,
        "acm_table": acm_table,
        "level_capacities_mbps": list(scenario.level_capacities_mbps),
    })]
    if scenario.rsl is not None:
        lines.append(json.dumps({"type": "rsl", "values": list(scenario.rsl)}))
    bundle.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return bundle


def load_bundle(path, catalog: tuple[SliceType, ...] | None = None) -> Scenario:
    path = Path(path)
    header = None
    rsl = None
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if record.get("type") == "scenario":
            header = record
        elif record.get("type") == "rsl":
            rsl = tuple(float(v) for v in record["values"])
    if header is None:
        raise ValueError(f"no scenario record in {path}")
    if catalog is None:
        catalog = default_catalog(kappa=float(header.get("kappa", 0.2)))

    cap_rows = list(csv.DictReader(io.StringIO(
        (path.parent / header["capacity_csv"]).read_text(encoding="utf-8"))))
    levels = tuple(int(r["level"]) for r in cap_rows)
    capacity = tuple(float(r["capacity_mbps"]) for r in cap_rows)

    requests = load_slice_requests(
        (path.parent / header["sr_csv"]).read_bytes(), catalog)

    if header.get("level_capacities_mbps"):
        level_caps = tuple(float(v) for v in header["level_capacities_mbps"])
    else:
        table_ref = header.get("acm_table") or "af60"
        if table_ref in ("af60", "wave"):
            table = bundled_acm_table(table_ref)
        else:
            table = load_acm_table(Path(table_ref).read_bytes(), name=table_ref)
        level_caps = table.capacities_mbps

    return Scenario(
        name=header["name"],
        capacity_mbps=capacity,
        levels=levels,
        level_capacities_mbps=level_caps,
        requests=tuple(sorted(requests, key=lambda sr: (sr.arrival_slot, sr.index))),
        delta=float(header.get("delta", 1e-6)),
        rsl=rsl,
    )
