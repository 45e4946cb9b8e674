"""Per-slot simulation loop and metric computation.

Slot order: expire finished SRs, read the realized capacity, evaluate the
underprovisioning gate on the beginning-of-slot active set, let the policy
decide on the arrival batch when the gate is open, then run rate control
over the resulting active set and account rewards and penalties.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .forecast import (
    CapacityPmf,
    DEFAULT_HORIZON,
    ExternalForecastProvider,
    GaussianForecast,
    VarianceCalibration,
    capacity_pmf_horizon,
    naive_forecast,
    point_mass_pmf,
)
from .link_capacity import AcmTable, coefficient_of_variation, RslTrace
from .policies import PolicyContext
from .rate_control import allocate
from .scenario import Scenario
from .slicing import SliceRequest, penalty as slice_penalty

_EPS = 1e-9


class PersistencePmfForecaster:
    """Point-mass PMF on the current level (forecast-free fallback)."""

    def __init__(self, horizon: int = DEFAULT_HORIZON):
        self.horizon = horizon

    def __call__(self, scenario: Scenario, slot: int, level: int) -> CapacityPmf:
        return point_mass_pmf(level, len(scenario.level_capacities_mbps), self.horizon)


class NaiveGaussianForecaster:
    """Persistence mean with calibrated variance, pushed through the ACM
    transition machinery. Requires an RSL series on the scenario."""

    def __init__(self, table: AcmTable, calib: VarianceCalibration,
                 horizon: int = DEFAULT_HORIZON):
        self.table = table
        self.calib = calib
        self.horizon = horizon

    def __call__(self, scenario: Scenario, slot: int, level: int) -> CapacityPmf:
        if scenario.rsl is None:
            raise ValueError(f"scenario {scenario.name!r} carries no RSL series")
        forecast = naive_forecast(scenario.rsl[:slot + 1], self.horizon,
                                  self.calib, origin_slot=slot)
        return capacity_pmf_horizon(level, forecast, self.table)


class ExternalForecaster:
    """Forecast-file provider with a per-slot fallback forecaster."""

    def __init__(self, provider: ExternalForecastProvider, table: AcmTable,
                 fallback=None):
        self.provider = provider
        self.table = table
        self.fallback = fallback

    def __call__(self, scenario: Scenario, slot: int, level: int) -> CapacityPmf:
        forecast: GaussianForecast | None = self.provider.get(slot)
        if forecast is None:
            if self.fallback is None:
                from .errors import ForecastMissing
                raise ForecastMissing(f"no external forecast for slot {slot}")
            return self.fallback(scenario, slot, level)
        return capacity_pmf_horizon(level, forecast, self.table)


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    capacity_mbps: float
    active_demand_mbps: float   # demand of the post-admission active set
    penalty: float
    admitted_count: int
    fractions: tuple[tuple[int, float], ...]  # (sr_index, fraction)


@dataclass
class SrRecord:
    request: SliceRequest
    admitted: bool = False
    reward: float = 0.0
    cumulative_penalty: float = 0.0


@dataclass
class SimulationResult:
    scenario_name: str
    policy_name: str
    slots: list[SlotRecord] = field(default_factory=list)
    sr_records: dict[int, SrRecord] = field(default_factory=dict)

    @property
    def total_reward(self) -> float:
        return sum(r.reward for r in self.sr_records.values())

    @property
    def total_penalty(self) -> float:
        return sum(rec.penalty for rec in self.slots)

    @property
    def revenue(self) -> float:
        return self.total_reward - self.total_penalty

    @property
    def admitted_indices(self) -> list[int]:
        return sorted(i for i, r in self.sr_records.items() if r.admitted)


def _slot_penalties(active: list[SliceRequest], capacity_mbps: float):
    """Rate-controlled per-SR penalties for one slot; fractions included."""
    if not active:
        return [], []
    demand = sum(sr.demand_mbps for sr in active)
    if demand <= capacity_mbps + _EPS:
        return [1.0] * len(active), [0.0] * len(active)
    alloc = allocate([(sr.stype, sr.demand_mbps) for sr in active], capacity_mbps)
    pens = [slice_penalty(sr.stype, f) for sr, f in zip(active, alloc.fractions)]
    return list(alloc.fractions), pens


def gate_closed(active: list[SliceRequest], capacity_mbps: float,
                delta: float) -> bool:
    """True when some beginning-of-slot active SR is underprovisioned by at
    least delta, which blocks all admissions in that slot."""
    _, pens = _slot_penalties(active, capacity_mbps)
    return any(p >= delta for p in pens)


def run(scenario: Scenario, policy, forecaster=None, seed: int = 0,
        policy_name: str | None = None) -> SimulationResult:
    """Simulate one scenario under one policy. Deterministic given seed."""
    rng = np.random.default_rng(seed)
    name = policy_name or getattr(policy, "name", policy.__class__.__name__)
    result = SimulationResult(scenario_name=scenario.name, policy_name=name)
    for sr in scenario.requests:
        result.sr_records[sr.index] = SrRecord(request=sr)

    bypass = getattr(policy, "bypasses_gate", False)
    active: list[SliceRequest] = []
    arrivals_by_slot: dict[int, list[SliceRequest]] = {}
    for sr in scenario.requests:
        arrivals_by_slot.setdefault(sr.arrival_slot, []).append(sr)

    for t in range(scenario.horizon):
        active = [sr for sr in active if sr.end_slot > t]
        capacity = scenario.capacity_mbps[t]
        arrivals = arrivals_by_slot.get(t, [])
        closed = gate_closed(active, capacity, scenario.delta)

        admitted: list[SliceRequest] = []
        if arrivals and (not closed or bypass):
            pmf = forecaster(scenario, t, scenario.levels[t]) if forecaster else None
            ctx = PolicyContext(
                slot=t,
                active=list(active),
                arrivals=list(arrivals),
                capacity_mbps=capacity,
                level=scenario.levels[t],
                level_capacities_mbps=scenario.level_capacities_mbps,
                pmf=pmf,
                rng=rng,
            )
            admitted = policy.decide(ctx)
            for sr in admitted:
                rec = result.sr_records[sr.index]
                rec.admitted = True
                rec.reward = sr.reward  # lump sum at admission
            active = active + admitted

        fractions, pens = _slot_penalties(active, capacity)
        for sr, p in zip(active, pens):
            result.sr_records[sr.index].cumulative_penalty += p
        result.slots.append(SlotRecord(
            slot=t,
            capacity_mbps=capacity,
            active_demand_mbps=sum(sr.demand_mbps for sr in active),
            penalty=sum(pens),
            admitted_count=len(admitted),
            fractions=tuple((sr.index, f) for sr, f in zip(active, fractions)),
        ))
    return result


@dataclass(frozen=True)
class MetricsReport:
    total_reward: float
    total_penalty: float
    revenue: float
    normalized_revenue: float | None
    admitted_count: int
    pct_negative_revenue: float
    underprovisioning_fraction: float | None
    mean_cv: float | None


def metrics(result: SimulationResult, baseline_result: SimulationResult | None = None,
            admit_all_result: SimulationResult | None = None,
            rsl: RslTrace | None = None, cv_window: int = 60) -> MetricsReport:
    """Revenue, normalized revenue, negative-revenue SR share, and the
    scenario-level underprovisioning fraction and CV."""
    admitted = [r for r in result.sr_records.values() if r.admitted]
    negative = sum(1 for r in admitted if r.cumulative_penalty > r.reward)
    pct_negative = 100.0 * negative / len(admitted) if admitted else 0.0

    normalized = None
    if baseline_result is not None and baseline_result.revenue != 0:
        normalized = result.revenue / baseline_result.revenue

    underprov = None
    if admit_all_result is not None:
        bad = sum(1 for rec in admit_all_result.slots
                  if rec.capacity_mbps < rec.active_demand_mbps - _EPS)
        underprov = bad / len(admit_all_result.slots) if admit_all_result.slots else 0.0

    mean_cv = None
    if rsl is not None and len(rsl) >= cv_window:
        cvs = coefficient_of_variation(rsl, cv_window)
        mean_cv = float(np.mean(cvs))

    return MetricsReport(
        total_reward=result.total_reward,
        total_penalty=result.total_penalty,
        revenue=result.revenue,
        normalized_revenue=normalized,
        admitted_count=len(admitted),
        pct_negative_revenue=pct_negative,
        underprovisioning_fraction=underprov,
        mean_cv=mean_cv,
    )


def dump_result(result: SimulationResult, json_path, csv_path) -> None:
    """JSON summary plus per-slot CSV `t,capacity,active_demand,penalty,admitted_count`."""
    summary = {
        "scenario": result.scenario_name,
        "policy": result.policy_name,
        "total_reward": result.total_reward,
        "total_penalty": result.total_penalty,
        "revenue": result.revenue,
        "admitted": result.admitted_indices,
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,capacity,active_demand,penalty,admitted_count\n")
        for rec in result.slots:
            fh.write(f"{rec.slot},{rec.capacity_mbps:g},{rec.active_demand_mbps:g},"
                     f"{rec.penalty!r},{rec.admitted_count}\n")
