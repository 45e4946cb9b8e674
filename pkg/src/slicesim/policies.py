"""Online admission policies.

All policies consume a per-slot PolicyContext and return the admitted
subset of the arrival batch. The Q-learning variants keep a tabular
state-action value store keyed by (active counts per type, arriving type,
forecast-satisfied slot count c_f).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ForecastMissing
from .forecast import CapacityPmf
from .rate_control import PenaltyCache, penalty_for_level
from .slicing import SliceRequest

COUNT_CLAMP = 15       # per-type active-count cap in the Q state
NO_ARRIVAL_TYPE = -1   # sentinel A_new for the end-of-batch bootstrap state


@dataclass
class PolicyContext:
    slot: int
    active: list[SliceRequest]
    arrivals: list[SliceRequest]
    capacity_mbps: float
    level: int
    level_capacities_mbps: tuple[float, ...]
    pmf: CapacityPmf | None
    rng: np.random.Generator

    def require_pmf(self) -> CapacityPmf:
        if self.pmf is None:
            raise ForecastMissing(f"no capacity forecast at slot {self.slot}")
        return self.pmf


def _pairs(requests) -> list:
    return [(sr.stype, sr.demand_mbps) for sr in requests]


def expected_short_term_revenue(candidate: list[SliceRequest], ctx: PolicyContext,
                                cache: PenaltyCache | None = None) -> float:
    """Sum of candidate rewards minus current and expected horizon penalties.

    The per-slot penalty depends only on the capacity level, so the horizon
    expectation needs one rate-control solve per level, not per level path.
    """
    pmf = ctx.require_pmf()
    if cache is None:
        cache = PenaltyCache()
    pairs = _pairs(ctx.active) + _pairs(candidate)
    reward = sum(sr.reward for sr in candidate)
    pen = penalty_for_level(pairs, ctx.capacity_mbps, cache)
    L = len(ctx.level_capacities_mbps)
    weights = [0.0] * L
    for h in range(1, pmf.horizon + 1):
        row = pmf.step(h)
        for l in range(L):
            weights[l] += row[l]
    for l in range(L):
        if weights[l] > 0.0:
            pen += weights[l] * penalty_for_level(pairs, ctx.level_capacities_mbps[l], cache)
    return reward - pen


def _sorted_by_reward(arrivals: list[SliceRequest]) -> list[SliceRequest]:
    # stable: equal rewards keep arrival index order
    return sorted(arrivals, key=lambda sr: -sr.reward)


def decide_locally_optimal(ctx: PolicyContext,
                           exhaustive_threshold: int = 8) -> list[SliceRequest]:
    """Expected-short-term-revenue maximizer.

    Exhaustive subset search for small batches; otherwise greedy in
    decreasing reward order with strict-improvement additions.
    """
    arrivals = ctx.arrivals
    if not arrivals:
        return []
    cache = PenaltyCache()
    if len(arrivals) <= exhaustive_threshold:
        best_set: list[SliceRequest] = []
        best_value = expected_short_term_revenue([], ctx, cache)
        for size in range(1, len(arrivals) + 1):
            for subset in combinations(arrivals, size):
                value = expected_short_term_revenue(list(subset), ctx, cache)
                if value > best_value:
                    best_value = value
                    best_set = list(subset)
        return best_set
    admitted: list[SliceRequest] = []
    value = expected_short_term_revenue(admitted, ctx, cache)
    for sr in _sorted_by_reward(arrivals):
        trial = expected_short_term_revenue(admitted + [sr], ctx, cache)
        if trial > value:
            admitted.append(sr)
            value = trial
    admitted.sort(key=lambda sr: sr.index)
    return admitted


def decide_naive_greedy(ctx: PolicyContext) -> list[SliceRequest]:
    """Admit in arrival order while residual capacity covers the demand."""
    committed = sum(sr.demand_mbps for sr in ctx.active)
    admitted = []
    for sr in ctx.arrivals:
        if committed + sr.demand_mbps <= ctx.capacity_mbps + 1e-9:
            admitted.append(sr)
            committed += sr.demand_mbps
    return admitted


def decide_random(ctx: PolicyContext) -> list[SliceRequest]:
    """Fair coin per arrival; capacity is only enforced by the engine gate."""
    return [sr for sr in ctx.arrivals if ctx.rng.random() < 0.5]


def decide_admit_all(ctx: PolicyContext) -> list[SliceRequest]:
    return list(ctx.arrivals)


def compute_cf(ctx: PolicyContext, committed_demand_mbps: float,
               candidate_demand_mbps: float, static_capacity: bool = False) -> int:
    """Count horizon steps whose predicted capacity fits the total demand.

    Predicted capacity per step is the PMF-argmax level's capacity (ties to
    the lower level); static_capacity replaces it with the top level.
    """
    total = committed_demand_mbps + candidate_demand_mbps
    if static_capacity:
        top = ctx.level_capacities_mbps[-1]
        horizon = ctx.pmf.horizon if ctx.pmf is not None else 5
        return horizon if total <= top + 1e-9 else 0
    pmf = ctx.require_pmf()
    cf = 0
    for h in range(1, pmf.horizon + 1):
        cap = ctx.level_capacities_mbps[pmf.argmax_level(h)]
        if total <= cap + 1e-9:
            cf += 1
    return cf


@dataclass
class QTable:
    """Tabular state-action store with per-pair occurrence counts."""

    values: dict = field(default_factory=dict)  # (state, action) -> [q, o]

    def q(self, state, action: int) -> float:
        entry = self.values.get((state, action))
        return entry[0] if entry else 0.0

    def occurrence(self, state, action: int) -> int:
        entry = self.values.get((state, action))
        return entry[1] if entry else 0

    def max_q(self, state) -> float:
        return max(self.q(state, 0), self.q(state, 1))

    def update(self, state, action: int, reward: float, next_state) -> float:
        """One Q-learning step with alpha = 0.5/occurrence; returns |delta|."""
        entry = self.values.setdefault((state, action), [0.0, 0])
        entry[1] += 1
        alpha = 0.5 / entry[1]
        target = reward + self.max_q(next_state)
        delta = alpha * (target - entry[0])
        entry[0] += delta
        return abs(delta)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for (state, action), (q, o) in sorted(self.values.items()):
                counts, type_id, cf = state
                key = ",".join(str(c) for c in counts) + f"|{type_id}|{cf}"
                fh.write(f"{key}\t{action}\t{q!r}\t{o}\n")

    @classmethod
    def load(cls, path) -> "QTable":
        table = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                key, action, q, o = line.split("\t")
                counts_s, type_s, cf_s = key.split("|")
                state = (tuple(int(c) for c in counts_s.split(",")),
                         int(type_s), int(cf_s))
                table.values[(state, int(action))] = [float(q), int(o)]
        return table


def _count_vector(active: list[SliceRequest], num_types: int) -> list[int]:
    counts = [0] * num_types
    for sr in active:
        counts[sr.stype.type_id] = min(counts[sr.stype.type_id] + 1, COUNT_CLAMP)
    return counts


class QLearningPolicy:
    """Tabular Q-learning admission, predictive (forecast-aware c_f) or
    naive (assumes the link stays at its top capacity)."""

    def __init__(self, num_types: int = 12, horizon: int = 5, lam: float = 0.5,
                 epsilon: float = 1.0, epsilon_decay: float = 0.999,
                 epsilon_min: float = 0.01, predictive: bool = True,
                 training: bool = True, qtable: QTable | None = None):
        self.num_types = num_types
        self.horizon = horizon
        self.lam = lam
        self.epsilon = epsilon
        self.epsilon_decay = epsilon_decay
        self.epsilon_min = epsilon_min
        self.predictive = predictive
        self.training = training
        self.qtable = qtable if qtable is not None else QTable()
        self.last_deltas: list[float] = []
        self.delta_log: list[float] | None = None  # trainer-owned sink

    def frozen(self) -> "QLearningPolicy":
        """Evaluation copy: shared table, no exploration, no updates."""
        return QLearningPolicy(
            num_types=self.num_types, horizon=self.horizon, lam=self.lam,
            epsilon=0.0, epsilon_decay=1.0, epsilon_min=0.0,
            predictive=self.predictive, training=False, qtable=self.qtable,
        )

    def _cf(self, ctx: PolicyContext, committed: float, candidate: float) -> int:
        return compute_cf(ctx, committed, candidate,
                          static_capacity=not self.predictive)

    def _select(self, ctx: PolicyContext, state) -> int:
        if self.training and self.epsilon > 0 and ctx.rng.random() < self.epsilon:
            return int(ctx.rng.integers(0, 2))
        # exploit; tie between actions rejects
        return 1 if self.qtable.q(state, 1) > self.qtable.q(state, 0) else 0

    def decide(self, ctx: PolicyContext) -> list[SliceRequest]:
        arrivals = _sorted_by_reward(ctx.arrivals)
        if not arrivals:
            return []
        self.last_deltas = []
        counts = _count_vector(ctx.active, self.num_types)
        committed = sum(sr.demand_mbps for sr in ctx.active)
        admitted: list[SliceRequest] = []
        pending = None  # (state, action, reward) awaiting next state

        for sr in arrivals:
            cf = self._cf(ctx, committed, sr.demand_mbps)
            state = (tuple(counts), sr.stype.type_id, cf)
            if pending is not None and self.training:
                self.last_deltas.append(self.qtable.update(*pending, state))
            action = self._select(ctx, state)
            if action == 1:
                admitted.append(sr)
                tid = sr.stype.type_id
                counts[tid] = min(counts[tid] + 1, COUNT_CLAMP)
                committed += sr.demand_mbps
                reward = sr.reward - sr.reward * (1.0 - cf / self.horizon) * self.lam
            else:
                reward = 0.0
            pending = (state, action, reward)

        if pending is not None and self.training:
            cf_end = self._cf(ctx, committed, 0.0)
            terminal = (tuple(counts), NO_ARRIVAL_TYPE, cf_end)
            self.last_deltas.append(self.qtable.update(*pending, terminal))
        if self.training and self.delta_log is not None:
            self.delta_log.extend(self.last_deltas)
        if self.training:
            self.epsilon = max(self.epsilon * self.epsilon_decay, self.epsilon_min)
        admitted.sort(key=lambda sr: sr.index)
        return admitted


class FunctionPolicy:
    """Adapter that lets plain decision functions run in the engine."""

    def __init__(self, fn, name: str, bypasses_gate: bool = False,
                 needs_forecast: bool = False):
        self.fn = fn
        self.name = name
        self.bypasses_gate = bypasses_gate
        self.needs_forecast = needs_forecast

    def decide(self, ctx: PolicyContext) -> list[SliceRequest]:
        return self.fn(ctx)


class ScriptedPolicy:
    """Replays a fixed admission vector (used to audit the oracle)."""

    def __init__(self, admit_indices):
        self.admit = frozenset(admit_indices)
        self.bypasses_gate = False

    def decide(self, ctx: PolicyContext) -> list[SliceRequest]:
        return [sr for sr in ctx.arrivals if sr.index in self.admit]


def random_policy() -> FunctionPolicy:
    return FunctionPolicy(decide_random, "random")


def naive_greedy_policy() -> FunctionPolicy:
    return FunctionPolicy(decide_naive_greedy, "naive_greedy")


def locally_optimal_policy(exhaustive_threshold: int = 8) -> FunctionPolicy:
    return FunctionPolicy(
        lambda ctx: decide_locally_optimal(ctx, exhaustive_threshold),
        "locally_optimal", needs_forecast=True,
    )


def admit_all_policy() -> FunctionPolicy:
    return FunctionPolicy(decide_admit_all, "admit_all", bypasses_gate=True)
