"""Online Q-table training over a scenario collection.

Training repeats passes over the collection until the mean absolute
Q-update over a trailing window drops below tolerance or the step budget
runs out; the table is then frozen for evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import engine
from .policies import QLearningPolicy
from .scenario import Scenario


@dataclass
class TrainingReport:
    steps: int
    passes: int
    converged: bool
    curve: list[tuple[int, float]]  # (step, trailing mean |delta|)


def train_qlearning(scenarios: list[Scenario], forecaster, policy: QLearningPolicy,
                    max_steps: int = 100_000, window: int = 10_000,
                    tol: float = 1e-3, seed: int = 0,
                    curve_every: int = 1000) -> TrainingReport:
    """Run the policy online across the collection until convergence.

    forecaster may be a single callable shared by all scenarios or a dict
    keyed by scenario name.
    """
    deltas: list[float] = []
    policy.delta_log = deltas
    curve: list[tuple[int, float]] = []
    passes = 0
    converged = False
    next_mark = curve_every
    try:
        while len(deltas) < max_steps and not converged:
            for idx, scenario in enumerate(scenarios):
                fc = forecaster[scenario.name] if isinstance(forecaster, dict) else forecaster
                run_seed = seed + passes * 10_000 + idx
                engine.run(scenario, policy, forecaster=fc, seed=run_seed)
                while len(deltas) >= next_mark:
                    tail = deltas[max(0, next_mark - window):next_mark]
                    curve.append((next_mark, sum(tail) / len(tail)))
                    next_mark += curve_every
                if len(deltas) >= window:
                    tail = deltas[-window:]
                    if sum(tail) / window < tol:
                        converged = True
                        break
                if len(deltas) >= max_steps:
                    break
            passes += 1
    finally:
        policy.delta_log = None
    return TrainingReport(steps=len(deltas), passes=passes,
                          converged=converged, curve=curve)
