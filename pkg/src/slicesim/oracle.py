"""Perfect-information admission benchmark.

With the admission vector fixed, per-slot penalties decouple into
independent rate-control problems, so the search is over the 2^N binary
vectors with a gate-feasibility constraint; exhaustive enumeration and a
depth-first branch-and-bound give the exact optimum at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import _slot_penalties, gate_closed
from .errors import InstanceTooLarge
from .scenario import Scenario
from .slicing import SliceRequest

EXHAUSTIVE_LIMIT = 20


@dataclass(frozen=True)
class OracleSolution:
    z: tuple[int, ...]
    objective: float           # total penalty minus admitted rewards
    slot_details: tuple        # per slot: tuple of (sr_index, fraction, penalty)

    @property
    def revenue(self) -> float:
        return -self.objective


def _active_at(admitted: list[SliceRequest], slot: int) -> list[SliceRequest]:
    return [sr for sr in admitted if sr.arrival_slot <= slot < sr.end_slot]


def _total_penalty(admitted: list[SliceRequest], scenario: Scenario,
                   collect: bool = False, cache: dict | None = None):
    # cache maps (slot, active index tuple) -> (fractions, penalties); the
    # same per-slot subproblem recurs across many admission vectors.
    total = 0.0
    details = []
    for t in range(scenario.horizon):
        active = _active_at(admitted, t)
        key = (t, tuple(sr.index for sr in active))
        hit = cache.get(key) if cache is not None else None
        if hit is None:
            hit = _slot_penalties(active, scenario.capacity_mbps[t])
            if cache is not None:
                cache[key] = hit
        fractions, pens = hit
        total += sum(pens)
        if collect:
            details.append(tuple(
                (sr.index, f, p) for sr, f, p in zip(active, fractions, pens)))
    return (total, tuple(details)) if collect else total


def evaluate_admission_vector(z, scenario: Scenario,
                              cache: dict | None = None) -> tuple[float, bool]:
    """Objective (penalty minus reward) and gate feasibility of a fixed z.

    Feasible iff no SR is admitted in a slot where an already-active SR is
    underprovisioned by at least delta. Newly arriving SRs do not gate
    themselves; the gate looks at the beginning-of-slot active set.
    """
    requests = scenario.requests
    if len(z) != len(requests):
        raise ValueError("admission vector length mismatch")
    admitted = [sr for sr, zi in zip(requests, z) if zi]
    feasible = True
    for t in sorted({sr.arrival_slot for sr in admitted}):
        pre_active = [sr for sr in admitted if sr.arrival_slot < t and sr.end_slot > t]
        if gate_closed(pre_active, scenario.capacity_mbps[t], scenario.delta):
            feasible = False
            break
    objective = (_total_penalty(admitted, scenario, cache=cache)
                 - sum(sr.reward for sr in admitted))
    return objective, feasible


def _solve_exhaustive(scenario: Scenario) -> tuple[tuple[int, ...], float]:
    n = len(scenario.requests)
    if n > EXHAUSTIVE_LIMIT:
        raise InstanceTooLarge(f"exhaustive mode limited to N <= {EXHAUSTIVE_LIMIT}")
    best_z = tuple([0] * n)
    best_obj = 0.0  # the empty vector is always feasible with zero objective
    cache: dict = {}
    for mask in range(1, 1 << n):
        # bit n-1-i carries z_i so ascending masks scan z lexicographically
        z = tuple((mask >> (n - 1 - i)) & 1 for i in range(n))
        obj, feasible = evaluate_admission_vector(z, scenario, cache=cache)
        if feasible and obj < best_obj:
            best_obj = obj
            best_z = z
    return best_z, best_obj


def _solve_branch_and_bound(scenario: Scenario) -> tuple[tuple[int, ...], float]:
    requests = scenario.requests
    n = len(requests)
    rewards = [sr.reward for sr in requests]
    suffix_rewards = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix_rewards[i] = suffix_rewards[i + 1] + rewards[i]

    best = {"z": tuple([0] * n), "obj": 0.0}
    cache: dict = {}

    def recurse(i: int, admitted: list[SliceRequest], taken_reward: float):
        partial_penalty = _total_penalty(admitted, scenario, cache=cache)
        bound = partial_penalty - taken_reward - suffix_rewards[i]
        if bound >= best["obj"]:
            return
        if i == n:
            obj = partial_penalty - taken_reward
            if obj < best["obj"]:
                best["obj"] = obj
                best["z"] = tuple(
                    1 if any(sr.index == r.index for r in admitted) else 0
                    for sr in requests)
            return
        sr = requests[i]
        # reject branch first: ties resolve to the lexicographically
        # smallest admission vector
        recurse(i + 1, admitted, taken_reward)
        t = sr.arrival_slot
        pre_active = [a for a in admitted if a.arrival_slot < t and a.end_slot > t]
        if not gate_closed(pre_active, scenario.capacity_mbps[t], scenario.delta):
            recurse(i + 1, admitted + [sr], taken_reward + sr.reward)

    recurse(0, [], 0.0)
    return best["z"], best["obj"]


def solve_oracle(scenario: Scenario, mode: str = "branch_and_bound") -> OracleSolution:
    if mode == "exhaustive":
        z, obj = _solve_exhaustive(scenario)
    elif mode == "branch_and_bound":
        z, obj = _solve_branch_and_bound(scenario)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    admitted = [sr for sr, zi in zip(scenario.requests, z) if zi]
    _, details = _total_penalty(admitted, scenario, collect=True)
    return OracleSolution(z=z, objective=obj, slot_details=details)


def dump_solution(solution: OracleSolution, scenario: Scenario, z_path, slots_path) -> None:
    with open(z_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sr_index,z\n")
        for sr, zi in zip(scenario.requests, solution.z):
            fh.write(f"{sr.index},{zi}\n")
    with open(slots_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,sr_index,f,penalty\n")
        for t, entries in enumerate(solution.slot_details):
            for sr_index, f, p in entries:
                fh.write(f"{t},{sr_index},{f!r},{p!r}\n")
