"""Per-slot underprovisioning allocation.

Distributes capacity C over active slices to minimize the summed convex
piecewise-linear penalty. The program is separable with one coupling
constraint, so funding penalty pieces in decreasing marginal order is
exactly optimal; no LP solver needed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .slicing import SliceType, penalty


@dataclass(frozen=True)
class Allocation:
    fractions: tuple[float, ...]
    total_penalty: float


def _envelope_pieces(segments) -> list[tuple[float, float, float]]:
    """Upper envelope of {a*u + b} and the zero floor over u in [0, 1].

    Returns (u_lo, u_hi, slope) pieces with slope non-decreasing in u,
    covering [0, 1]. u = 1 - f is the underprovisioning depth.
    """
    lines = list(segments) + [(0.0, 0.0)]
    pieces = []
    u = 0.0
    while u < 1.0 - 1e-15:
        # active line just right of u: max value, then max slope among ties
        vals = [a * u + b for a, b in lines]
        top = max(vals)
        cand = [(a, b) for (a, b), v in zip(lines, vals) if v >= top - 1e-12]
        a_cur, b_cur = max(cand)
        # next takeover point
        u_next = 1.0
        for a, b in lines:
            if a > a_cur:
                cross = (b_cur - b) / (a - a_cur)
                if u + 1e-15 < cross < u_next:
                    u_next = cross
        pieces.append((u, u_next, a_cur))
        u = u_next
    return pieces


def allocate(active: list[tuple[SliceType, float]], capacity_mbps: float) -> Allocation:
    """Exact optimum of the per-slot rate-control program.

    active lists (type, demand) pairs; capacity and demands share the same
    unit (Mbps). Equal marginals are broken by lower slice index so replay
    is deterministic.
    """
    if capacity_mbps < 0:
        raise ValueError("capacity must be non-negative")
    n = len(active)
    if n == 0:
        return Allocation(fractions=(), total_penalty=0.0)
    demands = [d for _, d in active]
    if any(d <= 0 for d in demands):
        raise ValueError("demands must be positive")

    total = sum(demands)
    if total <= capacity_mbps + 1e-9:
        return Allocation(fractions=tuple([1.0] * n), total_penalty=0.0)

    # items: (marginal penalty reduction per Mbps, slice idx, u_hi, u_lo)
    items = []
    for idx, (stype, d) in enumerate(active):
        for u_lo, u_hi, slope in _envelope_pieces(stype.segments):
            if slope <= 0.0:
                continue  # no penalty reduction from funding this piece
            items.append((slope / d, idx, u_hi, u_lo))
    items.sort(key=lambda it: (-it[0], it[1], -it[2]))

    u = [1.0] * n  # all slices start fully underprovisioned
    remaining = capacity_mbps
    for marginal, idx, u_hi, u_lo in items:
        if remaining <= 1e-12:
            break
        d = demands[idx]
        width_cap = (u_hi - u_lo) * d
        spend = min(width_cap, remaining)
        u[idx] -= spend / d
        remaining -= spend

    fractions = tuple(min(max(1.0 - ui, 0.0), 1.0) for ui in u)
    total_penalty = sum(penalty(stype, f) for (stype, _), f in zip(active, fractions))
    return Allocation(fractions=fractions, total_penalty=total_penalty)


class PenaltyCache:
    """Memoizes penalty_for_level within one decision context."""

    def __init__(self):
        self._cache: dict = {}

    def penalty(self, active: list[tuple[SliceType, float]], capacity_mbps: float) -> float:
        key = (tuple((st.segments, d) for st, d in active), capacity_mbps)
        hit = self._cache.get(key)
        if hit is None:
            hit = allocate(active, capacity_mbps).total_penalty
            self._cache[key] = hit
        return hit


def penalty_for_level(active: list[tuple[SliceType, float]], capacity_mbps: float,
                      cache: PenaltyCache | None = None) -> float:
    """Total optimal penalty of the active set at one capacity level."""
    if cache is not None:
        return cache.penalty(active, capacity_mbps)
    return allocate(active, capacity_mbps).total_penalty
