"""Gaussian RSL forecasts and their conversion to capacity-level PMFs.

A forecast is a per-step (mu, sigma^2) pair over a short horizon H. Given
the current ACM level, the threshold-crossing probability of each level is
a difference of standard normal CDFs; a first-order Markov recursion
propagates the per-step distributions across the horizon. Raw rows of the
transition formula can overlap under hysteresis, so each row is clamped at
zero and renormalized to a proper distribution before use.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateRow,
    DuplicateRow,
    EmptyHistory,
    MissingHorizonStep,
    NonPositiveVariance,
    TooFewSamples,
)
from .link_capacity import AcmTable

SIGMA_FLOOR_DB = 0.1  # keeps CDF arguments finite on flat histories

DEFAULT_HORIZON = 5
DEFAULT_LOOKBACK = 15


def _phi(x: float) -> float:
    """Standard normal CDF."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class GaussianForecast:
    origin_slot: int
    mu: tuple[float, ...]       # dBm, index 0 is h=1
    sigma2: tuple[float, ...]   # dB^2

    def __post_init__(self):
        if len(self.mu) < 1 or len(self.mu) != len(self.sigma2):
            raise ValueError("forecast needs matching mu/sigma2 for h=1..H")
        for m, s2 in zip(self.mu, self.sigma2):
            if not math.isfinite(m):
                raise ValueError(f"non-finite mu {m!r}")
            if not (s2 > 0 and math.isfinite(s2)):
                raise NonPositiveVariance(f"sigma2 must be positive, got {s2!r}")

    @property
    def horizon(self) -> int:
        return len(self.mu)


@dataclass(frozen=True)
class CapacityPmf:
    """Per-horizon-step probability vectors over ACM levels."""

    probs: tuple[tuple[float, ...], ...]  # probs[h-1][level]

    @property
    def horizon(self) -> int:
        return len(self.probs)

    def step(self, h: int) -> tuple[float, ...]:
        """Distribution at horizon step h (1-based)."""
        return self.probs[h - 1]

    def argmax_level(self, h: int) -> int:
        """Most likely level at step h, ties to the lower level."""
        row = self.probs[h - 1]
        best = 0
        for l in range(1, len(row)):
            if row[l] > row[best]:
                best = l
        return best


@dataclass(frozen=True)
class VarianceCalibration:
    """Per-horizon-step residual stddev for the naive forecaster."""

    sigma: tuple[float, ...]

    def __post_init__(self):
        prev = 0.0
        for s in self.sigma:
            if s <= 0:
                raise NonPositiveVariance("calibrated sigma must be positive")
            if s < prev:
                raise ValueError("sigma must be non-decreasing in h")
            prev = s


def flat_calibration(sigma: float, horizon: int) -> VarianceCalibration:
    return VarianceCalibration(sigma=tuple([float(sigma)] * horizon))


def calibrate_variance(pairs: list[list[tuple[float, float]]]) -> VarianceCalibration:
    """Estimate per-step residual stddev from (forecast mu, realized) pairs.

    pairs[h-1] holds the tuples for horizon step h. Applies the 0.1 dB floor
    and an isotonic non-decreasing clamp over h.
    """
    sigmas = []
    for h_pairs in pairs:
        if len(h_pairs) < 30:
            raise TooFewSamples(f"need >= 30 pairs per step, got {len(h_pairs)}")
        residuals = np.array([x - mu for mu, x in h_pairs], dtype=float)
        sigmas.append(max(float(residuals.std()), SIGMA_FLOOR_DB))
    # isotonic clamp: running maximum
    clamped = []
    running = 0.0
    for s in sigmas:
        running = max(running, s)
        clamped.append(running)
    return VarianceCalibration(sigma=tuple(clamped))


def naive_forecast(history, horizon: int, calib: VarianceCalibration,
                   origin_slot: int = 0) -> GaussianForecast:
    """Persistence forecast: mu_h = last observation, variance from calib."""
    history = list(history)
    if not history:
        raise EmptyHistory("naive forecast needs at least one observation")
    if len(calib.sigma) < horizon:
        raise ValueError("calibration does not cover the horizon")
    last = float(history[-1])
    return GaussianForecast(
        origin_slot=origin_slot,
        mu=tuple([last] * horizon),
        sigma2=tuple(s * s for s in calib.sigma[:horizon]),
    )


def transition_probability(l_from: int, l_to: int, mu: float, sigma: float,
                           table: AcmTable) -> float:
    """Raw (pre-normalization) probability of moving l_from -> l_to.

    Phi((max(up_to, down_from) - mu)/sigma) - Phi((min(down_to, up_from) - mu)/sigma),
    clamped below at zero. Infinite thresholds map to Phi = 1 or 0.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    to = table.levels[l_to]
    frm = table.levels[l_from]
    upper = max(to.up_dbm, frm.down_dbm)
    lower = min(to.down_dbm, frm.up_dbm)

    def cdf(threshold: float) -> float:
        if math.isinf(threshold):
            return 1.0 if threshold > 0 else 0.0
        return _phi((threshold - mu) / sigma)

    return max(cdf(upper) - cdf(lower), 0.0)


def _normalized_row(l_from: int, mu: float, sigma: float, table: AcmTable,
                    required: bool) -> np.ndarray | None:
    raw = np.array(
        [transition_probability(l_from, l_to, mu, sigma, table)
         for l_to in range(table.num_levels)],
        dtype=float,
    )
    total = raw.sum()
    if total <= 0.0:
        if required:
            raise DegenerateRow(
                f"all transition probabilities from level {l_from} are zero "
                f"(mu={mu}, sigma={sigma})"
            )
        return None
    return raw / total


def capacity_pmf_horizon(current_level: int, forecast: GaussianForecast,
                         table: AcmTable) -> CapacityPmf:
    """Markov recursion over ACM levels driven by the per-step forecasts."""
    L = table.num_levels
    if not 0 <= current_level < L:
        raise ValueError("current_level out of range")
    steps = []
    prev = None
    for h in range(1, forecast.horizon + 1):
        mu = forecast.mu[h - 1]
        sigma = math.sqrt(forecast.sigma2[h - 1])
        if h == 1:
            row = _normalized_row(current_level, mu, sigma, table, required=True)
            vec = row
        else:
            vec = np.zeros(L)
            for j in range(L):
                if prev[j] <= 0.0:
                    continue
                row = _normalized_row(j, mu, sigma, table, required=True)
                vec += prev[j] * row
        # guard against accumulated float drift
        vec = vec / vec.sum()
        steps.append(tuple(float(p) for p in vec))
        prev = np.asarray(steps[-1])
    return CapacityPmf(probs=tuple(steps))


def point_mass_pmf(level: int, num_levels: int, horizon: int) -> CapacityPmf:
    """Degenerate PMF pinned to one level at every step (test/plumbing aid)."""
    row = tuple(1.0 if l == level else 0.0 for l in range(num_levels))
    return CapacityPmf(probs=tuple([row] * horizon))


class ExternalForecastProvider:
    """Per-slot forecasts loaded from the forecast CSV contract."""

    def __init__(self, forecasts: dict[int, GaussianForecast]):
        self._forecasts = dict(forecasts)

    def __contains__(self, origin_slot: int) -> bool:
        return origin_slot in self._forecasts

    def get(self, origin_slot: int) -> GaussianForecast | None:
        return self._forecasts.get(origin_slot)

    def __len__(self):
        return len(self._forecasts)


def load_external_forecasts(source) -> ExternalForecastProvider:
    """Parse `origin_slot,h,mu_dbm,sigma2_db2` CSV into a provider.

    Every origin slot must carry a complete h=1..H block with H inferred
    from the maximum h of that slot.
    """
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    reader = csv.DictReader(io.StringIO(text))
    per_slot: dict[int, dict[int, tuple[float, float]]] = {}
    for row in reader:
        slot = int(row["origin_slot"])
        h = int(row["h"])
        mu = float(row["mu_dbm"])
        s2 = float(row["sigma2_db2"])
        if s2 <= 0:
            raise NonPositiveVariance(f"sigma2 {s2} at slot {slot}, h {h}")
        bucket = per_slot.setdefault(slot, {})
        if h in bucket:
            raise DuplicateRow(f"duplicate row for slot {slot}, h {h}")
        bucket[h] = (mu, s2)
    forecasts = {}
    for slot, bucket in per_slot.items():
        H = max(bucket)
        missing = [h for h in range(1, H + 1) if h not in bucket]
        if missing:
            raise MissingHorizonStep(f"slot {slot} missing h={missing}")
        forecasts[slot] = GaussianForecast(
            origin_slot=slot,
            mu=tuple(bucket[h][0] for h in range(1, H + 1)),
            sigma2=tuple(bucket[h][1] for h in range(1, H + 1)),
        )
    return ExternalForecastProvider(forecasts)
