"""Sliding-window dataset construction with wet/dry balancing.

Traces are received-signal-level (RSL) series in dBm, one per link.
Each supervised pair is a contiguous window: T observations in, the
next H observations out, plus the static link descriptors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import TraceShorterThanWindow

DEFAULT_T = 15
DEFAULT_H = 5

# Rolling-stddev threshold separating rain-affected windows from clear
# ones; windows whose sample stddev exceeds this are tagged wet.
WET_STDDEV_DB = 0.8


@dataclass(frozen=True)
class LinkTrace:
    """One link's RSL series plus the static features the model embeds."""

    rsl: tuple[float, ...]
    link_id: int
    length_km: float = 1.0
    freq_ghz: float = 60.0
    antenna_type: int = 0


@dataclass(frozen=True)
class TrainingWindow:
    x: tuple[float, ...]          # T past RSL values, dBm
    y: tuple[float, ...]          # H future RSL values, dBm
    link_id: int
    length_km: float
    freq_ghz: float
    antenna_type: int
    wet: bool = False


@dataclass(frozen=True)
class WindowDataset:
    windows: tuple[TrainingWindow, ...]
    T: int = DEFAULT_T
    H: int = DEFAULT_H
    n_links: int = field(default=1)
    n_antenna_types: int = field(default=1)

    def __len__(self):
        return len(self.windows)


def _is_wet(segment: np.ndarray) -> bool:
    return float(np.std(segment)) > WET_STDDEV_DB


def build_training_windows(traces, T: int = DEFAULT_T, H: int = DEFAULT_H,
                           balance: bool = False, seed: int = 0) -> WindowDataset:
    """Slide a T+H window over every trace; optionally rebalance wet/dry.

    Balancing keeps every wet window and subsamples the dry ones down to
    the wet count. A corpus with no wet windows cannot be balanced; in
    that case all windows are kept and a warning is emitted.
    """
    if T <= 0 or H <= 0:
        raise ValueError("T and H must be positive")
    windows: list[TrainingWindow] = []
    for trace in traces:
        series = np.asarray(trace.rsl, dtype=float)
        if len(series) < T + H:
            raise TraceShorterThanWindow(
                f"link {trace.link_id}: length {len(series)} < T+H={T + H}")
        for start in range(len(series) - T - H + 1):
            seg = series[start:start + T + H]
            windows.append(TrainingWindow(
                x=tuple(seg[:T]),
                y=tuple(seg[T:]),
                link_id=trace.link_id,
                length_km=trace.length_km,
                freq_ghz=trace.freq_ghz,
                antenna_type=trace.antenna_type,
                wet=_is_wet(seg),
            ))

    if balance:
        wet = [w for w in windows if w.wet]
        dry = [w for w in windows if not w.wet]
        if not wet:
            warnings.warn("no wet windows found; balance requested but no "
                          "subsampling possible", stacklevel=2)
        elif len(dry) > len(wet):
            rng = np.random.default_rng(seed)
            keep = rng.choice(len(dry), size=len(wet), replace=False)
            # Stable order: wet first, then the sampled dry windows.
            windows = wet + [dry[i] for i in sorted(keep)]

    n_links = max((w.link_id for w in windows), default=0) + 1
    n_ant = max((w.antenna_type for w in windows), default=0) + 1
    return WindowDataset(windows=tuple(windows), T=T, H=H,
                         n_links=n_links, n_antenna_types=n_ant)
