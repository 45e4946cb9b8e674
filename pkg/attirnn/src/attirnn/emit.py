"""Forecast emission and the CSV interfaces shared with the simulator.

Reads `timestamp_min,rsl_dbm` traces; writes `origin_slot,h,mu_dbm,
sigma2_db2` forecasts. Both schemas are the cross-component contract,
so the parsers here stay deliberately strict.
"""

from __future__ import annotations

import csv
import io

import numpy as np
import torch

from .data import DEFAULT_H, DEFAULT_T, LinkTrace
from .errors import TraceTooShort
from .model import AttIrnn

SIGMA2_FLOOR = 0.01  # dB^2; defensive floor mirrored from the consumer side


def load_rsl_csv(source) -> tuple[float, ...]:
    """Parse a `timestamp_min,rsl_dbm` CSV into an RSL series."""
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != ["timestamp_min", "rsl_dbm"]:
        raise ValueError(f"unexpected header {reader.fieldnames!r}")
    return tuple(float(row["rsl_dbm"]) for row in reader)


def emit_forecasts(model: AttIrnn, trace: LinkTrace,
                   T: int = DEFAULT_T, H: int = DEFAULT_H) -> bytes:
    """Forecast CSV for every origin slot with a full T-step history.

    Origin slot t uses observations t-T+1..t and covers horizons
    h=1..H. Values are printed with repr so the round trip through the
    consumer's parser is exact.
    """
    series = np.asarray(trace.rsl, dtype=float)
    if len(series) < T:
        raise TraceTooShort(f"trace length {len(series)} < T={T}")

    origins = list(range(T - 1, len(series)))
    x = torch.tensor(np.stack([series[t - T + 1:t + 1] for t in origins]),
                     dtype=torch.float32)
    n = len(origins)
    model.eval()
    with torch.no_grad():
        mu, sigma2 = model(
            x,
            torch.full((n,), trace.link_id, dtype=torch.long),
            torch.full((n,), trace.antenna_type, dtype=torch.long),
            torch.full((n,), trace.length_km, dtype=torch.float32),
            torch.full((n,), trace.freq_ghz, dtype=torch.float32),
        )
    mu = mu.double().numpy()
    sigma2 = np.maximum(sigma2.double().numpy(), SIGMA2_FLOOR)

    lines = ["origin_slot,h,mu_dbm,sigma2_db2"]
    for i, t in enumerate(origins):
        for h in range(1, H + 1):
            lines.append(
                f"{t},{h},{float(mu[i, h - 1])!r},{float(sigma2[i, h - 1])!r}")
    return ("\n".join(lines) + "\n").encode("utf-8")
