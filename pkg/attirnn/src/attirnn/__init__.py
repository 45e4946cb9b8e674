"""Probabilistic RSL forecaster: attention LSTM trained with Gaussian NLL."""

from .data import (
    DEFAULT_H,
    DEFAULT_T,
    LinkTrace,
    TrainingWindow,
    WindowDataset,
    build_training_windows,
)
from .emit import SIGMA2_FLOOR, emit_forecasts, load_rsl_csv
from .errors import (
    AttIrnnError,
    DivergenceDetected,
    TraceShorterThanWindow,
    TraceTooShort,
)
from .model import AttIrnn, ModelSpec, gaussian_nll
from .training import Checkpoint, load_checkpoint, persistence_nll, train

__all__ = [
    "DEFAULT_H", "DEFAULT_T", "LinkTrace", "TrainingWindow", "WindowDataset",
    "build_training_windows", "SIGMA2_FLOOR", "emit_forecasts", "load_rsl_csv",
    "AttIrnnError", "DivergenceDetected", "TraceShorterThanWindow",
    "TraceTooShort", "AttIrnn", "ModelSpec", "gaussian_nll", "Checkpoint",
    "load_checkpoint", "persistence_nll", "train",
]
