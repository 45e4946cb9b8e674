"""Training loop: Gaussian NLL, teacher forcing, early stopping.

Validation uses autoregressive decoding (the deployment condition);
the best-validation weights are restored into the returned checkpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .data import WindowDataset
from .errors import DivergenceDetected
from .model import AttIrnn, ModelSpec, gaussian_nll

DEFAULT_BATCH = 128
DEFAULT_LR = 1e-3


@dataclass
class Checkpoint:
    spec: ModelSpec
    state_dict: dict
    train_nll: list[float] = field(default_factory=list)
    val_nll: list[float] = field(default_factory=list)
    best_epoch: int = 0

    def build(self) -> AttIrnn:
        model = AttIrnn(self.spec)
        model.load_state_dict(self.state_dict)
        model.eval()
        return model

    def save(self, path) -> None:
        torch.save({"spec": self.spec.__dict__, "state_dict": self.state_dict,
                    "train_nll": self.train_nll, "val_nll": self.val_nll,
                    "best_epoch": self.best_epoch}, path)


def load_checkpoint(path) -> Checkpoint:
    blob = torch.load(path, weights_only=False)
    return Checkpoint(spec=ModelSpec(**blob["spec"]),
                      state_dict=blob["state_dict"],
                      train_nll=blob["train_nll"], val_nll=blob["val_nll"],
                      best_epoch=blob["best_epoch"])


def _tensors(dataset: WindowDataset):
    w = dataset.windows
    return {
        "x": torch.tensor([win.x for win in w], dtype=torch.float32),
        "y": torch.tensor([win.y for win in w], dtype=torch.float32),
        "link_id": torch.tensor([win.link_id for win in w], dtype=torch.long),
        "antenna_type": torch.tensor([win.antenna_type for win in w],
                                     dtype=torch.long),
        "length_km": torch.tensor([win.length_km for win in w],
                                  dtype=torch.float32),
        "freq_ghz": torch.tensor([win.freq_ghz for win in w],
                                 dtype=torch.float32),
    }


def _batch(tensors, idx):
    return {k: v[idx] for k, v in tensors.items()}


def _eval_nll(model: AttIrnn, tensors) -> float:
    model.eval()
    with torch.no_grad():
        mu, sigma2 = model(tensors["x"], tensors["link_id"],
                           tensors["antenna_type"], tensors["length_km"],
                           tensors["freq_ghz"])
        return float(gaussian_nll(tensors["y"], mu, sigma2))


def train(dataset: WindowDataset, spec: ModelSpec, epochs: int = 30,
          patience: int = 10, seed: int = 0, batch_size: int = DEFAULT_BATCH,
          lr: float = DEFAULT_LR, val_fraction: float = 0.2) -> Checkpoint:
    if len(dataset) < 2:
        raise ValueError("need at least 2 windows to split train/validation")
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)

    n = len(dataset)
    perm = rng.permutation(n)
    n_val = max(1, int(round(n * val_fraction)))
    val_idx = torch.tensor(perm[:n_val], dtype=torch.long)
    train_idx = perm[n_val:]

    tensors = _tensors(dataset)
    val_tensors = _batch(tensors, val_idx)
    model = AttIrnn(spec)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    ckpt = Checkpoint(spec=spec, state_dict={})
    best_val = math.inf
    stale = 0

    for epoch in range(epochs):
        model.train()
        order = rng.permutation(train_idx)
        losses = []
        for start in range(0, len(order), batch_size):
            idx = torch.tensor(order[start:start + batch_size],
                               dtype=torch.long)
            batch = _batch(tensors, idx)
            mu, sigma2 = model(batch["x"], batch["link_id"],
                               batch["antenna_type"], batch["length_km"],
                               batch["freq_ghz"], teacher=batch["y"])
            loss = gaussian_nll(batch["y"], mu, sigma2)
            if not torch.isfinite(loss):
                raise DivergenceDetected(f"non-finite NLL at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))

        val = _eval_nll(model, val_tensors)
        if not math.isfinite(val):
            raise DivergenceDetected(f"non-finite validation NLL at epoch {epoch}")
        ckpt.train_nll.append(float(np.mean(losses)))
        ckpt.val_nll.append(val)
        if val < best_val:
            best_val = val
            ckpt.best_epoch = epoch
            ckpt.state_dict = {k: v.detach().clone()
                               for k, v in model.state_dict().items()}
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break
    return ckpt


def persistence_nll(train_set: WindowDataset, eval_set: WindowDataset) -> float:
    """Naive baseline: mu = last observation, sigma_h^2 calibrated per h
    on the training windows. Returns the mean per-term NLL on eval_set."""
    tr_x = np.array([w.x for w in train_set.windows])
    tr_y = np.array([w.y for w in train_set.windows])
    sigma2 = np.mean((tr_y - tr_x[:, -1:]) ** 2, axis=0)
    sigma2 = np.maximum(sigma2, 1e-6)

    ev_x = np.array([w.x for w in eval_set.windows])
    ev_y = np.array([w.y for w in eval_set.windows])
    err2 = (ev_y - ev_x[:, -1:]) ** 2
    return float(0.5 * np.mean(err2 / sigma2 + np.log(sigma2)))
