"""Attention encoder-decoder LSTM emitting per-step Gaussian forecasts.

Single-layer LSTM encoder over the T-step input, additive attention
from each decoder step over all encoder states, and a head producing
(mu, sigma^2) per horizon step with softplus keeping sigma^2 positive.
Static link features (id embedding, antenna embedding, length, freq)
initialize both recurrent states.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import DEFAULT_H, DEFAULT_T

SIGMA2_EPS = 1e-6  # softplus output can underflow; keep sigma^2 strictly positive


@dataclass(frozen=True)
class ModelSpec:
    hidden: int = 64
    embed_dim: int = 8
    antenna_embed_dim: int = 2
    dropout: float = 0.1
    T: int = DEFAULT_T
    H: int = DEFAULT_H
    n_links: int = 1
    n_antenna_types: int = 1


class AttIrnn(nn.Module):
    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = spec
        d = spec.hidden
        self.link_embed = nn.Embedding(spec.n_links, spec.embed_dim)
        self.antenna_embed = nn.Embedding(spec.n_antenna_types,
                                          spec.antenna_embed_dim)
        static_dim = spec.embed_dim + spec.antenna_embed_dim + 2
        self.static_to_state = nn.Linear(static_dim, 2 * d)
        self.encoder = nn.LSTM(1, d, num_layers=1, batch_first=True)
        self.decoder = nn.LSTMCell(1 + d, d)
        self.dropout = nn.Dropout(spec.dropout)
        # Additive (Bahdanau) attention: score = v^T tanh(W_e e + W_d s).
        self.attn_enc = nn.Linear(d, d, bias=False)
        self.attn_dec = nn.Linear(d, d, bias=True)
        self.attn_v = nn.Linear(d, 1, bias=False)
        self.head = nn.Linear(d + d, 2)

    def _init_state(self, link_id, antenna_type, length_km, freq_ghz):
        statics = torch.cat([
            self.link_embed(link_id),
            self.antenna_embed(antenna_type),
            length_km.unsqueeze(-1),
            freq_ghz.unsqueeze(-1) / 100.0,
        ], dim=-1)
        h0c0 = self.static_to_state(statics)
        return h0c0.chunk(2, dim=-1)

    def _attend(self, enc_out, dec_h):
        # enc_out: (B, T, d); dec_h: (B, d) -> context g: (B, d)
        scores = self.attn_v(torch.tanh(
            self.attn_enc(enc_out) + self.attn_dec(dec_h).unsqueeze(1)))
        weights = F.softmax(scores.squeeze(-1), dim=1)
        return torch.bmm(weights.unsqueeze(1), enc_out).squeeze(1)

    def forward(self, x, link_id, antenna_type, length_km, freq_ghz,
                teacher: torch.Tensor | None = None):
        """Return (mu, sigma2), each (B, H).

        Inputs are centered on the window's last observation so the net
        predicts deviations; the offset is added back to mu. With
        `teacher` given, decoding is teacher forced; otherwise the
        decoder feeds back its own mu autoregressively.
        """
        offset = x[:, -1:]
        xc = (x - offset).unsqueeze(-1)
        h0, c0 = self._init_state(link_id, antenna_type, length_km, freq_ghz)
        enc_out, (h_n, c_n) = self.encoder(
            xc, (h0.unsqueeze(0), c0.unsqueeze(0)))
        enc_out = self.dropout(enc_out)
        dec_h, dec_c = h_n.squeeze(0), c_n.squeeze(0)

        prev = torch.zeros_like(offset)  # centered last observation
        mus, sigma2s = [], []
        for h in range(self.spec.H):
            g = self._attend(enc_out, dec_h)
            dec_h, dec_c = self.decoder(torch.cat([prev, g], dim=-1),
                                        (dec_h, dec_c))
            out = self.head(torch.cat([self.dropout(dec_h), g], dim=-1))
            mu_c, raw = out[:, :1], out[:, 1:]
            sigma2 = F.softplus(raw) + SIGMA2_EPS
            mus.append(mu_c + offset)
            sigma2s.append(sigma2)
            if teacher is not None:
                prev = teacher[:, h:h + 1] - offset
            else:
                prev = mu_c.detach()
        return torch.cat(mus, dim=1), torch.cat(sigma2s, dim=1)


def gaussian_nll(y, mu, sigma2) -> torch.Tensor:
    """0.5 * mean over all terms of [(y-mu)^2/sigma^2 + log sigma^2]."""
    return 0.5 * torch.mean((y - mu) ** 2 / sigma2 + torch.log(sigma2))
