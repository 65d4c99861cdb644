"""Per-user MMSE under the exact receive model and the resulting sum-rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChannelSet
from .optimizer import Solution, effective_channels, mis_reference_gain


@dataclass(frozen=True)
class UserMetrics:
    mmse: np.ndarray
    rate: np.ndarray
    sum_rate: float


def per_user_mmse(ch: ChannelSet, sol: Solution, S_s, sigma_w2, P_s) -> np.ndarray:
    """Block-averaged MSE of every user's scaled received symbol.

    Each user applies its group's scaling to the whole received signal
    (own stream, cross-group leakage and noise alike), so BS-served users
    see the MIS reference leakage scaled by ``alpha_b`` and MIS-served users
    see the precoded streams scaled by ``alpha_s``.
    """
    B, R, M = ch.B, ch.R, ch.M
    U = sol.Upsilon
    L = U.shape[1]
    scale = np.concatenate([np.full(B, sol.alpha_b), np.full(R, sol.alpha_s)])

    c = mis_reference_gain(ch, sol.v_b, P_s) @ U                # M x L
    target_s = np.vstack([np.zeros((B, L), dtype=complex), S_s])
    err = np.abs(scale[:, None] * c - target_s) ** 2

    if B > 0:
        G = effective_channels(ch, U)                         # L x M x N
        resp = scale[None, :, None] * (G @ sol.F) - np.eye(M, B)[None]
        err = err + np.sum(np.abs(resp) ** 2, axis=2).T
    return err.mean(axis=1) + scale**2 * sigma_w2


def sum_rate(mmse) -> float:
    """``sum log2(1 / min(mmse, 1))``; users worse than silence get zero rate."""
    mmse = np.asarray(mmse, dtype=float)
    if np.any(~(mmse > 0)):
        raise ValueError("sum_rate requires strictly positive MMSE values")
    return float(np.sum(np.log2(1.0 / np.minimum(mmse, 1.0))))


def user_metrics(mmse) -> UserMetrics:
    mmse = np.asarray(mmse, dtype=float)
    rate = np.log2(1.0 / np.minimum(mmse, 1.0))
    return UserMetrics(mmse=mmse, rate=rate, sum_rate=float(rate.sum()))
