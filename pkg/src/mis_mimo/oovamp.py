"""Optimization-oriented max-sum matrix VAMP.

Solves ``min_X sum_i ||A_i X - Z_i||_F^2`` subject to an entry-wise
constraint by alternating a linear MAP (regularized least-squares)
estimator with a separable MAP projector, exchanging extrinsic Gaussian
messages ``(mean, precision)`` between the two.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

GAMMA_FLOOR = 1e-8
DEGENERATE_TOL = 1e-12


class OOVampError(FloatingPointError):
    """Raised when the message passing produces non-finite values."""


@dataclass(frozen=True)
class QuadraticTerm:
    """One data term ``||A X - Z||_F^2``."""

    A: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        if self.A.shape[0] != self.Z.shape[0]:
            raise ValueError(f"row mismatch: A is {self.A.shape}, Z is {self.Z.shape}")


@dataclass(frozen=True)
class VampState:
    R: np.ndarray
    gamma: float
    t: int = 0
    X_hat: np.ndarray | None = None


@dataclass(frozen=True)
class ProjectorSpec:
    """``project(r, gamma) -> (x_hat, derivative)``, both entry-wise."""

    project: Callable


def gram_and_rhs(terms: Sequence[QuadraticTerm], n: int, q: int):
    G = np.zeros((n, n), dtype=complex)
    b = np.zeros((n, q), dtype=complex)
    for term in terms:
        if term.A.size == 0:
            continue
        if term.A.shape[1] != n or term.Z.shape[1] != q:
            raise ValueError("all terms must share the column counts of A and Z")
        AH = term.A.conj().T
        G += AH @ term.A
        b += AH @ term.Z
    return G, b


def lmap_solve(terms: Sequence[QuadraticTerm], R_prior: np.ndarray, gamma_prior: float):
    """Regularized least-squares estimate under the prior ``CN(R_prior, 1/gamma)``.

    Returns ``X_bar = (sum A^H A + g I)^-1 (sum A^H Z + g R)`` and the
    posterior precision ``n / Tr[(sum A^H A + g I)^-1]``.
    """
    if gamma_prior <= 0:
        raise ValueError("gamma_prior must be positive")
    n, q = R_prior.shape
    G, b = gram_and_rhs(terms, n, q)
    # Hermitian eigendecomposition doubles as solver and trace-of-inverse.
    lam, V = np.linalg.eigh(G)
    lam = np.maximum(lam, 0.0)
    inv = 1.0 / (lam + gamma_prior)
    rhs = b + gamma_prior * R_prior
    X_bar = V @ (inv[:, None] * (V.conj().T @ rhs))
    gamma_bar = n / float(np.sum(inv))
    return X_bar, gamma_bar


def extrinsic(mean_post, prec_post: float, mean_prior, prec_prior: float,
              gamma_floor: float = GAMMA_FLOOR):
    """Divide the posterior Gaussian by the prior; clamp the precision."""
    diff = prec_post - prec_prior
    if abs(diff) < DEGENERATE_TOL:
        return mean_post, gamma_floor
    mean_ext = (mean_post * prec_post - mean_prior * prec_prior) / diff
    return mean_ext, max(diff, gamma_floor)


def oovamp_step(terms: Sequence[QuadraticTerm], projector: ProjectorSpec, state: VampState,
                damping: float = 1.0, gamma_floor: float = GAMMA_FLOOR) -> VampState:
    """One LMAP -> extrinsic -> projector -> extrinsic pass."""
    gamma = max(state.gamma, gamma_floor)
    X_bar, gamma_bar = lmap_solve(terms, state.R, gamma)
    R_tl, gamma_tl = extrinsic(X_bar, gamma_bar, state.R, gamma, gamma_floor)

    X_hat, deriv = projector.project(R_tl, gamma_tl)
    X_hat = np.asarray(X_hat, dtype=complex)
    # a locally constant projector means a near-certain posterior
    avg = max(float(np.mean(deriv)), DEGENERATE_TOL)
    gamma_hat = gamma_tl / avg
    R_new, gamma_new = extrinsic(X_hat, gamma_hat, R_tl, gamma_tl, gamma_floor)

    if damping != 1.0:
        R_new = damping * R_new + (1.0 - damping) * state.R
    t = state.t + 1
    if not (np.all(np.isfinite(R_new)) and np.isfinite(gamma_new) and np.all(np.isfinite(X_hat))):
        raise OOVampError(
            f"non-finite message at iteration {t}: gamma={gamma}, gamma_bar={gamma_bar}, "
            f"gamma_tilde={gamma_tl}, gamma_hat={gamma_hat}"
        )
    return VampState(R=R_new, gamma=float(gamma_new), t=t, X_hat=X_hat)


def oovamp_run(terms: Sequence[QuadraticTerm], projector: ProjectorSpec, init: VampState,
               eps: float = 1e-4, t_max: int = 200, damping: float = 1.0,
               gamma_floor: float = GAMMA_FLOOR):
    """Iterate until ``||X_t - X_{t-1}||^2 <= eps ||X_{t-1}||^2`` or ``t > t_max``.

    Returns the final projected estimate and the final state.
    """
    state = replace(init, gamma=max(init.gamma, gamma_floor))
    prev = init.X_hat
    while True:
        state = oovamp_step(terms, projector, state, damping, gamma_floor)
        X = state.X_hat
        if prev is not None:
            if np.sum(np.abs(X - prev) ** 2) <= eps * np.sum(np.abs(prev) ** 2):
                break
        if state.t >= t_max:
            break
        prev = X
    return state.X_hat, state
