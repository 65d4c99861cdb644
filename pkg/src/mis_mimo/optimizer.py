"""Joint optimization of MIS phases, BS precoder and receive scalings.

The outer loop alternates one OOVAMP pass on the linearized phase-shift
problem with the closed-form updates of ``alpha_s`` and ``(alpha_b, F)``,
tracking the sum-MSE ``f`` after every iteration.

Shapes used throughout: ``Upsilon`` is K x L, ``F`` is N x B, ``S_s`` is
R x L, ``v_b`` has length N.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import ChannelSet, SimConfig, split_power
from .oovamp import ProjectorSpec, QuadraticTerm, VampState, oovamp_step
from .projectors import ConstraintMode, projector_for, random_feasible

log = logging.getLogger(__name__)


class OptimizerError(RuntimeError):
    pass


@dataclass
class Solution:
    Upsilon: np.ndarray
    F: np.ndarray
    alpha_b: float
    alpha_s: float
    v_b: np.ndarray
    mse_trajectory: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0


@dataclass(frozen=True)
class PhaseProblem:
    D: np.ndarray
    M: np.ndarray
    X: np.ndarray
    Z: np.ndarray

    def terms(self) -> list[QuadraticTerm]:
        return [QuadraticTerm(self.D, self.X), QuadraticTerm(self.M, self.Z)]

    def cost(self, Upsilon) -> float:
        """``||D U - X||^2 + ||M U - Z||^2``."""
        return float(np.sum(np.abs(self.D @ Upsilon - self.X) ** 2)
                     + np.sum(np.abs(self.M @ Upsilon - self.Z) ** 2))


@dataclass(frozen=True)
class PrecoderProblem:
    C: np.ndarray
    Kmat: np.ndarray
    E: np.ndarray


def khatri_rao(Bm: np.ndarray, Am: np.ndarray) -> np.ndarray:
    """Column-wise Khatri-Rao product, column k is ``kron(Bm[:, k], Am[:, k])``.

    With this ordering ``khatri_rao(B, A) @ u == vec(A @ diag(u) @ B.T)``
    for column-major ``vec``.
    """
    if Bm.ndim != 2 or Am.ndim != 2 or Bm.shape[1] != Am.shape[1]:
        raise ValueError(f"column counts differ: {Bm.shape} vs {Am.shape}")
    return np.einsum("ik,jk->ijk", Bm, Am).reshape(Bm.shape[0] * Am.shape[0], Bm.shape[1])


def reference_vector(H_bs: np.ndarray) -> np.ndarray:
    """Dominant right singular vector of ``H_bs`` with a real positive lead entry."""
    if not np.any(H_bs):
        raise ValueError("reference_vector: H_bs is the zero matrix")
    _, _, Vh = np.linalg.svd(H_bs)
    v = Vh[0].conj()
    lead = v[np.flatnonzero(np.abs(v) > 1e-14 * np.abs(v).max())[0]]
    return v * (np.conj(lead) / abs(lead))


def mis_reference_gain(ch: ChannelSet, v_b: np.ndarray, P_s: float) -> np.ndarray:
    """``sqrt(P_s) * H_su^H Diag(H_bs v_b)``, the M x K map from phases to MIS-borne signals."""
    return np.sqrt(P_s) * ch.H_su.conj().T * (ch.H_bs @ v_b)[None, :]


def effective_channels(ch: ChannelSet, Upsilon: np.ndarray) -> np.ndarray:
    """Stack of ``G_l = H_su^H Diag(u_l) H_bs + H_bu^H``, shape L x M x N."""
    cascade = np.einsum("km,kl,kn->lmn", ch.H_su.conj(), Upsilon, ch.H_bs)
    return cascade + ch.H_bu.conj().T[None, :, :]


def _targets(B: int, M: int) -> np.ndarray:
    """``[I_B; 0]``, the M x B target of the BS-served streams."""
    return np.eye(M, B, dtype=complex)


def _mis_targets(S_s: np.ndarray, B: int) -> np.ndarray:
    """``[0_{B x L}; S_s]``."""
    L = S_s.shape[1]
    return np.vstack([np.zeros((B, L), dtype=complex), S_s])


def build_phase_problem(ch: ChannelSet, F, alpha_b, alpha_s, v_b, S_s, P_s) -> PhaseProblem:
    B, M = ch.B, ch.M
    if S_s.shape[0] != ch.R:
        raise ValueError(f"S_s must have R={ch.R} rows, got {S_s.shape}")
    if F.shape != (ch.N, B):
        raise ValueError(f"F must be {ch.N}x{B}, got {F.shape}")
    L = S_s.shape[1]
    A = alpha_b * ch.H_su.conj().T
    Bm = (ch.H_bs @ F).T
    D = khatri_rao(Bm, A)
    Mm = alpha_s * mis_reference_gain(ch, v_b, P_s)
    x = (_targets(B, M) - alpha_b * ch.H_bu.conj().T @ F).reshape(-1, order="F")
    X = np.repeat(x[:, None], L, axis=1)
    Z = _mis_targets(S_s, B)
    return PhaseProblem(D=D, M=Mm, X=X, Z=Z)


def build_precoder_problem(ch: ChannelSet, Upsilon, v_b, P_s) -> PrecoderProblem:
    C = mis_reference_gain(ch, v_b, P_s) @ Upsilon
    G = effective_channels(ch, Upsilon)
    Kmat = np.einsum("lmi,lmj->ij", G.conj(), G)
    Kmat = 0.5 * (Kmat + Kmat.conj().T)
    E = G.sum(axis=0)[: ch.B]
    return PrecoderProblem(C=C, Kmat=Kmat, E=E)


def update_alpha_s(C, S_s, sigma_w2, L, R) -> float:
    """Minimizer of ``||a C - [0; S_s]||^2 + L R sigma^2 a^2`` over real ``a``."""
    if R == 0:
        return 0.0
    Z = _mis_targets(S_s, C.shape[0] - R)
    num = float(np.real(np.vdot(C, Z)))
    den = float(np.sum(np.abs(C) ** 2) + L * R * sigma_w2)
    return num / den if den > 0 else 0.0


def update_precoder(Kmat, E, P_b, sigma_w2, L, B):
    """Closed-form ``(alpha_b, F)`` under ``||F||_F^2 = P_b``.

    ``F = sqrt(P_b) T E^H / ||T E^H||_F`` with
    ``T = (K + L B sigma^2 / P_b I)^-1`` and ``alpha_b = ||T E^H||_F / sqrt(P_b)``.
    A singular ``K`` (noiseless, rank-deficient) falls back to the
    pseudo-inverse.
    """
    N = Kmat.shape[0]
    if B == 0:
        return 0.0, np.zeros((N, 0), dtype=complex)
    if P_b <= 0:
        raise ValueError("P_b must be positive when B > 0")
    if not np.any(E):
        raise ValueError("update_precoder: E is zero, the precoding target is degenerate")
    lam, V = np.linalg.eigh(Kmat + (L * B * sigma_w2 / P_b) * np.eye(N))
    tol = max(lam.max(), 0.0) * N * np.finfo(float).eps
    inv = np.where(lam > tol, 1.0 / np.where(lam > tol, lam, 1.0), 0.0)
    TEh = V @ (inv[:, None] * (V.conj().T @ E.conj().T))
    scale = np.linalg.norm(TEh)
    if scale == 0:
        raise ValueError("update_precoder: E lies in the null space of K")
    F = np.sqrt(P_b) * TEh / scale
    return float(scale / np.sqrt(P_b)), F


def objective_f(ch: ChannelSet, Upsilon, F, alpha_b, alpha_s, v_b, S_s, P_s, sigma_w2, L=None) -> float:
    """Closed-form expected sum-MSE under the approximate (decoupled-scaling) model."""
    L = Upsilon.shape[1] if L is None else L
    B, R, M = ch.B, ch.R, ch.M
    f = 0.0
    if B > 0:
        G = effective_channels(ch, Upsilon)
        f += float(np.sum(np.abs(alpha_b * (G @ F) - _targets(B, M)[None]) ** 2))
    C = mis_reference_gain(ch, v_b, P_s) @ Upsilon
    f += float(np.sum(np.abs(alpha_s * C - _mis_targets(S_s, B)) ** 2))
    f += L * B * sigma_w2 * alpha_b**2 + L * R * sigma_w2 * alpha_s**2
    return f


def closed_form_updates(ch, Upsilon, v_b, S_s, P_b, P_s, sigma_w2):
    L = Upsilon.shape[1]
    pp = build_precoder_problem(ch, Upsilon, v_b, P_s)
    alpha_s = update_alpha_s(pp.C, S_s, sigma_w2, L, ch.R)
    alpha_b, F = update_precoder(pp.Kmat, pp.E, P_b, sigma_w2, L, ch.B)
    return alpha_s, alpha_b, F


def initial_phases(mode, rng: np.random.Generator, K: int, L: int) -> np.ndarray:
    """One random feasible column, repeated over the block."""
    col = random_feasible(mode, rng, K)
    return np.repeat(col[:, None], L, axis=1)


def optimize(ch: ChannelSet, S_s: np.ndarray, cfg: SimConfig,
             mode: ConstraintMode | str = ConstraintMode.UNIMODULAR,
             rng: np.random.Generator | None = None, *,
             powers: tuple[float, float] | None = None,
             damping: float = 0.5, damping_shrink: float = 0.7,
             damping_min: float = 0.05) -> Solution:
    """Alternating OOVAMP / closed-form optimization of the sum-MSE.

    Stops when ``|E_t - E_{t-1}| < eps * E_{t-1}`` or after ``cfg.t_max``
    outer iterations. ``powers`` overrides the head-count power split.

    The message damping starts at ``damping`` and is multiplied by
    ``damping_shrink`` (down to ``damping_min``) whenever ``E_t`` rises,
    which breaks the period-two cycles the message passing can fall into.
    ``damping_shrink=1`` keeps it fixed.
    """
    if not (0 < damping <= 1 and 0 < damping_shrink <= 1 and 0 < damping_min <= damping):
        raise ValueError("damping settings must satisfy 0 < damping_min <= damping <= 1 "
                         "and 0 < damping_shrink <= 1")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    mode = ConstraintMode(mode)
    P_b, P_s = split_power(cfg.P_mw, ch.B, ch.M) if powers is None else powers
    sigma_w2 = cfg.sigma_w2
    L = S_s.shape[1]
    projector = ProjectorSpec(projector_for(mode))

    v_b = reference_vector(ch.H_bs)
    U = initial_phases(mode, rng, ch.K, L)
    state = VampState(R=U.copy(), gamma=cfg.gamma0, t=0, X_hat=U)
    alpha_s, alpha_b, F = closed_form_updates(ch, U, v_b, S_s, P_b, P_s, sigma_w2)
    E_prev = objective_f(ch, U, F, alpha_b, alpha_s, v_b, S_s, P_s, sigma_w2)
    trajectory = [E_prev]
    converged = False

    t = 0
    while t < cfg.t_max:
        t += 1
        problem = build_phase_problem(ch, F, alpha_b, alpha_s, v_b, S_s, P_s)
        state = oovamp_step(problem.terms(), projector, state, damping=damping)
        U = state.X_hat
        alpha_s, alpha_b, F = closed_form_updates(ch, U, v_b, S_s, P_b, P_s, sigma_w2)
        E_t = objective_f(ch, U, F, alpha_b, alpha_s, v_b, S_s, P_s, sigma_w2)
        if not np.isfinite(E_t):
            raise OptimizerError(f"non-finite objective at iteration {t} (gamma={state.gamma})")
        trajectory.append(E_t)
        if abs(E_t - E_prev) < cfg.eps * E_prev or E_t == E_prev:
            converged = True
            break
        if E_t > E_prev:
            damping = max(damping * damping_shrink, damping_min)
        E_prev = E_t

    return Solution(Upsilon=U, F=F, alpha_b=alpha_b, alpha_s=alpha_s, v_b=v_b,
                    mse_trajectory=trajectory, converged=converged, iterations=t)
