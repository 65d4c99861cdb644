"""System configuration, parametric multipath channels and CSI perturbation.

Powers are kept in linear milliwatts throughout (``10 ** (dBm / 10)``).
Channel matrices follow the column ordering BS-served users ``0..B-1``
then MIS-served users ``B..M-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np


class ConfigError(ValueError):
    """Raised when a :class:`SimConfig` violates one of its invariants."""


def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def dbm_to_mw(x_dbm) -> float:
    return float(10.0 ** (x_dbm / 10.0))


@dataclass(frozen=True)
class SimConfig:
    """All dimensions, propagation parameters and solver settings of one run.

    Defaults reproduce the propagation table of the MIS simulation setup at
    desk scale (N=8, K=36, M=4, L=8).
    """

    N: int = 8
    K: int = 36
    M: int = 4
    B: int = 0
    L: int = 8
    P_dbm: float = 20.0
    sigma_w2_dbm: float = -100.0
    Q_mis: int = 10
    Q_bu: int = 2
    Q_su: int = 2
    d_mis: float = 500.0
    d: float = 500.0
    d_prime_range: tuple[float, float] = (10.0, 50.0)
    eta_mis: float = 2.5
    eta_bu: float = 3.7
    C0_db: float = -30.0
    d0: float = 1.0
    kappa: float = 1.0
    eps: float = 1e-4
    t_max: int = 200
    gamma0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "d_prime_range", tuple(float(v) for v in self.d_prime_range))
        self.validate()

    @property
    def R(self) -> int:
        return self.M - self.B

    @property
    def P_mw(self) -> float:
        return dbm_to_mw(self.P_dbm)

    @property
    def sigma_w2(self) -> float:
        return dbm_to_mw(self.sigma_w2_dbm)

    def validate(self) -> None:
        def need(ok, name, msg):
            if not ok:
                raise ConfigError(f"{name}: {msg}")

        for name in ("N", "K", "M", "B", "L", "Q_mis", "Q_bu", "Q_su", "t_max"):
            v = getattr(self, name)
            need(isinstance(v, (int, np.integer)) and not isinstance(v, bool),
                 name, f"must be an integer, got {v!r}")
        need(self.N >= 1, "N", "must be >= 1")
        need(self.K >= 1 and math.isqrt(self.K) ** 2 == self.K, "K", "K must be a perfect square")
        need(self.M >= 1, "M", "must be >= 1")
        need(0 <= self.B <= self.M, "B", "must satisfy 0 <= B <= M")
        # B == N is admitted so that all-BS user sweeps can reach M == N.
        need(self.B <= self.N, "B", "must satisfy B <= N")
        need(self.L >= 1, "L", "must be >= 1")
        for name in ("Q_mis", "Q_bu", "Q_su", "t_max"):
            need(getattr(self, name) >= 1, name, "must be >= 1")
        for name in ("d_mis", "d", "d0"):
            need(getattr(self, name) > 0, name, "must be > 0")
        lo, hi = self.d_prime_range
        need(len(self.d_prime_range) == 2 and 0 < lo <= hi, "d_prime_range", "must be [lo, hi] with 0 < lo <= hi")
        need(min(self.d_mis, self.d, lo) >= self.d0, "d0", "all link distances must be >= d0")
        need(0.0 <= self.kappa <= 1.0, "kappa", "must lie in [0, 1]")
        need(self.eps > 0, "eps", "must be > 0")
        need(self.gamma0 >= 0, "gamma0", "must be >= 0")
        for name in ("P_dbm", "sigma_w2_dbm", "eta_mis", "eta_bu", "C0_db", "eps", "gamma0"):
            need(math.isfinite(float(getattr(self, name))), name, "must be finite")
        need(isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2**64, "seed",
             "must be an unsigned 64-bit integer")

    def replace(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class ChannelSet:
    """``H_bs`` is K x N (BS -> MIS), ``H_bu`` is N x M, ``H_su`` is K x M."""

    H_bs: np.ndarray
    H_bu: np.ndarray
    H_su: np.ndarray
    B: int
    R: int

    @property
    def N(self) -> int:
        return self.H_bs.shape[1]

    @property
    def K(self) -> int:
        return self.H_bs.shape[0]

    @property
    def M(self) -> int:
        return self.B + self.R


@dataclass(frozen=True)
class PathRealization:
    """Per-path draws behind one :class:`ChannelSet`.

    ``gains`` maps link name (``"bs"``, ``"bu"``, ``"su"``) to its complex
    path coefficients; angles follow the same keys.
    """

    gains: dict
    bs_angles: dict
    mis_angles: dict
    d_mis: float
    d_bu: np.ndarray = field(default_factory=lambda: np.empty(0))
    d_su: np.ndarray = field(default_factory=lambda: np.empty(0))


def path_loss(dist, eta, C0_db, d0):
    """Linear power gain ``C0 * (dist / d0) ** -eta``."""
    dist = np.asarray(dist, dtype=float)
    if d0 <= 0 or np.any(dist <= 0):
        raise ValueError("path_loss requires positive distances")
    out = 10.0 ** (C0_db / 10.0) * (dist / d0) ** (-eta)
    return float(out) if out.ndim == 0 else out


def steering_bs(phi, N: int) -> np.ndarray:
    """Half-wavelength ULA response, entry n is ``exp(j*pi*n*sin(phi))``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return np.exp(1j * np.pi * np.arange(N) * np.sin(phi))


def steering_mis(phi, psi, K: int) -> np.ndarray:
    """Square UPA response; the horizontal index runs fastest."""
    n = math.isqrt(K)
    if n * n != K:
        raise ConfigError("K must be a perfect square")
    idx = np.arange(n)
    a_h = np.exp(1j * np.pi * idx * np.sin(phi) * np.cos(psi))
    a_v = np.exp(1j * np.pi * idx * np.sin(psi))
    return np.kron(a_v, a_h)


def complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    """i.i.d. CN(0, 1) samples."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def build_multipath(gains, rx_steer, tx_steer=None, loss=1.0) -> np.ndarray:
    """``sqrt(loss) * sum_q gains[q] * rx[:, q] tx[:, q]^T``.

    ``rx_steer``/``tx_steer`` hold one steering vector per column. Without
    ``tx_steer`` the result is a vector (single-antenna far end).
    """
    g = np.asarray(gains)
    if tx_steer is None:
        return np.sqrt(loss) * (rx_steer @ g)
    return np.sqrt(loss) * ((rx_steer * g) @ tx_steer.T)


def _draw_angles(rng, size):
    return rng.uniform(-np.pi / 2, np.pi / 2, size=size)


def generate_channels(cfg: SimConfig, rng: np.random.Generator) -> tuple[ChannelSet, PathRealization]:
    """Draw one realization of the BS-MIS, BS-user and MIS-user channels."""
    N, K, M = cfg.N, cfg.K, cfg.M

    # BS -> MIS
    c_bs = complex_normal(rng, cfg.Q_mis)
    phi_bs = _draw_angles(rng, cfg.Q_mis)
    mis_bs = _draw_angles(rng, (cfg.Q_mis, 2))
    A_mis = np.stack([steering_mis(p, s, K) for p, s in mis_bs], axis=1)
    A_bs = np.stack([steering_bs(p, N) for p in phi_bs], axis=1)
    H_bs = build_multipath(c_bs, A_mis, A_bs, path_loss(cfg.d_mis, cfg.eta_mis, cfg.C0_db, cfg.d0))

    d_bu = np.full(M, cfg.d)
    d_su = rng.uniform(cfg.d_prime_range[0], cfg.d_prime_range[1], size=M)

    # BS -> users
    c_bu = complex_normal(rng, (M, cfg.Q_bu))
    phi_bu = _draw_angles(rng, (M, cfg.Q_bu))
    H_bu = np.empty((N, M), dtype=complex)
    for m in range(M):
        A = np.stack([steering_bs(p, N) for p in phi_bu[m]], axis=1)
        H_bu[:, m] = build_multipath(c_bu[m], A, loss=path_loss(d_bu[m], cfg.eta_bu, cfg.C0_db, cfg.d0))

    # MIS -> users
    c_su = complex_normal(rng, (M, cfg.Q_su))
    ang_su = _draw_angles(rng, (M, cfg.Q_su, 2))
    H_su = np.empty((K, M), dtype=complex)
    for m in range(M):
        A = np.stack([steering_mis(p, s, K) for p, s in ang_su[m]], axis=1)
        H_su[:, m] = build_multipath(c_su[m], A, loss=path_loss(d_su[m], cfg.eta_mis, cfg.C0_db, cfg.d0))

    ch = ChannelSet(H_bs=H_bs, H_bu=H_bu, H_su=H_su, B=cfg.B, R=cfg.R)
    real = PathRealization(
        gains={"bs": c_bs, "bu": c_bu, "su": c_su},
        bs_angles={"bs": phi_bs, "bu": phi_bu},
        mis_angles={"bs": mis_bs, "su": ang_su},
        d_mis=cfg.d_mis,
        d_bu=d_bu,
        d_su=d_su,
    )
    return ch, real


def apply_csi_error(ch: ChannelSet, real: PathRealization, cfg: SimConfig, kappa: float,
                    rng: np.random.Generator) -> ChannelSet:
    """Statistical estimation-error model ``kappa*H + sqrt((1-kappa^2) L) * Delta``.

    ``Delta`` has i.i.d. CN(0, 1) entries. ``kappa == 1`` returns ``ch``
    unchanged and consumes no randomness.
    """
    if not 0.0 <= kappa <= 1.0:
        raise ValueError("kappa must lie in [0, 1]")
    if kappa == 1.0:
        return ch
    s = 1.0 - kappa**2
    l_bs = path_loss(real.d_mis, cfg.eta_mis, cfg.C0_db, cfg.d0)
    l_bu = path_loss(real.d_bu, cfg.eta_bu, cfg.C0_db, cfg.d0)
    l_su = path_loss(real.d_su, cfg.eta_mis, cfg.C0_db, cfg.d0)
    H_bs = kappa * ch.H_bs + np.sqrt(s * l_bs) * complex_normal(rng, ch.H_bs.shape)
    H_bu = kappa * ch.H_bu + np.sqrt(s * l_bu)[None, :] * complex_normal(rng, ch.H_bu.shape)
    H_su = kappa * ch.H_su + np.sqrt(s * l_su)[None, :] * complex_normal(rng, ch.H_su.shape)
    return ChannelSet(H_bs=H_bs, H_bu=H_bu, H_su=H_su, B=ch.B, R=ch.R)


def split_power(P, B: int, M: int) -> tuple[float, float]:
    """Share ``P`` between BS-served and MIS-served users by head count."""
    if M < 1 or not 0 <= B <= M:
        raise ValueError("split_power requires M >= 1 and 0 <= B <= M")
    # P * M / M can round above P; keep P_s nonnegative
    P_b = min(P * B / M, P)
    return P_b, P - P_b
