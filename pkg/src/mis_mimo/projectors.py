"""Entry-wise MAP projectors for the MIS reflection coefficients.

Each projector maps an extrinsic mean ``r`` (scalar or array) to the
nearest feasible reflection coefficient and returns the Wirtinger
derivative magnitude used by the message-passing precision update.
All functions are vectorized over numpy arrays.
"""

from __future__ import annotations

import enum

import numpy as np

D_CAP = 1e8
EPS_IM = 1e-9
CHI_MAX = 1e6


class ConstraintMode(str, enum.Enum):
    UNIMODULAR = "unimodular"
    REACTIVE = "reactive"


def project_unimodular(r, gamma=None):
    """Nearest unit-modulus point ``r/|r|`` and derivative ``1/(2|r|)``.

    ``r == 0`` (or subnormal) is mapped to ``1`` with derivative ``D_CAP``.
    """
    r = np.asarray(r, dtype=complex)
    mag = np.abs(r)
    zero = mag < np.finfo(float).tiny
    safe = np.where(zero, 1.0, mag)
    v = np.where(zero, 1.0 + 0j, r / safe)
    d = np.where(zero, D_CAP, np.minimum(0.5 / safe, D_CAP))
    return _unwrap(v), _unwrap(d)


def optimal_reactance(r):
    """Reactance ``chi`` minimizing ``|r + 1/(1 + j chi)|``."""
    r = np.asarray(r, dtype=complex)
    a = 1.0 + 2.0 * r.real
    y = r.imag
    s = np.hypot(a, 2.0 * y)
    small = np.abs(y) < EPS_IM
    y_safe = np.where(small, 1.0, y)
    # Two algebraically equal forms; pick the one free of cancellation.
    with np.errstate(divide="ignore", invalid="ignore"):
        chi_pos = (a + s) / (2.0 * y_safe)
        chi_neg = 2.0 * y / (s - a)
    chi = np.where(a >= 0, chi_pos, chi_neg)
    limit = np.where(a <= 0, 0.0, np.where(y < 0, -CHI_MAX, CHI_MAX))
    chi = np.where(small & (a >= 0), limit, chi)
    chi = np.clip(chi, -CHI_MAX, CHI_MAX)
    return _unwrap(chi)


def reactance_wirtinger(r):
    """``d chi / d r`` in the Wirtinger sense, ``(d/dRe - j d/dIm) / 2``."""
    r = np.asarray(r, dtype=complex)
    a = 1.0 + 2.0 * r.real
    y = r.imag
    s = np.hypot(a, 2.0 * y)
    small = np.abs(y) < EPS_IM
    y_safe = np.where(small, 1.0, y)
    s_safe = np.where(s == 0, 1.0, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        # a >= 0: direct differentiation of (a + s) / (2y)
        dx_pos = (1.0 + a / s_safe) / y_safe
        dy_pos = -a * (a + s) / (2.0 * s_safe * y_safe**2)
        # a < 0: same derivatives of 2y / (s - a), smooth across y = 0
        den = s_safe * (s - a)
        dx_neg = 4.0 * y / den
        dy_neg = -2.0 * a / den
    neg = a < 0
    dchi_dx = np.where(neg, dx_neg, dx_pos)
    dchi_dy = np.where(neg, dy_neg, dy_pos)
    out = 0.5 * (dchi_dx - 1j * dchi_dy)
    degenerate = (~neg & small) | (s == 0)
    return _unwrap(np.where(degenerate, 0.0 + 0j, out))


def project_reactive(r, gamma=None):
    """Nearest point on the reactive-load locus ``-1/(1 + j chi)``.

    The locus is the circle ``|v + 1/2| = 1/2``. The derivative is
    ``|j chi'(r) (1 + j chi)^-2|`` clamped to ``[0, D_CAP]``.
    """
    r = np.asarray(r, dtype=complex)
    chi = np.asarray(optimal_reactance(r))
    z = 1.0 + 1j * chi
    v = -1.0 / z
    d = np.abs(1j * reactance_wirtinger(r) / z**2)
    d = np.where(np.isfinite(d), np.clip(d, 0.0, D_CAP), D_CAP)
    return _unwrap(v), _unwrap(d)


def projector_for(mode: ConstraintMode | str):
    mode = ConstraintMode(mode)
    return project_unimodular if mode is ConstraintMode.UNIMODULAR else project_reactive


def random_feasible(mode: ConstraintMode | str, rng: np.random.Generator, size) -> np.ndarray:
    """Random point of the feasible set: uniform phase, or ``chi ~ U[-10, 10]``."""
    mode = ConstraintMode(mode)
    if mode is ConstraintMode.UNIMODULAR:
        return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=size))
    chi = rng.uniform(-10.0, 10.0, size=size)
    return -1.0 / (1.0 + 1j * chi)


def is_feasible(mode: ConstraintMode | str, v, tol=1e-10) -> bool:
    v = np.asarray(v)
    if ConstraintMode(mode) is ConstraintMode.UNIMODULAR:
        return bool(np.all(np.abs(np.abs(v) - 1.0) <= tol))
    return bool(np.all(np.abs(np.abs(v + 0.5) - 0.5) <= tol))


def _unwrap(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x
