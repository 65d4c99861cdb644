"""Seeded Monte-Carlo trials and parameter sweeps.

Every trial derives its randomness from ``(master_seed, trial_index)`` so
results do not depend on how trials are scheduled across workers. Within a
trial, channels, CSI error, MIS symbols and the phase initialization use
independent child streams; switching the CSI error off therefore leaves
all other draws untouched.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import multiprocessing as mp

import numpy as np

from .metrics import per_user_mmse, sum_rate
from .model import SimConfig, apply_csi_error, complex_normal, generate_channels, split_power
from .optimizer import optimize
from .projectors import ConstraintMode

log = logging.getLogger(__name__)

__all__ = ["Scheme", "SweepAxis", "SweepSpec", "TrialResult", "SweepResult", "split_power",
           "trial_seed", "scheme_config", "run_trial", "run_sweep"]


class Scheme(str, enum.Enum):
    MIS_ALL = "mis_all"
    HYBRID = "hybrid"
    SCHEME1 = "scheme1"


class SweepAxis(str, enum.Enum):
    TRANSMIT_POWER = "power"
    TOTAL_USERS = "users"
    MIS_SERVED_SHARE = "mis_share"
    CSI_KAPPA = "kappa"


@dataclass(frozen=True)
class SweepSpec:
    axis: SweepAxis
    values: tuple
    trials: int
    base: SimConfig
    schemes: tuple = (Scheme.MIS_ALL, Scheme.SCHEME1)
    mode: ConstraintMode = ConstraintMode.UNIMODULAR

    def __post_init__(self):
        object.__setattr__(self, "axis", SweepAxis(self.axis))
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "schemes", tuple(Scheme(s) for s in self.schemes))
        object.__setattr__(self, "mode", ConstraintMode(self.mode))
        if not self.values:
            raise ValueError("values must be non-empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.schemes:
            raise ValueError("schemes must be non-empty")


@dataclass
class TrialResult:
    seed: int
    scheme: str
    B: int
    R: int
    mmse: list = field(default_factory=list)
    sum_rate: float = float("nan")
    iterations: int = 0
    converged: bool = False
    axis_value: float | None = None
    trial: int = 0
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SweepResult:
    spec: SweepSpec
    trials: list
    summary: list


def trial_seed(master_seed: int, index: int) -> int:
    """64-bit sub-seed for trial ``index``, independent of execution order."""
    hi, lo = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, np.uint32)
    return (int(hi) << 32) | int(lo)


def scheme_config(cfg: SimConfig, scheme: Scheme | str) -> SimConfig:
    """User partition implied by ``scheme``; ``HYBRID`` keeps ``cfg.B``."""
    scheme = Scheme(scheme)
    if scheme is Scheme.MIS_ALL:
        return cfg.replace(B=0)
    if scheme is Scheme.SCHEME1:
        return cfg.replace(B=cfg.M)
    return cfg


def run_trial(cfg: SimConfig, mode: ConstraintMode | str = ConstraintMode.UNIMODULAR,
              scheme: Scheme | str = Scheme.HYBRID, seed: int | None = None) -> TrialResult:
    """Draw channels, optimize on the (possibly perturbed) estimate, score on the truth."""
    cfg = scheme_config(cfg, scheme)
    seed = cfg.seed if seed is None else int(seed)
    chan_ss, csi_ss, sym_ss, init_ss = np.random.SeedSequence(seed).spawn(4)

    ch, real = generate_channels(cfg, np.random.default_rng(chan_ss))
    ch_est = apply_csi_error(ch, real, cfg, cfg.kappa, np.random.default_rng(csi_ss))
    S_s = complex_normal(np.random.default_rng(sym_ss), (cfg.R, cfg.L))
    result = TrialResult(seed=seed, scheme=Scheme(scheme).value, B=cfg.B, R=cfg.R)
    try:
        sol = optimize(ch_est, S_s, cfg, mode, np.random.default_rng(init_ss))
    except (FloatingPointError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        raise type(exc)(f"trial seed={seed}: {exc}") from exc

    _, P_s = split_power(cfg.P_mw, cfg.B, cfg.M)
    mmse = per_user_mmse(ch, sol, S_s, cfg.sigma_w2, P_s)
    result.mmse = [float(x) for x in mmse]
    result.sum_rate = sum_rate(mmse)
    result.iterations = sol.iterations
    result.converged = sol.converged
    return result


def axis_config(base: SimConfig, axis: SweepAxis | str, value) -> SimConfig:
    axis = SweepAxis(axis)
    if axis is SweepAxis.TRANSMIT_POWER:
        return base.replace(P_dbm=float(value))
    if axis is SweepAxis.TOTAL_USERS:
        M = int(value)
        return base.replace(M=M, B=min(base.B, M))
    if axis is SweepAxis.MIS_SERVED_SHARE:
        return base.replace(B=base.M - int(value))
    return base.replace(kappa=float(value))


def _run_task(task):
    cfg, mode, scheme, seed, value, index = task
    try:
        res = run_trial(cfg, mode, scheme, seed)
    except Exception as exc:  # recorded per trial, never fatal to the sweep
        cfg_s = scheme_config(cfg, scheme)
        res = TrialResult(seed=seed, scheme=Scheme(scheme).value, B=cfg_s.B, R=cfg_s.R,
                          error=f"{type(exc).__name__}: {exc}")
    res.axis_value = value
    res.trial = index
    return res


def _summarize(rows: list, spec: SweepSpec) -> list:
    summary = []
    for value in sorted(spec.values):
        for scheme in sorted(s.value for s in spec.schemes):
            ok = [r.sum_rate for r in rows
                  if r.axis_value == value and r.scheme == scheme and r.error is None]
            n_all = sum(1 for r in rows if r.axis_value == value and r.scheme == scheme)
            mean = float(np.mean(ok)) if ok else float("nan")
            stderr = float(np.std(ok, ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else 0.0
            summary.append({"axis_value": value, "scheme": scheme, "mean_sum_rate": mean,
                            "stderr": stderr, "trials": len(ok), "failures": n_all - len(ok)})
    return summary


def run_sweep(spec: SweepSpec, threads: int = 1, order=None) -> SweepResult:
    """Run every (value, scheme, trial) cell and aggregate sum-rates.

    ``threads`` > 1 dispatches trials to worker processes; ``order`` is an
    optional permutation of the task list (used to check that scheduling
    does not change results).
    """
    tasks = []
    for value in spec.values:
        cfg = axis_config(spec.base, spec.axis, value)
        for scheme in spec.schemes:
            for i in range(spec.trials):
                tasks.append((cfg, spec.mode, scheme, trial_seed(spec.base.seed, i), value, i))
    if order is not None:
        tasks = [tasks[i] for i in order]

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads, mp_context=mp.get_context("spawn")) as pool:
            rows = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    else:
        rows = [_run_task(t) for t in tasks]

    rows.sort(key=lambda r: (r.axis_value, r.scheme, r.seed))
    failed = [r for r in rows if r.error is not None]
    if failed:
        log.warning("%d of %d trials failed", len(failed), len(rows))
    return SweepResult(spec=spec, trials=rows, summary=_summarize(rows, spec))
