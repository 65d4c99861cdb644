import numpy as np
import pytest

from mis_mimo.harness import (
    Scheme, SweepSpec, TrialResult, axis_config, run_sweep, run_trial, scheme_config, trial_seed,
)
from mis_mimo.model import SimConfig

SMALL = SimConfig(N=4, K=9, M=3, B=1, L=4, t_max=40)


def test_trial_seed_is_stable_and_distinct():
    assert trial_seed(0, 0) == trial_seed(0, 0)
    seeds = {trial_seed(5, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert all(0 <= s < 2**64 for s in seeds)
    assert trial_seed(1, 0) != trial_seed(0, 1)


def test_scheme_config_partitions():
    assert scheme_config(SMALL, "mis_all").B == 0
    assert scheme_config(SMALL, Scheme.SCHEME1).B == SMALL.M
    assert scheme_config(SMALL, "hybrid") is SMALL


def test_same_seed_same_result():
    a = run_trial(SMALL, "unimodular", "hybrid", 123)
    b = run_trial(SMALL, "unimodular", "hybrid", 123)
    assert a.to_dict() == b.to_dict()
    assert len(a.mmse) == SMALL.M
    assert a.sum_rate >= 0 and 1 <= a.iterations <= SMALL.t_max


def test_kappa_one_matches_perfect_csi_path(monkeypatch):
    import mis_mimo.harness as h

    with_error = run_trial(SMALL.replace(kappa=1.0), "unimodular", "hybrid", 9)
    monkeypatch.setattr(h, "apply_csi_error", lambda ch, *a, **k: ch)
    bypassed = run_trial(SMALL.replace(kappa=1.0), "unimodular", "hybrid", 9)
    assert with_error.to_dict() == bypassed.to_dict()


def test_imperfect_csi_changes_the_optimization_input():
    a = run_trial(SMALL.replace(kappa=1.0), "unimodular", "hybrid", 9)
    b = run_trial(SMALL.replace(kappa=0.5), "unimodular", "hybrid", 9)
    assert a.mmse != b.mmse


def test_scheme1_equals_hybrid_with_all_users_on_bs():
    for seed in (1, 2, 3):
        s1 = run_trial(SMALL, "unimodular", "scheme1", seed)
        hy = run_trial(SMALL.replace(B=SMALL.M), "unimodular", "hybrid", seed)
        d1, d2 = s1.to_dict(), hy.to_dict()
        d1.pop("scheme"), d2.pop("scheme")
        assert d1 == d2


def test_errors_are_tagged_with_seed(monkeypatch):
    import mis_mimo.harness as h

    def boom(*a, **k):
        raise FloatingPointError("diverged")

    monkeypatch.setattr(h, "optimize", boom)
    with pytest.raises(FloatingPointError, match="trial seed=42: diverged"):
        run_trial(SMALL, "unimodular", "hybrid", 42)


def test_sweep_records_failures_without_aborting(monkeypatch):
    import mis_mimo.harness as h

    real = h.optimize
    bad_seed = trial_seed(SMALL.seed, 1)

    def flaky(ch, S_s, cfg, mode, rng):
        if run_seed["value"] == bad_seed:
            raise FloatingPointError("diverged")
        return real(ch, S_s, cfg, mode, rng)

    run_seed = {}
    real_trial = h.run_trial

    def tracking(cfg, mode, scheme, seed):
        run_seed["value"] = seed
        return real_trial(cfg, mode, scheme, seed)

    monkeypatch.setattr(h, "optimize", flaky)
    monkeypatch.setattr(h, "run_trial", tracking)
    res = run_sweep(SweepSpec("power", [20], 3, SMALL, schemes=["hybrid"]))
    errors = [r for r in res.trials if r.error]
    assert len(errors) == 1 and "diverged" in errors[0].error
    assert res.summary[0]["trials"] == 2 and res.summary[0]["failures"] == 1


def test_single_trial_sweep_mean_is_the_trial():
    res = run_sweep(SweepSpec("power", [15], 1, SMALL, schemes=["hybrid"]))
    (row,) = res.summary
    assert row["mean_sum_rate"] == res.trials[0].sum_rate
    assert row["stderr"] == 0.0


def test_sweep_is_independent_of_execution_order():
    spec = SweepSpec("kappa", [0.9, 1.0], 3, SMALL, schemes=["mis_all", "hybrid"])
    ref = run_sweep(spec)
    n = len(spec.values) * len(spec.schemes) * spec.trials
    perm = np.random.default_rng(0).permutation(n)
    shuffled = run_sweep(spec, order=perm)
    assert [r.to_dict() for r in ref.trials] == [r.to_dict() for r in shuffled.trials]
    assert ref.summary == shuffled.summary


def test_sweep_is_independent_of_worker_count():
    spec = SweepSpec("users", [2, 3], 2, SMALL, schemes=["mis_all", "scheme1"])
    a = run_sweep(spec, threads=1)
    b = run_sweep(spec, threads=2)
    assert [r.to_dict() for r in a.trials] == [r.to_dict() for r in b.trials]


def test_rows_are_sorted():
    res = run_sweep(SweepSpec("power", [20, 10], 3, SMALL, schemes=["scheme1", "mis_all"]))
    keys = [(r.axis_value, r.scheme, r.seed) for r in res.trials]
    assert keys == sorted(keys)
    assert [(s["axis_value"], s["scheme"]) for s in res.summary] == [
        (10, "mis_all"), (10, "scheme1"), (20, "mis_all"), (20, "scheme1")]


def test_axis_config():
    assert axis_config(SMALL, "power", 27).P_dbm == 27.0
    assert axis_config(SMALL, "users", 2).M == 2
    assert axis_config(SMALL, "users", 2).B == 1
    assert axis_config(SMALL, "mis_share", 3).B == 0
    assert axis_config(SMALL, "kappa", 0.95).kappa == 0.95


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec("power", [], 1, SMALL)
    with pytest.raises(ValueError):
        SweepSpec("power", [1], 0, SMALL)
    with pytest.raises(ValueError):
        SweepSpec("volume", [1], 1, SMALL)
    with pytest.raises(ValueError):
        SweepSpec("power", [1], 1, SMALL, schemes=["bogus"])


def test_trial_result_round_trip():
    r = TrialResult(seed=1, scheme="hybrid", B=1, R=2, mmse=[0.5, 0.25, 1.0], sum_rate=3.0)
    assert TrialResult(**r.to_dict()) == r


@pytest.mark.slow
def test_desk_power_sweep_trend():
    """All-MIS beats the all-BS baseline at 10, 20 and 30 dBm."""
    spec = SweepSpec("power", [10, 20, 30], 100, SimConfig(), schemes=["mis_all", "scheme1"])
    summary = {(s["axis_value"], s["scheme"]): s["mean_sum_rate"] for s in run_sweep(spec).summary}
    for p in (10, 20, 30):
        assert summary[(p, "mis_all")] > summary[(p, "scheme1")], (p, summary)
