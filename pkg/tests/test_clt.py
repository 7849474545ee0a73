"""Tests for the LLN/CLT/FCLT harness."""

import math

import numpy as np
import pytest
from scipy import stats

from pssclock import expfunc, paths
from pssclock.checkers.clt import (
    Q0,
    ExperimentConfig,
    _jackknife_cov_se,
    clock_at_levels,
    clock_ratios,
    clt_test,
    fclt_covariance_test,
    lln_check,
    replica_rng,
    run_experiment,
    run_replica,
    shared_entrance_starts,
)
from pssclock.errors import NoSamplerError, PreconditionError
from pssclock.levy import BrownianDrift, CpNegDrift, CpPosDrift, HypergeometricStable, SawTooth
from pssclock.paths import BrownianSampler, CompoundPoissonSampler

saw = SawTooth(a=1, b=2)


def _drift(seed=0):
    # ξ_t = t exactly; the clock is log(1 + T)
    return CompoundPoissonSampler(drift=1.0, rate=0.0, jump_rate=1.0, sign=1, rng=np.random.default_rng(seed))


def test_replica_streams():
    a = replica_rng(7, 3).normal(size=4)
    b = replica_rng(7, 3).normal(size=4)
    c = replica_rng(7, 4).normal(size=4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("kwargs", [
    {"log_t": 0.0},
    {"replicas": 1},
    {"t_grid": (1.0, 0.5)},
    {"t_grid": ()},
    {"a": -1.0},
    {"workers": 0},
])
def test_config_validation(kwargs):
    base = {"family": saw, "alpha": 1.0, "log_t": 10.0, "replicas": 10, "seed": 1}
    with pytest.raises(PreconditionError):
        ExperimentConfig(**{**base, **kwargs})


def test_config_needs_path_simulator():
    with pytest.raises(NoSamplerError):
        ExperimentConfig(HypergeometricStable(alpha_h=1, dim=3), 1.0, 10.0, 10, 1)


def test_config_moments():
    cfg = ExperimentConfig(saw, 1.0, 10.0, 10, 1)
    assert cfg.alpha_p == pytest.approx(0.5)
    assert cfg.v2 == pytest.approx(4.0)


def test_rescaled_clock_starts_at_zero():
    cfg = ExperimentConfig(saw, 1.0, 20.0, 4, 3, regime=Q0, t_grid=(0.0, 0.5, 1.0))
    assert run_replica(cfg, 0).values[0] == 0.0


def test_replica_is_deterministic():
    cfg = ExperimentConfig(saw, 1.0, 20.0, 4, 3)
    np.testing.assert_array_equal(run_replica(cfg, 2).values, run_replica(cfg, 2).values)


def test_workers_do_not_change_results():
    cfg = ExperimentConfig(saw, 1.0, 20.0, 8, 11)
    serial = run_experiment(cfg)
    parallel = run_experiment(ExperimentConfig(saw, 1.0, 20.0, 8, 11, workers=2))
    assert serial.shape == (8, 6)
    np.testing.assert_array_equal(serial, parallel)


def test_entrance_regime_runs():
    w = run_experiment(ExperimentConfig(saw, 1.0, 30.0, 20, 5, regime=Q0, t_grid=(0.0, 1.0)))
    assert np.all(np.isfinite(w))
    assert np.all(w[:, 0] == 0.0)


def test_capped_first_chunk_still_reaches_the_level(monkeypatch):
    monkeypatch.setattr(paths, "MAX_CHUNK_SEGMENTS", 1000)
    sampler = BrownianSampler.for_family(BrownianDrift(nu=1), np.random.default_rng(6), dt=0.01)
    assert sampler.sample_for_level(2.0, 100.0).n_segments == 1000
    tau = clock_at_levels(sampler, 1.0, 2.0, [100.0])[0]
    # τ ≈ L/(αp) = 50 with standard deviation √(v²L) ≈ 7
    assert abs(tau - 50.0) < 5 * math.sqrt(50.0)


def test_entrance_pool_is_shared_across_replicas(monkeypatch):
    calls = []
    resample = expfunc.size_biased_resample

    def counting(law, rng, size, *args, **kwargs):
        calls.append(size)
        return resample(law, rng, size, *args, **kwargs)

    monkeypatch.setattr(expfunc, "size_biased_resample", counting)
    cfg = ExperimentConfig(CpPosDrift(d=0, a=1, b=2), 1.0, 20.0, 6, 5, regime=Q0, t_grid=(0.5, 1.0))
    first = run_experiment(cfg)
    assert calls == [6]
    assert np.all(np.isfinite(first))
    np.testing.assert_array_equal(first, run_experiment(cfg))


def test_closed_entrance_law_needs_no_pool():
    cfg = ExperimentConfig(saw, 1.0, 20.0, 4, 5, regime=Q0)
    assert shared_entrance_starts(cfg) is None
    assert shared_entrance_starts(ExperimentConfig(saw, 1.0, 20.0, 4, 5)) is None


def test_pure_drift_clock():
    L = np.array([10.0, 50.0, 200.0])
    ratios = clock_ratios(_drift(), 1.0, 1.0, 1.0, L)
    np.testing.assert_allclose(ratios, np.logaddexp(0.0, L) / L, rtol=1e-10)


def test_pure_drift_has_no_fluctuation():
    L = 400.0
    tau = clock_at_levels(_drift(), 1.0, 1.0, L * np.array([0.5, 1.0, 2.0]))
    w = (tau - L * np.array([0.5, 1.0, 2.0])) / math.sqrt(L)
    assert np.max(np.abs(w)) < 1e-8


def test_lln_saw():
    report = lln_check(saw, 1.0, 1.0, [50.0, 200.0, 1000.0], seed=3)
    assert report.target == pytest.approx(2.0)
    assert report.bound == pytest.approx(5 * math.sqrt(4.0 / 1000.0))
    assert report.passed


def test_lln_rejects_bad_levels():
    with pytest.raises(PreconditionError):
        lln_check(saw, 1.0, 1.0, [0.0, 10.0], seed=1)


def test_clt_on_gaussian_samples():
    w = np.random.default_rng(1).normal(size=2000)
    report = clt_test(w, 1.0)
    assert report.passed
    assert report.rows()[0]["target"] == 1.0


def test_clt_rejects_shifted_samples():
    w = np.random.default_rng(1).normal(1.0, 1.0, size=2000)
    report = clt_test(w, 1.0)
    assert not report.verdicts["ks"]
    assert not report.passed


def test_clt_rejects_wrong_variance():
    w = np.random.default_rng(2).normal(0.0, 2.0, size=2000)
    assert not clt_test(w, 1.0).verdicts["variance"]


def test_clt_needs_samples():
    with pytest.raises(PreconditionError):
        clt_test(np.zeros(50), 1.0)


def test_jackknife_variance_se():
    x = np.random.default_rng(4).normal(size=4000)
    # SE of the sample variance of N(0,1) is about √(2/n)
    assert _jackknife_cov_se(x, x) == pytest.approx(math.sqrt(2.0 / 4000), rel=0.2)


def _brownian_paths(n, grid, v2, seed):
    rng = np.random.default_rng(seed)
    steps = np.diff(np.concatenate(([0.0], grid)))
    return np.cumsum(rng.normal(size=(n, len(grid))) * np.sqrt(v2 * steps), axis=1)


def test_fclt_on_brownian_paths():
    grid = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0)
    report = fclt_covariance_test(_brownian_paths(2000, grid, 1.0, 9), grid, 1.0)
    assert report.cov.shape == (6, 6)
    assert set(report.verdicts) == {"variance", "covariance", "increment_ks"}
    assert report.passed
    assert len(report.rows()) == 6


def test_fclt_detects_wrong_scale():
    grid = (0.25, 0.5, 1.0, 2.0)
    report = fclt_covariance_test(_brownian_paths(2000, grid, 2.0, 9), grid, 1.0)
    assert not report.verdicts["covariance"]
    assert not report.passed


def test_fclt_bias_allowance_is_opt_in():
    grid = (0.25, 0.5, 1.0, 1.5, 2.0)
    # true v² = 1 against a claimed 0.8: outside 4 SE at t = 2, inside once 3·0.8/√16 is added
    w = _brownian_paths(2000, grid, 1.0, 12)
    strict = fclt_covariance_test(w, grid, 0.8, log_t=16.0)
    assert not (strict.verdicts["variance"] and strict.verdicts["covariance"])
    loose = fclt_covariance_test(w, grid, 0.8, log_t=16.0, bias_allowance=True)
    assert loose.verdicts["variance"]
    assert loose.verdicts["covariance"]


def test_fclt_shape_checks():
    with pytest.raises(PreconditionError):
        fclt_covariance_test(np.zeros((100, 2)), (1.0, 2.0), 1.0)
    with pytest.raises(PreconditionError):
        fclt_covariance_test(np.zeros((1000, 3)), (1.0, 2.0), 1.0)


def test_small_clt_experiment_variance():
    cfg = ExperimentConfig(saw, 1.0, 50.0, 400, 20240101, t_grid=(1.0,))
    report = clt_test(run_experiment(cfg)[:, 0], cfg.v2, log_t=cfg.log_t)
    assert report.verdicts["variance"]


@pytest.mark.slow
@pytest.mark.parametrize("family,v2", [(BrownianDrift(nu=1), 0.5), (saw, 4.0), (CpNegDrift(a=3, b=1), 0.75)])
def test_clt_acceptance(family, v2):
    cfg = ExperimentConfig(family, 1.0, 400.0, 4000, 20240101, t_grid=(1.0,), workers=4)
    report = clt_test(run_experiment(cfg)[:, 0], v2, log_t=cfg.log_t)
    assert report.passed


@pytest.mark.slow
@pytest.mark.parametrize("family", [BrownianDrift(nu=1), saw])
def test_fclt_acceptance(family):
    cfg = ExperimentConfig(family, 1.0, 400.0, 4000, 20240101, workers=4)
    report = fclt_covariance_test(run_experiment(cfg), cfg.t_grid, cfg.v2, log_t=cfg.log_t)
    assert report.cov.shape == (6, 6)
    assert report.passed


@pytest.mark.slow
def test_entrance_regime_acceptance():
    bessel = BrownianDrift(nu=1)
    base = {"family": bessel, "alpha": 1.0, "log_t": 400.0, "replicas": 4000, "t_grid": (1.0,), "workers": 4}
    from_zero = run_experiment(ExperimentConfig(seed=20240101, regime=Q0, **base))[:, 0]
    from_e = run_experiment(ExperimentConfig(seed=20240102, a=math.e, **base))[:, 0]
    assert clt_test(from_zero, 0.5, log_t=400.0).passed
    assert stats.ks_2samp(from_zero, from_e).pvalue > 0.01


@pytest.mark.slow
@pytest.mark.parametrize("family", [BrownianDrift(nu=1), saw])
def test_lln_acceptance(family):
    assert lln_check(family, 1.0, 1.0, [100.0, 1000.0, 10000.0], seed=20240101).passed


@pytest.mark.slow
def test_start_point_and_regime_do_not_matter():
    base = {"family": saw, "alpha": 1.0, "log_t": 400.0, "replicas": 2000, "t_grid": (1.0,), "workers": 4}
    from_one = run_experiment(ExperimentConfig(seed=1, a=1.0, **base))[:, 0]
    from_other = run_experiment(ExperimentConfig(seed=2, a=2.0, **base))[:, 0]
    from_zero = run_experiment(ExperimentConfig(seed=3, regime=Q0, **base))[:, 0]
    assert stats.ks_2samp(from_one, from_other).pvalue > 0.01
    assert stats.ks_2samp(from_one, from_zero).pvalue > 0.01
