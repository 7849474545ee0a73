"""Tests for I∞ samplers and the entrance law."""

import math

import numpy as np
import pytest
from scipy import stats

from pssclock.errors import NoSamplerError, ResamplingError
from pssclock.expfunc import (
    BETA_PRIME,
    BETA_RECIPROCAL,
    BETA_SCALED,
    GAMMA_RECIPROCAL,
    MC_TRUNCATED,
    POSITIVE_STABLE,
    i_inf_sampler,
    iinf_check,
    mc_truncated_law,
    positive_stable,
    sample_entrance_x1,
    sample_i_inf,
    size_biased_resample,
)
from pssclock.levy import CBI, BrownianDrift, ConditionedStable, CpNegDrift, CpPosDrift, HypergeometricStable, SawTooth

saw = SawTooth(a=1, b=2)

# families with a closed-form law, and finite 𝔼[I∞⁻²]
CLOSED = [
    (BrownianDrift(nu=1), 1.0),
    (BrownianDrift(nu=1), 2.0),
    (CpPosDrift(d=1, a=2, b=3), 1.0),
    (CpNegDrift(a=3, b=2), 1.0),
    (SawTooth(a=1, b=2), 1.0),
    (SawTooth(a=1, b=2), 2.0),
    (ConditionedStable(alpha_s=1.5), 1.5),
]


def test_law_kinds():
    assert i_inf_sampler(BrownianDrift(nu=1), 1.0).kind == GAMMA_RECIPROCAL
    assert i_inf_sampler(CpPosDrift(d=1, a=2, b=3), 1.0).kind == BETA_SCALED
    assert i_inf_sampler(CpNegDrift(a=3, b=1), 1.0).kind == BETA_PRIME
    assert i_inf_sampler(saw, 1.0).kind == BETA_RECIPROCAL
    assert i_inf_sampler(ConditionedStable(alpha_s=1.5), 1.5).kind == POSITIVE_STABLE
    assert i_inf_sampler(CpPosDrift(d=0, a=2, b=3), 1.0).kind == MC_TRUNCATED


def test_bessel_parameters_at_unit_index():
    # I∞ = 1/(2·Gamma(ν))
    assert i_inf_sampler(BrownianDrift(nu=1), 1.0).params == (1.0, 2.0)


def test_no_sampler():
    with pytest.raises(NoSamplerError):
        i_inf_sampler(HypergeometricStable(alpha_h=1, dim=3), 1.0)
    with pytest.raises(NoSamplerError):
        i_inf_sampler(CBI(kappa=0.5, delta=0.9), 0.5)
    with pytest.raises(NoSamplerError):
        i_inf_sampler(ConditionedStable(alpha_s=1.5), 1.0)


def test_scalar_and_array_draws():
    rng = np.random.default_rng(0)
    law = i_inf_sampler(saw, 1.0)
    assert isinstance(sample_i_inf(law, rng), float)
    assert law.sample(rng, 5).shape == (5,)


@pytest.mark.parametrize("family,alpha", CLOSED)
def test_normalization(family, alpha):
    rng = np.random.default_rng(17)
    check = iinf_check(family, alpha, 20000, rng)
    assert abs(check.mean_inv_iinf - check.alpha_p) <= 4 * check.se


def test_saw_mean_inverse():
    rng = np.random.default_rng(1)
    inv = 1.0 / i_inf_sampler(saw, 1.0).sample(rng, 20000)
    assert abs(inv.mean() - 0.5) <= 4 * inv.std(ddof=1) / math.sqrt(len(inv))


def test_positive_stable_laplace_transform():
    # 𝔼 e^{−S} = e^{−1}
    rng = np.random.default_rng(9)
    s = positive_stable(2.0 / 3.0, rng, 40000)
    values = np.exp(-s)
    assert abs(values.mean() - math.exp(-1.0)) <= 4 * values.std(ddof=1) / math.sqrt(len(s))


def test_truncated_normalization():
    rng = np.random.default_rng(31)
    family = CpPosDrift(d=0, a=2, b=3)
    inv = 1.0 / mc_truncated_law(family, 1.0).sample(rng, 400)
    assert abs(inv.mean() - 2.0 / 3.0) <= 4 * inv.std(ddof=1) / math.sqrt(len(inv))


def test_closed_form_matches_truncated_integrals():
    rng = np.random.default_rng(12)
    closed = i_inf_sampler(saw, 1.0).sample(rng, 300)
    mc = mc_truncated_law(saw, 1.0).sample(rng, 300)
    assert stats.ks_2samp(closed, mc).pvalue > 0.01


def test_entrance_law_bessel():
    # X₁ ~ 2·Gamma(ν+1)
    rng = np.random.default_rng(2)
    x = sample_entrance_x1(BrownianDrift(nu=1), 1.0, rng, 20000)
    assert abs(x.mean() - 4.0) <= 4 * math.sqrt(8.0 / 20000)


def test_entrance_law_saw_and_negative_jumps():
    rng = np.random.default_rng(6)
    x = sample_entrance_x1(saw, 1.0, rng, 5000)
    assert stats.kstest(x, stats.beta(2, 1).cdf).pvalue > 0.01
    y = sample_entrance_x1(CpNegDrift(a=3, b=1), 1.0, rng, 5000)
    assert stats.kstest(y, stats.betaprime(3, 1).cdf).pvalue > 0.01


def test_size_bias_consistency():
    # 𝔼 g(X₁) = (αp)⁻¹ 𝔼[I⁻¹ g(I^{−1/α})] with g(x) = 1/(1+x)
    rng = np.random.default_rng(44)
    law = i_inf_sampler(saw, 1.0)
    n = 20000
    left = 1.0 / (1.0 + sample_entrance_x1(saw, 1.0, rng, n, law=law))
    i = law.sample(rng, n)
    right = (1.0 / i) / (1.0 + 1.0 / i) / law.alpha_p
    se = math.sqrt(left.var(ddof=1) / n + right.var(ddof=1) / n)
    assert abs(left.mean() - right.mean()) <= 4 * se


def test_resampled_entrance_law_conditioned_stable():
    # 𝔼[X₁^α] = M(2)/(αp) = Γ(4)/(Γ(3)Γ(5/2))
    rng = np.random.default_rng(15)
    x = sample_entrance_x1(ConditionedStable(alpha_s=1.5), 1.5, rng, 4000)
    target = math.gamma(4.0) / (math.gamma(3.0) * math.gamma(2.5))
    moment = x ** 1.5
    assert abs(moment.mean() - target) <= 6 * moment.std(ddof=1) / math.sqrt(len(x))


def test_resampling_refuses_degenerate_weights():
    rng = np.random.default_rng(0)
    with pytest.raises(ResamplingError):
        size_biased_resample(i_inf_sampler(saw, 1.0), rng, 10, ess_floor=1.0)


@pytest.mark.slow
@pytest.mark.parametrize("family,alpha", CLOSED)
def test_normalization_acceptance(family, alpha):
    check = iinf_check(family, alpha, 100_000, np.random.default_rng(20240101))
    assert abs(check.mean_inv_iinf - check.alpha_p) <= 3 * check.se


@pytest.mark.slow
@pytest.mark.parametrize("family", [BrownianDrift(nu=1), CpPosDrift(d=1, a=2, b=3), CpNegDrift(a=3, b=1), saw])
def test_closed_vs_truncated_acceptance(family):
    check = iinf_check(family, 1.0, 1000, np.random.default_rng(7), n_ks=10_000)
    assert check.ks_p_closed_vs_mc > 0.01
