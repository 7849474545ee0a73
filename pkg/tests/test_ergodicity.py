"""Tests for the drift-criterion classifier and the generator of U."""

import numpy as np
import pytest

from pssclock.checkers.ergodicity import (
    CRITERION_FAILS,
    EXP_ERGODIC_2A,
    EXP_ERGODIC_2B,
    ErgodicityChecker,
    cbi_log_moment,
    generator_U_apply,
    lyapunov_constants,
    poisson_residual,
    quenched_criterion,
    stationarity_identity,
    stationarity_residual,
)
from pssclock.checkers.mellin import closed_form_mellin
from pssclock.errors import DomainError, InvalidParameterError, PreconditionError, VerificationError
from pssclock.levy import CBI, BrownianDrift, CpNegDrift, CpPosDrift, HypergeometricStable, SawTooth, psi_eval

bessel = BrownianDrift(nu=1)
saw = SawTooth(a=1, b=2)
checker = ErgodicityChecker()


def test_brownian_is_2b():
    v = checker.classify(bessel, 1.0)
    assert v.classification == EXP_ERGODIC_2B
    assert v.witness_m == 2.0
    assert v.verified is True
    assert v.ergodic


def test_lyapunov_constants_brownian():
    c = lyapunov_constants(bessel, 1.0, 2.0, 1.0)
    assert c.x_max == pytest.approx(6.0)
    assert c.x0 == pytest.approx(12.0)
    assert c.K == pytest.approx(12.0)
    assert c.D == pytest.approx(36.0)


def test_hypergeometric_is_2a():
    family = HypergeometricStable(alpha_h=2.5, dim=4)
    v = checker.classify(family, 2.5)
    assert v.classification == EXP_ERGODIC_2A
    assert v.witness_m == pytest.approx(2.25, abs=1e-5)
    assert psi_eval(family, v.witness_m) < 0
    assert v.constants.K == 1.0
    assert v.constants.D == 0.0
    assert v.verified


@pytest.mark.parametrize("family,alpha", [
    (CpPosDrift(d=1, a=1, b=0.5), 1.0),
    (CBI(kappa=0.5, delta=0.9), 0.5),
    (CpNegDrift(a=3, b=1), 1.0),
])
def test_criterion_fails(family, alpha):
    v = quenched_criterion(family, alpha)
    assert v.classification == CRITERION_FAILS
    assert v.witness_m is None
    assert not v.ergodic


@pytest.mark.parametrize("family", [saw, CpPosDrift(d=1, a=2, b=3)])
def test_witness_is_sound(family):
    v = quenched_criterion(family, 1.0)
    assert v.classification == EXP_ERGODIC_2B
    assert v.witness_m > 1.0
    assert psi_eval(family, v.witness_m) > 0


def test_witness_at_index_rejected():
    with pytest.raises(PreconditionError):
        lyapunov_constants(bessel, 1.0, 1.0, 0.5)


def test_C_out_of_range():
    with pytest.raises(PreconditionError):
        lyapunov_constants(bessel, 1.0, 2.0, 2.0)


def test_sweep_catches_bad_constants():
    # at α = 2 the closed-form D is negative and h_m > D near 0
    with pytest.raises(VerificationError):
        lyapunov_constants(bessel, 2.0, 3.0, 1.0)
    v = quenched_criterion(bessel, 2.0)
    assert v.classification == EXP_ERGODIC_2B
    assert v.verified is False


def test_generator_on_log():
    assert generator_U_apply(bessel, 1.0, "log", 1.0) == pytest.approx(1.0)


def test_generator_on_constant():
    x = np.linspace(0.1, 10.0, 50)
    np.testing.assert_array_equal(generator_U_apply(bessel, 1.0, "f_m", x, 0.0), 0.0)


def test_generator_rejects_bad_input():
    with pytest.raises(DomainError):
        generator_U_apply(bessel, 1.0, "log", 0.0)
    with pytest.raises(PreconditionError):
        generator_U_apply(bessel, 1.0, "f_m", 1.0)
    with pytest.raises(PreconditionError):
        generator_U_apply(bessel, 1.0, "sqrt", 1.0)


@pytest.mark.parametrize("family", [bessel, saw])
def test_poisson_pair(family):
    x = np.random.default_rng(0).uniform(0.1, 10.0, 100)
    assert np.max(np.abs(poisson_residual(family, 1.0, x))) < 1e-12


@pytest.mark.parametrize("family,alpha,m", [
    (bessel, 1.0, 0.5),
    (bessel, 2.0, 1.0),
    (saw, 1.0, 0.5),
    (saw, 2.0, 1.5),
])
def test_stationarity_identity(family, alpha, m):
    assert stationarity_identity(family, alpha, m) == pytest.approx(0.0, abs=1e-10)


def test_stationarity_uses_m_over_alpha():
    # with the coefficient αm in place of m/α the identity breaks for α ≠ 1
    alpha, m = 2.0, 1.0
    M = closed_form_mellin(bessel, alpha)
    wrong = psi_eval(bessel, m) * M(m / alpha) - alpha * m * M(1.0 + m / alpha)
    assert abs(wrong) > 1.0


@pytest.mark.parametrize("family", [bessel, saw])
def test_stationarity_monte_carlo(family):
    mean, se = stationarity_residual(family, 1.0, 0.5, np.random.default_rng(77), 20000)
    assert abs(mean) <= 4 * se


def test_cbi_log_moment():
    assert cbi_log_moment(0.5) == pytest.approx(0.376126, abs=1e-5)
    for kappa in (0.1, 0.3, 0.7, 0.9):
        assert cbi_log_moment(kappa) > 0
    with pytest.raises(InvalidParameterError):
        cbi_log_moment(1.0)
