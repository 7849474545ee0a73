"""Generator of the OU process U, the drift-criterion classifier and its Lyapunov constants.

The classifier looks for m with f_m(x) = x^m in the domain of the generator
(m ∈ dom ψ) and either ψ(m) < 0 with m > 0, or ψ(m) > 0 with m > α.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy import special as sc

from pssclock.checkers.mellin import closed_form_mellin
from pssclock.errors import (
    DomainError,
    InconsistencyError,
    InvalidParameterError,
    PreconditionError,
    VerificationError,
)
from pssclock.expfunc import sample_entrance_x1
from pssclock.levy import LevyFamily, cumulants, psi_eval

logger = logging.getLogger(__name__)

EXP_ERGODIC_2A = "exp_ergodic_via_2a"
EXP_ERGODIC_2B = "exp_ergodic_via_2b"
CRITERION_FAILS = "criterion_fails"

GRID_POINTS = 512
WITNESS_DIGITS = 6
# search cap for dom ψ unbounded above, in units of α
SEARCH_CAP = 3.0
SWEEP = np.logspace(-3.0, 3.0, 2001)
LOG_MOMENT_RTOL = 1e-8


def generator_U_apply(family: LevyFamily, alpha: float, h: str, x, m: float | None = None):
    """L^U h(x) for h = f_m (x ↦ x^m) or h = log."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"x must be > 0, got {x!r}")
    if h == "log":
        out = cumulants(family, alpha).p * arr ** -alpha - 1.0 / alpha
    elif h == "f_m":
        if m is None:
            raise PreconditionError("f_m needs an exponent m")
        out = psi_eval(family, m) * arr ** (m - alpha) - (m / alpha) * arr ** m
    else:
        raise PreconditionError(f"unknown test function {h!r} (expected 'f_m' or 'log')")
    return float(out) if out.ndim == 0 else out


def poisson_pair(family: LevyFamily, alpha: float) -> tuple[Callable, Callable]:
    """(f, g) with L^U g = f: f(x) = x^{−α} − (αp)⁻¹, g(x) = p⁻¹ log x."""
    p = cumulants(family, alpha).p

    def f(x):
        return np.asarray(x, dtype=float) ** -alpha - 1.0 / (alpha * p)

    def g(x):
        return np.log(x) / p

    return f, g


def poisson_residual(family: LevyFamily, alpha: float, x) -> np.ndarray:
    """L^U g(x) − f(x) for the Poisson pair."""
    f, _ = poisson_pair(family, alpha)
    p = cumulants(family, alpha).p
    return np.asarray(generator_U_apply(family, alpha, "log", x)) / p - f(x)


def stationarity_identity(family: LevyFamily, alpha: float, m: float) -> float:
    """μ^U(L^U f_m) from the closed-form Mellin transform; 0 when the generator is right."""
    M = closed_form_mellin(family, alpha)
    ap = alpha * cumulants(family, alpha).p
    z = m / alpha
    return (psi_eval(family, m) * M(z) - z * M(1.0 + z)) / ap


def stationarity_residual(family: LevyFamily, alpha: float, m: float, rng: np.random.Generator,
                          n: int) -> tuple[float, float]:
    """MC mean of L^U f_m under the invariant law, with its standard error."""
    x = np.asarray(sample_entrance_x1(family, alpha, rng, n))
    values = generator_U_apply(family, alpha, "f_m", x, m)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(n))


@dataclass(frozen=True)
class LyapunovConstants:
    """Constants of the drift condition Lf ≤ −Cf + D·1_{[0,K]}."""
    m: float
    C: float
    K: float
    D: float
    x_max: float | None = None
    x0: float | None = None


@dataclass
class ErgodicityVerdict:
    """Outcome of the drift-criterion search for one family."""
    family: str
    alpha: float
    classification: str
    witness_m: float | None = None
    constants: LyapunovConstants | None = None
    verified: bool | None = None

    @property
    def ergodic(self) -> bool:
        return self.classification != CRITERION_FAILS


def _h_m(psi: float, alpha: float, m: float, C: float, x: np.ndarray) -> np.ndarray:
    return psi * x ** (m - alpha) + (C - alpha * m) * x ** m


def lyapunov_constants(family: LevyFamily, alpha: float, m: float, C: float) -> LyapunovConstants:
    """x_max, x₀, K and D for the witness m, checked by a sweep over x ∈ [1e−3, 1e3]."""
    psi = psi_eval(family, m)
    if not 0 < C < alpha * m:
        raise PreconditionError(f"need 0 < C < αm = {alpha * m}, got C={C}")
    if psi < 0:
        consts = LyapunovConstants(m=m, C=C, K=1.0, D=0.0)
    elif psi > 0:
        if m <= alpha:
            raise PreconditionError(f"case ψ(m) > 0 needs m > α, got m={m}, α={alpha}")
        if m - alpha * C <= 0 or m - C <= 0:
            raise PreconditionError(f"C={C} too large for m={m}, α={alpha}")
        x_max = ((m - alpha) * psi / (m * (m - alpha * C))) ** (1.0 / alpha)
        x0 = (psi / (m - alpha * C)) ** (1.0 / alpha)
        K = psi / (m - C)
        D = float(_h_m(psi, alpha, m, C, np.array(x_max)))
        consts = LyapunovConstants(m=m, C=C, K=K, D=D, x_max=x_max, x0=x0)
    else:
        raise PreconditionError(f"ψ({m}) = 0 is not a witness")

    h = _h_m(psi, alpha, m, C, SWEEP)
    slack = 1e-9 * max(1.0, abs(consts.D))
    inside = SWEEP <= consts.K
    bad = np.concatenate((SWEEP[inside][h[inside] > consts.D + slack], SWEEP[~inside][h[~inside] > slack]))
    if bad.size:
        logger.warning("%s m=%g C=%g: drift condition violated at %d sweep point(s), first x=%.6g",
                       family.spec(), m, C, bad.size, bad.min())
        raise VerificationError(
            f"{family.spec()}: h_m exceeds the bound at x={bad.min():.6g} (K={consts.K:.6g}, D={consts.D:.6g})"
        )
    return consts


def _search_grid(lo: float, hi: float) -> np.ndarray:
    return lo + (hi - lo) * np.geomspace(1e-6, 1.0 - 1e-6, GRID_POINTS)


def _first_run(psi: Callable[[float], float], grid: np.ndarray, sign: float) -> float | None:
    """Midpoint of the first run of sign·ψ > 0 on the grid, ends refined by Brent."""
    values = np.array([psi(m) for m in grid])
    ok = sign * values > 0
    if not ok.any():
        return None
    i0 = int(np.argmax(ok))
    i1 = i0 + int(np.argmax(~ok[i0:])) - 1 if not ok[i0:].all() else len(grid) - 1
    left = optimize.brentq(psi, grid[i0 - 1], grid[i0]) if i0 > 0 else grid[0]
    right = optimize.brentq(psi, grid[i1], grid[i1 + 1]) if i1 < len(grid) - 1 else grid[-1]
    witness = round((left + right) / 2.0, WITNESS_DIGITS)
    if not sign * psi(witness) > 0:
        witness = float(grid[(i0 + i1) // 2])
    return float(witness)


def _default_C(alpha: float, m: float, psi: float) -> float:
    if psi < 0:
        return 0.5 * alpha * m
    return 0.5 * min(alpha * m, m / alpha, m)


def quenched_criterion(family: LevyFamily, alpha: float, C: float | None = None) -> ErgodicityVerdict:
    """Classify the family by a sign search for ψ, then attach Lyapunov constants."""
    dom = family.domain()

    def psi(m: float) -> float:
        return psi_eval(family, m)

    top = dom.hi if math.isfinite(dom.hi) else SEARCH_CAP * alpha
    classification, witness = CRITERION_FAILS, None
    if top > 0:
        witness = _first_run(psi, _search_grid(0.0, top), -1.0)
        if witness is not None:
            classification = EXP_ERGODIC_2A
    if witness is None and top > alpha:
        witness = _first_run(psi, _search_grid(alpha, top), 1.0)
        if witness is not None:
            classification = EXP_ERGODIC_2B
    verdict = ErgodicityVerdict(family.name, alpha, classification, witness)
    if witness is None:
        logger.info("%s @ alpha=%g: no witness", family.spec(), alpha)
        return verdict
    value = psi(witness)
    c = C if C is not None else _default_C(alpha, witness, value)
    try:
        verdict.constants = lyapunov_constants(family, alpha, witness, c)
        verdict.verified = True
    except VerificationError:
        verdict.verified = False
    except PreconditionError as exc:
        logger.info("%s: no Lyapunov constants (%s)", family.spec(), exc)
    return verdict


def cbi_log_moment(kappa: float) -> float:
    """∫₁^∞ log z μ(dz) for the CBI immigration measure μ(dz) = (κ+1)/Γ(1−κ)·z^{−κ−2}dz."""
    if not 0.0 < kappa < 1.0:
        raise InvalidParameterError(f"kappa must lie in (0,1), got {kappa}")
    integral, _ = integrate.quad(lambda z: z ** (-kappa - 2.0) * math.log(z), 1.0, math.inf,
                                 epsabs=0.0, epsrel=1e-12, limit=200)
    value = (kappa + 1.0) * sc.rgamma(1.0 - kappa) * integral
    closed = sc.rgamma(1.0 - kappa) / (kappa + 1.0)
    if abs(value - closed) > LOG_MOMENT_RTOL * closed:
        raise InconsistencyError(f"log moment quadrature {value!r} vs closed form {closed!r}")
    return float(value)


class ErgodicityChecker:
    """Drift-criterion verdicts over a list of families.

    Usage:
        checker = ErgodicityChecker()
        verdict = checker.classify(BrownianDrift(nu=1), 1.0)
        verdict.classification   # → "exp_ergodic_via_2b"
    """

    def __init__(self, C: float | None = None):
        self.C = C

    def classify(self, family: LevyFamily, alpha: float) -> ErgodicityVerdict:
        return quenched_criterion(family, alpha, self.C)
