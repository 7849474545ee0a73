"""Mellin transform M(z) = 𝔼[I∞^{−z}]: recursion check and the Mellin route to v²."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special as sc

from pssclock.errors import DomainError, NoSamplerError, PrecisionError
from pssclock.expfunc import (
    BETA_PRIME,
    BETA_RECIPROCAL,
    BETA_SCALED,
    GAMMA_RECIPROCAL,
    POSITIVE_STABLE,
    IInfLaw,
    i_inf_sampler,
)
from pssclock.levy import Interval, LevyFamily, cumulants, psi_eval

logger = logging.getLogger(__name__)

CLOSED_FORM = "closed-form"
MC_ESTIMATED = "mc-estimated"

RESIDUAL_RTOL = 1e-10
MC_BAND = 4.0
MC_INTERVAL = Interval(-0.5, 2.5)
DERIV_STEP = 1e-4
MC_DERIV_STEP = 1e-2
RICHARDSON_RTOL = 1e-4
RICHARDSON_ATOL = 1e-8
DEFAULT_Z_GRID = tuple(round(0.1 * k, 1) for k in range(1, 21))


@dataclass(frozen=True)
class MellinFunction:
    """z ↦ M(z) on an open interval, closed-form or estimated from I∞ draws."""
    evaluate: Callable[[float], float]
    interval: Interval
    provenance: str
    law: IInfLaw | None = None
    log_samples: np.ndarray | None = field(default=None, repr=False)

    def __call__(self, z: float) -> float:
        if not self.interval.contains(z):
            raise DomainError(f"z={z!r} outside ({self.interval.lo}, {self.interval.hi})")
        return self.evaluate(z)

    @property
    def n(self) -> int:
        return 0 if self.log_samples is None else len(self.log_samples)

    def per_sample(self, z: float) -> np.ndarray:
        """I_i^{−z} for every stored draw (MC only)."""
        if self.log_samples is None:
            raise PrecisionError("closed-form transform has no samples")
        if not self.interval.contains(z):
            raise DomainError(f"z={z!r} outside ({self.interval.lo}, {self.interval.hi})")
        return np.exp(-z * self.log_samples)


def _closed_log_mellin(law: IInfLaw) -> tuple[Callable[[float], float], Interval]:
    k = law.kind
    if k == GAMMA_RECIPROCAL:
        shape, scale = law.params
        return (lambda z: z * math.log(scale) + sc.gammaln(shape + z) - sc.gammaln(shape),
                Interval(-shape, math.inf))
    if k == BETA_SCALED:
        u, v, c = law.params
        return (lambda z: -z * math.log(c) + sc.betaln(u - z, v) - sc.betaln(u, v),
                Interval(-math.inf, u))
    if k == BETA_PRIME:
        u, v, c = law.params
        return (lambda z: -z * math.log(c) + sc.betaln(u - z, v + z) - sc.betaln(u, v),
                Interval(-v, u))
    if k == BETA_RECIPROCAL:
        u, v, scale = law.params
        return (lambda z: z * math.log(scale) + sc.betaln(u + z, v) - sc.betaln(u, v),
                Interval(-u, math.inf))
    if k == POSITIVE_STABLE:
        (beta,) = law.params
        return (lambda z: sc.gammaln(1.0 + z / beta) - sc.gammaln(1.0 + z),
                Interval(-beta, math.inf))
    raise NoSamplerError(f"no closed-form Mellin transform for {law.family.spec()}")


def closed_form_mellin(family: LevyFamily, alpha: float) -> MellinFunction:
    """Closed-form M(z) for families whose I∞ law is known exactly."""
    law = i_inf_sampler(family, alpha)
    log_m, interval = _closed_log_mellin(law)
    return MellinFunction(lambda z: float(np.exp(log_m(z))), interval, CLOSED_FORM, law)


def mc_mellin(law: IInfLaw, rng: np.random.Generator, n: int) -> MellinFunction:
    """M(z) estimated by sample means over one fixed batch of I∞ draws."""
    log_i = np.log(np.asarray(law.sample(rng, n)))
    interval = MC_INTERVAL
    if law.closed_form:
        _, exact = _closed_log_mellin(law)
        interval = Interval(max(interval.lo, exact.lo), min(interval.hi, exact.hi))
    return MellinFunction(lambda z: float(np.mean(np.exp(-z * log_i))), interval, MC_ESTIMATED, law, log_i)


def _check_recursion_point(M: MellinFunction, z: float) -> None:
    if not (M.interval.contains(z) and M.interval.contains(z + 1.0)):
        raise DomainError(f"z={z!r}: need z and z+1 inside ({M.interval.lo}, {M.interval.hi})")


def recursion_residual(family: LevyFamily, alpha: float, M: MellinFunction, z: float) -> float:
    """ψ(αz)M(z) − zM(z+1); zero for the true transform."""
    _check_recursion_point(M, z)
    return psi_eval(family, alpha * z) * M(z) - z * M(z + 1.0)


def recursion_residual_se(family: LevyFamily, alpha: float, M: MellinFunction, z: float) -> tuple[float, float]:
    """Residual and its standard error (0 for closed forms)."""
    if M.provenance == CLOSED_FORM:
        return recursion_residual(family, alpha, M, z), 0.0
    _check_recursion_point(M, z)
    per = psi_eval(family, alpha * z) * M.per_sample(z) - z * M.per_sample(z + 1.0)
    return float(per.mean()), float(per.std(ddof=1) / math.sqrt(len(per)))


def admissible_z(family: LevyFamily, alpha: float, M: MellinFunction, z_grid=DEFAULT_Z_GRID) -> list[float]:
    """Grid points where the recursion can be evaluated."""
    dom = family.domain()
    out = [z for z in z_grid
           if M.interval.contains(z) and M.interval.contains(z + 1.0) and dom.contains(alpha * z)]
    if len(out) < len(z_grid):
        logger.debug("%s: %d of %d z values outside the admissible range",
                     family.spec(), len(z_grid) - len(out), len(z_grid))
    return out


def _central(M: MellinFunction, z: float, h: float) -> float:
    return (M(z + h) - M(z - h)) / (2.0 * h)


def _richardson_derivative(M: MellinFunction, z: float, h: float) -> float:
    coarse = (4.0 * _central(M, z, h / 2.0) - _central(M, z, h)) / 3.0
    fine = (4.0 * _central(M, z, h / 4.0) - _central(M, z, h / 2.0)) / 3.0
    if abs(coarse - fine) > RICHARDSON_RTOL * max(abs(coarse), abs(fine)) + RICHARDSON_ATOL:
        raise PrecisionError(f"M′({z}) unstable: Richardson levels {coarse!r} vs {fine!r}")
    return fine


def _v2(ap: float, d0, d1):
    return 2.0 / ap ** 2 * (-d0 + d1 / ap)


def v2_via_mellin(family: LevyFamily, alpha: float, M: MellinFunction) -> float:
    """v² = 2(αp)⁻²(−M′(0) + (αp)⁻¹M′(1))."""
    return v2_via_mellin_se(family, alpha, M)[0]


def v2_via_mellin_se(family: LevyFamily, alpha: float, M: MellinFunction) -> tuple[float, float]:
    """Mellin-route v² with its standard error (0 for closed forms)."""
    ap = alpha * cumulants(family, alpha).p
    if M.provenance == CLOSED_FORM:
        d0 = _richardson_derivative(M, 0.0, DERIV_STEP)
        d1 = _richardson_derivative(M, 1.0, DERIV_STEP)
        return _v2(ap, d0, d1), 0.0
    h = MC_DERIV_STEP
    # common random numbers: all four quotients use the same draws
    d0 = (M.per_sample(h) - M.per_sample(-h)) / (2.0 * h)
    d1 = (M.per_sample(1.0 + h) - M.per_sample(1.0 - h)) / (2.0 * h)
    per = _v2(ap, d0, d1)
    return float(per.mean()), float(per.std(ddof=1) / math.sqrt(len(per)))


def normalization_residual(family: LevyFamily, alpha: float, M: MellinFunction) -> tuple[float, float]:
    """M(1) − αp and its standard error."""
    ap = alpha * cumulants(family, alpha).p
    if M.provenance == CLOSED_FORM:
        return M(1.0) - ap, 0.0
    per = M.per_sample(1.0)
    return float(per.mean() - ap), float(per.std(ddof=1) / math.sqrt(len(per)))


@dataclass
class MellinRow:
    """One z of a recursion check."""
    family: str
    z: float
    residual: float
    tolerance: float
    passed: bool


@dataclass
class MellinReport:
    """Recursion rows plus the two routes to v²."""
    rows: list[MellinRow]
    provenance: str
    v2_mellin: float
    v2_mellin_se: float
    v2_cumulants: float
    alpha_p: float
    normalization: float
    normalization_se: float

    @property
    def v2_agrees(self) -> bool:
        if self.provenance == CLOSED_FORM:
            return abs(self.v2_mellin - self.v2_cumulants) <= 1e-6 * abs(self.v2_cumulants)
        return abs(self.v2_mellin - self.v2_cumulants) <= MC_BAND * self.v2_mellin_se

    @property
    def passed(self) -> bool:
        if self.provenance == CLOSED_FORM:
            norm_ok = abs(self.normalization) <= 1e-8 * max(1.0, self.alpha_p)
        else:
            norm_ok = abs(self.normalization) <= MC_BAND * self.normalization_se
        return all(r.passed for r in self.rows) and self.v2_agrees and norm_ok


class MellinChecker:
    """Check the Mellin recursion and the Mellin route to v² for one family.

    Usage:
        checker = MellinChecker(BrownianDrift(nu=1), alpha=1.0)
        report = checker.check()
        report.passed   # → True
    """

    def __init__(self, family: LevyFamily, alpha: float, rng: np.random.Generator | None = None,
                 n: int = 0, prefer_mc: bool = False):
        self.family = family
        self.alpha = alpha
        self.rng = rng
        self.n = n
        self.prefer_mc = prefer_mc

    def transform(self) -> MellinFunction:
        """Closed form when one exists and ``prefer_mc`` is off, otherwise ``n`` draws."""
        law = i_inf_sampler(self.family, self.alpha)
        if law.closed_form and not self.prefer_mc:
            return closed_form_mellin(self.family, self.alpha)
        if self.n <= 1 or self.rng is None:
            raise NoSamplerError(f"{self.family.spec()}: no closed-form M; pass an rng and n > 1")
        return mc_mellin(law, self.rng, self.n)

    def check(self, z_grid=DEFAULT_Z_GRID) -> MellinReport:
        M = self.transform()
        rows = []
        for z in admissible_z(self.family, self.alpha, M, z_grid):
            res, se = recursion_residual_se(self.family, self.alpha, M, z)
            if M.provenance == CLOSED_FORM:
                tol = RESIDUAL_RTOL * max(1.0, abs(z * M(z + 1.0)))
            else:
                tol = MC_BAND * se
            rows.append(MellinRow(self.family.name, z, res, tol, abs(res) <= tol))
        v2, v2_se = v2_via_mellin_se(self.family, self.alpha, M)
        norm, norm_se = normalization_residual(self.family, self.alpha, M)
        return MellinReport(
            rows=rows,
            provenance=M.provenance,
            v2_mellin=v2,
            v2_mellin_se=v2_se,
            v2_cumulants=cumulants(self.family, self.alpha).v2,
            alpha_p=self.alpha * cumulants(self.family, self.alpha).p,
            normalization=norm,
            normalization_se=norm_se,
        )
