"""Samplers for the exponential functional I∞ and the entrance law Q₀.

I∞ = ∫₀^∞ e^{−αξ_s} ds. Under Q₀ the law of X₁ (which is also the
invariant law of the OU process U) is the law of I∞^{−1/α} size-biased by
I∞^{−1}. Closed-form laws come from rescaling the Lévy process in time so
that the catalog formulas apply at any self-similarity index.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from pssclock.errors import ExtensionLimitError, NoSamplerError, ResamplingError
from pssclock.levy import (
    BrownianDrift,
    ConditionedStable,
    CpNegDrift,
    CpPosDrift,
    LevyFamily,
    SawTooth,
    cumulants,
)
from pssclock.paths import DEFAULT_DT, path_sampler

logger = logging.getLogger(__name__)

TAIL_RTOL = 1e-6
MC_MAX_DOUBLINGS = 40
ESS_FLOOR = 0.1

# I∞ is parameterised as: I⁻¹ = s·Gamma(k); I = c·Beta(u,v); I = c·BetaPrime(u,v);
# I⁻¹ = s·Beta(u,v); I = positive stable of index β with Laplace exp(−λ^β).
GAMMA_RECIPROCAL = "gamma_reciprocal"
BETA_SCALED = "beta_scaled"
BETA_PRIME = "beta_prime"
BETA_RECIPROCAL = "beta_reciprocal"
POSITIVE_STABLE = "positive_stable"
MC_TRUNCATED = "mc_truncated"

CLOSED_FORMS = (GAMMA_RECIPROCAL, BETA_SCALED, BETA_PRIME, BETA_RECIPROCAL, POSITIVE_STABLE)


def positive_stable(beta: float, rng: np.random.Generator, size=None):
    """One-sided stable variates with 𝔼 e^{−λS} = e^{−λ^β}, 0 < β < 1 (Kanter)."""
    u = math.pi * rng.uniform(0.0, 1.0, size)
    e = rng.exponential(1.0, size)
    log_s = (np.log(np.sin(beta * u)) - np.log(np.sin(u)) / beta
             + (1.0 - beta) / beta * (np.log(np.sin((1.0 - beta) * u)) - np.log(e)))
    return np.exp(log_s)


def _beta_prime(u: float, v: float, rng: np.random.Generator, size=None):
    return rng.gamma(u, 1.0, size) / rng.gamma(v, 1.0, size)


@dataclass(frozen=True)
class IInfLaw:
    """Sampler descriptor for I∞ of ``family`` at index ``alpha``."""
    family: LevyFamily
    alpha: float
    kind: str
    params: tuple[float, ...] = ()
    dt: float = DEFAULT_DT

    @property
    def closed_form(self) -> bool:
        return self.kind in CLOSED_FORMS

    @property
    def alpha_p(self) -> float:
        return self.alpha * self.family.closed_p()

    def sample(self, rng: np.random.Generator, size=None):
        """Draws of I∞ (shape ``size``; a float when ``size`` is None)."""
        if self.kind == MC_TRUNCATED:
            n = 1 if size is None else int(np.prod(size))
            out = np.array([self._sample_truncated(rng) for _ in range(n)])
            return float(out[0]) if size is None else out.reshape(size)
        k = self.kind
        if k == GAMMA_RECIPROCAL:
            shape, scale = self.params
            out = 1.0 / (scale * rng.gamma(shape, 1.0, size))
        elif k == BETA_SCALED:
            u, v, c = self.params
            out = c * rng.beta(u, v, size)
        elif k == BETA_PRIME:
            u, v, c = self.params
            out = c * _beta_prime(u, v, rng, size)
        elif k == BETA_RECIPROCAL:
            u, v, scale = self.params
            out = 1.0 / (scale * rng.beta(u, v, size))
        elif k == POSITIVE_STABLE:
            (beta,) = self.params
            out = positive_stable(beta, rng, size)
        else:
            raise NoSamplerError(f"unknown law kind {k!r}")
        return float(out) if size is None else out

    def sample_size_biased(self, rng: np.random.Generator, size=None):
        """Draws of X₁ under Q₀ where the size-biased law has a closed form."""
        k = self.kind
        a = self.alpha
        if k == GAMMA_RECIPROCAL:
            shape, scale = self.params
            out = (scale * rng.gamma(shape + 1.0, 1.0, size)) ** (1.0 / a)
        elif k == BETA_SCALED:
            u, v, c = self.params
            out = (c * rng.beta(u - 1.0, v, size)) ** (-1.0 / a)
        elif k == BETA_PRIME:
            u, v, c = self.params
            out = (c * _beta_prime(u - 1.0, v + 1.0, rng, size)) ** (-1.0 / a)
        elif k == BETA_RECIPROCAL:
            u, v, scale = self.params
            out = (scale * rng.beta(u + 1.0, v, size)) ** (1.0 / a)
        else:
            raise NoSamplerError(f"no closed-form size-biased law for {k!r}")
        return float(out) if size is None else out

    def _sample_truncated(self, rng: np.random.Generator) -> float:
        sampler = path_sampler(self.family, rng, self.dt)
        ap = self.alpha_p
        path = sampler.sample(max(8.0 / ap, self.dt))
        for _ in range(MC_MAX_DOUBLINGS):
            log_total = path.log_mass(-self.alpha)[-1]
            log_tail = -self.alpha * path.end_value + math.log(2.0 / ap)
            if log_tail < math.log(TAIL_RTOL) + log_total:
                return float(math.exp(log_total))
            path = sampler.extend_by(path, path.horizon)
        raise ExtensionLimitError(f"I∞ tail still above tolerance after {MC_MAX_DOUBLINGS} doublings")


def has_size_biased_form(law: IInfLaw) -> bool:
    return law.kind in (GAMMA_RECIPROCAL, BETA_SCALED, BETA_PRIME, BETA_RECIPROCAL)


def mc_truncated_law(family: LevyFamily, alpha: float, dt: float = DEFAULT_DT) -> IInfLaw:
    """Truncated-integral law over simulated paths (path-simulable families only)."""
    if family.path_kind is None:
        raise NoSamplerError(f"no path simulator for {family.spec()}")
    return IInfLaw(family, alpha, MC_TRUNCATED, (TAIL_RTOL,), dt)


def i_inf_sampler(family: LevyFamily, alpha: float, dt: float = DEFAULT_DT) -> IInfLaw:
    """Closed-form I∞ law when one exists, otherwise the truncated-integral sampler."""
    cumulants(family, alpha)
    if isinstance(family, BrownianDrift):
        return IInfLaw(family, alpha, GAMMA_RECIPROCAL, (family.nu / alpha, 2.0 * alpha ** 2), dt)
    if isinstance(family, CpPosDrift) and family.d > 0:
        ad = alpha * family.d
        return IInfLaw(family, alpha, BETA_SCALED, (1.0 + family.b / alpha, family.a / ad, 1.0 / ad), dt)
    if isinstance(family, CpNegDrift):
        return IInfLaw(family, alpha, BETA_PRIME,
                       (1.0 + family.b / alpha, (family.a - family.b) / alpha, 1.0 / alpha), dt)
    if isinstance(family, SawTooth):
        return IInfLaw(family, alpha, BETA_RECIPROCAL,
                       ((family.b - family.a) / alpha, family.a / alpha, alpha), dt)
    if isinstance(family, ConditionedStable):
        if not math.isclose(alpha, family.alpha_s, rel_tol=1e-12):
            raise NoSamplerError(f"{family.spec()}: I∞ law known only at index {family.alpha_s}")
        return IInfLaw(family, alpha, POSITIVE_STABLE, (1.0 / alpha,), dt)
    if family.path_kind is not None:
        logger.debug("%s: no closed form, using truncated integrals", family.spec())
        return mc_truncated_law(family, alpha, dt)
    raise NoSamplerError(f"no I∞ sampler for {family.spec()}")


def sample_i_inf(law: IInfLaw, rng: np.random.Generator) -> float:
    """One draw of I∞."""
    return law.sample(rng)


def size_biased_resample(law: IInfLaw, rng: np.random.Generator, size: int,
                         pool: int | None = None, ess_floor: float = ESS_FLOOR) -> np.ndarray:
    """X₁ under Q₀ by self-normalised importance resampling of plain I∞ draws."""
    pool = pool or max(1000, 10 * size)
    draws = np.asarray(law.sample(rng, pool))
    w = 1.0 / draws
    ess = w.sum() ** 2 / np.square(w).sum()
    if ess < ess_floor * pool:
        raise ResamplingError(f"effective sample size {ess:.1f} below {ess_floor:g}·{pool}")
    idx = rng.choice(pool, size=size, p=w / w.sum())
    return draws[idx] ** (-1.0 / law.alpha)


def sample_entrance_x1(family: LevyFamily, alpha: float, rng: np.random.Generator, size=None,
                       law: IInfLaw | None = None, dt: float = DEFAULT_DT):
    """Draws of X₁ under the entrance law Q₀ (= invariant law of U)."""
    law = law or i_inf_sampler(family, alpha, dt)
    if has_size_biased_form(law):
        return law.sample_size_biased(rng, size)
    out = size_biased_resample(law, rng, 1 if size is None else int(np.prod(size)))
    return float(out[0]) if size is None else out.reshape(size)


@dataclass(frozen=True)
class IInfCheck:
    """Normalization and closed-form-vs-truncated comparison for one family."""
    family: str
    alpha: float
    n: int
    mean_inv_iinf: float
    alpha_p: float
    se: float
    ks_p_closed_vs_mc: float | None

    @property
    def passed(self) -> bool:
        ok = abs(self.mean_inv_iinf - self.alpha_p) <= 3.0 * self.se
        if self.ks_p_closed_vs_mc is not None:
            ok = ok and self.ks_p_closed_vs_mc > 0.01
        return ok


def iinf_check(family: LevyFamily, alpha: float, n: int, rng: np.random.Generator,
               n_ks: int = 0, dt: float = DEFAULT_DT) -> IInfCheck:
    """𝔼[I∞⁻¹] against αp; with ``n_ks`` > 0 also a two-sample KS against truncated integrals."""
    law = i_inf_sampler(family, alpha, dt)
    inv = 1.0 / np.asarray(law.sample(rng, n))
    ks_p = None
    if n_ks > 0 and law.closed_form and family.path_kind is not None:
        closed = np.asarray(law.sample(rng, n_ks))
        mc = np.asarray(mc_truncated_law(family, alpha, dt).sample(rng, n_ks))
        ks_p = float(stats.ks_2samp(closed, mc).pvalue)
    return IInfCheck(
        family=family.name,
        alpha=alpha,
        n=n,
        mean_inv_iinf=float(inv.mean()),
        alpha_p=law.alpha_p,
        se=float(inv.std(ddof=1) / math.sqrt(n)),
        ks_p_closed_vs_mc=ks_p,
    )
