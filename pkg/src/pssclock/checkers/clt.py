"""Monte Carlo harness for the law of large numbers and the functional CLT of the clock.

W_T(t) = (log T)^{−1/2}·(clock(T^t) − t·log T/(αp)). Under Q_a the clock is
T(T^t) for the pssMp started at a; under Q₀ it is ∫₁^{T^t} dr/X^α, obtained
from a fresh pssMp started at X₁ ~ entrance law and run for T^t − 1.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import stats

from pssclock.errors import NoSamplerError, PreconditionError
from pssclock.expfunc import has_size_biased_form, i_inf_sampler, sample_entrance_x1
from pssclock.levy import LevyFamily, cumulants
from pssclock.paths import DEFAULT_DT, DEFAULT_MAX_EXTENSIONS, path_sampler, solve_tau_log

logger = logging.getLogger(__name__)

QA = "Qa"
Q0 = "Q0"
DEFAULT_T_GRID = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0)
SE_BAND = 4.0
BIAS_FACTOR = 3.0
KS_LEVEL = 0.01
LLN_BAND = 5.0


def replica_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replica ``index`` of master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment on the rescaled clock."""
    family: LevyFamily
    alpha: float
    log_t: float
    replicas: int
    seed: int
    regime: str = QA
    a: float = 1.0
    t_grid: tuple[float, ...] = DEFAULT_T_GRID
    dt: float = DEFAULT_DT
    workers: int = 1
    max_extensions: int = DEFAULT_MAX_EXTENSIONS

    def __post_init__(self):
        if self.log_t <= 0:
            raise PreconditionError(f"log T must be > 0, got {self.log_t}")
        if self.replicas < 2:
            raise PreconditionError(f"need at least 2 replicas, got {self.replicas}")
        grid = np.asarray(self.t_grid, dtype=float)
        if grid.size == 0 or np.any(grid < 0) or np.any(np.diff(grid) <= 0):
            raise PreconditionError(f"t_grid must be non-negative and strictly increasing, got {self.t_grid}")
        if self.regime not in (QA, Q0):
            raise PreconditionError(f"regime must be {QA!r} or {Q0!r}, got {self.regime!r}")
        if self.regime == QA and self.a <= 0:
            raise PreconditionError(f"starting point must be > 0, got {self.a}")
        if self.family.path_kind is None:
            raise NoSamplerError(f"no path simulator for {self.family.spec()}")
        if self.workers < 1:
            raise PreconditionError(f"workers must be >= 1, got {self.workers}")

    @property
    def alpha_p(self) -> float:
        return self.alpha * cumulants(self.family, self.alpha).p

    @property
    def v2(self) -> float:
        return cumulants(self.family, self.alpha).v2


@dataclass
class RescaledClockPath:
    """W_T(t) over the t grid for one replica."""
    replica: int
    values: np.ndarray


def clock_at_levels(sampler, alpha: float, alpha_p: float, log_levels,
                    max_extensions: int = DEFAULT_MAX_EXTENSIONS) -> np.ndarray:
    """τ at the given log levels on one fresh path drawn from ``sampler``."""
    log_levels = np.asarray(log_levels, dtype=float)
    finite = log_levels[np.isfinite(log_levels)]
    top = float(finite.max()) if finite.size else 0.0
    path = sampler.sample_for_level(alpha_p, top)
    return solve_tau_log(path, alpha, log_levels, sampler, max_extensions).tau


def shared_entrance_starts(config: ExperimentConfig) -> np.ndarray | None:
    """One X₁ per replica from a single resampling pool, for Q₀ laws without a closed size-biased form."""
    if config.regime != Q0:
        return None
    law = i_inf_sampler(config.family, config.alpha, config.dt)
    if has_size_biased_form(law):
        return None
    # the root sequence is disjoint from every replica stream
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    logger.info("resampling %d entrance starts from one pool", config.replicas)
    return np.atleast_1d(sample_entrance_x1(config.family, config.alpha, rng, config.replicas, law=law))


def run_replica(config: ExperimentConfig, replica_index: int,
                entrance: np.ndarray | None = None) -> RescaledClockPath:
    """W_T over ``config.t_grid``; deterministic in (seed, replica_index)."""
    rng = replica_rng(config.seed, replica_index)
    L = config.log_t
    t = np.asarray(config.t_grid, dtype=float)
    ap = config.alpha_p
    if config.regime == QA:
        log_levels = L * t - config.alpha * math.log(config.a)
    else:
        if entrance is not None:
            x1 = float(entrance[replica_index])
        else:
            x1 = sample_entrance_x1(config.family, config.alpha, rng, dt=config.dt)
        with np.errstate(divide="ignore"):
            # log(T^t − 1)
            log_span = L * t + np.log(-np.expm1(-L * t))
        log_levels = log_span - config.alpha * math.log(x1)
    sampler = path_sampler(config.family, rng, config.dt)
    tau = clock_at_levels(sampler, config.alpha, ap, log_levels, config.max_extensions)
    return RescaledClockPath(replica_index, (tau - t * L / ap) / math.sqrt(L))


def run_experiment(config: ExperimentConfig) -> np.ndarray:
    """N × len(t_grid) matrix of W_T values, rows in replica order."""
    task = partial(run_replica, config, entrance=shared_entrance_starts(config))
    indices = range(config.replicas)
    logger.info("running %d replicas of %s (%s, L=%g) on %d worker(s)",
                config.replicas, config.family.spec(), config.regime, config.log_t, config.workers)
    if config.workers == 1:
        rows = [task(i).values for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunk = max(1, config.replicas // (4 * config.workers))
            rows = [r.values for r in pool.map(task, indices, chunksize=chunk)]
    return np.vstack(rows)


@dataclass
class LlnReport:
    """clock(T)/log T along one path against (αp)⁻¹."""
    log_t: tuple[float, ...]
    ratios: np.ndarray
    target: float
    deviations: np.ndarray
    bound: float

    @property
    def passed(self) -> bool:
        return bool(abs(self.deviations[-1]) <= self.bound)


def clock_ratios(sampler, alpha: float, alpha_p: float, a: float, log_t_list,
                 max_extensions: int = DEFAULT_MAX_EXTENSIONS) -> np.ndarray:
    """clock(T)/log T for each log T, all on one path from ``sampler``."""
    L = np.asarray(log_t_list, dtype=float)
    tau = clock_at_levels(sampler, alpha, alpha_p, L - alpha * math.log(a), max_extensions)
    return tau / L


def lln_check(family: LevyFamily, alpha: float, a: float, log_t_list, seed: int,
              dt: float = DEFAULT_DT, max_extensions: int = DEFAULT_MAX_EXTENSIONS) -> LlnReport:
    """Single-path law of large numbers; pass if |deviation| ≤ 5√(v²/L) at the largest L."""
    L = tuple(sorted(float(x) for x in log_t_list))
    if not L or L[0] <= 0:
        raise PreconditionError(f"log T values must be > 0, got {log_t_list}")
    cum = cumulants(family, alpha)
    ap = alpha * cum.p
    sampler = path_sampler(family, replica_rng(seed, 0), dt)
    ratios = clock_ratios(sampler, alpha, ap, a, L, max_extensions)
    return LlnReport(
        log_t=L,
        ratios=ratios,
        target=1.0 / ap,
        deviations=ratios - 1.0 / ap,
        bound=LLN_BAND * math.sqrt(cum.v2 / L[-1]),
    )


def _jackknife_cov_se(x: np.ndarray, y: np.ndarray) -> float:
    """Jackknife standard error of the sample covariance, leave-one-out in closed form."""
    n = len(x)
    dx = x - x.mean()
    dy = y - y.mean()
    s = np.dot(dx, dy)
    loo = (s - n / (n - 1.0) * dx * dy) / (n - 2.0)
    return float(math.sqrt((n - 1.0) / n * np.sum((loo - loo.mean()) ** 2)))


def _bias_allowance(scale: float, log_t: float | None) -> float:
    return 0.0 if log_t is None else BIAS_FACTOR * scale / math.sqrt(log_t)


@dataclass
class TestReport:
    """Moments, covariance and verdicts of W_T over a t grid."""
    __test__ = False

    t_grid: tuple[float, ...]
    mean: np.ndarray
    var: np.ndarray
    se: np.ndarray
    target: float
    ks_stat: float
    ks_p: float
    cov: np.ndarray | None = None
    cov_se: np.ndarray | None = None
    var_pass: np.ndarray | None = None
    verdicts: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def rows(self) -> list[dict]:
        """``t,mean,var,se,target,pass`` rows."""
        return [
            {"t": t, "mean": float(m), "var": float(v), "se": float(s),
             "target": self.target * t, "pass": bool(ok)}
            for t, m, v, s, ok in zip(self.t_grid, self.mean, self.var, self.se, self.var_pass)
        ]


def clt_test(samples, v2: float, log_t: float | None = None, t: float = 1.0) -> TestReport:
    """Variance band and KS normality for samples of W_T(t) against N(0, v²t)."""
    w = np.asarray(samples, dtype=float)
    n = len(w)
    if n < 100:
        raise PreconditionError(f"need at least 100 samples, got {n}")
    target = v2 * t
    var = float(w.var(ddof=1))
    var_se = _jackknife_cov_se(w, w)
    mean_se = float(w.std(ddof=1) / math.sqrt(n))
    ks = stats.kstest(w / math.sqrt(target), "norm", method="asymp")
    var_ok = abs(var - target) <= SE_BAND * var_se + _bias_allowance(target, log_t)
    centre_ok = abs(w.mean()) <= SE_BAND * mean_se + _bias_allowance(max(math.sqrt(target), 1.0), log_t)
    return TestReport(
        t_grid=(t,),
        mean=np.array([w.mean()]),
        var=np.array([var]),
        se=np.array([var_se]),
        target=v2,
        ks_stat=float(ks.statistic),
        ks_p=float(ks.pvalue),
        var_pass=np.array([var_ok]),
        verdicts={"variance": bool(var_ok), "ks": bool(ks.pvalue > KS_LEVEL), "centering": bool(centre_ok)},
    )


def fclt_covariance_test(paths, t_grid, v2: float, log_t: float | None = None,
                         bias_allowance: bool = False) -> TestReport:
    """Cov(W(s), W(t)) against v²·min(s,t) within 4 jackknife SE, plus KS on the increment W(2) − W(1).

    ``bias_allowance`` widens every band by 3v²/√L (needs ``log_t``).
    """
    w = np.asarray(paths, dtype=float)
    grid = tuple(float(t) for t in t_grid)
    n, k = w.shape
    if n < 1000:
        raise PreconditionError(f"need at least 1000 paths, got {n}")
    if k != len(grid):
        raise PreconditionError(f"{k} columns for a grid of {len(grid)}")
    cov = np.cov(w, rowvar=False, ddof=1).reshape(k, k)
    cov_se = np.array([[_jackknife_cov_se(w[:, i], w[:, j]) for j in range(k)] for i in range(k)])
    expected = v2 * np.minimum.outer(np.array(grid), np.array(grid))
    band = SE_BAND * cov_se + (_bias_allowance(v2, log_t) if bias_allowance else 0.0)
    within = np.abs(cov - expected) <= band
    off_diag = bool(within[np.triu_indices(k, 1)].all())

    verdicts = {"variance": bool(np.diag(within).all()), "covariance": off_diag}
    ks_stat, ks_p = math.nan, math.nan
    if 1.0 in grid and 2.0 in grid:
        incr = w[:, grid.index(2.0)] - w[:, grid.index(1.0)]
        ks = stats.kstest(incr / math.sqrt(v2), "norm", method="asymp")
        ks_stat, ks_p = float(ks.statistic), float(ks.pvalue)
        verdicts["increment_ks"] = bool(ks_p > KS_LEVEL)
    return TestReport(
        t_grid=grid,
        mean=w.mean(axis=0),
        var=np.diag(cov).copy(),
        se=np.diag(cov_se).copy(),
        target=v2,
        ks_stat=ks_stat,
        ks_p=ks_p,
        cov=cov,
        cov_se=cov_se,
        var_pass=np.diag(within).copy(),
        verdicts=verdicts,
    )
