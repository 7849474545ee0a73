"""Exact piecewise-linear Lévy paths, their exponential functional and the clock.

A path is stored as breakpoints, per-segment slopes and jumps at
breakpoints. On such a path 𝒜(u) = ∫₀ᵘ e^{αξ_s} ds has a closed form per
segment, and so does its inverse τ. Everything is carried in log space so
levels of order e^{10⁴} stay representable.

Usage:
    rng = np.random.default_rng(7)
    sampler = path_sampler(SawTooth(a=1, b=2), rng)
    path = sampler.sample(50.0)
    res = clock_value(path, 1.0, 1.0, 100.0, extender=sampler)
    res.clock_value                # T(100) for X started at 1
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from pssclock.errors import ClockError, DomainError, ExtensionLimitError, NoSamplerError, PreconditionError
from pssclock.levy import BrownianDrift, CpNegDrift, CpPosDrift, LevyFamily, SawTooth

logger = logging.getLogger(__name__)

DEFAULT_DT = 1e-3
MAX_CHUNK_SEGMENTS = 1_000_000
DEFAULT_MAX_EXTENSIONS = 64


def log_exprel(y):
    """log((e^y − 1)/y), elementwise, exact 0 at y = 0."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    neg = y < 0
    yp = y[pos]
    out[pos] = yp + np.log(-np.expm1(-yp)) - np.log(yp)
    yn = y[neg]
    out[neg] = np.log(-np.expm1(yn)) - np.log(-yn)
    return out


@dataclass(frozen=True, eq=False)
class PiecewiseLinearPath:
    """Right-continuous path ξ with ξ(0) = 0, linear between breakpoints.

    ``jumps[i]`` happens at ``times[i]`` and the post-jump value starts
    segment i; ``jumps[0]`` and ``jumps[-1]`` are zero.
    """
    times: np.ndarray
    slopes: np.ndarray
    jumps: np.ndarray
    starts: np.ndarray
    end_value: float
    _log_mass: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, times, slopes, jumps) -> PiecewiseLinearPath:
        times = np.asarray(times, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        jumps = np.asarray(jumps, dtype=float)
        n = slopes.size
        if n < 1 or times.shape != (n + 1,) or jumps.shape != (n + 1,):
            raise ValueError("need n >= 1 segments, n+1 breakpoints and n+1 jumps")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        if jumps[0] != 0.0 or jumps[-1] != 0.0:
            raise ValueError("no jump allowed at the origin or at the horizon")
        drift = slopes * np.diff(times)
        before = np.concatenate(([0.0], np.cumsum(drift)))
        after = before + np.cumsum(jumps)
        return cls(times=times, slopes=slopes, jumps=jumps, starts=after[:-1], end_value=float(after[-1]))

    @classmethod
    def linear(cls, slope: float, horizon: float) -> PiecewiseLinearPath:
        return cls.build([0.0, horizon], [slope], [0.0, 0.0])

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def n_segments(self) -> int:
        return self.slopes.size

    def value_at(self, s):
        """ξ(s) for 0 ≤ s ≤ horizon (right-continuous)."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > self.horizon):
            raise DomainError(f"time outside [0, {self.horizon}]")
        k = np.clip(np.searchsorted(self.times, s, side="right") - 1, 0, self.n_segments - 1)
        out = self.starts[k] + self.slopes[k] * (s - self.times[k])
        return float(out) if out.ndim == 0 else out

    def concat(self, chunk: PiecewiseLinearPath) -> PiecewiseLinearPath:
        """Append ``chunk`` (itself started at 0) after the horizon."""
        h = self.horizon
        return PiecewiseLinearPath(
            times=np.concatenate((self.times, chunk.times[1:] + h)),
            slopes=np.concatenate((self.slopes, chunk.slopes)),
            jumps=np.concatenate((self.jumps, chunk.jumps[1:])),
            starts=np.concatenate((self.starts, chunk.starts + self.end_value)),
            end_value=self.end_value + chunk.end_value,
        )

    def log_mass(self, alpha: float) -> np.ndarray:
        """log 𝒜(t_i) at every breakpoint, for 𝒜(u) = ∫₀ᵘ e^{αξ_s} ds."""
        cached = self._log_mass.get(alpha)
        if cached is None:
            dt = np.diff(self.times)
            seg = alpha * self.starts + np.log(dt) + log_exprel(alpha * self.slopes * dt)
            cached = np.concatenate(([-np.inf], np.logaddexp.accumulate(seg)))
            self._log_mass[alpha] = cached
        return cached

    def to_csv(self, target) -> None:
        """Write ``t,xi,slope,jump`` rows, one per breakpoint."""
        values = np.append(self.starts, self.end_value)
        slopes = [repr(float(s)) for s in self.slopes] + [""]
        target = Path(target)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with target.open("w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["t", "xi", "slope", "jump"])
                for row in zip(self.times, values, slopes, self.jumps):
                    writer.writerow([repr(float(row[0])), repr(float(row[1])), row[2], repr(float(row[3]))])
        except OSError as exc:
            raise ClockError(f"cannot write path dump {target}: {exc}") from exc


class PathExtender(Protocol):
    def extend(self, path: PiecewiseLinearPath, log_mass_gap: float, alpha: float) -> PiecewiseLinearPath: ...


class _ChunkedSampler:
    """Shared chunk-sizing logic for the lazy extension of a path."""

    mean: float

    def sample(self, horizon: float) -> PiecewiseLinearPath:
        raise NotImplementedError

    def max_chunk(self) -> float:
        raise NotImplementedError

    def min_horizon(self) -> float:
        return 0.0

    def sample_for_level(self, alpha_p: float, log_level: float) -> PiecewiseLinearPath:
        """A first path sized for ``log_level``, never longer than one chunk."""
        # τ grows like (log level)/(αp)
        horizon = max(1.25 * max(log_level, 1.0) / alpha_p, self.min_horizon())
        return self.sample(min(horizon, max(self.max_chunk(), self.min_horizon())))

    def extend_by(self, path: PiecewiseLinearPath, duration: float) -> PiecewiseLinearPath:
        return path.concat(self.sample(duration))

    def extend(self, path: PiecewiseLinearPath, log_mass_gap: float, alpha: float) -> PiecewiseLinearPath:
        # log 𝒜 grows like αp per unit of Lévy time
        rate = alpha * self.mean
        duration = 2.0 * max(log_mass_gap, 1.0) / rate if rate > 0 else 1.0
        duration = min(duration, self.max_chunk())
        logger.debug("extending path at %.4g by %.4g", path.horizon, duration)
        return self.extend_by(path, duration)


class CompoundPoissonSampler(_ChunkedSampler):
    """Exact sampler for ξ_t = drift·t + sign·(compound Poisson with Exp jumps).

    Usage:
        sampler = CompoundPoissonSampler(drift=1.0, rate=1.0, jump_rate=2.0, sign=-1, rng=rng)
        path = sampler.sample(10.0)
    """

    def __init__(self, drift: float, rate: float, jump_rate: float, sign: int, rng: np.random.Generator):
        if rate < 0 or jump_rate <= 0 or sign not in (-1, 1):
            raise PreconditionError("need rate >= 0, jump_rate > 0 and sign = ±1")
        self.drift = drift
        self.rate = rate
        self.jump_rate = jump_rate
        self.sign = sign
        self.rng = rng
        self.mean = drift + sign * rate / jump_rate

    @classmethod
    def for_family(cls, family: LevyFamily, rng: np.random.Generator) -> CompoundPoissonSampler:
        if isinstance(family, CpPosDrift):
            return cls(family.d, family.a, family.b, +1, rng)
        if isinstance(family, CpNegDrift):
            return cls(-1.0, family.a, family.b, +1, rng)
        if isinstance(family, SawTooth):
            return cls(1.0, family.a, family.b, -1, rng)
        raise NoSamplerError(f"{family.spec()} is not a compound Poisson family")

    def max_chunk(self) -> float:
        return MAX_CHUNK_SEGMENTS / self.rate if self.rate > 0 else math.inf

    def sample(self, horizon: float) -> PiecewiseLinearPath:
        if horizon <= 0:
            raise PreconditionError(f"horizon must be > 0, got {horizon}")
        n = self.rng.poisson(self.rate * horizon)
        when = np.sort(self.rng.uniform(0.0, horizon, n))
        sizes = self.sign * self.rng.exponential(1.0 / self.jump_rate, n)
        times = np.concatenate(([0.0], when, [horizon]))
        jumps = np.concatenate(([0.0], sizes, [0.0]))
        return PiecewiseLinearPath.build(times, np.full(n + 1, self.drift), jumps)


class BrownianSampler(_ChunkedSampler):
    """Grid sampler for ξ_t = vol·B_t + drift·t, linear between grid points.

    Usage:
        sampler = BrownianSampler.for_family(BrownianDrift(nu=1), rng, dt=1e-3)
        path = sampler.sample(5.0)
    """

    def __init__(self, drift: float, vol: float, dt: float, rng: np.random.Generator):
        if dt <= 0:
            raise PreconditionError(f"dt must be > 0, got {dt}")
        self.drift = drift
        self.vol = vol
        self.dt = dt
        self.rng = rng
        self.mean = drift

    @classmethod
    def for_family(cls, family: BrownianDrift, rng: np.random.Generator, dt: float = DEFAULT_DT) -> BrownianSampler:
        return cls(2.0 * family.nu, 2.0, dt, rng)

    def max_chunk(self) -> float:
        return MAX_CHUNK_SEGMENTS * self.dt

    def min_horizon(self) -> float:
        return self.dt

    def sample(self, horizon: float) -> PiecewiseLinearPath:
        if horizon < self.dt:
            raise PreconditionError(f"horizon {horizon} shorter than dt {self.dt}")
        n = max(1, math.ceil(horizon / self.dt - 1e-9))
        incr = self.rng.normal(self.drift * self.dt, self.vol * math.sqrt(self.dt), n)
        times = self.dt * np.arange(n + 1)
        return PiecewiseLinearPath.build(times, incr / self.dt, np.zeros(n + 1))

    def extend_by(self, path: PiecewiseLinearPath, duration: float) -> PiecewiseLinearPath:
        return path.concat(self.sample(max(duration, self.dt)))

    def refine(self, path: PiecewiseLinearPath) -> PiecewiseLinearPath:
        """The same path on a grid of half the step: Brownian-bridge midpoints, old grid values kept."""
        if np.any(path.jumps):
            raise PreconditionError("only continuous paths can be refined")
        h = np.diff(path.times)
        values = np.append(path.starts, path.end_value)
        mid = 0.5 * (values[:-1] + values[1:]) + 0.5 * self.vol * np.sqrt(h) * self.rng.standard_normal(h.size)
        fine = np.empty(2 * h.size + 1)
        fine[0::2] = values
        fine[1::2] = mid
        times = np.empty_like(fine)
        times[0::2] = path.times
        times[1::2] = path.times[:-1] + 0.5 * h
        return PiecewiseLinearPath.build(times, np.diff(fine) / np.diff(times), np.zeros(fine.size))


def path_sampler(family: LevyFamily, rng: np.random.Generator, dt: float = DEFAULT_DT) -> _ChunkedSampler:
    """Sampler bound to ``rng`` for a path-simulable family."""
    if family.path_kind == "brownian":
        return BrownianSampler.for_family(family, rng, dt)
    if family.path_kind == "compound_poisson":
        return CompoundPoissonSampler.for_family(family, rng)
    raise NoSamplerError(f"no path simulator for {family.spec()}")


def sample_cp_path(family: LevyFamily, horizon: float, rng: np.random.Generator) -> PiecewiseLinearPath:
    return CompoundPoissonSampler.for_family(family, rng).sample(horizon)


def sample_bm_path(nu: float, dt: float, horizon: float, rng: np.random.Generator) -> PiecewiseLinearPath:
    return BrownianSampler(2.0 * nu, 2.0, dt, rng).sample(horizon)


def log_exp_functional(path: PiecewiseLinearPath, alpha: float, u):
    """log 𝒜(u), 0 ≤ u ≤ horizon."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u > path.horizon):
        raise DomainError(f"u outside [0, {path.horizon}]")
    k = np.clip(np.searchsorted(path.times, u, side="right") - 1, 0, path.n_segments - 1)
    delta = u - path.times[k]
    cum = path.log_mass(alpha)[k]
    with np.errstate(divide="ignore"):
        part = alpha * path.starts[k] + np.log(delta) + log_exprel(alpha * path.slopes[k] * delta)
    out = np.logaddexp(cum, part)
    return float(out) if out.ndim == 0 else out


def exp_functional_A(path: PiecewiseLinearPath, alpha: float, u):
    """𝒜(u) = ∫₀ᵘ e^{αξ_s} ds, exact on the piecewise-linear path."""
    return np.exp(log_exp_functional(path, alpha, u))


@dataclass(frozen=True)
class TauSolution:
    """τ at one or more levels, with the path it was solved on."""
    tau: np.ndarray
    path: PiecewiseLinearPath
    extensions: int


def ensure_mass(path: PiecewiseLinearPath, alpha: float, log_level: float,
                extender: PathExtender | None = None,
                max_extensions: int = DEFAULT_MAX_EXTENSIONS) -> tuple[PiecewiseLinearPath, int]:
    """Extend ``path`` until log 𝒜(horizon) ≥ ``log_level``."""
    extensions = 0
    while path.log_mass(alpha)[-1] < log_level:
        if extender is None or extensions >= max_extensions:
            raise ExtensionLimitError(
                f"log level {log_level:.6g} not reached after {extensions} extension(s) "
                f"(horizon {path.horizon:.6g}, log mass {path.log_mass(alpha)[-1]:.6g})"
            )
        path = extender.extend(path, log_level - path.log_mass(alpha)[-1], alpha)
        extensions += 1
    return path, extensions


def solve_tau_log(path: PiecewiseLinearPath, alpha: float, log_levels,
                  extender: PathExtender | None = None,
                  max_extensions: int = DEFAULT_MAX_EXTENSIONS) -> TauSolution:
    """τ(y) = inf{u : 𝒜(u) ≥ y} for levels given as log y (−inf means y = 0)."""
    levels = np.atleast_1d(np.asarray(log_levels, dtype=float))
    finite = levels[np.isfinite(levels)]
    extensions = 0
    if finite.size:
        path, extensions = ensure_mass(path, alpha, float(finite.max()), extender, max_extensions)
    cum = path.log_mass(alpha)
    tau = np.zeros(levels.shape)
    live = np.isfinite(levels)
    lv = levels[live]
    k = np.searchsorted(cum, lv, side="left") - 1
    k = np.clip(k, 0, path.n_segments - 1)
    # np.where evaluates every branch; only the selected one has to be finite
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_rem = lv + np.log1p(-np.exp(cum[k] - lv))
        x = path.starts[k]
        mu = path.slopes[k]
        am = alpha * mu
        w = np.log(np.abs(am)) + log_rem - alpha * x
        r = np.where(am > 0, np.logaddexp(0.0, w) / am,
                     np.where(am < 0, np.log1p(-np.exp(w)) / am, np.exp(log_rem - alpha * x)))
    dt = np.diff(path.times)[k]
    # rounding can push the level a hair past the segment end
    r = np.where(np.isnan(r), dt, r)
    tau[live] = path.times[k] + np.clip(r, 0.0, dt)
    return TauSolution(tau=tau, path=path, extensions=extensions)


def inverse_tau(path: PiecewiseLinearPath, alpha: float, y: float,
                extender: PathExtender | None = None,
                max_extensions: int = DEFAULT_MAX_EXTENSIONS) -> float:
    """τ(y), extending the path lazily through ``extender`` when needed."""
    if y < 0:
        raise DomainError(f"level must be >= 0, got {y}")
    log_y = math.log(y) if y > 0 else -math.inf
    return float(solve_tau_log(path, alpha, log_y, extender, max_extensions).tau[0])


@dataclass(frozen=True)
class ClockResult:
    """T(t) = ∫₀ᵗ ds/X_s^α computed as τ(t·a^{−α})."""
    t_target: float
    clock_value: float
    levy_time_used: float
    extensions: int
    path: PiecewiseLinearPath = field(repr=False, compare=False)


def clock_levels_log(alpha: float, a: float, log_t) -> np.ndarray:
    """log(t·a^{−α}) from log t."""
    if a <= 0:
        raise PreconditionError(f"starting point must be > 0, got {a}")
    return np.asarray(log_t, dtype=float) - alpha * math.log(a)


def clock_value(path: PiecewiseLinearPath, alpha: float, a: float, t: float,
                extender: PathExtender | None = None,
                max_extensions: int = DEFAULT_MAX_EXTENSIONS) -> ClockResult:
    """The clock of the pssMp started at ``a``, at time ``t``."""
    if t < 0:
        raise PreconditionError(f"t must be >= 0, got {t}")
    log_t = math.log(t) if t > 0 else -math.inf
    sol = solve_tau_log(path, alpha, clock_levels_log(alpha, a, log_t), extender, max_extensions)
    value = float(sol.tau[0])
    return ClockResult(t_target=t, clock_value=value, levy_time_used=value,
                       extensions=sol.extensions, path=sol.path)


def reconstruct_X(path: PiecewiseLinearPath, alpha: float, a: float, times,
                  extender: PathExtender | None = None,
                  max_extensions: int = DEFAULT_MAX_EXTENSIONS) -> np.ndarray:
    """X_t = a·exp ξ(τ(t·a^{−α})) at the requested times."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise PreconditionError("times must be >= 0")
    with np.errstate(divide="ignore"):
        log_t = np.log(times)
    sol = solve_tau_log(path, alpha, clock_levels_log(alpha, a, log_t), extender, max_extensions)
    return a * np.exp(sol.path.value_at(sol.tau)).reshape(times.shape)


def ou_path(path: PiecewiseLinearPath, alpha: float, a: float, t_grid,
            extender: PathExtender | None = None, *, shifted: bool = False,
            max_extensions: int = DEFAULT_MAX_EXTENSIONS) -> np.ndarray:
    """U(t) = e^{−t/α}X(e^t), or e^{−t/α}X(e^t − 1) with ``shifted``."""
    t_grid = np.asarray(t_grid, dtype=float)
    clock_times = np.expm1(t_grid) if shifted else np.exp(t_grid)
    x = reconstruct_X(path, alpha, a, clock_times, extender, max_extensions)
    return np.exp(-t_grid / alpha) * x
