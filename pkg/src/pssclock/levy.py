"""Catalog of Lévy families: Laplace exponents, domains and cumulants.

Every exponent is stored as ψ(m) = m·r(m) with the ratio r extended
continuously through m = 0, so ψ(0) is exactly zero even for the families
whose textbook form has a 0/0 there (Gamma poles).

Usage:
    fam, alpha = parse_family_spec("saw(a=1,b=2)")
    psi_eval(fam, 2.0)          # → 1.5
    cumulants(fam, alpha).v2    # → 4.0
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, fields
from typing import ClassVar, NamedTuple

import numpy as np
from scipy import special as sc

from pssclock.errors import DomainError, FamilySpecError, InconsistencyError, InvalidParameterError
from pssclock.special import EULER_GAMMA, digamma, gamma_derivative

logger = logging.getLogger(__name__)

# Relative agreement required between closed-form and numerical cumulants.
CUMULANT_RTOL = 1e-6
# Base finite-difference step, shrunk when a domain end is closer than 1.
FD_STEP = 1e-3


class Interval(NamedTuple):
    """Open interval (lo, hi); either end may be infinite."""
    lo: float
    hi: float

    def contains(self, m) -> bool:
        arr = np.asarray(m, dtype=float)
        return bool(np.all((arr > self.lo) & (arr < self.hi)))


@dataclass(frozen=True)
class Cumulants:
    """First two cumulants of ξ₁ and the limit variance σ²/(αp³)."""
    p: float
    sigma2: float
    v2: float


class LevyFamily:
    """Base for catalog entries.

    Subclasses are frozen dataclasses that provide the ratio r(m) = ψ(m)/m,
    the domain of ψ and closed forms for p = r(0) and σ² = 2r′(0).
    """

    name: ClassVar[str] = ""
    # "brownian", "compound_poisson" or None when no path simulator exists
    path_kind: ClassVar[str | None] = None

    def domain(self) -> Interval:
        raise NotImplementedError

    def ratio(self, m: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def closed_p(self) -> float:
        raise NotImplementedError

    def closed_sigma2(self) -> float:
        raise NotImplementedError

    def default_alpha(self) -> float:
        return 1.0

    def tabulated_values(self, alpha: float) -> tuple[float, float]:
        """(σ², v²) as usually tabulated for this family, kept for comparison only."""
        s2 = self.closed_sigma2()
        return s2, s2 / (alpha * self.closed_p() ** 3)

    def spec(self) -> str:
        """Canonical family specification string (without the index suffix)."""
        args = ",".join(f"{_SPEC_KEYS[self.name].get(f.name, f.name)}={fmt_number(getattr(self, f.name))}"
                        for f in fields(self))
        return f"{self.name}({args})"

    def _require(self, ok: bool, message: str) -> None:
        if not ok:
            raise InvalidParameterError(f"{self.name}: {message}")


@dataclass(frozen=True)
class BrownianDrift(LevyFamily):
    """ξ_t = 2B_t + 2νt; X is a squared Bessel process of dimension 2(1+ν)."""
    nu: float

    name: ClassVar[str] = "bessel"
    path_kind: ClassVar[str | None] = "brownian"

    def __post_init__(self):
        self._require(self.nu > 0, f"nu must be > 0, got {self.nu}")

    def domain(self) -> Interval:
        return Interval(-math.inf, math.inf)

    def ratio(self, m):
        return 2.0 * (m + self.nu)

    def closed_p(self) -> float:
        return 2.0 * self.nu

    def closed_sigma2(self) -> float:
        return 4.0

    def tabulated_values(self, alpha: float) -> tuple[float, float]:
        return 4.0, 1.0 / (4.0 * self.nu ** 3)


@dataclass(frozen=True)
class CpPosDrift(LevyFamily):
    """ξ_t = d·t + compound Poisson(rate a, Exp(b) jumps)."""
    d: float
    a: float
    b: float

    name: ClassVar[str] = "cp+"
    path_kind: ClassVar[str | None] = "compound_poisson"

    def __post_init__(self):
        self._require(self.d >= 0, f"d must be >= 0, got {self.d}")
        self._require(self.a > 0, f"a must be > 0, got {self.a}")
        self._require(self.b > 0, f"b must be > 0, got {self.b}")

    def domain(self) -> Interval:
        return Interval(-math.inf, self.b)

    def ratio(self, m):
        return self.d + self.a / (self.b - m)

    def closed_p(self) -> float:
        return self.d + self.a / self.b

    def closed_sigma2(self) -> float:
        return 2.0 * self.a / self.b ** 2

    def tabulated_values(self, alpha: float) -> tuple[float, float]:
        a, b, d = self.a, self.b, self.d
        return a / b ** 2, a * b ** 3 / (a + d * b) ** 3


@dataclass(frozen=True)
class CpNegDrift(LevyFamily):
    """ξ_t = −t + compound Poisson(rate a, Exp(b) jumps), b < a."""
    a: float
    b: float

    name: ClassVar[str] = "cp-"
    path_kind: ClassVar[str | None] = "compound_poisson"

    def __post_init__(self):
        self._require(self.b > 0, f"b must be > 0, got {self.b}")
        self._require(self.a > self.b, f"need b < a, got a={self.a}, b={self.b}")

    def domain(self) -> Interval:
        return Interval(-math.inf, self.b)

    def ratio(self, m):
        return -1.0 + self.a / (self.b - m)

    def closed_p(self) -> float:
        return (self.a - self.b) / self.b

    def closed_sigma2(self) -> float:
        return 2.0 * self.a / self.b ** 2

    def tabulated_values(self, alpha: float) -> tuple[float, float]:
        a, b = self.a, self.b
        return a / b ** 2, a * b / (a - b) ** 3


@dataclass(frozen=True)
class SawTooth(LevyFamily):
    """ξ_t = t − compound Poisson(rate a, Exp(b) jumps), b > a."""
    a: float
    b: float

    name: ClassVar[str] = "saw"
    path_kind: ClassVar[str | None] = "compound_poisson"

    def __post_init__(self):
        self._require(self.a > 0, f"a must be > 0, got {self.a}")
        self._require(self.b > self.a, f"need b > a, got a={self.a}, b={self.b}")

    def domain(self) -> Interval:
        return Interval(-self.b, math.inf)

    def ratio(self, m):
        return 1.0 - self.a / (self.b + m)

    def closed_p(self) -> float:
        return (self.b - self.a) / self.b

    def closed_sigma2(self) -> float:
        return 2.0 * self.a / self.b ** 2

    def tabulated_values(self, alpha: float) -> tuple[float, float]:
        a, b = self.a, self.b
        return a / b ** 2, a * b / (b - a) ** 3


@dataclass(frozen=True)
class ConditionedStable(LevyFamily):
    """Spectrally negative α-stable process conditioned to stay positive."""
    alpha_s: float

    name: ClassVar[str] = "condstable"

    def __post_init__(self):
        self._require(1.0 < self.alpha_s < 2.0, f"alpha must lie in (1,2), got {self.alpha_s}")

    def domain(self) -> Interval:
        return Interval(-self.alpha_s, math.inf)

    def ratio(self, m):
        # Γ(m+α)/Γ(m) = m·Γ(m+α)/Γ(m+1)
        return sc.gamma(m + self.alpha_s) * sc.rgamma(m + 1.0)

    def closed_p(self) -> float:
        return math.gamma(self.alpha_s)

    def closed_sigma2(self) -> float:
        a = self.alpha_s
        return 2.0 * (gamma_derivative(a) + EULER_GAMMA * math.gamma(a))

    def default_alpha(self) -> float:
        return self.alpha_s


@dataclass(frozen=True)
class HypergeometricStable(LevyFamily):
    """Lévy process behind the modulus of a d-dimensional stable process."""
    alpha_h: float
    dim: float

    name: ClassVar[str] = "hgstable"

    def __post_init__(self):
        self._require(self.alpha_h > 0, f"alpha must be > 0, got {self.alpha_h}")
        self._require(self.dim > self.alpha_h, f"need dim > alpha, got dim={self.dim}, alpha={self.alpha_h}")

    def domain(self) -> Interval:
        return Interval(-self.dim, self.alpha_h)

    def ratio(self, m):
        # −2^α Γ((α−m)/2)/Γ(−m/2) · Γ((m+d)/2)/Γ((m+d−α)/2), with 1/Γ(−m/2) = (−m/2)/Γ(1−m/2)
        al, d = self.alpha_h, self.dim
        return (2.0 ** (al - 1.0) * sc.gamma((al - m) / 2.0) * sc.gamma((m + d) / 2.0)
                * sc.rgamma(1.0 - m / 2.0) * sc.rgamma((m + d - al) / 2.0))

    def closed_p(self) -> float:
        al, d = self.alpha_h, self.dim
        return 2.0 ** (al - 1.0) * math.gamma(al / 2.0) * math.gamma(d / 2.0) / math.gamma((d - al) / 2.0)

    def closed_sigma2(self) -> float:
        al, d = self.alpha_h, self.dim
        return self.closed_p() * (digamma(d / 2.0) - EULER_GAMMA - digamma(al / 2.0) - digamma((d - al) / 2.0))

    def tabulated_values(self, alpha: float) -> tuple[float, float]:
        al, d = self.alpha_h, self.dim
        p = self.closed_p()
        s2 = p * (1.0 - EULER_GAMMA - digamma((d - al) / 2.0) - digamma(al / 2.0))
        return s2, s2 / (alpha * p ** 3)

    def default_alpha(self) -> float:
        return self.alpha_h


@dataclass(frozen=True)
class CBI(LevyFamily):
    """Stable continuous-state branching process with immigration, index κ."""
    kappa: float
    delta: float
    c: float = 1.0

    name: ClassVar[str] = "cbi"

    def __post_init__(self):
        self._require(0.0 < self.kappa < 1.0, f"kappa must lie in (0,1), got {self.kappa}")
        self._require(self.delta > self.kappa / (self.kappa + 1.0),
                      f"need delta > kappa/(kappa+1), got delta={self.delta}")
        self._require(self.c > 0, f"c must be > 0, got {self.c}")

    def domain(self) -> Interval:
        return Interval(-math.inf, self.kappa)

    def ratio(self, m):
        # c(κ − (κ+1)δ − m)Γ(κ−m)/Γ(−m), with 1/Γ(−m) = −m/Γ(1−m)
        k = self.kappa
        return self.c * ((k + 1.0) * self.delta - k + m) * sc.gamma(k - m) * sc.rgamma(1.0 - m)

    def closed_p(self) -> float:
        k = self.kappa
        return self.c * ((k + 1.0) * self.delta - k) * math.gamma(k)

    def closed_sigma2(self) -> float:
        k, dl = self.kappa, self.delta
        g = math.gamma(k)
        return 2.0 * self.c * (g + (k - (k + 1.0) * dl) * (gamma_derivative(k) + EULER_GAMMA * g))

    def tabulated_values(self, alpha: float) -> tuple[float, float]:
        s2 = self.closed_sigma2() / 2.0
        return s2, s2 / (alpha * self.closed_p() ** 3)

    def default_alpha(self) -> float:
        return self.kappa


FAMILIES: dict[str, type[LevyFamily]] = {
    cls.name: cls
    for cls in (BrownianDrift, CpPosDrift, CpNegDrift, SawTooth, ConditionedStable, HypergeometricStable, CBI)
}

# one parameter set per family, in catalog order
REPRESENTATIVE_SPECS = (
    "bessel(nu=1)",
    "cp+(d=1,a=2,b=3)",
    "cp-(a=3,b=1)",
    "saw(a=1,b=2)",
    "condstable(alpha=1.5)",
    "hgstable(alpha=1,dim=3)",
    "cbi(kappa=0.5,delta=0.9,c=1)",
)

# grammar key → dataclass field, where they differ
_SPEC_FIELDS: dict[str, dict[str, str]] = {
    "bessel": {},
    "cp+": {},
    "cp-": {},
    "saw": {},
    "condstable": {"alpha": "alpha_s"},
    "hgstable": {"alpha": "alpha_h"},
    "cbi": {},
}
_SPEC_KEYS = {name: {v: k for k, v in m.items()} for name, m in _SPEC_FIELDS.items()}

_SPEC_RE = re.compile(
    r"^\s*(?P<name>[a-z]+[+-]?)\s*\((?P<args>[^()]*)\)\s*(?:@\s*alpha\s*=\s*(?P<alpha>[^\s]+))?\s*$"
)


def fmt_number(x: float) -> str:
    return f"{x:.12g}"


def _number(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise FamilySpecError(f"{where}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise FamilySpecError(f"{where}: must be finite, got {text!r}")
    return value


def parse_family_spec(text: str) -> tuple[LevyFamily, float]:
    """Parse ``name(k=v,...)[@alpha=x]`` into a family and its self-similarity index."""
    match = _SPEC_RE.match(text)
    if not match:
        raise FamilySpecError(f"malformed family spec: {text!r}")
    name = match["name"]
    if name not in FAMILIES:
        raise FamilySpecError(f"unknown family {name!r} (known: {', '.join(FAMILIES)})")
    cls = FAMILIES[name]
    rename = _SPEC_FIELDS[name]
    known = {f.name for f in fields(cls)}
    kwargs: dict[str, float] = {}
    for part in filter(None, (s.strip() for s in match["args"].split(","))):
        key, sep, value = part.partition("=")
        key = key.strip()
        if not sep:
            raise FamilySpecError(f"{name}: expected key=value, got {part!r}")
        field_name = rename.get(key, key)
        if field_name not in known or key in rename.values() and key not in rename:
            raise FamilySpecError(f"{name}: unknown parameter {key!r}")
        if field_name in kwargs:
            raise FamilySpecError(f"{name}: parameter {key!r} given twice")
        kwargs[field_name] = _number(value.strip(), f"{name}.{key}")
    try:
        family = cls(**kwargs)
    except TypeError as exc:
        raise FamilySpecError(f"{name}: {exc}") from None
    alpha = _number(match["alpha"], f"{name}@alpha") if match["alpha"] else family.default_alpha()
    if alpha <= 0:
        raise FamilySpecError(f"{name}: self-similarity index must be > 0, got {alpha}")
    return family, alpha


def format_family_spec(family: LevyFamily, alpha: float) -> str:
    """Inverse of :func:`parse_family_spec`."""
    text = family.spec()
    if alpha != family.default_alpha():
        text += f"@alpha={fmt_number(alpha)}"
    return text


def psi_domain(family: LevyFamily) -> Interval:
    """Open interval on which ψ is finite."""
    return family.domain()


def psi_eval(family: LevyFamily, m):
    """Laplace exponent ψ(m) = log 𝔼 e^{mξ₁}; exactly 0 at m = 0."""
    dom = family.domain()
    if not dom.contains(m):
        raise DomainError(f"{family.spec()}: m={m!r} outside dom ψ = ({dom.lo}, {dom.hi})")
    arr = np.asarray(m, dtype=float)
    out = arr * family.ratio(arr)
    return float(out) if out.ndim == 0 else out


def _richardson(f, h: float) -> float:
    """One Richardson level for a second-order-accurate difference quotient f(h)."""
    return (4.0 * f(h / 2.0) - f(h)) / 3.0


def fd_step(family: LevyFamily) -> float:
    dom = family.domain()
    distance = min(-dom.lo, dom.hi)
    return FD_STEP * min(1.0, distance)


def numeric_cumulants(family: LevyFamily) -> tuple[float, float]:
    """(ψ′(0), ψ″(0)) from Richardson-extrapolated central differences."""
    h = fd_step(family)

    def psi(m: float) -> float:
        return psi_eval(family, m)

    def first(step: float) -> float:
        return (psi(step) - psi(-step)) / (2.0 * step)

    def second(step: float) -> float:
        return (psi(step) - 2.0 * psi(0.0) + psi(-step)) / step ** 2

    return _richardson(first, h), _richardson(second, h)


def _close(x: float, y: float, rtol: float) -> bool:
    return abs(x - y) <= rtol * max(abs(x), abs(y))


def cumulants(family: LevyFamily, alpha: float) -> Cumulants:
    """p = ψ′(0), σ² = ψ″(0) and v² = σ²/(αp³), cross-checked two ways."""
    if alpha <= 0:
        raise InvalidParameterError(f"self-similarity index must be > 0, got {alpha}")
    p, sigma2 = family.closed_p(), family.closed_sigma2()
    p_num, s2_num = numeric_cumulants(family)
    if not (_close(p, p_num, CUMULANT_RTOL) and _close(sigma2, s2_num, CUMULANT_RTOL)):
        raise InconsistencyError(
            f"{family.spec()}: closed form (p={p!r}, sigma2={sigma2!r}) disagrees with "
            f"finite differences (p={p_num!r}, sigma2={s2_num!r})"
        )
    if p <= 0:
        raise InvalidParameterError(f"{family.spec()}: need p = ψ′(0) > 0, got {p}")
    logger.debug("cumulants %s: p=%r sigma2=%r", family.spec(), p, sigma2)
    return Cumulants(p=p, sigma2=sigma2, v2=sigma2 / (alpha * p ** 3))
