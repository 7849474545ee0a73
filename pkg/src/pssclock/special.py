"""Gamma-family special functions on the positive half-line."""

from __future__ import annotations

import numpy as np
from scipy import special as sc

from pssclock.errors import DomainError

EULER_GAMMA = float(np.euler_gamma)


def _check_positive(x, name: str):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} requires x > 0, got {x!r}")
    return arr


def log_gamma(x):
    """log Γ(x) for x > 0."""
    arr = _check_positive(x, "log_gamma")
    out = sc.gammaln(arr)
    return float(out) if out.ndim == 0 else out


def digamma(x):
    """Ψ(x) = Γ′(x)/Γ(x) for x > 0."""
    arr = _check_positive(x, "digamma")
    out = sc.psi(arr)
    return float(out) if out.ndim == 0 else out


def gamma_derivative(x: float) -> float:
    """Γ′(x) = Γ(x)Ψ(x) for x > 0."""
    return float(np.exp(log_gamma(x)) * digamma(x))
