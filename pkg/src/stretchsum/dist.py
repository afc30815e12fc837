"""
Stretched-exponential (Weibull-type) law with P(X > t) = exp(-kappa * t**r).

The law is fixed exactly rather than only asymptotically, so the envelope
constants used by the bound machinery are sharp (k = 1, B' = kappa) and every
inequality can be checked at finite n.

Substituting u = kappa * t**r turns X into a standard exponential variable;
several routines here and in :mod:`stretchsum.theory` rely on that change of
variables to avoid the t**(r-1) density singularity at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class StretchedExpParams:
    """Tail scale ``kappa > 0`` and tail exponent ``0 < r < 1``."""

    kappa: float
    r: float

    def __post_init__(self):
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise DomainError(f"kappa must be positive and finite, got {self.kappa}")
        if not 0 < self.r < 1:
            raise DomainError(f"r must lie in (0, 1), got {self.r}")


@dataclass(frozen=True)
class TailEnvelope:
    """Global envelope P(X > t) <= k * exp(-B_prime * t**r) for all t > 0."""

    k: float
    B_prime: float

    def __post_init__(self):
        if not self.k > 0 or not self.B_prime > 0:
            raise DomainError("envelope constants must be positive")


def _nonneg(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError("tail argument must be non-negative")
    return t


def _scalar_or_array(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def log_tail(params: StretchedExpParams, t):
    """log P(X > t) = -kappa * t**r."""
    t = _nonneg(t)
    return _scalar_or_array(-params.kappa * t**params.r)


def tail(params: StretchedExpParams, t):
    """Survival function exp(-kappa * t**r); accepts scalars or arrays."""
    t = _nonneg(t)
    return _scalar_or_array(np.exp(-params.kappa * t**params.r))


def cdf(params: StretchedExpParams, t):
    t = _nonneg(t)
    return _scalar_or_array(-np.expm1(-params.kappa * t**params.r))


def log_cdf(params: StretchedExpParams, t):
    """log P(X <= t), accurate when the tail is tiny (log1p of -tail)."""
    t = _nonneg(t)
    with np.errstate(divide="ignore"):
        return _scalar_or_array(np.log1p(-np.exp(-params.kappa * t**params.r)))


def density(params: StretchedExpParams, t):
    """kappa * r * t**(r-1) * exp(-kappa * t**r); infinite at t = 0."""
    t = _nonneg(t)
    k, r = params.kappa, params.r
    with np.errstate(divide="ignore"):
        return _scalar_or_array(k * r * t ** (r - 1.0) * np.exp(-k * t**r))


def quantile_from_tail(params: StretchedExpParams, p):
    """Inverse of :func:`tail`: the t with P(X > t) = p, for p in (0, 1]."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0) or np.any(p > 1):
        raise DomainError("tail probability must lie in (0, 1]")
    return _scalar_or_array((-np.log(p) / params.kappa) ** (1.0 / params.r))


def sample_from_uniform(params: StretchedExpParams, u):
    """Inverse-CDF map ((-ln U) / kappa)**(1/r) for U uniform on (0, 1)."""
    u = np.asarray(u, dtype=float)
    return _scalar_or_array((-np.log(u) / params.kappa) ** (1.0 / params.r))


def sample(params: StretchedExpParams, rng: np.random.Generator, size=None):
    """
    Draw from the law using ``rng``.

    -ln U is drawn directly as a standard exponential (same law, faster and
    never hits U = 0), then mapped through t = (E / kappa)**(1/r).
    """
    e = rng.standard_exponential(size)
    inv_r = 1.0 / params.r
    if inv_r == 2.0:
        out = e / params.kappa
        out *= out
    else:
        out = (e / params.kappa) ** inv_r
    return out


def gamma(z: float) -> float:
    """Gamma function; libm's tgamma, accurate to a few ulp for moderate z."""
    return math.gamma(z)


def raw_moment(params: StretchedExpParams, order: float) -> float:
    """E[X**order] = kappa**(-order/r) * Gamma(1 + order/r)."""
    s = order / params.r
    return params.kappa ** (-s) * gamma(1.0 + s)


def mean(params: StretchedExpParams) -> float:
    return raw_moment(params, 1.0)


def variance(params: StretchedExpParams) -> float:
    m = mean(params)
    return raw_moment(params, 2.0) - m * m


def tail_envelope(params: StretchedExpParams) -> TailEnvelope:
    """The exact law attains its envelope: k = 1, B' = kappa."""
    return TailEnvelope(k=1.0, B_prime=params.kappa)


def envelope_holds(params: StretchedExpParams, env: TailEnvelope, grid) -> bool:
    """Check tail(t) <= k * exp(-B' t**r) on ``grid`` (relative slack 1e-15)."""
    grid = _nonneg(grid)
    lhs = np.exp(-params.kappa * grid**params.r)
    rhs = env.k * np.exp(-env.B_prime * grid**params.r)
    return bool(np.all(lhs <= rhs * (1 + 1e-15)))
