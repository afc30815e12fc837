"""
Weight arrays a_i(n) for the weighted sums S_n = sum_i a_i(n) X_i.

Built-in families
-----------------
cramer
    a_i(n) = 1/n for i <= n (plain sample mean).
remainder
    a_i(n) = sigma_i / rho_n for i >= n with sigma_i = i**-p. The default
    normaliser rho_n = sum_{i>=n} sigma_i gives row sums equal to one.
moving_average
    a_i(n) = sigma_i / norm_n on the window m_n <= i < m_n + phi_n, with
    phi_n = ceil(sqrt(n)) and m_n = n by default; the window sum of sigma is
    the default normaliser.
explicit
    caller-provided finite arrays, either one array for every n or a mapping
    from n to an array.

Infinite families are truncated to a finite support; the omitted mass is
bounded with sum_{i>M} i**-p <= M**(1-p) / (p-1).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.special import zeta

from .errors import ConfigError, DomainError, ResourceError

MAX_TERMS = 10**8


class FamilyKind(str, enum.Enum):
    CRAMER = "cramer"
    REMAINDER = "remainder"
    MOVING_AVERAGE = "moving_average"
    EXPLICIT = "explicit"


def _parse_rule(rule, name):
    """'sqrt', 'n', 'linear', or an integer constant."""
    if isinstance(rule, (int, np.integer)):
        return int(rule)
    rule = str(rule).strip()
    if rule in ("sqrt", "n", "linear"):
        return rule
    try:
        return int(rule)
    except ValueError:
        raise ConfigError(f"unknown {name} rule {rule!r}") from None


def _apply_rule(rule, n):
    if rule == "sqrt":
        return math.isqrt(n - 1) + 1 if n > 1 else 1  # ceil(sqrt(n))
    if rule in ("n", "linear"):
        return n
    return int(rule)


@dataclass(frozen=True)
class WeightFamily:
    """Description of a row-indexed weight array; see the module docstring."""

    kind: FamilyKind
    p: float = 2.0
    rho: str = "tail"
    window: str | int = "sqrt"
    offset: str | int = "n"
    normalizer: str = "window_sum"
    explicit: object = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", FamilyKind(self.kind))
        if self.kind in (FamilyKind.REMAINDER, FamilyKind.MOVING_AVERAGE) and not self.p > 1:
            raise ConfigError(f"decay exponent p must exceed 1, got {self.p}")
        if self.rho not in ("tail", "unit"):
            raise ConfigError(f"unknown rho rule {self.rho!r}")
        if self.normalizer not in ("window_sum", "phi"):
            raise ConfigError(f"unknown normalizer {self.normalizer!r}")
        object.__setattr__(self, "window", _parse_rule(self.window, "window"))
        object.__setattr__(self, "offset", _parse_rule(self.offset, "offset"))
        if self.kind is FamilyKind.EXPLICIT:
            if self.explicit is None:
                raise ConfigError("explicit family needs weights")
            if isinstance(self.explicit, Mapping):
                table = {int(k): _check_explicit(v) for k, v in self.explicit.items()}
            else:
                table = _check_explicit(self.explicit)
            object.__setattr__(self, "explicit", table)

    @classmethod
    def cramer(cls):
        return cls(FamilyKind.CRAMER)

    @classmethod
    def remainder(cls, p=2.0, rho="tail"):
        return cls(FamilyKind.REMAINDER, p=p, rho=rho)

    @classmethod
    def moving_average(cls, p=2.0, window="sqrt", offset="n", normalizer="window_sum"):
        return cls(FamilyKind.MOVING_AVERAGE, p=p, window=window, offset=offset,
                   normalizer=normalizer)

    @classmethod
    def from_weights(cls, weights):
        """Explicit family: one array for all n, or a mapping n -> array."""
        return cls(FamilyKind.EXPLICIT, explicit=weights)


def _check_explicit(w):
    arr = np.asarray(w, dtype=float).ravel()
    if arr.size == 0:
        raise ConfigError("explicit weight list is empty")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise ConfigError("explicit weights must be finite and non-negative")
    if not np.any(arr > 0):
        raise ConfigError("explicit weights need at least one positive entry")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class WeightVector:
    """
    Truncated realisation of one row a_i(n).

    ``weights[k]`` is a_{first_index + k}(n). ``argmax_index`` is the least
    (1-based, absolute) index attaining ``a_max``. ``tail_sum_bound`` bounds
    the total weight left out of ``weights``.
    """

    n: int
    weights: np.ndarray
    first_index: int = 1
    tail_sum_bound: float = 0.0
    a_max: float = field(init=False)
    argmax_index: int = field(init=False)
    sum: float = field(init=False)
    sum_squares: float = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DomainError("weights must be a non-empty 1-d array")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite and non-negative")
        if not self.tail_sum_bound >= 0:
            raise DomainError("tail_sum_bound must be non-negative")
        if w.flags.writeable:
            w = w.copy()
            w.flags.writeable = False
        k = int(np.argmax(w))
        a_max = float(w[k])
        if not a_max > 0:
            raise DomainError("at least one weight must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "a_max", a_max)
        object.__setattr__(self, "argmax_index", self.first_index + k)
        object.__setattr__(self, "sum", float(np.sum(w)))
        object.__setattr__(self, "sum_squares", float(np.dot(w, w)))

    @property
    def positive(self) -> np.ndarray:
        """The strictly positive weights (the support used by estimators)."""
        w = self.weights
        return w if np.all(w > 0) else w[w > 0]

    @property
    def n_times_amax(self) -> float:
        # diagnostic only; the limiting rate does not depend on it
        return self.n * self.a_max

    def scaled(self, c: float) -> "WeightVector":
        """Weights multiplied by ``c`` (used to absorb a threshold into a_i)."""
        return WeightVector(self.n, self.weights * c, self.first_index, self.tail_sum_bound * c)

    def __len__(self):
        return self.weights.size


def _power_tail_bound(M: int, p: float) -> float:
    return M ** (1.0 - p) / (p - 1.0)


def _truncation_point(p: float, mass_scale: float, tol: float, start: int) -> int:
    """Smallest M >= start with M**(1-p) / (p-1) * mass_scale <= tol."""
    if not tol > 0:
        raise ResourceError("infinite family cannot be represented exactly (tol = 0)")
    m = (tol * (p - 1.0) / mass_scale) ** (1.0 / (1.0 - p))
    if not math.isfinite(m) or m - start + 1 > MAX_TERMS:
        raise ResourceError(
            f"meeting truncation_tol={tol:g} needs about {m:.3g} terms (limit {MAX_TERMS:g})"
        )
    M = max(start, math.ceil(m))
    while M > start and _power_tail_bound(M - 1, p) * mass_scale <= tol:
        M -= 1
    while _power_tail_bound(M, p) * mass_scale > tol:
        M += 1
    return M


def realize(family: WeightFamily, n: int, truncation_tol: float = 1e-9) -> WeightVector:
    """Materialise row ``n`` of ``family``, truncated to ``truncation_tol`` omitted mass."""
    n = int(n)
    if n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    if not truncation_tol >= 0:
        raise DomainError("truncation_tol must be non-negative")
    kind = family.kind

    if kind is FamilyKind.CRAMER:
        return WeightVector(n, np.full(n, 1.0 / n))

    if kind is FamilyKind.EXPLICIT:
        table = family.explicit
        if isinstance(table, dict):
            if n not in table:
                raise ConfigError(f"explicit family has no weights for n={n}")
            table = table[n]
        return WeightVector(n, table)

    p = float(family.p)
    if kind is FamilyKind.REMAINDER:
        rho = float(zeta(p, n)) if family.rho == "tail" else 1.0
        M = _truncation_point(p, 1.0 / rho, truncation_tol, n)
        idx = np.arange(n, M + 1, dtype=float)
        w = idx**-p / rho
        return WeightVector(n, w, first_index=n, tail_sum_bound=_power_tail_bound(M, p) / rho)

    if kind is FamilyKind.MOVING_AVERAGE:
        phi = _apply_rule(family.window, n)
        m = _apply_rule(family.offset, n)
        if phi < 1 or m < 1:
            raise ConfigError("window length and offset must be positive")
        sigma = np.arange(m, m + phi, dtype=float) ** -p
        norm = float(np.sum(sigma)) if family.normalizer == "window_sum" else float(phi)
        return WeightVector(n, sigma / norm, first_index=m)

    raise ConfigError(f"unsupported family kind {kind}")


class LimitSum(NamedTuple):
    D: float
    analytic: bool
    note: str


def limit_sum(family: WeightFamily) -> LimitSum:
    """Limit D of the row sums, analytic for the built-in families."""
    kind = family.kind
    if kind is FamilyKind.CRAMER:
        return LimitSum(1.0, True, "sum of n copies of 1/n")
    if kind is FamilyKind.REMAINDER:
        if family.rho == "tail":
            return LimitSum(1.0, True, "rho_n is the tail sum of sigma")
        return LimitSum(0.0, True, "unit rho_n: remainder sums of a summable sequence vanish")
    if kind is FamilyKind.MOVING_AVERAGE:
        if family.normalizer == "window_sum":
            return LimitSum(1.0, True, "window normalised by its own sigma sum")
        # sum_{window} i**-p / phi_n <= m_n**-p -> 0 for offsets m_n -> infinity
        if family.offset in ("n", "linear"):
            return LimitSum(0.0, True, "phi-normalised window with growing offset")
        return LimitSum(float("nan"), False, "no analytic limit for a fixed offset")
    table = family.explicit
    if isinstance(table, dict):
        table = table[max(table)]
    return LimitSum(float(np.sum(table)), False, "no analytic limit: last realised sum")


def load_explicit(path) -> np.ndarray:
    """Read one weight per line; blank lines and '#' comments are ignored."""
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: not a decimal number: {line!r}") from None
    return _check_explicit(values)


def default_truncation_tol(x: float, D: float, mean_x: float) -> float:
    """Omitted mass small enough that its mean shift is negligible at x."""
    return 1e-9 * (x - D * mean_x) / mean_x
