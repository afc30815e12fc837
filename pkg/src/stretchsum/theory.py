"""
Rate function, exact supremum probabilities and finite-n certified bounds for
P(S > x), S = sum_i a_i X_i, with X stretched-exponential.

Limit statement being checked numerically::

    a_max(n)**r * log P(S_n > x)  ->  -kappa * (x - D * E[X])**r.

The certified bounds below are non-asymptotic versions of the two halves of
that statement, valid for the realised (truncated) weight vector:

lower
    P(S > x) >= P(a_max X_m > x - S_- E[X] (1-eps)) * P(rest >= S_- E[X] (1-eps)),
    with the second factor bounded below through Chebyshev's inequality.
upper
    P(S > x) <= P(max_i a_i X_i > A) + exp(-lam x) prod_i E[exp(lam a_i X); a_i X <= A],
    with A = x - sum(a) E[X], each truncated moment generating function
    evaluated by adaptive quadrature and lam minimised over a grid.

:func:`closed_form_upper_bound` additionally evaluates the explicit constant
chain that turns the second half into the asymptotic statement, and reports
which of its "n large enough" steps actually hold at the given n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp

from . import dist
from .dist import StretchedExpParams, TailEnvelope
from .errors import DomainError, NumericError, RegimeError
from .weights import WeightVector

DEFAULT_LAMBDA_FACTORS = tuple(2.0 ** (k / 2) for k in range(-12, 5))
# log-integrand level below which a stretch of the quadrature range is bounded, not integrated
_NEGLIGIBLE_LOG = -100.0


@dataclass(frozen=True)
class BoundConfig:
    """
    Tuning knobs for the certified bounds.

    ``lambda_grid`` holds absolute lambda values; when left empty the grid is
    ``lambda_factors`` times the centre B * A**(r-1) / a_max**r with
    B = kappa - 2 eps. ``envelope=None`` means the exact law's envelope.
    With ``refine`` the best grid point is polished by a bounded scalar search
    between its grid neighbours.
    """

    epsilon: float = 0.1
    lambda_grid: tuple = ()
    lambda_factors: tuple = DEFAULT_LAMBDA_FACTORS
    quad_rel_tol: float = 1e-9
    envelope: TailEnvelope | None = None
    max_quad_groups: int = 2000
    refine: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if not self.quad_rel_tol > 0:
            raise DomainError("quad_rel_tol must be positive")
        if any(not lam > 0 for lam in self.lambda_grid):
            raise DomainError("lambda grid values must be positive")
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))
        object.__setattr__(self, "lambda_factors", tuple(float(v) for v in self.lambda_factors))

    def check(self, params: StretchedExpParams):
        if not 0 < self.epsilon < params.kappa / 2:
            raise DomainError(f"epsilon must lie in (0, kappa/2), got {self.epsilon}")


@dataclass(frozen=True)
class BoundReport:
    """
    Certified bounds on log P(S > x).

    ``components`` carries the pieces: ``sup`` and ``chernoff`` log-terms of
    the upper bound, ``chebyshev_factor`` of the lower bound.
    ``log_upper_full`` widens ``log_upper`` to cover the weight mass dropped by
    truncation (equal to ``log_upper`` when nothing was dropped).
    """

    log_lower: float
    log_upper: float
    lambda_used: float
    A_used: float
    components: dict = field(default_factory=dict)
    log_upper_full: float = math.nan


def _check_positive_x(x):
    if not x > 0:
        raise DomainError(f"threshold must be positive, got {x}")


def rate_function(x: float, params: StretchedExpParams, D: float) -> float:
    """kappa * (x - D E[X])**r; raises RegimeError unless x > D E[X]."""
    if D < 0:
        raise DomainError("D must be non-negative")
    gap = x - D * dist.mean(params)
    if not gap > 0:
        raise RegimeError(
            f"x={x} is not in the large-deviation regime (needs x > D*E[X] = {x - gap})"
        )
    return params.kappa * gap**params.r


def predicted_log_prob(weight_vec: WeightVector, x: float, params: StretchedExpParams,
                       D: float) -> float:
    """First-order prediction log P ~ -I(x) / a_max**r."""
    return -rate_function(x, params, D) / weight_vec.a_max**params.r


# ---------------------------------------------------------------------------
# supremum problem


def _unique_counts(weights):
    w = weights[weights > 0]
    vals, counts = np.unique(w, return_counts=True)
    return vals, counts


def log_sup_exceedance_prob(weight_vec: WeightVector, x: float,
                            params: StretchedExpParams) -> float:
    """log P(max_i a_i X_i > x) computed from the exact product of CDFs."""
    _check_positive_x(x)
    vals, counts = _unique_counts(weight_vec.weights)
    if vals.size == 1 and counts[0] == 1:
        return float(dist.log_tail(params, x / vals[0]))
    log_f = dist.log_cdf(params, x / vals)
    s = math.fsum(counts * log_f)
    if s == 0.0:
        # every factor rounds to 1: fall back to the first-order sum of tails
        return float(logsumexp(dist.log_tail(params, x / vals), b=counts))
    return math.log(-math.expm1(s))


def sup_exceedance_prob(weight_vec: WeightVector, x: float, params: StretchedExpParams) -> float:
    """P(max_i a_i X_i > x) = 1 - prod_i F(x / a_i)."""
    return math.exp(log_sup_exceedance_prob(weight_vec, x, params))


def sup_lower_bound(weight_vec: WeightVector, x: float, params: StretchedExpParams) -> float:
    """log P(X > x / a_max): only the largest weight is allowed to exceed."""
    _check_positive_x(x)
    return float(dist.log_tail(params, x / weight_vec.a_max))


def sup_union_upper_bound(weight_vec: WeightVector, x: float,
                          params: StretchedExpParams) -> float:
    """log sum_i P(X > x / a_i), capped at 0."""
    _check_positive_x(x)
    vals, counts = _unique_counts(weight_vec.weights)
    return min(0.0, float(logsumexp(dist.log_tail(params, x / vals), b=counts)))


# ---------------------------------------------------------------------------
# elementary estimate for the truncated exponential moment


def elementary_bound(a: float, b: float, envelope: TailEnvelope, r: float) -> float:
    """
    Upper bound k / (1 - b/B') * exp(-(B' - b) a**r) on E[(exp(b X**r) - 1); X > a]
    for any X with P(X > t) <= k exp(-B' t**r).
    """
    if not a > 0:
        raise DomainError("a must be positive")
    if not 0 <= b < envelope.B_prime:
        raise DomainError(f"need 0 <= b < B' = {envelope.B_prime}, got b={b}; the bound diverges")
    Bp = envelope.B_prime
    return envelope.k / (1.0 - b / Bp) * math.exp(-(Bp - b) * a**r)


# ---------------------------------------------------------------------------
# truncated moment generating function


def _excess_mgf(c: float, U: float, params: StretchedExpParams, rel_tol: float) -> float:
    """
    Upper estimate of J = E[(exp(c X) - 1); kappa X**r <= U].

    With u = kappa t**r the integrand is (exp(c t(u)) - 1) exp(-u) on [0, U],
    with log-integrand g(u) = c t(u) - u convex. Stretches where g < -100 are
    bounded by their length times exp(max of g at the stretch ends), everything
    else is integrated adaptively. The returned value includes the quadrature
    error estimate and a relative inflation by ``rel_tol``.
    """
    if U <= 0 or c <= 0:
        return 0.0
    kappa, inv_r = params.kappa, 1.0 / params.r

    def t_of(u):
        return (u / kappa) ** inv_r

    def g(u):
        return c * t_of(u) - u

    def integrand(u):
        ct = c * t_of(u)
        # (e^{ct} - 1) e^{-u} without overflow
        return math.exp(ct - u) * -math.expm1(-ct)

    # stationary point of g: c/(r kappa) (u/kappa)**(1/r - 1) = 1
    u_star = kappa * (params.r * kappa / c) ** (1.0 / (inv_r - 1.0))
    u_star = min(u_star, U)
    pieces = []
    extra = 0.0
    if g(u_star) >= _NEGLIGIBLE_LOG:
        pieces.append((0.0, U, [u_star] if 0 < u_star < U else None))
    else:
        lo = optimize.brentq(lambda u: g(u) - _NEGLIGIBLE_LOG, 0.0, u_star, xtol=1e-12, rtol=1e-14)
        pieces.append((0.0, lo, None))
        if g(U) >= _NEGLIGIBLE_LOG:
            hi = optimize.brentq(lambda u: g(u) - _NEGLIGIBLE_LOG, u_star, U,
                                 xtol=1e-12, rtol=1e-14)
            pieces.append((hi, U, None))
        else:
            hi = U
        extra = (hi - lo) * math.exp(max(g(lo), g(hi)))

    total = extra
    for lo, hi, pts in pieces:
        if hi <= lo:
            continue
        val, err, *info = integrate.quad(integrand, lo, hi, points=pts, epsabs=0.0,
                                         epsrel=rel_tol, limit=500, full_output=1)
        if len(info) > 1 and err > 10 * rel_tol * abs(val) + 1e-300:
            raise NumericError(f"quadrature did not converge on [{lo}, {hi}]: {info[1]}")
        total += val + err
    return total * (1.0 + rel_tol)


def log_truncated_mgf(a: float, lam: float, A: float, params: StretchedExpParams,
                      rel_tol: float = 1e-9) -> float:
    """Upper estimate of log E[exp(lam a X); a X <= A]."""
    U = params.kappa * (A / a) ** params.r
    J = _excess_mgf(lam * a, U, params, rel_tol)
    return math.log1p(J - math.exp(-U))


def _weight_groups(weight_vec: WeightVector, max_groups: int):
    """
    (a_hi, a_lo, count) triples covering the positive weights.

    Exact unique values when there are few of them; otherwise geometric
    buckets, where E[exp(lam a X); a X <= A] <= E[exp(lam a_hi X); a_lo X <= A]
    keeps the bound valid.
    """
    vals, counts = _unique_counts(weight_vec.weights)
    if vals.size <= max_groups:
        return [(float(v), float(v), int(c)) for v, c in zip(vals, counts)]
    logs = np.log(vals)
    edges = np.linspace(logs[0], logs[-1], max_groups + 1)
    which = np.clip(np.searchsorted(edges, logs, side="right") - 1, 0, max_groups - 1)
    groups = []
    for g in range(max_groups):
        sel = which == g
        if np.any(sel):
            groups.append((float(vals[sel].max()), float(vals[sel].min()), int(counts[sel].sum())))
    return groups


def _log_chernoff(groups, lam, x, A, params, rel_tol):
    terms = []
    for a_hi, a_lo, count in groups:
        U = params.kappa * (A / a_lo) ** params.r
        J = _excess_mgf(lam * a_hi, U, params, rel_tol)
        terms.append(count * math.log1p(J - math.exp(-U)))
    return -lam * x + math.fsum(terms)


def default_lambda(weight_vec: WeightVector, A: float, params: StretchedExpParams,
                 epsilon: float) -> float:
    """lam = (kappa - 2 eps) * A**(r-1) / a_max**r."""
    return (params.kappa - 2 * epsilon) * A ** (params.r - 1) / weight_vec.a_max**params.r


def _upper(weight_vec, x, params, config):
    A = x - weight_vec.sum * dist.mean(params)
    if not A > 0:
        raise RegimeError(f"A = x - sum(a) E[X] = {A} must be positive")
    if config.lambda_grid:
        grid = config.lambda_grid
    else:
        lam0 = default_lambda(weight_vec, A, params, config.epsilon)
        grid = tuple(lam0 * f for f in config.lambda_factors)
    groups = _weight_groups(weight_vec, config.max_quad_groups)
    grid = sorted(grid)
    vals = [_log_chernoff(groups, lam, x, A, params, config.quad_rel_tol) for lam in grid]
    i = int(np.argmin(vals))
    best, best_lam = vals[i], grid[i]
    if config.refine and len(grid) > 1:
        # any lam > 0 gives a valid bound, so polishing between grid neighbours is free
        lo, hi = math.log(grid[max(i - 1, 0)]), math.log(grid[min(i + 1, len(grid) - 1)])
        res = optimize.minimize_scalar(
            lambda s: _log_chernoff(groups, math.exp(s), x, A, params, config.quad_rel_tol),
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-4},
        )
        if res.fun < best:
            best, best_lam = float(res.fun), math.exp(res.x)
    log_sup = log_sup_exceedance_prob(weight_vec, A, params)
    log_upper = min(0.0, float(np.logaddexp(log_sup, best)))
    return log_upper, best_lam, A, log_sup, best


def certified_upper_bound(weight_vec: WeightVector, x: float, params: StretchedExpParams,
                          config: BoundConfig | None = None) -> BoundReport:
    """
    Non-asymptotic upper bound on log P(sum_i a_i X_i > x) for the truncated sum.

    ``log_upper_full`` also covers the dropped tail mass tau through
    P(S > x) <= P(S_T > x - eta) + tau E[X] / eta (Markov), with eta chosen so
    the Markov term is 1e-3 of the truncated bound, capped at A / 2.
    """
    config = config or BoundConfig()
    config.check(params)
    _check_positive_x(x)
    log_upper, lam, A, log_sup, log_ch = _upper(weight_vec, x, params, config)
    full = log_upper
    tau = weight_vec.tail_sum_bound
    if tau > 0:
        m = dist.mean(params)
        eta = min(tau * m / (1e-3 * math.exp(log_upper)), A / 2)
        shifted = _upper(weight_vec, x - eta, params, config)[0]
        full = min(0.0, float(np.logaddexp(shifted, math.log(tau * m / eta))))
    return BoundReport(
        log_lower=-math.inf,
        log_upper=log_upper,
        lambda_used=lam,
        A_used=A,
        components={"sup": log_sup, "chernoff": log_ch},
        log_upper_full=full,
    )


def certified_lower_bound(weight_vec: WeightVector, x: float, params: StretchedExpParams,
                          epsilon: float) -> BoundReport:
    """
    Lower bound on log P(sum_i a_i X_i > x) from one large term plus a
    Chebyshev estimate for the others.

    With S_- = sum - a_max and Q = Var[X] (sum_sq - a_max**2) / (eps E[X] S_-)**2,
    log_lower = log tail((x - S_- E[X] (1-eps)) / a_max) + log(1 - Q),
    which is -inf (vacuous) once Q >= 1.
    """
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    _check_positive_x(x)
    m, v = dist.mean(params), dist.variance(params)
    a_max = weight_vec.a_max
    s_minus = max(weight_vec.sum - a_max, 0.0)
    level = s_minus * m * (1.0 - epsilon)
    arg = (x - level) / a_max
    log_big = float(dist.log_tail(params, arg)) if arg > 0 else 0.0
    if s_minus > 0:
        rest_sq = max(weight_vec.sum_squares - a_max * a_max, 0.0)
        q = v * rest_sq / (epsilon * m * s_minus) ** 2
    else:
        q = 0.0
    log_cheb = math.log1p(-q) if q < 1 else -math.inf
    return BoundReport(
        log_lower=log_big + log_cheb,
        log_upper=0.0,
        lambda_used=math.nan,
        A_used=x - level,
        components={"single_term": log_big, "chebyshev_factor": 1.0 - min(q, 1.0)},
        log_upper_full=0.0,
    )


def lower_epsilon_schedule(weight_vec: WeightVector, params: StretchedExpParams) -> float:
    """eps_n = a_max**(r/2): both eps_n and the Chebyshev remainder vanish as n grows."""
    return min(weight_vec.a_max ** (params.r / 2), 0.5)


# ---------------------------------------------------------------------------
# explicit constant chain


@dataclass(frozen=True)
class ClosedFormBound:
    """
    Explicit closed-form upper bound and the validity of its steps.

    ``log_bound`` is a true bound on log P(S > x) only when ``certified``;
    otherwise it is the asymptotic-only value. ``limit_value`` is the
    eps-dependent limit of a_max**r * log_bound as n grows, which tends to
    -I(x) as eps -> 0.
    """

    log_bound: float
    sup_term: float
    chernoff_term: float
    limit_value: float
    conditions: dict
    certified: bool


def closed_form_upper_bound(weight_vec: WeightVector, x: float, params: StretchedExpParams,
                            config: BoundConfig | None = None) -> ClosedFormBound:
    """
    Evaluate the constant chain B = kappa - 2 eps, B' = kappa - eps,
    K = eps**(1+r) B**-r A**(r(1-r)) / 2, c_eps = k (kappa - eps) / eps,
    working with weights b_i = a_i / x and threshold 1.
    """
    config = config or BoundConfig()
    config.check(params)
    _check_positive_x(x)
    kappa, r, eps = params.kappa, params.r, config.epsilon
    env = config.envelope or dist.tail_envelope(params)
    m = dist.mean(params)
    vals, counts = _unique_counts(weight_vec.weights)
    b = vals / x
    b_max, b_sum = float(b[-1]), float(np.dot(b, counts))
    A = 1.0 - b_sum * m
    if not A > 0:
        raise RegimeError(f"A = 1 - sum(b) E[X] = {A} must be positive")
    B, Bp = kappa - 2 * eps, kappa - eps
    conds = {}
    conds["envelope_exponent"] = env.B_prime >= Bp
    conds["expm1_linear"] = math.expm1(eps) / eps <= 1 + eps
    conds["mean_margin"] = 1 - (1 + eps) * b_sum * m > 0

    # supremum term at threshold A: weights c_i = b_i / A
    c = b / A
    c_max, c_sum = float(c[-1]), float(np.dot(c, counts))
    y = eps * Bp * c ** (-r)
    conds["sup_exp_vs_power"] = bool(np.all(-y <= (-2.0 / r) * np.log(y)))
    sup_term = (-(1 - eps) * Bp * c_max ** (-r)
                + math.log(env.k) - (2.0 / r) * math.log(eps * Bp)
                + math.log(c_max * c_sum))

    # truncated Chernoff term at the default lambda (threshold normalised to 1)
    lam = B * A ** (r - 1) / b_max**r
    K = eps ** (1 + r) * B ** (-r) * A ** (r * (1 - r)) / 2
    c_eps = env.k * Bp / eps
    yk = K * (b_max**r / b) ** r
    conds["chernoff_exp_vs_power"] = bool(np.all(-yk <= (-1.0 / r) * np.log(yk)))
    remainder = (c_eps * K ** (-1.0 / r) * math.exp(-K * b_max ** (-(1 - r) * r))
                 * b_max ** (-r) * b_sum)
    chernoff_term = -lam + (1 + eps) * lam * m * b_sum + remainder

    log_bound = min(0.0, float(np.logaddexp(sup_term, chernoff_term)))
    limit_value = -(x**r) * B * A ** (r - 1) * (1 - (1 + eps) * m * b_sum)
    return ClosedFormBound(log_bound, sup_term, chernoff_term, limit_value, conds,
                           all(conds.values()))
