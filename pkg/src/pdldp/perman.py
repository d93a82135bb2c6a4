"""Joint density of the k largest masses of PD(theta, alpha) via Perman's formula.

The density is evaluated in its finite-sum form

    f(p) = (alpha C)^k phat_{k+1}^(theta + k alpha - 1) / (p_1...p_k)^(1+alpha)
           * sum_{n=1}^{m} (-1)^(n+1) (alpha C)^(n-1) c(theta)/c(theta+(n+k-1)alpha) A_{n-1}(u)

with u = p_k / phat_k and m = max{j : u <= 1/j}.  The sum is truncated after
four terms (A_n up to a triple integral).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from scipy import integrate, special

from .errors import DomainError, NumericError, UnsupportedOrderError

MAX_TERMS = 4


class TruncationWarning(UserWarning):
    """The alternating series was cut after MAX_TERMS terms."""


@dataclass(frozen=True)
class PermanContext:
    theta: float
    alpha: float
    C: float = 1.0
    k: int = 1
    quad_tol: float = 1e-9

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError("theta must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        if not self.C > 0:
            raise DomainError("C must be positive")
        if self.k < 1:
            raise DomainError("k must be at least 1")


@dataclass(frozen=True)
class OrderedPoint:
    """Interior point p_1 >= ... >= p_k > 0, sum < 1 of the ordered simplex."""

    p: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in self.p)
        object.__setattr__(self, "p", p)
        if not p:
            raise DomainError("empty point")
        if any(b > a for a, b in zip(p, p[1:])):
            raise DomainError("coordinates must be descending")
        if p[-1] <= 0.0 or sum(p) >= 1.0:
            raise DomainError("point must satisfy p_k > 0 and sum(p) < 1")

    @property
    def k(self) -> int:
        return len(self.p)

    @property
    def p_hat(self) -> float:
        """1 - p_1 - ... - p_{k-1}."""
        return 1.0 - math.fsum(self.p[:-1])

    @property
    def p_hat_next(self) -> float:
        return 1.0 - math.fsum(self.p)

    @property
    def u(self) -> float:
        return self.p[-1] / self.p_hat

    @property
    def m(self) -> int:
        u = self.u
        j = max(int(math.floor(1.0 / u)), 1)
        while j > 1 and u > 1.0 / j:
            j -= 1
        while u <= 1.0 / (j + 1):
            j += 1
        return j


def log_c_const(alpha: float, beta: float, C: float = 1.0) -> float:
    """log of Gamma(beta+1) (C Gamma(1-alpha))^(beta/alpha) / Gamma(beta/alpha + 1)."""
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    if not beta > -alpha:
        raise DomainError(f"need beta > -alpha, got beta={beta!r}")
    return float(
        special.gammaln(beta + 1.0)
        + beta / alpha * math.log(C * math.gamma(1.0 - alpha))
        - special.gammaln(beta / alpha + 1.0)
    )


def log_a_n_integral(n: int, u: float, ctx: PermanContext) -> float:
    """log A_n(u); -inf when the integration region is empty.

    A_n(u) = int_D prod_{j=1}^n u_j^-(alpha+1) (1-u_j)^(theta+(k+j)alpha-1) du
    over u/(1-u) <= u_1 <= 1/n and u_{j-1}/(1-u_{j-1}) <= u_j <= 1/(n-j+1).
    The integrand is scaled by its value at the lower corner of D so large
    theta does not underflow.
    """
    if n not in (0, 1, 2, 3):
        if n > 3:
            raise UnsupportedOrderError(f"A_n is implemented for n <= 3, got n={n}")
        raise DomainError("n must be nonnegative")
    if n == 0:
        if not 0.0 < u < 1.0:
            raise DomainError("u must lie in (0, 1)")
        return 0.0
    if not 0.0 < u <= 1.0 / (n + 1) + 1e-15:
        raise DomainError(f"A_{n} needs 0 < u <= 1/{n + 1}, got {u!r}")
    if u >= 1.0 / (n + 1):
        return -math.inf

    alpha, theta, k = ctx.alpha, ctx.theta, ctx.k
    expo = [theta + (k + j) * alpha - 1.0 for j in range(1, n + 1)]
    corner = [u / (1.0 - j * u) for j in range(1, n + 1)]
    shift = sum(-(alpha + 1.0) * math.log(c) + e * math.log1p(-c) for c, e in zip(corner, expo))

    def nested(j: int, lower: float, log_acc: float) -> float:
        upper = 1.0 / (n - j + 1) if j < n else 1.0
        if lower >= upper:
            return 0.0
        e = expo[j - 1]

        def f(s):
            if s >= 1.0:
                # a node rounded onto the endpoint; a null set for the integral
                return 0.0
            lf = log_acc - (alpha + 1.0) * math.log(s) + e * math.log1p(-s)
            if j == n:
                return math.exp(lf - shift)
            return nested(j + 1, s / (1.0 - s), lf)

        # the integrand decays like (1-s)^theta away from the lower limit
        brk = [lower + w / (e + 1.0) for w in (1.0, 10.0) if lower + w / (e + 1.0) < upper]
        value, _ = integrate.quad(f, lower, upper, points=brk or None, limit=200,
                                  epsabs=0.0, epsrel=ctx.quad_tol)
        return value

    value = nested(1, u / (1.0 - u), 0.0)
    if value < 0.0 or not math.isfinite(value):
        raise NumericError(f"quadrature for A_{n}({u}) returned {value}")
    return -math.inf if value == 0.0 else shift + math.log(value)


def a_n_integral(n: int, u: float, ctx: PermanContext) -> float:
    return math.exp(log_a_n_integral(n, u, ctx))


class PermanEvaluation(NamedTuple):
    log_density: float
    m: int
    n_terms: int
    truncated: bool
    bracket: float
    terms: tuple


def perman_terms(p: Sequence[float], ctx: PermanContext) -> PermanEvaluation:
    """Finite-sum evaluation with diagnostics.

    ``bracket`` is the alternating sum divided by its first term; it lies in
    (0, 1] and equals 1 exactly when m = 1.  ``terms`` holds the signed
    relative terms, starting with 1.0.
    """
    pt = p if isinstance(p, OrderedPoint) else OrderedPoint(tuple(p))
    if pt.k != ctx.k:
        raise DomainError(f"context is for k={ctx.k} but the point has {pt.k} coordinates")
    theta, alpha, C, k = ctx.theta, ctx.alpha, ctx.C, ctx.k
    m = pt.m
    n_terms = min(m, MAX_TERMS)
    u = pt.u

    log_pref = (
        k * math.log(alpha * C)
        + (theta + k * alpha - 1.0) * math.log(pt.p_hat_next)
        - (1.0 + alpha) * math.fsum(math.log(v) for v in pt.p)
    )
    log_c_theta = log_c_const(alpha, theta, C)
    log_c_first = log_c_const(alpha, theta + k * alpha, C)
    terms = [1.0]
    for n in range(2, n_terms + 1):
        log_a = log_a_n_integral(n - 1, u, ctx)
        log_t = (n - 1) * math.log(alpha * C) + log_c_first - log_c_const(alpha, theta + (n + k - 1) * alpha, C) + log_a
        terms.append((-1.0) ** (n + 1) * math.exp(log_t))
    bracket = math.fsum(terms)
    if not bracket > 0.0:
        raise NumericError(f"alternating sum is {bracket!r} at p={pt.p} (terms {terms})")
    log_density = log_pref + log_c_theta - log_c_first + math.log(bracket)
    return PermanEvaluation(log_density, m, n_terms, m > MAX_TERMS, bracket, tuple(terms))


def perman_log_density(p: Sequence[float], ctx: PermanContext, strict: bool = False) -> float:
    """log f(p_1, ..., p_k).

    Points with m > 4 are evaluated with the series cut after four terms and a
    TruncationWarning; ``strict=True`` raises UnsupportedOrderError instead.
    """
    ev = perman_terms(p, ctx)
    if ev.truncated:
        msg = f"series truncated after {MAX_TERMS} of {ev.m} terms at p={tuple(p)}"
        if strict:
            raise UnsupportedOrderError(msg)
        warnings.warn(msg, TruncationWarning, stacklevel=2)
    return ev.log_density


def perman_density(p: Sequence[float], ctx: PermanContext, strict: bool = False) -> float:
    return math.exp(perman_log_density(p, ctx, strict))


def p1_interval_probability(lo: float, hi: float, theta: float, alpha: float, C: float = 1.0) -> float:
    """P(lo < P_1 < hi) by quadrature of the k = 1 density; needs lo >= 1/5."""
    if not 0.2 <= lo < hi <= 1.0:
        raise DomainError("interval must lie in [1/5, 1]")
    ctx = PermanContext(theta, alpha, C, 1)
    f = lambda s: math.exp(perman_terms((s,), ctx).log_density)
    # m changes at 1/2, 1/3, 1/4: integrate piecewise
    knots = sorted({lo, hi, *[b for b in (1 / 2, 1 / 3, 1 / 4) if lo < b < hi]})
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        hi_b = min(b, 1.0 - 1e-15)
        value, _ = integrate.quad(f, a, hi_b, limit=200, epsabs=1e-12, epsrel=1e-9)
        total += value
    return total
