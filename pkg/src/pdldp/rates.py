"""Rate functions and cumulant transforms of the large-deviation principles.

Rate values are plain floats; ``math.inf`` marks points outside the effective
domain and is never the product of an overflow.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericError, OrderingError
from .measures import BaseMeasure, MeasureSpec, PartitionSpec, SUM_TOL

INF = math.inf


def _check_alpha(alpha: float, allow_zero: bool = False) -> None:
    lo_ok = alpha >= 0.0 if allow_zero else alpha > 0.0
    if not (lo_ok and alpha < 1.0):
        raise DomainError(f"alpha out of range: {alpha!r}")


def rate_i1(u: float) -> float:
    """log 1/(1-u) on [0,1), infinite at u = 1."""
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"u must lie in [0, 1], got {u!r}")
    if u == 1.0:
        return INF
    return -math.log1p(-u)


def rate_pd_prefix(p: Sequence[float], ordered: bool = True) -> float:
    """log 1/(1 - sum p) for a finite or truncated sequence of masses.

    The same expression is the rate of the first k ranked masses, of the
    whole ranked sequence and of the GEM sequence; pass ``ordered=False``
    for the GEM case, where no ordering is required.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise DomainError("masses must be nonnegative")
    if ordered and np.any(np.diff(p) > 0):
        raise OrderingError("ranked masses must be in descending order")
    s = float(p.sum())
    if s > 1.0 + SUM_TOL:
        raise DomainError(f"masses sum to {s!r} > 1")
    if s >= 1.0 - SUM_TOL:
        return INF
    return -math.log1p(-s)


def logmgf_psi(lam: float, alpha: float) -> float:
    """log E exp(lam * sigma(1)) = Gamma(1-alpha)/alpha * (1 - (1-lam)**alpha) for lam <= 1."""
    _check_alpha(alpha)
    if lam > 1.0:
        return INF
    return math.gamma(1.0 - alpha) / alpha * (1.0 - (1.0 - lam) ** alpha)


def logmgf_L(lam: float) -> float:
    if lam >= 1.0:
        return INF
    return -math.log1p(-lam)


def logmgf_Lambda(lams: Sequence[float], alpha: float, cells: PartitionSpec) -> float:
    """Limiting scaled cumulant of the normalised increments over the cells."""
    _check_alpha(alpha)
    lams = np.asarray(lams, dtype=float)
    if lams.shape != cells.probs.shape:
        raise DomainError("need one lambda per cell")
    if np.any(lams > 1.0):
        return INF
    # alpha/Gamma(1-alpha) * sum a_i psi(lam_i) collapses to 1 - sum a_i (1-lam_i)^alpha
    s = float(np.sum(cells.probs * (1.0 - lams) ** alpha))
    if s <= 0.0:
        return INF
    return -math.log(s) / alpha


class NewtonResult(NamedTuple):
    value: float
    lambdas: np.ndarray
    iterations: int
    grad_norm: float


def _newton_conjugate(y: np.ndarray, a: np.ndarray, alpha: float, tol: float, max_iter: int) -> NewtonResult:
    """Maximise sum(y) - sum(w*y) + (1/alpha) log sum(a w^alpha) over w = 1 - lambda > 0.

    The objective is strictly concave in w.  Steps are cut back so that w stays
    positive (at most a 90% move towards zero) and then by Armijo backtracking;
    convergence is declared when max |g_i w_i| < tol.
    """

    def value(w):
        return float(y.sum() - np.dot(w, y) + math.log(np.dot(a, w**alpha)) / alpha)

    w = np.ones_like(y)
    f = value(w)
    g = np.zeros_like(y)
    for it in range(1, max_iter + 1):
        aw = a * w**alpha
        s = aw.sum()
        q = aw / (s * w)
        g = q - y
        # g_i * w_i is scale free: sum(q * w) = 1 identically
        if np.max(np.abs(g) * w) < tol:
            return NewtonResult(f, 1.0 - w, it - 1, float(np.linalg.norm(g)))
        hess = np.diag((alpha - 1.0) * q / w) - alpha * np.outer(q, q)
        try:
            step = -np.linalg.solve(hess, g)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"singular Hessian at iteration {it}") from exc
        t = 1.0
        neg = step < 0
        if neg.any():
            t = min(1.0, 0.9 * float(np.min(w[neg] / -step[neg])))
        slope = float(np.dot(g, step))
        # near the optimum the predicted gain is below the rounding error of f
        noise = 8.0 * np.finfo(float).eps * max(1.0, abs(f), float(y.sum()))
        while True:
            w_new = w + t * step
            f_new = value(w_new)
            if f_new >= f + 1e-4 * t * slope - noise or t < 1e-14:
                break
            t *= 0.5
        if f_new < f - 2.0 * noise:
            raise NumericError(f"line search failed at iteration {it}: value {f_new} < {f}")
        w, f = w_new, max(f_new, f)
    raise NumericError(
        f"Newton iteration did not converge in {max_iter} steps (gradient norm {np.linalg.norm(g):.3g})"
    )


def legendre_J(y: Sequence[float], alpha: float, cells: PartitionSpec,
               tol: float = 1e-10, max_iter: int = 500) -> float:
    """Legendre-Fenchel transform of logmgf_Lambda at y >= 0, by damped Newton."""
    return legendre_J_detail(y, alpha, cells, tol, max_iter).value


def legendre_J_detail(y: Sequence[float], alpha: float, cells: PartitionSpec,
                      tol: float = 1e-10, max_iter: int = 500) -> NewtonResult:
    _check_alpha(alpha)
    y = np.asarray(y, dtype=float)
    if y.shape != cells.probs.shape:
        raise DomainError("need one coordinate per cell")
    if np.any(y < 0):
        raise DomainError("J is defined on the nonnegative orthant")
    if np.any(y == 0):
        # the supremum diverges as lambda_i -> -inf on a zero coordinate
        return NewtonResult(INF, np.full_like(y, np.nan), 0, float("nan"))
    return _newton_conjugate(y, cells.probs, alpha, tol, max_iter)


def partition_objective(gammas, x, alpha: float, a) -> np.ndarray:
    """(1/alpha) log sum a_i g_i^alpha + 1 - sum g_i x_i, vectorised over leading axes of ``gammas``."""
    gammas = np.asarray(gammas, dtype=float)
    return np.log(np.sum(np.asarray(a) * gammas**alpha, axis=-1)) / alpha + 1.0 - gammas @ np.asarray(x)


def _cell_probs(cells) -> np.ndarray:
    return cells.probs if isinstance(cells, PartitionSpec) else np.asarray(cells, dtype=float)


def discrete_relative_entropy(x, cells) -> float:
    """sum a_i log(a_i / x_i): the alpha = 0 partition rate."""
    a = _cell_probs(cells)
    x = np.asarray(x, dtype=float)
    if abs(x.sum() - 1.0) > SUM_TOL or np.any(x < 0):
        return INF
    if np.any((x == 0) & (a > 0)):
        return INF
    pos = a > 0
    return max(float(np.sum(a[pos] * np.log(a[pos] / x[pos]))), 0.0)


def rate_partition(x, alpha: float, cells) -> float:
    """Rate of the cell masses (Xi(A_1), ..., Xi(A_n)).

    Stationary point of the variational objective: with
    Q = sum a_i^(1/(1-alpha)) x_i^(-alpha/(1-alpha)) the supremum equals
    (1-alpha)/alpha * log Q.  ``alpha = 0`` gives the relative entropy.
    ``cells`` is a PartitionSpec or the vector of cell probabilities.
    """
    _check_alpha(alpha, allow_zero=True)
    a = _cell_probs(cells)
    x = np.asarray(x, dtype=float)
    if x.shape != a.shape:
        raise DomainError("need one mass per cell")
    if np.any(x < 0) or abs(x.sum() - 1.0) > SUM_TOL:
        return INF
    if alpha == 0.0:
        return discrete_relative_entropy(x, a)
    if np.any(x == 0):
        return INF
    p = 1.0 / (1.0 - alpha)
    terms = p * np.log(a) - alpha * p * np.log(x)
    peak = terms.max()
    log_q = peak + math.log(float(np.sum(np.exp(terms - peak))))
    return max((1.0 - alpha) / alpha * log_q, 0.0)


class MeasureRate(NamedTuple):
    value: float
    converged: bool
    by_depth: tuple


def rate_measure_alpha(mu: MeasureSpec, nu: BaseMeasure, alpha: float, depth: int = 9,
                       conv_tol: float = 1e-4) -> MeasureRate:
    """Lower bound for the rate of the Dirichlet process at ``mu``.

    The rate is a supremum of partition rates over all finite partitions; here
    the supremum runs over dyadic partitions of depth 0..depth.  ``converged``
    reports whether the last refinement changed the value by less than
    ``conv_tol``.
    """
    _check_alpha(alpha, allow_zero=True)
    if depth < 0:
        raise DomainError("depth must be nonnegative")
    total = float(mu.cdf(1.0)) - float(mu.cdf(0.0))
    if abs(total - 1.0) > 1e-10:
        raise DomainError(f"mu has total mass {total!r}, not 1")
    values = []
    best = 0.0
    for d in range(depth + 1):
        cells = PartitionSpec.dyadic(d, nu)
        x = mu.cell_masses(cells.cuts)
        x = x / x.sum()
        best = max(best, rate_partition(x, alpha, cells))
        values.append(best)
    converged = len(values) > 1 and (
        (math.isinf(values[-1]) and math.isinf(values[-2])) or abs(values[-1] - values[-2]) < conv_tol
    )
    return MeasureRate(best, bool(converged), tuple(values))


def relative_entropy(nu: BaseMeasure, mu: MeasureSpec, tol: float = 1e-6, scan_depth: int = 12) -> float:
    """H(nu | mu) = int log(dnu/dmu) dnu, by adaptive quadrature.

    Returns inf when nu charges a set that mu does not: any cell of a fine
    uniform scan with mu-mass below 1e-14 but nu-mass above 1e-10.
    """
    cuts = np.arange(1, 2**scan_depth + 1) / 2**scan_depth
    mu_mass = mu.cell_masses(cuts)
    nu_mass = nu.cell_masses(cuts)
    if np.any((mu_mass < 1e-14) & (nu_mass > 1e-10)):
        return INF

    def integrand(x):
        f = float(nu.pdf(x))
        if f <= 0.0:
            return 0.0
        g = float(mu.density(x))
        if g <= 0.0:
            raise NumericError(f"mu density vanishes at {x} where nu has mass")
        return f * math.log(f / g)

    points = mu.density_breakpoints()
    edges = [0.0] + sorted(p for p in points if 0.0 < p < 1.0) + [1.0]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        value, err = integrate.quad(integrand, lo, hi, limit=400, epsabs=tol * 1e-3, epsrel=1e-12)
        if not math.isfinite(value):
            raise NumericError("relative entropy quadrature failed")
        total += value
    return max(total, 0.0)
