"""Stick-breaking GEM(theta, alpha) samples, ranked prefixes and atom assignment.

Sticks follow U_k ~ Beta(1 - alpha, theta + k*alpha),
X_k = U_k * prod_{i<k} (1 - U_i).  The residual mass prod_{i<=n} (1 - U_i)
is tracked along every path, which is what the exactness certificates of the
stopping rules rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import AccuracyError, DomainError
from .measures import PartitionSpec, PartitionVector
from .sampling import RandomStream

DEFAULT_MAX_STICKS = 10_000_000
SIZE_BIAS_TOL = 1e-3
ASSIGN_TOL = 1e-4


def check_params(theta: float, alpha: float) -> None:
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta!r}")
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"alpha must lie in [0, 1), got {alpha!r}")


@dataclass(frozen=True)
class StopRule:
    """When to stop breaking sticks.

    ``count``: exactly ``value`` sticks.  ``residual``: first n with residual < value.
    ``rank_exact``: residual below the current largest stick.
    ``top_k``: residual below the current ``value``-th largest stick.
    """

    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("count", "residual", "rank_exact", "top_k"):
            raise DomainError(f"unknown stopping rule {self.kind!r}")
        if self.kind in ("count", "top_k") and (int(self.value) != self.value or self.value < 1):
            raise DomainError(f"{self.kind} stopping needs a positive integer")
        if self.kind == "residual" and not 0 < self.value < 1:
            raise DomainError("residual tolerance must lie in (0, 1)")

    @classmethod
    def count(cls, n: int) -> "StopRule":
        return cls("count", n)

    @classmethod
    def residual(cls, eps: float) -> "StopRule":
        return cls("residual", eps)

    @classmethod
    def rank_exact(cls) -> "StopRule":
        return cls("rank_exact")

    @classmethod
    def top_k(cls, k: int) -> "StopRule":
        return cls("top_k", k)


@dataclass(frozen=True)
class GemSample:
    theta: float
    alpha: float
    sticks: np.ndarray
    residual: float

    @property
    def n(self) -> int:
        return self.sticks.size


@dataclass(frozen=True)
class RankedPrefix:
    """Largest masses in descending order, with an exactness certificate."""

    masses: np.ndarray
    exact: bool
    k: int
    residual: float = 0.0


def _stop_holds(rule: StopRule, sticks: np.ndarray, residual: float) -> bool:
    n = sticks.size
    if rule.kind == "count":
        return n >= rule.value
    if rule.kind == "residual":
        return residual < rule.value
    if n == 0:
        return False
    if rule.kind == "rank_exact":
        return residual < sticks.max()
    k = int(rule.value)
    if n < k:
        return False
    return residual < np.partition(sticks, n - k)[n - k]


def sample_gem(theta: float, alpha: float, stop: StopRule, stream: RandomStream,
               max_sticks: int = DEFAULT_MAX_STICKS) -> GemSample:
    """Break sticks until ``stop`` holds; AccuracyError if ``max_sticks`` come first.

    Every stopping condition is monotone along a path (the residual falls, the
    running order statistics rise), so sticks are drawn in chunks and the first
    index where the condition holds is located by bisection.
    """
    check_params(theta, alpha)
    gen = stream.generator
    sticks = np.empty(0)
    log_res = np.empty(0)
    chunk = 64
    while True:
        n0 = sticks.size
        if (stop.kind == "count" and n0 >= stop.value) or n0 >= max_sticks:
            break
        m = min(chunk, max_sticks - n0)
        if stop.kind == "count":
            m = min(m, int(stop.value) - n0)
        k = np.arange(n0 + 1, n0 + m + 1)
        u = gen.beta(1.0 - alpha, theta + k * alpha)
        prev = log_res[-1] if n0 else 0.0
        with np.errstate(divide="ignore"):
            # u rounds to 1 only when the residual is below double precision
            new_log_res = prev + np.cumsum(np.log1p(-u))
        prev_res = np.exp(np.concatenate(([prev], new_log_res[:-1])))
        sticks = np.concatenate((sticks, prev_res * u))
        log_res = np.concatenate((log_res, new_log_res))
        if _stop_holds(stop, sticks, float(np.exp(log_res[-1]))):
            lo, hi = n0 + 1, sticks.size
            while lo < hi:
                mid = (lo + hi) // 2
                if _stop_holds(stop, sticks[:mid], float(np.exp(log_res[mid - 1]))):
                    hi = mid
                else:
                    lo = mid + 1
            sticks, log_res = sticks[:lo], log_res[:lo]
            break
        chunk = min(chunk * 2, 1 << 16)
    residual = float(np.exp(log_res[-1])) if log_res.size else 1.0
    if not _stop_holds(stop, sticks, residual):
        raise AccuracyError(f"stopping rule {stop.kind}:{stop.value:g} not met within {max_sticks} sticks")
    return GemSample(theta, alpha, sticks, residual)


def rank_prefix(sample: GemSample, k: int) -> RankedPrefix:
    """The ``k`` largest sticks, exact when the residual is below the k-th of them."""
    if k < 1:
        raise DomainError("k must be at least 1")
    ordered = np.sort(sample.sticks)[::-1]
    top = ordered[:k].copy()
    exact = top.size == k and sample.residual < top[-1]
    return RankedPrefix(top, bool(exact), k, sample.residual)


def size_biased_permute(prefix: Union[RankedPrefix, Sequence[float]], stream: RandomStream,
                        residual: Optional[float] = None, tol: float = SIZE_BIAS_TOL) -> np.ndarray:
    """Successive sampling without replacement, each pick proportional to mass.

    Uses exponential race keys E_i / p_i; sorting them ascending gives the
    size-biased order.  The unseen residual mass is not represented, so it
    must be below ``tol``.
    """
    if isinstance(prefix, RankedPrefix):
        masses = prefix.masses
        residual = prefix.residual if residual is None else residual
    else:
        masses = np.asarray(prefix, dtype=float)
        residual = 0.0 if residual is None else residual
    if residual > tol:
        raise AccuracyError(f"residual {residual:.3g} exceeds size-bias tolerance {tol:.3g}")
    if np.any(masses < 0):
        raise DomainError("masses must be nonnegative")
    e = stream.generator.standard_exponential(masses.size)
    with np.errstate(divide="ignore"):
        keys = np.where(masses > 0, e / masses, np.inf)
    return masses[np.argsort(keys, kind="stable")]


def assign_to_partition(sample: GemSample, cells: PartitionSpec, stream: RandomStream,
                        tol: float = ASSIGN_TOL) -> PartitionVector:
    """Cell masses of the random measure sum_k X_k delta_{xi_k} with xi_k ~ nu.

    Atom locations are never drawn; each stick falls in cell i with
    probability nu(A_i).  The residual goes to one more nu-distributed cell.
    """
    if sample.residual >= tol:
        raise AccuracyError(f"residual {sample.residual:.3g} exceeds assignment tolerance {tol:.3g}")
    gen = stream.generator
    cum = np.cumsum(cells.probs)
    idx = np.minimum(np.searchsorted(cum, gen.random(sample.n + 1) * cum[-1], side="right"), cells.n - 1)
    weights = np.concatenate((sample.sticks, [sample.residual]))
    x = np.bincount(idx, weights=weights, minlength=cells.n)
    return PartitionVector(x / x.sum())


def batch_partition_via_sticks(theta: float, alpha: float, cells: PartitionSpec, size: int,
                               stream: RandomStream, tol: float = ASSIGN_TOL,
                               max_sticks: int = DEFAULT_MAX_STICKS) -> np.ndarray:
    """``size`` independent draws of assign_to_partition, vectorised over paths.

    Returns an array of shape (size, n_cells); every row sums to one.
    """
    check_params(theta, alpha)
    gen = stream.generator
    cum = np.cumsum(cells.probs)
    acc = np.zeros((size, cells.n))
    log_res = np.zeros(size)
    active = np.arange(size)
    log_tol = np.log(tol)
    k = 0
    while active.size:
        k += 1
        if k > max_sticks:
            raise AccuracyError(f"residual tolerance {tol:.3g} not reached within {max_sticks} sticks")
        u = gen.beta(1.0 - alpha, theta + k * alpha, size=active.size)
        x = np.exp(log_res[active]) * u
        idx = np.minimum(np.searchsorted(cum, gen.random(active.size) * cum[-1], side="right"), cells.n - 1)
        acc[active, idx] += x
        log_res[active] += np.log1p(-u)
        done = log_res[active] < log_tol
        if done.any():
            fin = active[done]
            idx = np.minimum(np.searchsorted(cum, gen.random(fin.size) * cum[-1], side="right"), cells.n - 1)
            acc[fin, idx] += np.exp(log_res[fin])
            active = active[~done]
    return acc / acc.sum(axis=1, keepdims=True)


def batch_max_stick_ge(theta: float, alpha: float, x: float, n_paths: int, stream: RandomStream,
                       block: int = 512, fixed_steps: Optional[int] = None,
                       max_sticks: int = DEFAULT_MAX_STICKS) -> np.ndarray:
    """Indicators of {P_1 >= x} for ``n_paths`` independent paths.

    Paths run in lockstep blocks; block b draws from ``stream.substream(b)``
    and every path of a block consumes one draw per step until the whole block
    is decided.  The sticks of a path thus do not depend on ``x`` or on when
    other paths stop, which couples runs with different thresholds and makes
    early exit reproduce a fixed-length run exactly.  A path is decided TRUE
    once a stick reaches ``x`` and FALSE once the residual falls below ``x``
    (no later stick can reach it).
    ``fixed_steps`` switches off early exit and breaks exactly that many sticks.
    """
    check_params(theta, alpha)
    out = np.empty(n_paths, dtype=bool)
    if x <= 0:
        out[:] = True
        return out
    log_x = np.log(x)
    for start in range(0, n_paths, block):
        gen = stream.substream(start // block).generator
        m = min(block, n_paths - start)
        hit = np.zeros(m, dtype=bool)
        log_res = np.zeros(m)
        k = 0
        while True:
            if fixed_steps is None:
                if np.all(hit | (log_res < log_x)):
                    break
                if k >= max_sticks:
                    raise AccuracyError(f"paths undecided after {max_sticks} sticks")
            elif k >= fixed_steps:
                break
            k += 1
            u = gen.beta(1.0 - alpha, theta + k * alpha, size=m)
            hit |= log_res + np.log(u) >= log_x
            log_res += np.log1p(-u)
        if fixed_steps is not None and not np.all(hit | (log_res < log_x)):
            raise AccuracyError(f"{fixed_steps} sticks do not decide every path")
        out[start:start + m] = hit
    return out


def batch_top_k_sum_ge(theta: float, alpha: float, k: int, x: float, n_paths: int,
                       stream: RandomStream, block: int = 512,
                       max_sticks: int = DEFAULT_MAX_STICKS) -> np.ndarray:
    """Indicators of {P_1 + ... + P_k >= x}, lockstep blocks as in batch_max_stick_ge.

    TRUE once the current top-k sum reaches ``x``; FALSE once top-k sum plus
    residual is below ``x``, since later sticks add at most the residual.
    """
    check_params(theta, alpha)
    if k < 1:
        raise DomainError("k must be at least 1")
    out = np.empty(n_paths, dtype=bool)
    for start in range(0, n_paths, block):
        gen = stream.substream(start // block).generator
        m = min(block, n_paths - start)
        top = np.zeros((m, k))
        log_res = np.zeros(m)
        rows = np.arange(m)
        n = 0
        while True:
            total = top.sum(axis=1)
            hit = total >= x
            if np.all(hit | (total + np.exp(log_res) < x)):
                break
            if n >= max_sticks:
                raise AccuracyError(f"paths undecided after {max_sticks} sticks")
            n += 1
            u = gen.beta(1.0 - alpha, theta + n * alpha, size=m)
            stick = np.exp(log_res) * u
            log_res += np.log1p(-u)
            j = np.argmin(top, axis=1)
            replace = stick > top[rows, j]
            top[rows[replace], j[replace]] = stick[replace]
        out[start:start + m] = hit
    return out
