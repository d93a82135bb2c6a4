"""Seeded random streams and the variate generators used by the constructions.

Streams are backed by numpy's Philox bit generator, a counter-based generator
keyed by ``(seed, stream_id)``; distinct stream ids give non-overlapping
sequences without any coordination between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import DomainError

_MASK64 = (1 << 64) - 1


@dataclass
class RandomStream:
    """Single-owner random stream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0
    block: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.seed = int(self.seed) & _MASK64
        self.stream_id = int(self.stream_id) & _MASK64
        self.block = int(self.block) & _MASK64
        key = self.seed | (self.stream_id << 64)
        # each block owns the counter range with high words (block, 0)
        self._gen = np.random.Generator(np.random.Philox(key=key, counter=self.block << 128))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def spawn(self, stream_id: int) -> "RandomStream":
        """A fresh stream with the same seed and another id."""
        return RandomStream(self.seed, stream_id)

    def substream(self, block: int) -> "RandomStream":
        """Disjoint counter range ``block`` of this stream, fresh from its start."""
        return RandomStream(self.seed, self.stream_id, block)


def worker_stream(seed: int, worker: int, tag: int = 0) -> RandomStream:
    """Stream for ``worker`` inside task ``tag`` (e.g. the index of a grid point)."""
    return RandomStream(seed, (int(tag) << 32) | int(worker))


@dataclass(frozen=True)
class StableSpec:
    """One-sided stable law with index ``alpha`` in (0, 1).

    Untempered: Levy density ``alpha*C*x**-(alpha+1)``, so the Laplace
    exponent at time 1 is ``C*Gamma(1-alpha)*s**alpha``.
    Tempered: Levy density ``x**-(1+alpha)*exp(-x)``; ``C`` is ignored.
    """

    alpha: float
    C: float = 1.0
    tempered: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"stable index must lie in (0,1), got {self.alpha!r}")
        if not self.C > 0.0:
            raise DomainError(f"scale constant must be positive, got {self.C!r}")

    def levy_density(self, x):
        x = np.asarray(x, dtype=float)
        if self.tempered:
            return x ** -(1.0 + self.alpha) * np.exp(-x)
        return self.alpha * self.C * x ** -(self.alpha + 1.0)

    @property
    def laplace_scale(self) -> float:
        """K in ``E exp(-s X_1) = exp(-K s**alpha)`` for the untempered law."""
        if self.tempered:
            return math.gamma(1.0 - self.alpha) / self.alpha
        return self.C * math.gamma(1.0 - self.alpha)

    def laplace_exponent(self, s, duration=1.0):
        """``-log E exp(-s X_t)``."""
        s = np.asarray(s, dtype=float)
        k = self.laplace_scale
        if self.tempered:
            return duration * k * ((1.0 + s) ** self.alpha - 1.0)
        return duration * k * s**self.alpha


def beta_sample(a: float, b: float, stream: RandomStream, size=None):
    if not (np.all(np.asarray(a) > 0) and np.all(np.asarray(b) > 0)):
        raise DomainError("beta parameters must be positive")
    return stream.generator.beta(a, b, size=size)


def gamma_sample(shape: float, stream: RandomStream, size=None):
    """Gamma(shape) with unit rate."""
    if not np.all(np.asarray(shape) > 0):
        raise DomainError("gamma shape must be positive")
    return stream.generator.standard_gamma(shape, size=size)


def _log_zolotarev_a(u, alpha):
    """log of Zolotarev's function A(u) = [sin(au)^a sin((1-a)u)^(1-a) / sin u]^(1/(1-a))."""
    return (
        alpha * np.log(np.sin(alpha * u))
        + (1.0 - alpha) * np.log(np.sin((1.0 - alpha) * u))
        - np.log(np.sin(u))
    ) / (1.0 - alpha)


def _standard_stable_log(alpha, gen, size):
    """log of a positive stable variate with E exp(-s S) = exp(-s**alpha).

    Kanter's representation S = (A(U)/E)^((1-alpha)/alpha).
    """
    u = gen.uniform(0.0, math.pi, size=size)
    e = gen.standard_exponential(size=size)
    return (1.0 - alpha) / alpha * (_log_zolotarev_a(u, alpha) - np.log(e))


def stable_sample(spec: StableSpec, stream: RandomStream, duration=1.0, size=None):
    """Untempered stable increment over ``duration``."""
    if spec.tempered:
        raise DomainError("stable_sample draws the untempered law; use tilted_stable_increment")
    scale = (np.asarray(duration, dtype=float) * spec.laplace_scale) ** (1.0 / spec.alpha)
    return scale * np.exp(_standard_stable_log(spec.alpha, stream.generator, size))


def _standard_density_integral(z, alpha):
    w = z ** (-alpha / (1.0 - alpha))

    def integrand(u):
        la = _log_zolotarev_a(u, alpha)
        return math.exp(la - math.exp(la) * w)

    value, _ = integrate.quad(integrand, 0.0, math.pi, limit=200, epsabs=1e-15, epsrel=1e-12)
    return alpha / (1.0 - alpha) * z ** (-1.0 / (1.0 - alpha)) * value / math.pi


def _standard_density_series(z, alpha, terms=200):
    total = 0.0
    for k in range(1, terms + 1):
        log_mag = special.gammaln(k * alpha + 1.0) - special.gammaln(k + 1.0) - (k * alpha + 1.0) * math.log(z)
        term = (-1.0) ** (k + 1) * math.exp(log_mag) * math.sin(k * math.pi * alpha)
        total += term
        if log_mag < math.log(1e-18) + math.log(abs(total) + 1e-300) and k > 3:
            break
    return total / math.pi


def _standard_density(z, alpha):
    if z ** (-alpha) <= 0.5:
        return _standard_density_series(z, alpha)
    return _standard_density_integral(z, alpha)


def stable_density(spec: StableSpec, x):
    """Density at time 1 of the untempered stable subordinator.

    Zolotarev's integral representation for moderate arguments and the
    convergent power series in ``x**-alpha`` for the upper tail.
    """
    if spec.tempered:
        raise DomainError("stable_density evaluates the untempered law")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("stable density is evaluated at positive arguments only")
    scale = spec.laplace_scale ** (1.0 / spec.alpha)
    out = np.vectorize(lambda z: _standard_density(z, spec.alpha), otypes=[float])(x / scale) / scale
    return float(out) if out.ndim == 0 else out


def _tilted_log_increments(alpha, durations, gen):
    """log of tempered-stable increments, one per entry of ``durations``.

    Each duration is split into equal chunks with untempered Laplace scale at
    most one, so a proposal is accepted with probability >= exp(-1).
    Zero durations give -inf.
    """
    durations = np.asarray(durations, dtype=float).ravel()
    kappa = math.gamma(1.0 - alpha) / alpha
    n_chunks = np.maximum(np.ceil(durations * kappa), 1).astype(np.int64)
    owner = np.repeat(np.arange(durations.size), n_chunks)
    log_scale = np.log(durations * kappa / n_chunks) / alpha
    chunk_log_scale = log_scale[owner]

    log_x = np.empty(owner.size)
    pending = np.arange(owner.size)
    while pending.size:
        proposal = chunk_log_scale[pending] + _standard_stable_log(alpha, gen, pending.size)
        keep = gen.random(pending.size) < np.exp(-np.exp(proposal))
        log_x[pending[keep]] = proposal[keep]
        pending = pending[~keep]

    starts = np.concatenate(([0], np.cumsum(n_chunks)[:-1]))
    peak = np.maximum.reduceat(log_x, starts)
    with np.errstate(invalid="ignore"):
        total = np.add.reduceat(np.exp(log_x - peak[owner]), starts)
    out = peak + np.log(total)
    out[durations <= 0] = -np.inf
    return out


def tilted_stable_log_increment(spec: StableSpec, duration, stream: RandomStream):
    """Like :func:`tilted_stable_increment` but on the log scale; vectorised over ``duration``."""
    if not spec.tempered:
        raise DomainError("tilted increments need a tempered StableSpec")
    duration = np.asarray(duration, dtype=float)
    if np.any(duration < 0):
        raise DomainError("durations must be nonnegative")
    out = _tilted_log_increments(spec.alpha, duration, stream.generator)
    return out.reshape(duration.shape) if duration.ndim else float(out[0])


def tilted_stable_increment(spec: StableSpec, duration, stream: RandomStream, size=None):
    """Draw sigma(duration) for the subordinator with Levy density x^-(1+alpha) e^-x.

    Exact: rejection from the untempered law with acceptance weight e^-x.
    ``size`` replicates a scalar duration; array durations are drawn elementwise.
    """
    if not spec.tempered:
        raise DomainError("tilted increments need a tempered StableSpec")
    duration = np.asarray(duration, dtype=float)
    if np.any(duration <= 0):
        raise DomainError("duration must be positive")
    if size is not None:
        duration = np.broadcast_to(duration, size)
    out = np.exp(_tilted_log_increments(spec.alpha, duration, stream.generator)).reshape(duration.shape)
    return float(out) if out.ndim == 0 else out
