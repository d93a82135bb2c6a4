"""Cell masses of the two-parameter Dirichlet process through its subordinator
representation.

With sigma the subordinator with Levy density x^-(1+alpha) e^-x and tau an
independent gamma subordinator, Y(t) = sigma(G t) where
G = alpha * tau(theta/alpha) / Gamma(1 - alpha).  Normalised increments of Y
over cells of nu-probability a_1, ..., a_n have the law of the cell masses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .measures import PartitionSpec, PartitionVector
from .sampling import RandomStream, StableSpec, _tilted_log_increments


def _check(theta: float, alpha: float) -> None:
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta!r}")
    if alpha == 0.0:
        raise DomainError("the subordinator route needs alpha > 0; use the stick-breaking route for alpha = 0")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")


def gamma_time(theta: float, alpha: float, stream: RandomStream, size=None):
    """Draw alpha * Gamma(theta/alpha, 1) / Gamma(1 - alpha)."""
    _check(theta, alpha)
    return alpha * stream.generator.standard_gamma(theta / alpha, size=size) / math.gamma(1.0 - alpha)


def normalize(increments) -> np.ndarray:
    """The map y -> y / sum(y), with 0 -> 0; applied along the last axis."""
    y = np.asarray(increments, dtype=float)
    total = y.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, y / np.where(total > 0, total, 1.0), 0.0)


@dataclass
class SubordinatorSampler:
    """Batch sampler; ``resamples`` counts replicates redrawn after total underflow."""

    theta: float
    alpha: float
    cells: PartitionSpec
    resamples: int = field(default=0, init=False)

    def __post_init__(self):
        _check(self.theta, self.alpha)
        self.spec = StableSpec(self.alpha, tempered=True)

    def draw(self, size: int, stream: RandomStream) -> np.ndarray:
        gen = stream.generator
        out = np.empty((size, self.cells.n))
        todo = np.arange(size)
        while todo.size:
            g = gamma_time(self.theta, self.alpha, stream, size=todo.size)
            durations = g[:, None] * self.cells.probs[None, :]
            log_y = _tilted_log_increments(self.alpha, durations, gen).reshape(durations.shape)
            peak = log_y.max(axis=1, keepdims=True)
            ok = np.isfinite(peak[:, 0])
            # log-space normalisation: tiny increments stay representable
            scaled = np.exp(log_y[ok] - peak[ok])
            out[todo[ok]] = scaled / scaled.sum(axis=1, keepdims=True)
            self.resamples += int((~ok).sum())
            todo = todo[~ok]
        return out


def sample_partition_via_subordinator(theta: float, alpha: float, cells: PartitionSpec,
                                      stream: RandomStream) -> PartitionVector:
    return PartitionVector(SubordinatorSampler(theta, alpha, cells).draw(1, stream)[0])


def batch_partition_via_subordinator(theta: float, alpha: float, cells: PartitionSpec, size: int,
                                     stream: RandomStream) -> np.ndarray:
    return SubordinatorSampler(theta, alpha, cells).draw(size, stream)
