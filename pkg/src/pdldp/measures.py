"""Probability measures on [0, 1] and finite partitions of the unit interval."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, stats

from .errors import DomainError

SUM_TOL = 1e-12
MEASURE_TOL = 1e-10


@dataclass(frozen=True)
class BaseMeasure:
    """Diffusive base measure with full support on [0, 1].

    Only the uniform law and beta laws are supported; both are atomless and
    charge every subinterval.
    """

    family: str = "uniform"
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.family not in ("uniform", "beta"):
            raise DomainError(f"unknown base measure family {self.family!r}")
        if self.family == "beta" and not (self.a > 0 and self.b > 0):
            raise DomainError("beta base measure needs a > 0 and b > 0")

    @classmethod
    def uniform(cls) -> "BaseMeasure":
        return cls("uniform")

    @classmethod
    def beta(cls, a: float, b: float) -> "BaseMeasure":
        return cls("beta", float(a), float(b))

    @classmethod
    def parse(cls, text: str) -> "BaseMeasure":
        """Parse ``uniform`` or ``beta:a,b``."""
        text = text.strip()
        if text == "uniform":
            return cls.uniform()
        if text.startswith("beta:"):
            a, b = (float(v) for v in text[5:].split(","))
            return cls.beta(a, b)
        raise DomainError(f"cannot parse base measure {text!r}")

    @property
    def _dist(self):
        if self.family == "uniform":
            return stats.uniform(0.0, 1.0)
        return stats.beta(self.a, self.b)

    def pdf(self, x):
        return self._dist.pdf(x)

    def cdf(self, x):
        return np.clip(self._dist.cdf(x), 0.0, 1.0)

    def ppf(self, q):
        return self._dist.ppf(q)

    def cell_masses(self, cuts: Sequence[float]) -> np.ndarray:
        """Masses of the cells [0,t1], (t1,t2], ..., (t_{n-1}, 1]."""
        edges = np.concatenate(([0.0], np.asarray(cuts, dtype=float)))
        return np.diff(self.cdf(edges))

    def __str__(self):
        if self.family == "uniform":
            return "uniform"
        return f"beta:{self.a:g},{self.b:g}"


@dataclass(frozen=True)
class PartitionSpec:
    """Cut points 0 < t1 < ... < tn = 1 with the base-measure cell probabilities."""

    cuts: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        cuts = np.asarray(self.cuts, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "cuts", cuts)
        object.__setattr__(self, "probs", probs)
        if cuts.ndim != 1 or cuts.size == 0:
            raise DomainError("a partition needs at least one cell")
        if cuts.shape != probs.shape:
            raise DomainError("cuts and cell probabilities differ in length")
        if cuts[0] <= 0.0 or np.any(np.diff(cuts) <= 0.0):
            raise DomainError("cut points must be strictly increasing and positive")
        if abs(cuts[-1] - 1.0) > SUM_TOL:
            raise DomainError("the last cut point must be 1")
        if np.any(probs <= 0.0):
            raise DomainError("every cell needs positive base-measure probability")
        if abs(probs.sum() - 1.0) > SUM_TOL:
            raise DomainError(f"cell probabilities sum to {probs.sum()!r}, not 1")

    @classmethod
    def from_cuts(cls, cuts: Sequence[float], nu: Optional[BaseMeasure] = None) -> "PartitionSpec":
        nu = nu or BaseMeasure.uniform()
        cuts = np.asarray(cuts, dtype=float)
        probs = nu.cell_masses(cuts)
        # absorb the rounding of the cdf into the largest cell
        probs[np.argmax(probs)] += 1.0 - probs.sum()
        return cls(cuts, probs)

    @classmethod
    def from_probs(cls, probs: Sequence[float]) -> "PartitionSpec":
        """Cells with the given probabilities under the uniform base measure."""
        probs = np.asarray(probs, dtype=float)
        if np.any(probs <= 0):
            raise DomainError("cell probabilities must be positive")
        cuts = np.cumsum(probs)
        if abs(cuts[-1] - 1.0) > SUM_TOL:
            raise DomainError(f"cell probabilities sum to {cuts[-1]!r}, not 1")
        cuts[-1] = 1.0
        return cls(cuts, probs)

    @classmethod
    def dyadic(cls, depth: int, nu: Optional[BaseMeasure] = None) -> "PartitionSpec":
        if depth < 0:
            raise DomainError("depth must be nonnegative")
        n = 2**depth
        return cls.from_cuts(np.arange(1, n + 1) / n, nu)

    @property
    def n(self) -> int:
        return self.cuts.size

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate(([0.0], self.cuts))


@dataclass(frozen=True)
class PartitionVector:
    """Nonnegative vector summing to one: the masses assigned to the cells."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if np.any(values < 0.0):
            raise DomainError("partition vector has negative entries")
        if abs(values.sum() - 1.0) > SUM_TOL:
            raise DomainError(f"partition vector sums to {values.sum()!r}, not 1")

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class MeasureSpec:
    """A probability measure on [0, 1] given by a density or by cell masses.

    Cell-based measures are read as piecewise-constant densities, so that
    masses of arbitrary subintervals are defined.
    """

    pdf: Optional[Callable] = None
    cdf_fn: Optional[Callable] = None
    cells: Optional[np.ndarray] = None
    masses: Optional[np.ndarray] = None
    breakpoints: tuple = field(default=())

    def __post_init__(self):
        if self.cells is not None:
            cuts = np.asarray(self.cells, dtype=float)
            masses = np.asarray(self.masses, dtype=float)
            object.__setattr__(self, "cells", cuts)
            object.__setattr__(self, "masses", masses)
            if np.any(masses < 0):
                raise DomainError("cell masses must be nonnegative")
            if abs(masses.sum() - 1.0) > MEASURE_TOL:
                raise DomainError(f"cell masses sum to {masses.sum()!r}, not 1")
            if cuts.shape != masses.shape or abs(cuts[-1] - 1.0) > SUM_TOL:
                raise DomainError("cells must end at 1 and match the masses")
        elif self.pdf is None:
            raise DomainError("a measure needs a density or cell masses")
        elif self.cdf_fn is None:
            total = self._quad(self.pdf, 0.0, 1.0)
            if abs(total - 1.0) > MEASURE_TOL:
                raise DomainError(f"density integrates to {total!r}, not 1")

    @classmethod
    def from_density(cls, pdf: Callable, cdf: Optional[Callable] = None, breakpoints=()) -> "MeasureSpec":
        spec = cls(pdf=pdf, cdf_fn=cdf, breakpoints=tuple(breakpoints))
        if cdf is not None:
            total = float(cdf(1.0)) - float(cdf(0.0))
            if abs(total - 1.0) > MEASURE_TOL:
                raise DomainError(f"measure has total mass {total!r}, not 1")
        return spec

    @classmethod
    def from_cells(cls, cuts: Sequence[float], masses: Sequence[float]) -> "MeasureSpec":
        return cls(cells=np.asarray(cuts, dtype=float), masses=np.asarray(masses, dtype=float))

    @classmethod
    def from_base(cls, nu: BaseMeasure) -> "MeasureSpec":
        return cls.from_density(nu.pdf, nu.cdf)

    @classmethod
    def parse(cls, text: str) -> "MeasureSpec":
        """Parse ``uniform``, ``beta:a,b``, ``linear`` (density 2x) or
        ``cells:t1,...,tn;m1,...,mn``."""
        text = text.strip()
        if text == "linear":
            return cls.from_density(lambda x: 2.0 * np.asarray(x), lambda x: np.clip(np.asarray(x), 0, 1) ** 2)
        if text.startswith("cells:"):
            cuts, masses = text[6:].split(";")
            return cls.from_cells([float(v) for v in cuts.split(",")], [float(v) for v in masses.split(",")])
        return cls.from_base(BaseMeasure.parse(text))

    @property
    def is_cell_based(self) -> bool:
        return self.cells is not None

    @staticmethod
    def _quad(f, lo, hi, points=None):
        value, _ = integrate.quad(f, lo, hi, limit=200, epsabs=1e-13, epsrel=1e-12, points=points)
        return value

    def cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        if self.is_cell_based:
            edges = np.concatenate(([0.0], self.cells))
            cum = np.concatenate(([0.0], np.cumsum(self.masses)))
            return np.interp(t, edges, cum)
        if self.cdf_fn is not None:
            return np.asarray(self.cdf_fn(t), dtype=float)
        return np.vectorize(lambda s: self._quad(self.pdf, 0.0, s))(t)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_cell_based:
            edges = np.concatenate(([0.0], self.cells))
            idx = np.clip(np.searchsorted(self.cells, x, side="left"), 0, self.cells.size - 1)
            return self.masses[idx] / np.diff(edges)[idx]
        return np.asarray(self.pdf(x), dtype=float)

    def cell_masses(self, cuts: Sequence[float]) -> np.ndarray:
        edges = np.concatenate(([0.0], np.asarray(cuts, dtype=float)))
        return np.clip(np.diff(self.cdf(edges)), 0.0, None)

    def density_breakpoints(self) -> list:
        """Interior points where the density may be discontinuous."""
        if self.is_cell_based:
            return [float(t) for t in self.cells[:-1]]
        return [float(t) for t in self.breakpoints]
