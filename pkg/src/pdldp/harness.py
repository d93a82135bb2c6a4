"""Monte Carlo verification of the large-deviation principles.

For an event E, P_theta(E) ~ exp(-theta * I(E)) as theta grows; ``run_sweep``
estimates P_theta(E) on a grid of theta, fits log P against theta by weighted
least squares and compares the fitted decay rate with the infimum of the rate
function over the event.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, stats
from numpy.polynomial import chebyshev

from .errors import AccuracyError, DomainError, InsufficientDataError
from .gem import batch_max_stick_ge, batch_top_k_sum_ge, check_params, DEFAULT_MAX_STICKS
from .measures import BaseMeasure, MeasureSpec, PartitionSpec
from .rates import rate_i1, rate_partition
from .sampling import RandomStream, worker_stream
from .subordinator import SubordinatorSampler

EVENT_KINDS = ("p1_ge", "first_k_sum_ge", "gem_x1_ge", "partition_cell_ge", "weak_ball")
MIN_SAMPLES = 1000
N_TEST_FUNCTIONS = 8
WEAK_BALL_TOL = 1e-3


@dataclass(frozen=True)
class EventSpec:
    """An event over the random objects whose LDPs are being checked.

    p1_ge            P_1 >= threshold
    first_k_sum_ge   P_1 + ... + P_k >= threshold
    gem_x1_ge        X_1 = U_1 >= threshold (first GEM stick)
    partition_cell_ge  Xi(A_i) >= threshold for cell ``cell_index`` of ``cells``
    weak_ball        rho(Xi, center) < radius, rho truncated to eight
                     Chebyshev test functions
    """

    kind: str
    threshold: float = 0.0
    k: int = 1
    cells: Optional[PartitionSpec] = None
    cell_index: int = 0
    center: Optional[MeasureSpec] = None
    radius: float = 0.0
    nu: BaseMeasure = field(default_factory=BaseMeasure.uniform)

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise DomainError(f"unknown event kind {self.kind!r}")
        if self.kind == "weak_ball":
            if not self.radius > 0:
                raise DomainError("weak-ball radius must be positive")
        elif not 0.0 <= self.threshold <= 1.0:
            raise DomainError("event thresholds lie in [0, 1]")
        if self.kind == "first_k_sum_ge" and self.k < 1:
            raise DomainError("k must be at least 1")
        if self.kind == "partition_cell_ge":
            if self.cells is None:
                raise DomainError("partition events need cells")
            if not 0 <= self.cell_index < self.cells.n:
                raise DomainError("cell index out of range")

    @classmethod
    def parse(cls, text: str, cells: Optional[PartitionSpec] = None,
              center: Optional[MeasureSpec] = None, nu: Optional[BaseMeasure] = None) -> "EventSpec":
        """Parse ``p1_ge:x``, ``gem_x1_ge:x``, ``first_k_sum_ge:k:x``,
        ``partition_cell_ge:i:x`` or ``weak_ball:radius``."""
        parts = text.strip().split(":")
        kind, args = parts[0], parts[1:]
        nu = nu or BaseMeasure.uniform()
        try:
            if kind in ("p1_ge", "gem_x1_ge"):
                (x,) = args
                return cls(kind, float(x), nu=nu)
            if kind == "first_k_sum_ge":
                k, x = args
                return cls(kind, float(x), k=int(k), nu=nu)
            if kind == "partition_cell_ge":
                i, x = args
                return cls(kind, float(x), cells=cells, cell_index=int(i), nu=nu)
            if kind == "weak_ball":
                (r,) = args
                return cls(kind, radius=float(r), center=center, nu=nu)
        except ValueError as exc:
            raise DomainError(f"cannot parse event {text!r}: {exc}") from exc
        raise DomainError(f"unknown event kind {kind!r}")

    def describe(self) -> str:
        if self.kind in ("p1_ge", "gem_x1_ge"):
            return f"{self.kind}:{self.threshold:.9g}"
        if self.kind == "first_k_sum_ge":
            return f"{self.kind}:{self.k}:{self.threshold:.9g}"
        if self.kind == "partition_cell_ge":
            return f"{self.kind}:{self.cell_index}:{self.threshold:.9g}"
        return f"{self.kind}:{self.radius:.9g}"


class Estimate(dict):
    """probability, stderr, count, samples; a dict so it serialises directly."""

    @property
    def probability(self) -> float:
        return self["probability"]

    @property
    def stderr(self) -> float:
        return self["stderr"]

    @property
    def count(self) -> int:
        return self["count"]


def chebyshev_test_functions(n: int = N_TEST_FUNCTIONS):
    """g_j(x) = T_j(2x - 1), j = 1..n; each already has sup norm one on [0, 1]."""
    return [chebyshev.Chebyshev.basis(j, domain=[0.0, 1.0]) for j in range(1, n + 1)]


def measure_moments(mu: MeasureSpec, funcs) -> np.ndarray:
    from scipy import integrate

    edges = [0.0] + [p for p in mu.density_breakpoints() if 0 < p < 1] + [1.0]
    out = []
    for g in funcs:
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            total += integrate.quad(lambda s: float(g(s)) * float(mu.density(s)), lo, hi,
                                    limit=200, epsabs=1e-12)[0]
        out.append(total)
    return np.array(out)


def _weak_ball_count(event: EventSpec, theta, alpha, n, stream: RandomStream, batch=4096,
                     tol=WEAK_BALL_TOL, max_sticks=DEFAULT_MAX_STICKS) -> int:
    funcs = chebyshev_test_functions()
    center = event.center or MeasureSpec.from_base(event.nu)
    target = measure_moments(center, funcs)
    weights = 0.5 ** np.arange(1, len(funcs) + 1)
    gen = stream.generator
    hits = 0
    for start in range(0, n, batch):
        m = min(batch, n - start)
        acc = np.zeros((m, len(funcs)))
        log_res = np.zeros(m)
        active = np.arange(m)
        j = 0
        while active.size:
            j += 1
            if j > max_sticks:
                raise AccuracyError(f"weak-ball residual tolerance {tol:.3g} not reached")
            u = gen.beta(1.0 - alpha, theta + j * alpha, size=active.size)
            atoms = event.nu.ppf(gen.random(active.size))
            g = np.stack([f(atoms) for f in funcs], axis=1)
            acc[active] += (np.exp(log_res[active]) * u)[:, None] * g
            log_res[active] += np.log1p(-u)
            done = log_res[active] < math.log(tol)
            if done.any():
                fin = active[done]
                atoms = event.nu.ppf(gen.random(fin.size))
                acc[fin] += np.exp(log_res[fin])[:, None] * np.stack([f(atoms) for f in funcs], axis=1)
                active = active[~done]
        rho = np.abs(acc - target) @ weights
        hits += int(np.sum(rho < event.radius))
    return hits


def _partition_cell_count(event: EventSpec, theta, alpha, n, stream: RandomStream, batch=10_000) -> int:
    hits = 0
    i = event.cell_index
    if alpha == 0.0:
        # one-parameter case: cell masses are Dirichlet(theta * a)
        for start in range(0, n, batch):
            m = min(batch, n - start)
            x = stream.generator.dirichlet(theta * event.cells.probs, size=m)
            hits += int(np.sum(x[:, i] >= event.threshold))
        return hits
    sampler = SubordinatorSampler(theta, alpha, event.cells)
    for start in range(0, n, batch):
        m = min(batch, n - start)
        x = sampler.draw(m, stream)
        hits += int(np.sum(x[:, i] >= event.threshold))
    return hits


def count_events(event: EventSpec, theta: float, alpha: float, n: int, stream: RandomStream) -> int:
    """Number of the ``n`` replicates drawn from ``stream`` that fall in ``event``."""
    check_params(theta, alpha)
    if n == 0:
        return 0
    if event.kind == "p1_ge":
        return int(batch_max_stick_ge(theta, alpha, event.threshold, n, stream).sum())
    if event.kind == "first_k_sum_ge":
        return int(batch_top_k_sum_ge(theta, alpha, event.k, event.threshold, n, stream).sum())
    if event.kind == "gem_x1_ge":
        u = stream.generator.beta(1.0 - alpha, theta + alpha, size=n)
        return int(np.sum(u >= event.threshold))
    if event.kind == "partition_cell_ge":
        return _partition_cell_count(event, theta, alpha, n, stream)
    return _weak_ball_count(event, theta, alpha, n, stream)


def _count_task(args):
    event, theta, alpha, n, seed, worker, tag = args
    return count_events(event, theta, alpha, n, worker_stream(seed, worker, tag))


def split_samples(samples: int, workers: int) -> list:
    base, extra = divmod(samples, workers)
    return [base + (1 if w < extra else 0) for w in range(workers)]


def _run_tasks(tasks, workers):
    if workers == 1 or len(tasks) == 1:
        return [_count_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_count_task, tasks))


def _make_estimate(count: int, samples: int) -> Estimate:
    p = count / samples
    return Estimate(probability=p, stderr=math.sqrt(p * (1.0 - p) / samples), count=count, samples=samples)


def estimate_event_prob(event: EventSpec, theta: float, alpha: float, samples: int, seed: int,
                        workers: int = 1, tag: int = 0) -> Estimate:
    """Unbiased Monte Carlo estimate with binomial standard error.

    Worker w draws its share of the replicates from stream (seed, tag, w), so
    the result depends on (seed, workers, tag) only, not on scheduling.
    """
    if samples < MIN_SAMPLES:
        raise DomainError(f"need at least {MIN_SAMPLES} samples, got {samples}")
    if workers < 1:
        raise DomainError("workers must be positive")
    check_params(theta, alpha)
    tasks = [(event, theta, alpha, n, seed, w, tag) for w, n in enumerate(split_samples(samples, workers))]
    return _make_estimate(sum(_run_tasks(tasks, workers)), samples)


@dataclass(frozen=True)
class SlopeFit:
    rate: float
    ci_low: float
    ci_high: float
    intercept: float
    stderr: float
    n_points: int


def fit_rate_slope(thetas: Sequence[float], log_probs: Sequence[float], stderrs: Sequence[float],
                   confidence: float = 0.95) -> SlopeFit:
    """Weighted least squares of log p against theta; the rate is minus the slope.

    Weights are 1/stderr^2 (uniform if any stderr is zero).  The slope
    variance comes from the weighted residuals, so an exact line has a
    zero-width interval; the interval uses Student's t with n-2 dof.
    """
    t = np.asarray(thetas, dtype=float)
    y = np.asarray(log_probs, dtype=float)
    s = np.asarray(stderrs, dtype=float)
    ok = np.isfinite(y) & np.isfinite(s)
    t, y, s = t[ok], y[ok], s[ok]
    if t.size < 3:
        raise InsufficientDataError(f"need at least 3 grid points with events, got {t.size}")
    w = np.ones_like(t) if np.any(s <= 0) else 1.0 / s**2
    tbar = np.sum(w * t) / w.sum()
    ybar = np.sum(w * y) / w.sum()
    sxx = np.sum(w * (t - tbar) ** 2)
    if sxx <= 0:
        raise InsufficientDataError("theta grid has no spread")
    slope = np.sum(w * (t - tbar) * (y - ybar)) / sxx
    intercept = ybar - slope * tbar
    resid = y - intercept - slope * t
    dof = t.size - 2
    s2 = np.sum(w * resid**2) / dof
    se = math.sqrt(s2 / sxx)
    half = stats.t.ppf(0.5 + confidence / 2.0, dof) * se
    rate = -slope
    return SlopeFit(float(rate), float(rate - half), float(rate + half), float(intercept), float(se), int(t.size))


def _partition_cell_rate(a_i: float, x: float, alpha: float) -> float:
    """inf of the partition rate over {x_i >= x}, reduced to the two cells A_i and its complement."""
    if x <= a_i:
        return 0.0
    if x >= 1.0:
        return math.inf
    two = np.array([a_i, 1.0 - a_i])
    f = lambda s: rate_partition(np.array([s, 1.0 - s]), alpha, two)
    res = optimize.minimize_scalar(f, bounds=(x, 1.0 - 1e-12), method="bounded",
                                   options={"xatol": 1e-12})
    return float(min(res.fun, f(x)))


def theoretical_event_rate(event: EventSpec, alpha: float) -> Optional[float]:
    """Infimum of the rate function over the event, or None when unavailable."""
    x = event.threshold
    if event.kind in ("p1_ge", "first_k_sum_ge"):
        # the rate log 1/(1 - sum p) is smallest at (x, 0, 0, ...)
        if x <= 0:
            return 0.0
        return math.inf if x >= 1 else -math.log1p(-x)
    if event.kind == "gem_x1_ge":
        return rate_i1(max(x, 0.0))
    if event.kind == "partition_cell_ge":
        return _partition_cell_rate(float(event.cells.probs[event.cell_index]), x, alpha)
    return None


@dataclass(frozen=True)
class SweepConfig:
    event: EventSpec
    alpha: float
    thetas: tuple
    samples: int
    seed: int = 0
    workers: int = 1
    tolerance_factor: float = 1.25
    confidence: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        if not self.thetas:
            raise DomainError("empty theta grid")
        if self.tolerance_factor < 1.0:
            raise DomainError("tolerance factor must be at least 1")


@dataclass
class SweepResult:
    event: str
    alpha: float
    seed: int
    workers: int
    thetas: list
    samples: list
    counts: list
    probabilities: list
    stderrs: list
    rate: float
    ci_low: float
    ci_high: float
    intercept: float
    theoretical_rate: Optional[float]
    tolerance_factor: float
    verdict: str

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepResult":
        return cls(**data)


def verdict(fit: SlopeFit, theory: Optional[float], factor: float) -> str:
    """PASS when the theoretical rate lies in [ci_low/factor, ci_high*factor]."""
    if theory is None or not math.isfinite(theory):
        return "UNAVAILABLE"
    return "PASS" if fit.ci_low / factor <= theory <= fit.ci_high * factor else "FAIL"


def run_sweep(config: SweepConfig) -> SweepResult:
    ev = config.event
    if len(config.thetas) < 3:
        raise InsufficientDataError(f"need at least 3 theta values, got {len(config.thetas)}")
    for theta in config.thetas:
        check_params(theta, config.alpha)
    shares = split_samples(config.samples, config.workers)
    tasks = [
        (ev, theta, config.alpha, n, config.seed, w, i)
        for i, theta in enumerate(config.thetas)
        for w, n in enumerate(shares)
    ]
    counts_flat = _run_tasks(tasks, config.workers)
    nw = config.workers
    counts = [sum(counts_flat[i * nw:(i + 1) * nw]) for i in range(len(config.thetas))]
    ests = [_make_estimate(c, config.samples) for c in counts]
    with np.errstate(divide="ignore"):
        logp = [math.log(e.probability) if e.count else -math.inf for e in ests]
    se_log = [e.stderr / e.probability if e.count else math.inf for e in ests]
    try:
        fit = fit_rate_slope(config.thetas, logp, se_log, config.confidence)
    except InsufficientDataError as exc:
        raise InsufficientDataError(f"sweep of {ev.describe()}: {exc}") from exc
    theory = theoretical_event_rate(ev, config.alpha)
    return SweepResult(
        event=ev.describe(),
        alpha=config.alpha,
        seed=config.seed,
        workers=config.workers,
        thetas=list(config.thetas),
        samples=[config.samples] * len(config.thetas),
        counts=counts,
        probabilities=[e.probability for e in ests],
        stderrs=[e.stderr for e in ests],
        rate=fit.rate,
        ci_low=fit.ci_low,
        ci_high=fit.ci_high,
        intercept=fit.intercept,
        theoretical_rate=theory,
        tolerance_factor=config.tolerance_factor,
        verdict=verdict(fit, theory, config.tolerance_factor),
    )
