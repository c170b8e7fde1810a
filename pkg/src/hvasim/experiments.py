"""Transferability, random-start baselines, gradient-variance sampling and refinement."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .freefermion import tfim_energy, tfim_residual_energy
from .interp import evaluate, optimize_schedule, run_interp
from .models import Family, ModelSpec, Schedule
from .optimize import OptimizationTrace, OptimizerConfig
from .spectra import SpectralCache
from .statevector import MAX_SITES, EnergyReport, SizeTooLargeError, simulator

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

SINGLE_THREAD_ENV = "HVASIM_SINGLE_THREAD"
GLOBAL_RANGE = (-math.pi, math.pi)
DEFAULT_EPSILON = 0.05


def resolve_threads(threads: int | None = None) -> int:
    if os.environ.get(SINGLE_THREAD_ENV, "").strip() not in ("", "0"):
        return 1
    if threads is None:
        return os.cpu_count() or 1
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Ordered map; results never depend on the worker count."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for a sub-experiment, independent of evaluation order."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def item_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(index),)))


# -- transfer ---------------------------------------------------------------


def transfer_schedule(
    schedule: Schedule, model: ModelSpec, target_n: int, cache: SpectralCache | None = None
) -> EnergyReport:
    """Evaluate an unchanged schedule on the same model family at ``target_n`` sites.

    TFIM chains beyond the dense cap go through the free-fermion mode sum,
    which reports energies and residual energy but no fidelity.
    """
    target = model.with_size(target_n)
    if target_n <= MAX_SITES:
        return evaluate(target, schedule, cache)
    if model.family is not Family.TFIM:
        raise SizeTooLargeError(f"exact transfer is capped at N <= {MAX_SITES}, got {target_n}")
    energy, _, _ = tfim_energy(target_n, model.g_x, schedule)
    return EnergyReport(
        energy=energy,
        rescaled_energy=target.energy_scale * energy,
        residual_energy=tfim_residual_energy(target_n, model.g_x, schedule),
    )


# -- random starts ----------------------------------------------------------


@dataclass(frozen=True)
class RestartResult:
    index: int
    start: Schedule
    schedule: Schedule
    cost: float
    trace: OptimizationTrace = field(repr=False, compare=False)


def random_start_optima(
    model: ModelSpec,
    depth: int,
    n_restarts: int,
    seed: int,
    opt_config: OptimizerConfig = OptimizerConfig(),
    *,
    low: float = -math.pi,
    high: float = math.pi,
    threads: int | None = None,
) -> list[RestartResult]:
    """Local optima from uniform random starts, sorted by cost (ties by index)."""
    if n_restarts < 1:
        raise ValueError("n_restarts must be >= 1")

    def one(index: int) -> RestartResult | None:
        start = Schedule.random(depth, item_rng(seed, index), low, high)
        try:
            schedule, cost, trace = optimize_schedule(model, start, opt_config)
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            log.warning("restart %d failed: %s", index, exc)
            return None
        return RestartResult(index, start, schedule, cost, trace)

    results = [r for r in parallel_map(one, range(n_restarts), threads) if r is not None]
    return sorted(results, key=lambda r: (r.cost, r.index))


def random_start_baseline(
    model: ModelSpec,
    depth: int,
    n_restarts: int,
    seed: int,
    opt_config: OptimizerConfig = OptimizerConfig(),
    *,
    cache: SpectralCache | None = None,
    threads: int | None = None,
) -> list[tuple[Schedule, EnergyReport]]:
    optima = random_start_optima(model, depth, n_restarts, seed, opt_config, threads=threads)
    return [(r.schedule, evaluate(model, r.schedule, cache)) for r in optima]


# -- gradient variance -------------------------------------------------------


@dataclass(frozen=True)
class SamplingRegion:
    kind: str
    center: Schedule | None = None
    radius: float | None = None
    global_range: tuple[float, float] = GLOBAL_RANGE

    def __post_init__(self) -> None:
        if self.kind not in ("global", "neighborhood"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind == "neighborhood":
            if self.center is None or self.radius is None or not self.radius > 0:
                raise ValueError("a neighborhood needs a center and a radius > 0")
        low, high = self.global_range
        if not low < high:
            raise ValueError(f"global_range must satisfy low < high, got {self.global_range}")

    @classmethod
    def global_(cls, low: float = -math.pi, high: float = math.pi) -> SamplingRegion:
        return cls("global", global_range=(low, high))

    @classmethod
    def neighborhood(cls, center: Schedule, radius: float = DEFAULT_EPSILON) -> SamplingRegion:
        return cls("neighborhood", center=center, radius=radius)

    def sample(self, depth: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "global":
            return rng.uniform(self.global_range[0], self.global_range[1], size=2 * depth)
        assert self.center is not None and self.radius is not None
        if self.center.depth != depth:
            raise ValueError(f"region center has depth {self.center.depth}, sampling depth {depth}")
        c = self.center.as_vector()
        return c + rng.uniform(-self.radius, self.radius, size=c.size)

    def describe(self) -> str:
        if self.kind == "global":
            return f"global[{self.global_range[0]:.17g},{self.global_range[1]:.17g}]"
        return f"neighborhood(eps={self.radius:.17g})"


@dataclass(frozen=True)
class VarianceStats:
    component_index: int
    n_samples: int
    mean: float
    variance: float
    seed: int
    region: SamplingRegion = field(repr=False)


def alpha1_component(depth: int) -> int:
    return depth


def sample_gradient_variance(
    model: ModelSpec,
    depth: int,
    region: SamplingRegion,
    component: int | None = None,
    n_samples: int = 1000,
    seed: int = 0,
    *,
    threads: int | None = None,
) -> VarianceStats:
    """Unbiased sample variance of one partial derivative of the rescaled cost.

    ``component`` indexes ``(betas, alphas)``; the default is d/d alpha_1.
    Sample ``i`` is drawn from its own stream keyed by ``(seed, i)``.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    component = alpha1_component(depth) if component is None else component
    sim = simulator(model)

    def one(i: int) -> float:
        return sim.partial(region.sample(depth, item_rng(seed, i)), component)

    values = np.array(parallel_map(one, range(n_samples), threads))
    return VarianceStats(
        component_index=component,
        n_samples=n_samples,
        mean=float(values.mean()),
        variance=float(values.var(ddof=1)),
        seed=seed,
        region=region,
    )


# -- refinement ------------------------------------------------------------


@dataclass(frozen=True)
class RefineResult:
    schedule: Schedule
    report: EnergyReport
    trace: OptimizationTrace = field(repr=False)
    start_report: EnergyReport | None = None

    def max_deviation(self, start: Schedule) -> float:
        return float(np.max(np.abs(self.schedule.as_vector() - start.as_vector())))


def refine(
    model: ModelSpec,
    start: Schedule,
    opt_config: OptimizerConfig = OptimizerConfig(),
    cache: SpectralCache | None = None,
) -> RefineResult:
    """One capped local optimization from a (transferred) schedule."""
    before = evaluate(model, start, cache)
    schedule, _, trace = optimize_schedule(model, start, opt_config)
    if trace.n_iterations == 0:
        schedule = start
    return RefineResult(schedule, evaluate(model, schedule, cache), trace, before)


# -- smoothness ---------------------------------------------------------------


def _roughness(series: Sequence[float]) -> float:
    x = np.asarray(series, dtype=float)
    spread = float(x.max() - x.min())
    if spread == 0.0:
        return 0.0
    return float(np.mean(np.diff(x, 2) ** 2) / spread**2)


def smoothness_score(schedule: Schedule) -> float:
    """Mean squared second difference, normalised by the squared range, summed over betas and alphas.

    Zero for affine ramps; grows with roughness. A constant series scores 0.
    """
    if schedule.depth < 3:
        raise ValueError(f"smoothness needs depth >= 3, got {schedule.depth}")
    return _roughness(schedule.betas) + _roughness(schedule.alphas)


# -- experiment drivers -----------------------------------------------------


@dataclass(frozen=True)
class TransferRow:
    n_sites: int
    kind: str
    residual_energy: float
    fidelity: float | None
    rescaled_energy: float
    depth: int
    n_guess: int


@dataclass
class TransferabilityResult:
    model: ModelSpec
    depth: int
    smooth: Schedule
    random_optima: list[RestartResult]
    rows: list[TransferRow]

    def value(self, n_sites: int, kind: str) -> float:
        for row in self.rows:
            if row.n_sites == n_sites and row.kind == kind:
                return row.residual_energy
        raise KeyError((n_sites, kind))


def transferability(
    guess_model: ModelSpec,
    depth: int,
    target_sizes: Sequence[int],
    n_random: int,
    seed: int,
    opt_config: OptimizerConfig = OptimizerConfig(),
    *,
    init: Schedule | None = None,
    cache: SpectralCache | None = None,
    threads: int | None = None,
    smooth: Schedule | None = None,
) -> TransferabilityResult:
    """Smooth INTERP schedule and random-start optima from the guess size, evaluated at each target size.

    Rows per size: ``smooth``, ``random-mean`` and ``random-best`` (lowest residual).
    """
    if smooth is None:
        smooth = run_interp(guess_model, 1, depth, init, opt_config, cache=cache, with_reports=False).optimal(depth)
    optima = random_start_optima(guess_model, depth, n_random, seed, opt_config, threads=threads) if n_random else []
    rows = []
    for n in target_sizes:
        rep = transfer_schedule(smooth, guess_model, n, cache)
        rows.append(TransferRow(n, "smooth", rep.residual_energy, rep.fidelity, rep.rescaled_energy, depth, guess_model.n_sites))
        if optima:
            reps = parallel_map(lambda r: transfer_schedule(r.schedule, guess_model, n, cache), optima, threads)
            res = np.array([r.residual_energy for r in reps])
            fids = [r.fidelity for r in reps]
            mean_fid = None if fids[0] is None else float(np.mean(fids))
            best = int(np.argmin(res))
            rows.append(TransferRow(n, "random-mean", float(res.mean()), mean_fid,
                                    float(np.mean([r.rescaled_energy for r in reps])), depth, guess_model.n_sites))
            rows.append(TransferRow(n, "random-best", float(res[best]), reps[best].fidelity,
                                    reps[best].rescaled_energy, depth, guess_model.n_sites))
    return TransferabilityResult(guess_model, depth, smooth, optima, rows)


@dataclass(frozen=True)
class VarianceRow:
    n_sites: int
    region: str
    variance: float
    depth: int
    n_samples: int
    seed: int
    spread: float = 0.0


REGION_CODES = {"global": 0, "smooth": 1, "local-random": 2}


def barren_plateau_scan(
    model: ModelSpec,
    sizes: Sequence[int],
    depth: int,
    smooth: Schedule | None,
    *,
    epsilon: float = DEFAULT_EPSILON,
    n_samples: int = 1000,
    n_random_centers: int = 20,
    seed: int = 0,
    component: int | None = None,
    threads: int | None = None,
) -> list[VarianceRow]:
    """Gradient variance vs chain length in the global box, around the smooth schedule and around random points.

    ``local-random`` rows hold the mean variance over ``n_random_centers``
    centers and, in ``spread``, the standard deviation across centers.
    """
    rows = []
    for n in sizes:
        target = model.with_size(n)
        s = derive_seed(seed, n, REGION_CODES["global"])
        stats = sample_gradient_variance(target, depth, SamplingRegion.global_(), component, n_samples, s, threads=threads)
        rows.append(VarianceRow(n, "global", stats.variance, depth, n_samples, s))
        if smooth is not None:
            s = derive_seed(seed, n, REGION_CODES["smooth"])
            region = SamplingRegion.neighborhood(smooth, epsilon)
            stats = sample_gradient_variance(target, depth, region, component, n_samples, s, threads=threads)
            rows.append(VarianceRow(n, "smooth", stats.variance, depth, n_samples, s))
        if n_random_centers:
            base = derive_seed(seed, n, REGION_CODES["local-random"])
            variances = []
            for c in range(n_random_centers):
                center = Schedule.random(depth, item_rng(base, c))
                region = SamplingRegion.neighborhood(center, epsilon)
                stats = sample_gradient_variance(
                    target, depth, region, component, n_samples, derive_seed(base, c), threads=threads
                )
                variances.append(stats.variance)
            rows.append(VarianceRow(n, "local-random", float(np.mean(variances)), depth, n_samples, base,
                                    float(np.std(variances))))
        log.info("variance scan N=%d done", n)
    return rows


def variance_vs_depth(
    model: ModelSpec,
    depths: Sequence[int],
    *,
    n_samples: int = 1000,
    seed: int = 0,
    threads: int | None = None,
) -> list[VarianceRow]:
    """Global-box variance of d C / d alpha_1 as a function of depth."""
    rows = []
    for p in depths:
        s = derive_seed(seed, model.n_sites, p)
        stats = sample_gradient_variance(model, p, SamplingRegion.global_(), None, n_samples, s, threads=threads)
        rows.append(VarianceRow(model.n_sites, "global", stats.variance, p, n_samples, s))
    return rows


def locate_knee(depths: Sequence[int], variances: Sequence[float], rel_tol: float = 0.5) -> int:
    """Smallest depth after which the variance stays within ``rel_tol`` (in log10) of its tail mean."""
    logs = np.log10(np.asarray(variances, dtype=float))
    tail = logs[len(logs) // 2 :].mean()
    for i, p in enumerate(depths):
        if np.all(np.abs(logs[i:] - tail) <= rel_tol):
            return int(p)
    return int(depths[-1])
