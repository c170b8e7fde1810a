"""Iterative depth growth by linear interpolation of optimal schedules."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field


from .models import ModelSpec, Schedule
from .optimize import OptimizationTrace, OptimizerConfig, minimize
from .spectra import SpectralCache, default_cache
from .statevector import EnergyReport, simulator

log = logging.getLogger(__name__)

DEFAULT_INIT = Schedule((0.1,), (0.1,))
MONOTONICITY_SLACK = 1e-9


class MonotonicityError(RuntimeError):
    pass


def _interpolate_series(opt: tuple[float, ...]) -> tuple[float, ...]:
    p = len(opt)
    out = []
    for i in range(1, p + 2):
        value = 0.0
        # zero-coefficient neighbours are never read
        if i > 1:
            value += (i - 1) / p * opt[i - 2]
        if i < p + 1:
            value += (p - i + 1) / p * opt[i - 1]
        out.append(value)
    return tuple(out)


def interpolate_schedule(opt: Schedule) -> Schedule:
    """Seed for depth P+1 from an optimum at depth P."""
    if opt.depth < 1:
        raise ValueError("cannot interpolate an empty schedule")
    return Schedule(_interpolate_series(opt.betas), _interpolate_series(opt.alphas))


@dataclass(frozen=True)
class DepthResult:
    depth: int
    start: Schedule
    optimal: Schedule
    start_report: EnergyReport
    report: EnergyReport
    trace: OptimizationTrace = field(repr=False, compare=False)


@dataclass
class InterpRun:
    model: ModelSpec
    p_min: int
    p_max: int
    init_schedule: Schedule
    per_depth: list[DepthResult] = field(default_factory=list)

    def optimal(self, depth: int) -> Schedule:
        for entry in self.per_depth:
            if entry.depth == depth:
                return entry.optimal
        raise KeyError(depth)

    @property
    def final(self) -> DepthResult:
        return self.per_depth[-1]


def evaluate(model: ModelSpec, schedule: Schedule, cache: SpectralCache | None = None) -> EnergyReport:
    """Energy report with residual energy, fidelity and (XYZ) translational fidelity."""
    from .models import Family
    from .spectra import fidelity, residual_energy, translational_fidelity
    from .statevector import StateVector

    cache = cache or default_cache()
    sim = simulator(model)
    psi = StateVector(sim.prepare(schedule), model.n_sites)
    energy = sim.energy_of(psi.amplitudes)
    bounds = cache.get(model, with_ground_state=True)
    return EnergyReport(
        energy=energy,
        rescaled_energy=model.energy_scale * energy,
        residual_energy=residual_energy(energy, bounds),
        fidelity=fidelity(psi, bounds),
        translational_fidelity=translational_fidelity(psi) if model.family is Family.XYZ else None,
    )


def optimize_schedule(
    model: ModelSpec, start: Schedule, config: OptimizerConfig
) -> tuple[Schedule, float, OptimizationTrace]:
    sim = simulator(model)
    x, f, trace = minimize(sim.cost, None, start.as_vector(), config, cost_and_gradient=sim.cost_and_gradient)
    return Schedule.from_vector(x), f, trace


def run_interp(
    model: ModelSpec,
    p_min: int = 1,
    p_max: int = 1,
    init: Schedule | None = None,
    opt_config: OptimizerConfig = OptimizerConfig(),
    *,
    cache: SpectralCache | None = None,
    with_reports: bool = True,
) -> InterpRun:
    """Optimize at ``p_min``, then interpolate and re-optimize one layer at a time up to ``p_max``."""
    if p_min < 1 or p_max < p_min:
        raise ValueError(f"need 1 <= p_min <= p_max, got {p_min}, {p_max}")
    if init is None:
        if p_min != 1:
            raise ValueError("an init schedule is required when p_min > 1")
        init = DEFAULT_INIT
    if init.depth != p_min:
        raise ValueError(f"init schedule has depth {init.depth}, expected {p_min}")
    sim = simulator(model)
    run = InterpRun(model, p_min, p_max, init)
    start = init
    for depth in range(p_min, p_max + 1):
        if depth > p_min:
            start = interpolate_schedule(run.per_depth[-1].optimal)
        start_cost = sim.cost(start)
        optimal, opt_cost, trace = optimize_schedule(model, start, opt_config)
        if opt_cost > start_cost + MONOTONICITY_SLACK:
            raise MonotonicityError(
                f"depth {depth}: optimized cost {opt_cost:.15g} exceeds start cost {start_cost:.15g}"
            )
        if with_reports:
            start_report, report = evaluate(model, start, cache), evaluate(model, optimal, cache)
        else:
            start_report = EnergyReport(start_cost / model.energy_scale, start_cost)
            report = EnergyReport(opt_cost / model.energy_scale, opt_cost)
        run.per_depth.append(DepthResult(depth, start, optimal, start_report, report, trace))
        log.info(
            "%s N=%d P=%d: C %.10f -> %.10f (%d its, %s)",
            model.label(), model.n_sites, depth, start_cost, opt_cost, trace.n_iterations, trace.stop_reason.value,
        )
    return run
