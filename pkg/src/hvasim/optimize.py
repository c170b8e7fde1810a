"""Capped limited-memory BFGS with Armijo backtracking."""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np


class NonFiniteCostError(FloatingPointError):
    pass


class StopReason(str, enum.Enum):
    GRADIENT_TOL = "gradient-tol"
    ITERATION_CAP = "iteration-cap"
    LINE_SEARCH_FAILURE = "line-search-failure"


@dataclass(frozen=True)
class OptimizerConfig:
    """``max_iterations`` counts accepted quasi-Newton steps."""

    max_iterations: int = 100
    gradient_tolerance: float = 1e-9
    line_search: str = "backtracking-armijo"
    history_size: int = 10
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 60

    def __post_init__(self) -> None:
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be a positive integer, got {self.max_iterations!r}")
        if not self.gradient_tolerance > 0:
            raise ValueError(f"gradient_tolerance must be > 0, got {self.gradient_tolerance!r}")
        if int(self.history_size) != self.history_size or self.history_size < 1:
            raise ValueError(f"history_size must be a positive integer, got {self.history_size!r}")
        if self.line_search != "backtracking-armijo":
            raise ValueError(f"unsupported line search {self.line_search!r}")

    @classmethod
    def from_config(cls, block: Mapping[str, Any]) -> OptimizerConfig:
        allowed = {"max_iterations", "gradient_tolerance", "history_size"}
        extra = sorted(set(block) - allowed)
        if extra:
            raise ValueError(f"optimizer block: unexpected key(s) {extra}")
        kwargs: dict[str, Any] = {}
        for key in ("max_iterations", "history_size"):
            if key in block:
                value = block[key]
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ValueError(f"optimizer block: key {key!r} must be an integer, got {value!r}")
                kwargs[key] = value
        if "gradient_tolerance" in block:
            value = block["gradient_tolerance"]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError(f"optimizer block: key 'gradient_tolerance' must be a number, got {value!r}")
            kwargs["gradient_tolerance"] = float(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class Iterate:
    x: np.ndarray
    cost: float
    gradient_norm: float


@dataclass
class OptimizationTrace:
    iterates: list[Iterate] = field(default_factory=list)
    converged: bool = False
    stop_reason: StopReason = StopReason.ITERATION_CAP

    @property
    def n_iterations(self) -> int:
        return len(self.iterates) - 1

    @property
    def costs(self) -> np.ndarray:
        return np.array([it.cost for it in self.iterates])


def _two_loop(g: np.ndarray, s_hist: deque, y_hist: deque) -> np.ndarray:
    q = g.copy()
    coeffs = []
    for s, y in reversed(list(zip(s_hist, y_hist))):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        coeffs.append((rho, a))
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(coeffs)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def minimize(
    cost: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray] | None,
    x0: np.ndarray,
    config: OptimizerConfig = OptimizerConfig(),
    *,
    cost_and_gradient: Callable[[np.ndarray], tuple[float, np.ndarray]] | None = None,
) -> tuple[np.ndarray, float, OptimizationTrace]:
    """Minimize ``cost`` from ``x0``; returns ``(x_opt, f_opt, trace)``.

    ``cost_and_gradient`` may be given instead of ``gradient`` when both come
    out of one evaluation. Trial points in the line search only evaluate
    ``cost``.
    """
    if cost_and_gradient is None:
        if gradient is None:
            raise ValueError("need a gradient or cost_and_gradient callable")

        def cost_and_gradient(x: np.ndarray) -> tuple[float, np.ndarray]:
            return cost(x), np.asarray(gradient(x), dtype=float)

    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    f, g = cost_and_gradient(x)
    if not math.isfinite(f):
        raise NonFiniteCostError(f"cost at x0 is {f}")
    g = np.asarray(g, dtype=float)
    trace = OptimizationTrace([Iterate(x.copy(), float(f), float(np.linalg.norm(g)))])
    s_hist: deque = deque(maxlen=config.history_size)
    y_hist: deque = deque(maxlen=config.history_size)

    while True:
        gnorm = float(np.linalg.norm(g))
        if gnorm < config.gradient_tolerance:
            trace.converged = True
            trace.stop_reason = StopReason.GRADIENT_TOL
            break
        if trace.n_iterations >= config.max_iterations:
            trace.stop_reason = StopReason.ITERATION_CAP
            break
        d = _two_loop(g, s_hist, y_hist)
        slope = float(g @ d)
        if not slope < 0:
            s_hist.clear()
            y_hist.clear()
            d = -g
            slope = -gnorm * gnorm
        step = config.initial_step
        accepted = False
        for _ in range(config.max_backtracks):
            x_new = x + step * d
            if np.array_equal(x_new, x):
                break  # step underflowed; the direction carries no usable decrease
            f_new = cost(x_new)
            if math.isfinite(f_new) and f_new <= f + config.armijo_c1 * step * slope:
                accepted = True
                break
            step *= config.backtrack_factor
        if not accepted:
            if s_hist:
                # stale curvature pairs can produce poor directions; retry once along -g
                s_hist.clear()
                y_hist.clear()
                continue
            trace.stop_reason = StopReason.LINE_SEARCH_FAILURE
            break
        f_new, g_new = cost_and_gradient(x_new)
        g_new = np.asarray(g_new, dtype=float)
        s_vec, y_vec = x_new - x, g_new - g
        if s_vec @ y_vec > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            s_hist.append(s_vec)
            y_hist.append(y_vec)
        else:
            # Armijo alone does not enforce s.y > 0; stale pairs would freeze the step scale
            s_hist.clear()
            y_hist.clear()
        x, f, g = x_new, float(f_new), g_new
        trace.iterates.append(Iterate(x.copy(), f, float(np.linalg.norm(g))))

    best = min(trace.iterates, key=lambda it: it.cost)
    return best.x.copy(), best.cost, trace
