import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hvasim.models import ModelSpec
from hvasim.optimize import NonFiniteCostError, OptimizerConfig, StopReason, minimize
from hvasim.statevector import simulator


def bowl(x):
    return float(x @ x)


def bowl_grad(x):
    return 2 * x


def rosenbrock(x):
    return float(np.sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2))


def rosenbrock_grad(x):
    g = np.zeros_like(x)
    g[:-1] = -400 * x[:-1] * (x[1:] - x[:-1] ** 2) - 2 * (1 - x[:-1])
    g[1:] += 200 * (x[1:] - x[:-1] ** 2)
    return g


class TestConfig:
    def test_defaults(self):
        c = OptimizerConfig()
        assert (c.max_iterations, c.gradient_tolerance, c.history_size) == (100, 1e-9, 10)
        assert c.line_search == "backtracking-armijo"

    @pytest.mark.parametrize("kwargs", [{"max_iterations": 0}, {"gradient_tolerance": 0.0}, {"history_size": 0},
                                        {"line_search": "wolfe"}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            OptimizerConfig(**kwargs)

    def test_from_config(self):
        c = OptimizerConfig.from_config({"max_iterations": 7, "gradient_tolerance": 1e-6})
        assert c.max_iterations == 7 and c.gradient_tolerance == 1e-6

    @pytest.mark.parametrize("block,key", [({"max_iter": 3}, "max_iter"), ({"max_iterations": "10"}, "max_iterations"),
                                           ({"gradient_tolerance": "tiny"}, "gradient_tolerance")])
    def test_from_config_errors(self, block, key):
        with pytest.raises(ValueError, match=key):
            OptimizerConfig.from_config(block)


class TestMinimize:
    def test_quadratic_bowl(self):
        x, f, trace = minimize(bowl, bowl_grad, np.array([1.0, -2.0]))
        assert np.linalg.norm(x) < 1e-8
        assert trace.converged and trace.stop_reason is StopReason.GRADIENT_TOL

    def test_immediate_stop(self):
        x0 = np.array([1e-12, 0.0])
        x, f, trace = minimize(bowl, bowl_grad, x0)
        assert trace.n_iterations == 0
        np.testing.assert_array_equal(x, x0)

    def test_rosenbrock(self):
        x, f, trace = minimize(rosenbrock, rosenbrock_grad, np.array([-1.2, 1.0]), OptimizerConfig(max_iterations=500))
        np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-6)

    def test_iteration_cap(self):
        _, _, trace = minimize(rosenbrock, rosenbrock_grad, np.array([-1.2, 1.0]), OptimizerConfig(max_iterations=5))
        assert trace.n_iterations == 5
        assert trace.stop_reason is StopReason.ITERATION_CAP and not trace.converged

    def test_line_search_failure_on_inconsistent_gradient(self):
        _, _, trace = minimize(bowl, lambda x: -2 * x, np.array([1.0, 1.0]))
        assert trace.stop_reason is StopReason.LINE_SEARCH_FAILURE

    def test_non_finite_start(self):
        with pytest.raises(NonFiniteCostError):
            minimize(lambda x: math.nan, bowl_grad, np.array([1.0]))
        with pytest.raises(ValueError):
            minimize(bowl, bowl_grad, np.array([math.inf]))

    def test_needs_gradient(self):
        with pytest.raises(ValueError):
            minimize(bowl, None, np.array([1.0]))

    def test_heisenberg_p1_interior_minimum(self):
        sim = simulator(ModelSpec.xyz(8))
        x0 = np.array([0.1, 0.1])
        x, f, trace = minimize(sim.cost, sim.gradient, x0)
        assert np.linalg.norm(sim.gradient(x)) < 1e-6
        assert f < sim.cost(x0)

    def test_combined_callable_gives_same_trace(self):
        sim = simulator(ModelSpec.ltfim(6, 1.0, 1.0))
        x0 = np.array([0.2, -0.4, 0.1, 0.3])
        a = minimize(sim.cost, sim.gradient, x0, OptimizerConfig(max_iterations=20))
        b = minimize(sim.cost, None, x0, OptimizerConfig(max_iterations=20), cost_and_gradient=sim.cost_and_gradient)
        np.testing.assert_array_equal(a[0], b[0])
        assert a[2].costs.tolist() == b[2].costs.tolist()

    def test_deterministic(self):
        sim = simulator(ModelSpec.xyz(6, 0.5, 2.0))
        x0 = np.random.default_rng(4).uniform(-np.pi, np.pi, 6)
        runs = [minimize(sim.cost, sim.gradient, x0, OptimizerConfig(max_iterations=30)) for _ in range(2)]
        np.testing.assert_array_equal(runs[0][0], runs[1][0])
        for it_a, it_b in zip(runs[0][2].iterates, runs[1][2].iterates):
            np.testing.assert_array_equal(it_a.x, it_b.x)
            assert it_a.cost == it_b.cost

    @settings(max_examples=15)
    @given(seed=st.integers(0, 2**32 - 1), cap=st.integers(1, 25))
    def test_trace_invariants(self, seed, cap):
        sim = simulator(ModelSpec.ltfim(4, 1.0, 0.5))
        x0 = np.random.default_rng(seed).uniform(-np.pi, np.pi, 6)
        x, f, trace = minimize(sim.cost, sim.gradient, x0, OptimizerConfig(max_iterations=cap))
        costs = trace.costs
        assert trace.n_iterations <= cap
        assert np.all(np.diff(np.minimum.accumulate(costs)) <= 0)
        assert f == costs.min()
        assert sim.cost(x) == f
