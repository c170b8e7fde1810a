import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as o
from expected import HEISENBERG_PSI0_ENERGY_N8, LTFIM_11_PSI0_ENERGY_N8
from hvasim import statevector as sv
from hvasim.models import Family, InvalidModelError, ModelSpec, Schedule, lightcone_threshold
from hvasim.statevector import (
    EnergyReport,
    NonRealExpectationError,
    ReductionMismatchError,
    SizeMismatchError,
    SizeTooLargeError,
    StateVector,
    Symmetry,
    apply_layer,
    correlator,
    energy_gradient,
    full_energy,
    initial_state,
    prepare_ansatz,
    reduced_rescaled_energy,
    sector_symmetries,
    simulator,
    symmetry_check,
    variational_energy,
)

MODELS = [
    ModelSpec.xyz(6, 1.0, 1.0),
    ModelSpec.xyz(6, 0.5, 2.0),
    ModelSpec.ltfim(6, 1.0, 1.0),
    ModelSpec.tfim(6, 0.8),
]
angles = st.floats(-math.pi, math.pi, allow_nan=False)


def schedules(max_depth=4):
    return st.integers(1, max_depth).flatmap(
        lambda p: st.tuples(st.lists(angles, min_size=p, max_size=p), st.lists(angles, min_size=p, max_size=p))
    ).map(lambda ba: Schedule(tuple(ba[0]), tuple(ba[1])))


def dense_state(model, schedule):
    if model.family is Family.XYZ:
        return o.dense_xyz_ansatz(model.n_sites, model.delta_y, model.delta_z, schedule.betas, schedule.alphas)
    return o.dense_ising_ansatz(model.n_sites, model.g_x, model.g_z, schedule.betas, schedule.alphas)


def dense_h(model):
    if model.family is Family.XYZ:
        return o.xyz_hamiltonian(model.n_sites, model.delta_y, model.delta_z)
    return o.ising_hamiltonian(model.n_sites, model.g_x, model.g_z)


class TestStateVector:
    def test_normalization_enforced(self):
        with pytest.raises(ValueError):
            StateVector(np.ones(4), 2)

    def test_shape_enforced(self):
        with pytest.raises(SizeMismatchError):
            StateVector(np.array([1.0, 0, 0]), 2)

    def test_read_only(self):
        psi = initial_state(ModelSpec.xyz(2))
        with pytest.raises(ValueError):
            psi.amplitudes[0] = 1.0

    def test_csv_dump(self):
        rows = initial_state(ModelSpec.xyz(2)).to_csv_rows()
        assert rows[0] == "0,0,0"
        idx, re, im = rows[1].split(",")
        assert idx == "1" and float(re) == 1 / math.sqrt(2) and float(im) == 0.0

    def test_size_cap(self):
        with pytest.raises(SizeTooLargeError):
            simulator(ModelSpec.xyz(18))


class TestInitialState:
    def test_single_singlet(self):
        amps = initial_state(ModelSpec.xyz(2)).amplitudes
        np.testing.assert_allclose(amps, [0, 1 / math.sqrt(2), -1 / math.sqrt(2), 0], atol=1e-15)

    def test_plus_state(self):
        np.testing.assert_allclose(initial_state(ModelSpec.ltfim(2, 1, 1)).amplitudes, [0.5] * 4)

    def test_odd_size_rejected(self):
        with pytest.raises(InvalidModelError):
            ModelSpec.ltfim(3, 1, 1)

    @pytest.mark.parametrize("n", [4, 6, 8])
    def test_against_oracle(self, n):
        np.testing.assert_allclose(initial_state(ModelSpec.xyz(n)).amplitudes, o.singlet_product(n), atol=1e-15)
        np.testing.assert_allclose(initial_state(ModelSpec.tfim(n, 1)).amplitudes, o.plus_product(n), atol=1e-15)


class TestLayers:
    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label())
    def test_zero_angles_are_identity(self, model):
        psi = initial_state(model)
        out = apply_layer(psi, model, 0.0, 0.0)
        np.testing.assert_array_equal(out.amplitudes, psi.amplitudes)

    @pytest.mark.parametrize("beta", [0.3, -1.1, 2.7])
    def test_even_half_layer_is_a_phase_on_psi0(self, beta):
        model = ModelSpec.xyz(8, 0.7, 1.4)
        psi = initial_state(model)
        assert abs(psi.overlap(apply_layer(psi, model, beta, 0.0))) == pytest.approx(1.0, abs=1e-12)

    def test_ltfim_layer_matches_expm(self):
        model = ModelSpec.ltfim(6, 1.0, 1.0)
        out = apply_layer(initial_state(model), model, 0.3, 0.2)
        np.testing.assert_allclose(out.amplitudes, o.dense_ising_ansatz(6, 1.0, 1.0, [0.3], [0.2]), atol=1e-12)

    def test_size_mismatch(self):
        with pytest.raises(SizeMismatchError):
            apply_layer(initial_state(ModelSpec.xyz(4)), ModelSpec.xyz(6), 0.1, 0.1)

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label())
    @given(beta=angles, alpha=angles)
    def test_norm_preserved(self, model, beta, alpha):
        out = apply_layer(initial_state(model), model, beta, alpha)
        assert out.norm() == pytest.approx(1.0, abs=1e-12)


class TestPrepare:
    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label())
    def test_empty_and_zero_schedules(self, model):
        psi0 = initial_state(model).amplitudes
        np.testing.assert_array_equal(prepare_ansatz(model, Schedule((), ())).amplitudes, psi0)
        np.testing.assert_array_equal(prepare_ansatz(model, Schedule.zeros(5)).amplitudes, psi0)

    def test_heisenberg_n8_matches_expm(self, rng):
        model = ModelSpec.xyz(8)
        s = Schedule.random(3, rng)
        psi = prepare_ansatz(model, s)
        ref = dense_state(model, s)
        assert abs(abs(np.vdot(ref, psi.amplitudes)) - 1.0) < 1e-12
        np.testing.assert_allclose(psi.amplitudes, ref, atol=1e-12)

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label())
    @given(s=schedules(3))
    def test_families_match_expm(self, model, s):
        np.testing.assert_allclose(prepare_ansatz(model, s).amplitudes, dense_state(model, s), atol=1e-11)


class TestCorrelators:
    def test_singlet_correlators(self):
        psi = initial_state(ModelSpec.xyz(8))
        for b in "XYZ":
            assert correlator(psi, (1, 2), (b, b)) == pytest.approx(-1.0, abs=1e-14)
            assert correlator(psi, (2, 3), (b, b)) == pytest.approx(0.0, abs=1e-14)

    def test_polarized_correlators(self):
        psi = initial_state(ModelSpec.tfim(6, 1.0))
        assert correlator(psi, (1,), ("X",)) == pytest.approx(1.0)
        assert correlator(psi, (1,), ("Z",)) == pytest.approx(0.0, abs=1e-15)

    def test_index_errors(self):
        psi = initial_state(ModelSpec.xyz(4))
        with pytest.raises(IndexError):
            correlator(psi, (0, 1), ("X", "X"))
        with pytest.raises(IndexError):
            correlator(psi, (5,), ("X",))
        with pytest.raises(ValueError):
            correlator(psi, (1, 1), ("X", "X"))

    def test_matches_dense(self, rng):
        model = ModelSpec.xyz(6, 0.5, 2.0)
        s = Schedule.random(2, rng)
        psi = prepare_ansatz(model, s)
        ref = dense_state(model, s)
        op = o.op_on(6, {2: o.Y, 5: o.X, 6: o.Z})
        assert correlator(psi, (2, 5, 6), "YXZ") == pytest.approx(o.expectation(op, ref), abs=1e-12)

    def test_non_real_expectation_flagged(self, monkeypatch):
        psi = initial_state(ModelSpec.tfim(2, 1.0))
        monkeypatch.setattr(sv, "pauli_string_action", lambda *a: (np.arange(4), np.full(4, 1j)))
        with pytest.raises(NonRealExpectationError):
            correlator(psi, (1,), ("X",))


class TestVariationalEnergy:
    def test_heisenberg_psi0(self):
        rep = variational_energy(ModelSpec.xyz(8), Schedule.zeros(2))
        assert rep.energy == pytest.approx(HEISENBERG_PSI0_ENERGY_N8, abs=1e-12)
        assert rep.rescaled_energy == rep.energy * 2 / 8

    def test_ltfim_psi0(self):
        rep = variational_energy(ModelSpec.ltfim(8, 1, 1), Schedule.zeros(1))
        assert rep.energy == pytest.approx(LTFIM_11_PSI0_ENERGY_N8, abs=1e-12)
        assert rep.rescaled_energy == rep.energy / 8

    def test_xyz_n10_matches_dense(self, rng):
        model = ModelSpec.xyz(10, 0.5, 2.0)
        s = Schedule.random(2, rng)
        ref = o.expectation(dense_h(model), dense_state(model, s))
        assert variational_energy(model, s).energy == pytest.approx(ref, abs=1e-10)

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label())
    def test_reduced_equals_full(self, model, rng):
        for _ in range(5):
            psi = prepare_ansatz(model, Schedule.random(3, rng))
            assert reduced_rescaled_energy(model, psi) == pytest.approx(
                model.energy_scale * full_energy(model, psi), abs=1e-12
            )

    def test_reduction_mismatch_detected(self, monkeypatch, rng):
        model = ModelSpec.xyz(6)
        amps = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        broken = StateVector(amps / np.linalg.norm(amps), 6)
        monkeypatch.setattr(sv, "prepare_ansatz", lambda m, s: broken)
        with pytest.raises(ReductionMismatchError):
            variational_energy(model, Schedule.zeros(1))

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label())
    def test_time_reversal(self, model, rng):
        sim = simulator(model)
        for _ in range(100):
            s = Schedule.random(3, rng)
            assert sim.energy(s) == pytest.approx(sim.energy(-s), abs=1e-10)

    @pytest.mark.parametrize(
        "family_model", [lambda n: ModelSpec.xyz(n, 0.6, 1.7), lambda n: ModelSpec.ltfim(n, 1.2, 0.4)]
    )
    def test_lightcone_invariance(self, family_model, rng):
        p = 1
        thr = lightcone_threshold(family_model(4).family, p)
        sizes = [n for n in (4, 6, 8, 10, 12) if n > thr]
        for _ in range(5):
            s = Schedule.random(p, rng)
            costs = [simulator(family_model(n)).cost(s) for n in sizes]
            assert max(costs) - min(costs) < 1e-12

    def test_energy_report_infidelity(self):
        assert EnergyReport(0.0, 0.0, fidelity=0.25).infidelity == 0.75
        assert EnergyReport(0.0, 0.0).infidelity is None


class TestGradient:
    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label())
    def test_zero_at_origin(self, model):
        np.testing.assert_allclose(energy_gradient(model, Schedule.zeros(4)), 0.0, atol=1e-10)

    def test_length(self):
        assert energy_gradient(ModelSpec.xyz(4), Schedule.zeros(5)).shape == (10,)

    def test_depth_zero_rejected(self):
        with pytest.raises(ValueError):
            energy_gradient(ModelSpec.xyz(4), Schedule((), ()))

    @pytest.mark.parametrize("model", MODELS + [ModelSpec.xyz(8)], ids=lambda m: f"{m.label()}-{m.n_sites}")
    def test_finite_differences(self, model, rng):
        sim = simulator(model)
        for _ in range(3):
            x = Schedule.random(4, rng).as_vector()
            g = sim.gradient(x)
            fd = o.central_difference(sim.cost, x)
            big = np.abs(fd) > 1e-8
            assert np.max(np.abs(g[big] - fd[big]) / np.abs(fd[big])) < 1e-6

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label())
    def test_cost_and_gradient_consistent(self, model, rng):
        sim = simulator(model)
        x = Schedule.random(3, rng).as_vector()
        c, g = sim.cost_and_gradient(x)
        assert c == sim.cost(x)
        np.testing.assert_allclose(g, sim.gradient(x), atol=1e-15)

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label())
    def test_partial_matches_full_gradient(self, model, rng):
        sim = simulator(model)
        x = Schedule.random(4, rng).as_vector()
        g = sim.gradient(x)
        for i in range(x.size):
            assert sim.partial(x, i) == pytest.approx(g[i], abs=1e-13)

    def test_partial_index_checked(self):
        with pytest.raises(IndexError):
            simulator(ModelSpec.xyz(4)).partial(np.zeros(4), 4)


class TestSymmetries:
    @pytest.mark.parametrize("n", [4, 6, 8])
    def test_xyz_sector(self, n, rng):
        model = ModelSpec.xyz(n, 0.6, 1.8)
        sign = (-1) ** (n // 2)
        for _ in range(5):
            psi = prepare_ansatz(model, Schedule.random(3, rng))
            for sym, eig in sector_symmetries(model).items():
                q, dev = symmetry_check(psi, sym)
                assert dev < 1e-10
                assert q == pytest.approx(eig, abs=1e-10)
            assert sector_symmetries(model)[Symmetry.INV] == sign

    def test_xxz_conserves_sz(self, rng):
        psi = prepare_ansatz(ModelSpec.xyz(8, 1.0, 0.5), Schedule.random(3, rng))
        mean, var = symmetry_check(psi, Symmetry.SZ_TOT)
        assert mean == pytest.approx(0.0, abs=1e-12)
        assert var < 1e-10

    def test_generic_xyz_breaks_sz(self, rng):
        psi = prepare_ansatz(ModelSpec.xyz(6, 0.5, 2.0), Schedule.random(3, rng))
        assert symmetry_check(psi, Symmetry.SZ_TOT)[1] > 1e-4

    @pytest.mark.parametrize("model", [ModelSpec.ltfim(8, 1, 1), ModelSpec.tfim(6, 0.5)], ids=lambda m: m.label())
    def test_ising_sector(self, model, rng):
        psi = prepare_ansatz(model, Schedule.random(3, rng))
        for sym, eig in sector_symmetries(model).items():
            q, dev = symmetry_check(psi, sym)
            assert dev < 1e-10 and q == pytest.approx(eig, abs=1e-10)

    def test_psi0_not_t1_invariant(self):
        _, dev = symmetry_check(initial_state(ModelSpec.xyz(6)), Symmetry.T1)
        assert dev > 0.1

    def test_sz_is_not_a_unitary(self):
        with pytest.raises(ValueError):
            sv.apply_symmetry(initial_state(ModelSpec.xyz(4)), Symmetry.SZ_TOT)
