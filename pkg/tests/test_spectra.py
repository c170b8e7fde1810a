import json

import numpy as np
import pytest
import scipy.sparse.linalg
from hypothesis import given
from hypothesis import strategies as st

import oracles as o
from expected import HEISENBERG_E_MAX, HEISENBERG_E_MIN, LTFIM_11_N8, TFIM_G1_N8
from hvasim.models import Axis, ModelSpec, PauliTerm, PauliTermList, Schedule, build_target_terms
from hvasim.operators import terms_to_sparse
from hvasim.spectra import (
    CACHE_FORMAT_VERSION,
    ConvergenceError,
    DegenerateSpectrumError,
    SpectralBounds,
    SpectralCache,
    extremal_energies,
    fidelity,
    lanczos_lowest,
    residual_energy,
    spectral_bounds_of_terms,
    translational_fidelity,
)
from hvasim.statevector import (
    SizeMismatchError,
    SizeTooLargeError,
    StateVector,
    initial_state,
    prepare_ansatz,
    sector_symmetries,
    simulator,
    symmetry_check,
)


def classical_ising(n):
    """``sum_j Z_j Z_{j+1}``: the zero-field Ising ring."""
    return PauliTermList(n, tuple(PauliTerm(1.0, (j, j % n + 1), (Axis.Z, Axis.Z)) for j in range(1, n + 1)))


class TestExtremalEnergies:
    @pytest.mark.parametrize("n", sorted(HEISENBERG_E_MIN))
    def test_heisenberg_frozen(self, n):
        b = extremal_energies(ModelSpec.xyz(n))
        assert b.e_min == pytest.approx(HEISENBERG_E_MIN[n], abs=1e-10)
        assert b.e_max == pytest.approx(HEISENBERG_E_MAX[n], abs=1e-10)

    def test_ising_frozen(self):
        b = extremal_energies(ModelSpec.ltfim(8, 1, 1))
        assert (b.e_min, b.e_max) == pytest.approx(LTFIM_11_N8, abs=1e-10)
        b = extremal_energies(ModelSpec.tfim(8, 1))
        assert (b.e_min, b.e_max) == pytest.approx(TFIM_G1_N8, abs=1e-10)

    def test_classical_ising_limit(self):
        b = spectral_bounds_of_terms(classical_ising(8), with_ground_state=True)
        assert (b.e_min, b.e_max) == (pytest.approx(-8.0), pytest.approx(8.0))
        # two Neel configurations
        assert b.degeneracy == 2

    def test_matches_dense_oracle(self):
        for model, h in [
            (ModelSpec.xyz(8), o.xyz_hamiltonian(8, 1, 1)),
            (ModelSpec.xyz(8, 0.5, 2.0), o.xyz_hamiltonian(8, 0.5, 2.0)),
            (ModelSpec.ltfim(8, 1.5, 0.5), o.ising_hamiltonian(8, 1.5, 0.5)),
        ]:
            w = np.linalg.eigvalsh(h)
            b = extremal_energies(model)
            assert b.e_min == pytest.approx(w[0], abs=1e-10)
            assert b.e_max == pytest.approx(w[-1], abs=1e-10)

    @pytest.mark.parametrize("model", [ModelSpec.xyz(12), ModelSpec.ltfim(12, 1.0, 1.0), ModelSpec.xyz(12, 0.5, 2.0)])
    def test_lanczos_path_matches_arpack(self, model):
        h = terms_to_sparse(build_target_terms(model))
        lo = scipy.sparse.linalg.eigsh(h, k=1, which="SA", tol=1e-12)[0][0]
        hi = scipy.sparse.linalg.eigsh(h, k=1, which="LA", tol=1e-12)[0][0]
        b = extremal_energies(model, with_ground_state=True)
        assert b.e_min == pytest.approx(lo, abs=1e-9)
        assert b.e_max == pytest.approx(hi, abs=1e-9)
        gs = b.ground_space[:, 0]
        assert np.linalg.norm(h @ gs - b.e_min * gs) < 1e-8

    def test_lanczos_equals_dense_at_n10(self):
        h = terms_to_sparse(build_target_terms(ModelSpec.ltfim(10, 1.0, 1.0)))
        e, v = lanczos_lowest(h.__matmul__, h.shape[0])
        assert e == pytest.approx(np.linalg.eigvalsh(h.toarray())[0], abs=1e-9)
        assert np.linalg.norm(h @ v - e * v) < 1e-10

    def test_lanczos_deflation_finds_next_level(self):
        h = np.diag(np.arange(20.0))
        e0, v0 = lanczos_lowest(h.__matmul__, 20)
        e1, _ = lanczos_lowest(h.__matmul__, 20, deflate=v0[:, None])
        assert (e0, e1) == (pytest.approx(0.0, abs=1e-10), pytest.approx(1.0, abs=1e-10))

    def test_lanczos_no_convergence(self, rng):
        a = rng.standard_normal((400, 400))
        a = a + a.T
        with pytest.raises(ConvergenceError):
            lanczos_lowest(a.__matmul__, 400, max_iter=5)

    def test_size_too_large(self):
        with pytest.raises(SizeTooLargeError):
            extremal_energies(ModelSpec.xyz(18))

    @pytest.mark.parametrize("model", [ModelSpec.xyz(8), ModelSpec.xyz(12, 0.5, 2.0), ModelSpec.ltfim(8, 1, 1),
                                       ModelSpec.tfim(12, 0.9)], ids=lambda m: f"{m.label()}-{m.n_sites}")
    def test_ground_state_in_ansatz_sector(self, model):
        gs = extremal_energies(model, with_ground_state=True).ground_state
        for sym, eig in sector_symmetries(model).items():
            q, dev = symmetry_check(gs, sym)
            assert dev < 1e-8 and q == pytest.approx(eig, abs=1e-8)

    def test_bounds_bracket_rayleigh_quotients(self, rng):
        for model in (ModelSpec.xyz(8, 0.5, 2.0), ModelSpec.ltfim(8, 1.0, 1.0)):
            b = extremal_energies(model)
            sim = simulator(model)
            for _ in range(50):
                e = sim.energy(Schedule.random(4, rng))
                assert b.e_min - 1e-9 <= e <= b.e_max + 1e-9

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            SpectralBounds(1.0, 0.0)


class TestResidualEnergy:
    def test_endpoints(self):
        b = SpectralBounds(-3.0, 5.0)
        assert residual_energy(-3.0, b) == 0.0
        assert residual_energy(5.0, b) == 1.0
        assert residual_energy(1.0, b) == 0.5

    def test_clipped(self):
        b = SpectralBounds(-3.0, 5.0)
        assert residual_energy(-3.0 - 1e-13, b) == 0.0
        assert residual_energy(5.0 + 1e-13, b) == 1.0

    def test_degenerate_spectrum(self):
        with pytest.raises(DegenerateSpectrumError):
            residual_energy(0.0, SpectralBounds(1.0, 1.0))

    @given(
        e=st.floats(0.0, 1.0),
        a=st.floats(0.01, 100.0),
        shift=st.floats(-100.0, 100.0),
    )
    def test_affine_invariance(self, e, a, shift):
        lo, hi = -2.0, 3.0
        energy = lo + e * (hi - lo)
        r = residual_energy(energy, SpectralBounds(lo, hi))
        r2 = residual_energy(a * energy + shift, SpectralBounds(a * lo + shift, a * hi + shift))
        assert r2 == pytest.approx(r, abs=1e-10)

    def test_random_points_sit_near_half(self):
        model = ModelSpec.xyz(8)
        b = extremal_energies(model)
        rng = np.random.default_rng(8)
        sim = simulator(model)
        vals = [residual_energy(sim.energy(Schedule.random(10, rng)), b) for _ in range(100)]
        assert 0.4 <= np.mean(vals) <= 0.6


class TestFidelity:
    def test_self_and_orthogonal(self):
        b = extremal_energies(ModelSpec.xyz(6), with_ground_state=True)
        gs = b.ground_state
        assert fidelity(gs, gs) == pytest.approx(1.0, abs=1e-12)
        v = np.zeros(64, dtype=complex)
        v[0] = 1.0
        # all-up state has S^z = 3, ground state has S^z = 0
        assert fidelity(StateVector(v, 6), gs) == pytest.approx(0.0, abs=1e-14)

    def test_size_mismatch(self):
        with pytest.raises(SizeMismatchError):
            fidelity(initial_state(ModelSpec.xyz(4)), initial_state(ModelSpec.xyz(6)))

    def test_degenerate_space_is_basis_independent(self, rng):
        b = spectral_bounds_of_terms(classical_ising(6), with_ground_state=True)
        basis = b.ground_space
        q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        psi = StateVector(initial_state(ModelSpec.tfim(6, 1.0)).amplitudes, 6)
        assert fidelity(psi, basis) == pytest.approx(fidelity(psi, basis @ q), abs=1e-14)
        assert fidelity(psi, b) == pytest.approx(2 / 64, abs=1e-14)

    def test_requires_ground_space(self):
        with pytest.raises(ValueError):
            fidelity(initial_state(ModelSpec.xyz(4)), SpectralBounds(0.0, 1.0))


class TestTranslationalFidelity:
    def test_plus_state(self):
        assert translational_fidelity(initial_state(ModelSpec.tfim(8, 1.0))) == pytest.approx(1.0)

    @pytest.mark.parametrize("n", [4, 6, 8])
    def test_singlet_product_breaks_one_site_translation(self, n):
        assert translational_fidelity(initial_state(ModelSpec.xyz(n))) < 1.0

    def test_ansatz_state(self, rng):
        psi = prepare_ansatz(ModelSpec.xyz(6), Schedule.random(3, rng))
        assert 0.0 <= translational_fidelity(psi) <= 1.0


class TestSpectralCache:
    def test_persist_and_reload(self, tmp_path):
        path = tmp_path / "cache.json"
        model = ModelSpec.ltfim(6, 1.0, 0.5)
        first = SpectralCache(path).get(model)
        data = json.loads(path.read_text())
        assert data["format_version"] == CACHE_FORMAT_VERSION
        assert SpectralCache.key(model) in data["entries"]
        again = SpectralCache(path).get(model)
        assert (again.e_min, again.e_max) == (first.e_min, first.e_max)

    def test_key_separates_models(self):
        keys = {SpectralCache.key(m) for m in (ModelSpec.xyz(6), ModelSpec.xyz(8), ModelSpec.xyz(6, 1.0, 0.5),
                                                ModelSpec.ltfim(6, 1, 0), ModelSpec.tfim(6, 1))}
        assert len(keys) == 5
        assert all(k.startswith(f"v{CACHE_FORMAT_VERSION}|") for k in keys)

    def test_stale_format_ignored(self, tmp_path):
        path = tmp_path / "cache.json"
        model = ModelSpec.xyz(4)
        path.write_text(json.dumps({"format_version": 0, "entries": {SpectralCache.key(model): {"e_min": 0, "e_max": 1}}}))
        b = SpectralCache(path).get(model)
        assert b.e_min == pytest.approx(-8.0)

    def test_ground_state_served_from_memory(self):
        cache = SpectralCache()
        b = cache.get(ModelSpec.xyz(6), with_ground_state=True)
        assert cache.get(ModelSpec.xyz(6), with_ground_state=True) is b
        assert cache.get(ModelSpec.xyz(6)).ground_space is not None
