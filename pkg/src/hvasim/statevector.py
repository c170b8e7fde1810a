"""Dense state-vector simulation of the Hamiltonian variational ansatz.

The ansatz state is ``U_P ... U_1 |psi_0>`` with

* XYZ:   ``U_m = exp(-i beta_m H_even) exp(-i alpha_m H_odd)``
* Ising: ``U_m = exp(+i beta_m H_X) exp(-i alpha_m (H_ZZ - g_z H_Z))``

Parameters are flattened as ``(beta_1..beta_P, alpha_1..alpha_P)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import _kernels
from .models import (
    Axis,
    Family,
    ModelSpec,
    Schedule,
    build_target_terms,
    even_bonds,
    ising_generators,
    odd_bonds,
)
from .operators import (
    apply_permutation,
    inversion_permutation,
    pauli_string_action,
    site_mask,
    terms_diagonal,
    terms_to_sparse,
    translation_permutation,
)

MAX_SITES = 16
IMAG_TOL = 1e-10
REDUCTION_TOL = 1e-9


class SizeMismatchError(ValueError):
    pass


class SizeTooLargeError(ValueError):
    pass


class NonRealExpectationError(ArithmeticError):
    pass


class ReductionMismatchError(RuntimeError):
    """Full and symmetry-reduced energies disagree: the state left its sector."""


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    n_sites: int

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n_sites,):
            raise SizeMismatchError(f"expected {1 << self.n_sites} amplitudes, got shape {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state is not normalized (norm {norm:.3e})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: StateVector) -> complex:
        """``<self|other>``."""
        if other.n_sites != self.n_sites:
            raise SizeMismatchError("states live on different chain lengths")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_csv_rows(self) -> list[str]:
        """Debug dump: ``index,real,imag`` with 17 significant digits."""
        return [f"{i},{z.real:.17g},{z.imag:.17g}" for i, z in enumerate(self.amplitudes)]


@dataclass(frozen=True)
class EnergyReport:
    energy: float
    rescaled_energy: float
    residual_energy: float | None = None
    fidelity: float | None = None
    translational_fidelity: float | None = None

    @property
    def infidelity(self) -> float | None:
        return None if self.fidelity is None else 1.0 - self.fidelity


class AnsatzSimulator:
    """Precomputed operators for one model; evaluates states, costs and gradients.

    The cost ``C`` is the rescaled energy (``2E/N`` for XYZ, ``E/N`` otherwise).
    """

    def __init__(self, model: ModelSpec):
        if model.n_sites > MAX_SITES:
            raise SizeTooLargeError(f"dense simulation is capped at N <= {MAX_SITES}, got {model.n_sites}")
        self.model = model
        self.n = model.n_sites
        self.dim = 1 << self.n
        self.scale = model.energy_scale
        self.hamiltonian = terms_to_sparse(build_target_terms(model))
        if model.family is Family.XYZ:
            n = self.n
            self._even = tuple(
                np.array([site_mask(s, n) for s in col], dtype=np.int64) for col in zip(*even_bonds(n))
            )
            self._odd = tuple(
                np.array([site_mask(s, n) for s in col], dtype=np.int64) for col in zip(*odd_bonds(n))
            )
        else:
            _, diag_terms = ising_generators(model)
            self._diag = terms_diagonal(diag_terms)
            levels, index = np.unique(self._diag, return_inverse=True)
            self._levels = levels.astype(float)
            self._level_index = index.astype(np.int64).ravel()

    # -- states -------------------------------------------------------------

    def initial_state(self) -> np.ndarray:
        n, dim = self.n, self.dim
        if self.model.family is not Family.XYZ:
            return np.full(dim, 2.0 ** (-n / 2), dtype=complex)
        singlet = np.array([0.0, 1.0, -1.0, 0.0]) / np.sqrt(2.0)
        psi = np.ones(1, dtype=complex)
        for _ in range(n // 2):
            psi = np.kron(psi, singlet)
        return psi.astype(complex)

    def _gate_alpha(self, psi: np.ndarray, alpha: float) -> None:
        if self.model.family is Family.XYZ:
            _kernels.xyz_bonds(psi, self._odd[0], self._odd[1], alpha, self.model.delta_y, self.model.delta_z)
        else:
            _kernels.diagonal_phase(psi, self._levels, self._level_index, alpha)

    def _gate_beta(self, psi: np.ndarray, beta: float) -> None:
        if self.model.family is Family.XYZ:
            _kernels.xyz_bonds(psi, self._even[0], self._even[1], beta, self.model.delta_y, self.model.delta_z)
        else:
            _kernels.x_rotations(psi, self.n, beta)

    def apply_layer_inplace(self, psi: np.ndarray, beta: float, alpha: float) -> None:
        self._gate_alpha(psi, alpha)
        self._gate_beta(psi, beta)

    def prepare(self, x: np.ndarray | Schedule) -> np.ndarray:
        betas, alphas = _split(x)
        psi = self.initial_state()
        for b, a in zip(betas, alphas):
            self.apply_layer_inplace(psi, b, a)
        return psi

    # -- generator overlaps <lam|A|phi> --------------------------------------

    def _overlap_alpha(self, lam: np.ndarray, phi: np.ndarray) -> complex:
        if self.model.family is Family.XYZ:
            m = self.model
            return _kernels.xyz_generator_overlap(lam, phi, self._odd[0], self._odd[1], m.delta_y, m.delta_z)
        return _kernels.diagonal_overlap(lam, phi, self._diag)

    def _overlap_beta(self, lam: np.ndarray, phi: np.ndarray) -> complex:
        if self.model.family is Family.XYZ:
            m = self.model
            return _kernels.xyz_generator_overlap(lam, phi, self._even[0], self._even[1], m.delta_y, m.delta_z)
        # the X unitary is exp(+i beta H_X): its generator is -H_X
        return -_kernels.x_generator_overlap(lam, phi, self.n)

    # -- cost and gradients -------------------------------------------------

    def energy_of(self, psi: np.ndarray) -> float:
        return float(np.vdot(psi, self.hamiltonian @ psi).real)

    def energy(self, x: np.ndarray | Schedule) -> float:
        return self.energy_of(self.prepare(x))

    def cost(self, x: np.ndarray | Schedule) -> float:
        return self.scale * self.energy(x)

    def cost_and_gradient(self, x: np.ndarray | Schedule) -> tuple[float, np.ndarray]:
        """Rescaled cost and its exact gradient via one adjoint sweep."""
        betas, alphas = _split(x)
        p = len(betas)
        phi = self.prepare(x)
        lam = self.hamiltonian @ phi
        cost = self.scale * float(np.vdot(phi, lam).real)
        grad = np.zeros(2 * p)
        for m in range(p - 1, -1, -1):
            grad[m] = 2.0 * self._overlap_beta(lam, phi).imag
            self._gate_beta(phi, -betas[m])
            self._gate_beta(lam, -betas[m])
            grad[p + m] = 2.0 * self._overlap_alpha(lam, phi).imag
            self._gate_alpha(phi, -alphas[m])
            self._gate_alpha(lam, -alphas[m])
        return cost, self.scale * grad

    def gradient(self, x: np.ndarray | Schedule) -> np.ndarray:
        return self.cost_and_gradient(x)[1]

    def partial(self, x: np.ndarray | Schedule, component: int) -> float:
        """Single partial derivative of the rescaled cost.

        Only the costate is swept back to the chosen gate; the forward state at
        that gate is rebuilt from the initial state, which is cheaper than
        un-computing it for early components.
        """
        betas, alphas = _split(x)
        p = len(betas)
        if not 0 <= component < 2 * p:
            raise IndexError(f"component {component} out of range for depth {p}")
        layer, is_alpha = (component - p, True) if component >= p else (component, False)
        psi = self.prepare(x)
        lam = self.hamiltonian @ psi
        for m in range(p - 1, layer, -1):
            self._gate_beta(lam, -betas[m])
            self._gate_alpha(lam, -alphas[m])
        phi = self.initial_state()
        for m in range(layer):
            self.apply_layer_inplace(phi, betas[m], alphas[m])
        self._gate_alpha(phi, alphas[layer])
        if is_alpha:
            self._gate_beta(lam, -betas[layer])
            value = self._overlap_alpha(lam, phi)
        else:
            self._gate_beta(phi, betas[layer])
            value = self._overlap_beta(lam, phi)
        return self.scale * 2.0 * value.imag


def _split(x: np.ndarray | Schedule) -> tuple[Sequence[float], Sequence[float]]:
    if isinstance(x, Schedule):
        return x.betas, x.alphas
    x = np.asarray(x, dtype=float)
    p = x.size // 2
    return x[:p], x[p:]


@lru_cache(maxsize=64)
def simulator(model: ModelSpec) -> AnsatzSimulator:
    return AnsatzSimulator(model)


# -- functional surface -----------------------------------------------------


def initial_state(model: ModelSpec) -> StateVector:
    return StateVector(simulator(model).initial_state(), model.n_sites)


def apply_layer(state: StateVector, model: ModelSpec, beta: float, alpha: float) -> StateVector:
    if state.n_sites != model.n_sites:
        raise SizeMismatchError(f"state has {state.n_sites} sites, model has {model.n_sites}")
    psi = state.amplitudes.copy()
    simulator(model).apply_layer_inplace(psi, beta, alpha)
    return StateVector(psi, state.n_sites)


def prepare_ansatz(model: ModelSpec, schedule: Schedule) -> StateVector:
    return StateVector(simulator(model).prepare(schedule), model.n_sites)


def correlator(state: StateVector, sites: Sequence[int], axes: Sequence[Axis | str]) -> float:
    """``<psi| sigma^{b_1}_{i_1} ... sigma^{b_k}_{i_k} |psi>``."""
    sites = tuple(int(s) for s in sites)
    axes = tuple(Axis(a) for a in axes)
    if len(sites) != len(axes):
        raise ValueError("sites and axes differ in length")
    if any(s < 1 or s > state.n_sites for s in sites):
        raise IndexError(f"sites {sites} outside [1, {state.n_sites}]")
    if len(set(sites)) != len(sites):
        raise ValueError(f"repeated site in {sites}")
    psi = state.amplitudes
    target, phase = pauli_string_action(sites, axes, state.n_sites)
    value = np.vdot(psi[target], phase * psi)
    if abs(value.imag) > IMAG_TOL:
        raise NonRealExpectationError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def reduced_rescaled_energy(model: ModelSpec, state: StateVector) -> float:
    """Rescaled energy from the handful of symmetry-independent correlators."""
    if model.family is Family.XYZ:
        weights = {Axis.X: 1.0, Axis.Y: model.delta_y, Axis.Z: model.delta_z}
        return sum(
            w * (correlator(state, (1, 2), (b, b)) + correlator(state, (2, 3 if model.n_sites > 2 else 1), (b, b)))
            for b, w in weights.items()
        )
    return (
        correlator(state, (1, 2), (Axis.Z, Axis.Z))
        - model.g_x * correlator(state, (1,), (Axis.X,))
        - model.g_z * correlator(state, (1,), (Axis.Z,))
    )


def full_energy(model: ModelSpec, state: StateVector) -> float:
    return sum(t.coefficient * correlator(state, t.sites, t.axes) for t in build_target_terms(model))


def variational_energy(model: ModelSpec, schedule: Schedule) -> EnergyReport:
    """Energy via the full term sum, cross-checked against the reduced correlators."""
    state = prepare_ansatz(model, schedule)
    energy = full_energy(model, state)
    reduced = reduced_rescaled_energy(model, state)
    rescaled = model.energy_scale * energy
    if abs(rescaled - reduced) > REDUCTION_TOL:
        raise ReductionMismatchError(
            f"{model.label()} N={model.n_sites}: full {rescaled:.15g} vs reduced {reduced:.15g}"
        )
    return EnergyReport(energy=energy, rescaled_energy=rescaled)


def energy_gradient(model: ModelSpec, schedule: Schedule) -> np.ndarray:
    """Exact gradient of the rescaled cost w.r.t. ``(betas, alphas)``."""
    if schedule.depth < 1:
        raise ValueError("gradient needs depth >= 1")
    return simulator(model).gradient(schedule)


class Symmetry(str, enum.Enum):
    T2 = "T2"
    T1 = "T1"
    INV = "INV"
    PARITY_X = "PARITY_X"
    PARITY_Y = "PARITY_Y"
    PARITY_Z = "PARITY_Z"
    SZ_TOT = "SZ_TOT"


def apply_symmetry(state: StateVector, symmetry: Symmetry | str) -> np.ndarray:
    symmetry = Symmetry(symmetry)
    n, psi = state.n_sites, state.amplitudes
    if symmetry is Symmetry.T1:
        return apply_permutation(psi, translation_permutation(n, 1))
    if symmetry is Symmetry.T2:
        return apply_permutation(psi, translation_permutation(n, 2))
    if symmetry is Symmetry.INV:
        return apply_permutation(psi, inversion_permutation(n))
    if symmetry is Symmetry.SZ_TOT:
        raise ValueError("SZ_TOT is an observable, not a unitary; use symmetry_check")
    axis = {Symmetry.PARITY_X: Axis.X, Symmetry.PARITY_Y: Axis.Y, Symmetry.PARITY_Z: Axis.Z}[symmetry]
    sites = tuple(range(1, n + 1))
    target, phase = pauli_string_action(sites, (axis,) * n, n)
    out = np.empty_like(psi)
    out[target] = phase * psi
    return out


def symmetry_check(state: StateVector, symmetry: Symmetry | str) -> tuple[complex | float, float]:
    """Rayleigh quotient and eigen-residual ``||S psi - q psi||``.

    For ``SZ_TOT`` (with S^z = sum_j sigma^z_j / 2) the pair is the
    expectation value and the variance.
    """
    symmetry = Symmetry(symmetry)
    psi = state.amplitudes
    if symmetry is Symmetry.SZ_TOT:
        idx = np.arange(state.dim)
        ones = np.zeros(state.dim)
        for b in range(state.n_sites):
            ones += (idx >> b) & 1
        sz = (state.n_sites - 2 * ones) / 2.0
        prob = np.abs(psi) ** 2
        mean = float(prob @ sz)
        var = float(prob @ (sz - mean) ** 2)
        return mean, var
    image = apply_symmetry(state, symmetry)
    q = complex(np.vdot(psi, image))
    return q, float(np.linalg.norm(image - q * psi))


def sector_symmetries(model: ModelSpec) -> dict[Symmetry, complex]:
    """Symmetries that confine the ansatz, with the eigenvalue of the sector."""
    sign = (-1.0) ** (model.n_sites // 2)
    if model.family is Family.XYZ:
        return {
            Symmetry.T2: 1.0,
            Symmetry.INV: sign,
            Symmetry.PARITY_X: sign,
            Symmetry.PARITY_Y: sign,
            Symmetry.PARITY_Z: sign,
        }
    out = {Symmetry.T1: 1.0, Symmetry.INV: 1.0}
    if model.family is Family.TFIM:
        out[Symmetry.PARITY_X] = 1.0
    return out
