"""Extremal eigenvalues, ground spaces, residual energy and fidelities."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .models import ModelSpec, PauliTermList, build_target_terms
from .operators import apply_permutation, terms_to_sparse, translation_permutation
from .statevector import MAX_SITES, SizeMismatchError, SizeTooLargeError, StateVector

log = logging.getLogger(__name__)

DENSE_MAX_SITES = 10
LANCZOS_MAX_ITER = 500
LANCZOS_TOL = 1e-10
DEGENERACY_TOL = 1e-8
CACHE_FORMAT_VERSION = 1


class ConvergenceError(RuntimeError):
    pass


class DegenerateSpectrumError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralBounds:
    """Extremal energies, optionally with an orthonormal basis of the ground space.

    ``ground_space`` has shape ``(dim, g)`` with ``g`` the ground degeneracy.
    """

    e_min: float
    e_max: float
    ground_space: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.e_min > self.e_max:
            raise ValueError(f"e_min {self.e_min} exceeds e_max {self.e_max}")

    @property
    def ground_state(self) -> StateVector | None:
        if self.ground_space is None:
            return None
        vec = self.ground_space[:, 0]
        return StateVector(vec, int(np.log2(vec.size)))

    @property
    def degeneracy(self) -> int | None:
        return None if self.ground_space is None else self.ground_space.shape[1]


def lanczos_lowest(
    matvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    *,
    deflate: np.ndarray | None = None,
    max_iter: int = LANCZOS_MAX_ITER,
    tol: float = LANCZOS_TOL,
    seed: int = 12345,
) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of a real symmetric operator by Lanczos with full reorthogonalization.

    ``deflate`` columns (orthonormal) are projected out of the Krylov space.
    Convergence is declared once the true residual ``||A v - theta v||`` is
    below ``tol``.
    """
    rng = np.random.default_rng(seed)

    def project(v: np.ndarray) -> np.ndarray:
        if deflate is not None and deflate.shape[1]:
            v = v - deflate @ (deflate.T @ v)
        return v

    v = project(rng.standard_normal(dim))
    v /= np.linalg.norm(v)
    m = min(max_iter, dim)
    basis = np.zeros((m + 1, dim))
    basis[0] = v
    alphas: list[float] = []
    betas: list[float] = []
    best: tuple[float, np.ndarray] | None = None
    for j in range(m):
        w = project(matvec(basis[j]))
        a = float(basis[j] @ w)
        alphas.append(a)
        # full reorthogonalization, twice for stability
        for _ in range(2):
            w -= basis[: j + 1].T @ (basis[: j + 1] @ w)
            w = project(w)
        b = float(np.linalg.norm(w))
        theta, s = scipy.linalg.eigh_tridiagonal(np.array(alphas), np.array(betas), select="i", select_range=(0, 0))
        ritz_resid = b * abs(s[-1, 0])
        exhausted = b < 1e-12
        if ritz_resid < tol or exhausted or j == m - 1 or j % 10 == 9:
            vec = basis[: j + 1].T @ s[:, 0]
            vec /= np.linalg.norm(vec)
            vec = project(vec)
            vec /= np.linalg.norm(vec)
            true_resid = float(np.linalg.norm(project(matvec(vec)) - theta[0] * vec))
            best = (float(theta[0]), vec)
            if true_resid < tol:
                return best
            if exhausted:
                break
        betas.append(b)
        basis[j + 1] = w / b
    assert best is not None
    resid = float(np.linalg.norm(project(matvec(best[1])) - best[0] * best[1]))
    if resid < tol:
        return best
    raise ConvergenceError(f"Lanczos residual {resid:.3e} above {tol:.1e} after {len(alphas)} iterations")


def _ground_space_lanczos(h: sp.spmatrix, e_min: float, v0: np.ndarray, max_degeneracy: int = 8) -> np.ndarray:
    vecs = [v0]
    while len(vecs) < max_degeneracy:
        block = np.column_stack(vecs)
        try:
            e, v = lanczos_lowest(h.__matmul__, h.shape[0], deflate=block, seed=len(vecs))
        except ConvergenceError:
            break
        if e - e_min > DEGENERACY_TOL:
            break
        vecs.append(v)
    return np.column_stack(vecs)


def spectral_bounds_of_terms(terms: PauliTermList, with_ground_state: bool = False) -> SpectralBounds:
    n = terms.n_sites
    if n > MAX_SITES:
        raise SizeTooLargeError(f"exact spectra are capped at N <= {MAX_SITES}, got {n}")
    h = terms_to_sparse(terms)
    if np.iscomplexobj(h.data):
        raise ValueError("extremal_energies expects a real Hamiltonian")
    if n <= DENSE_MAX_SITES:
        w, v = np.linalg.eigh(h.toarray())
        e_min, e_max = float(w[0]), float(w[-1])
        ground = v[:, w - e_min < DEGENERACY_TOL] if with_ground_state else None
        return SpectralBounds(e_min, e_max, ground)
    e_min, v0 = lanczos_lowest(h.__matmul__, h.shape[0])
    neg_e_max, _ = lanczos_lowest(lambda x: -(h @ x), h.shape[0], seed=54321)
    ground = _ground_space_lanczos(h, e_min, v0) if with_ground_state else None
    return SpectralBounds(e_min, -neg_e_max, ground)


def extremal_energies(model: ModelSpec, with_ground_state: bool = False) -> SpectralBounds:
    """Smallest and largest eigenvalues of the target Hamiltonian (and its ground space)."""
    return spectral_bounds_of_terms(build_target_terms(model), with_ground_state)


def residual_energy(energy: float, bounds: SpectralBounds) -> float:
    """``(E - E_min) / (E_max - E_min)`` clipped to [0, 1]."""
    width = bounds.e_max - bounds.e_min
    if width < 1e-12:
        raise DegenerateSpectrumError("E_max - E_min below 1e-12")
    return float(min(max((energy - bounds.e_min) / width, 0.0), 1.0))


def fidelity(state: StateVector, ground: StateVector | np.ndarray | SpectralBounds) -> float:
    """Squared overlap with the ground state, or weight in a degenerate ground space."""
    if isinstance(ground, SpectralBounds):
        if ground.ground_space is None:
            raise ValueError("bounds were computed without a ground state")
        ground = ground.ground_space
    if isinstance(ground, StateVector):
        if ground.n_sites != state.n_sites:
            raise SizeMismatchError("state and ground state differ in size")
        return float(min(abs(np.vdot(ground.amplitudes, state.amplitudes)) ** 2, 1.0))
    basis = np.asarray(ground)
    if basis.ndim == 1:
        basis = basis[:, None]
    if basis.shape[0] != state.dim:
        raise SizeMismatchError("state and ground space differ in dimension")
    return float(min(np.sum(np.abs(basis.conj().T @ state.amplitudes) ** 2), 1.0))


def translational_fidelity(state: StateVector) -> float:
    """``|<psi|T|psi>|^2`` for the one-site translation T."""
    shifted = apply_permutation(state.amplitudes, translation_permutation(state.n_sites, 1))
    return float(min(abs(np.vdot(state.amplitudes, shifted)) ** 2, 1.0))


class SpectralCache:
    """JSON sidecar of extremal energies keyed by model and chain length.

    Ground spaces are held in memory only.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, dict[str, float]] = {}
        self._ground: dict[str, SpectralBounds] = {}
        if self.path is not None and self.path.exists():
            data = json.loads(self.path.read_text())
            if data.get("format_version") == CACHE_FORMAT_VERSION:
                self._entries = dict(data.get("entries", {}))
            else:
                log.warning("ignoring spectral cache %s with format %r", self.path, data.get("format_version"))

    @staticmethod
    def key(model: ModelSpec) -> str:
        params = ",".join(f"{k}={v!r}" for k, v in model.to_config().items() if k not in ("family", "n_sites"))
        return f"v{CACHE_FORMAT_VERSION}|{model.family.value}|{params}|N={model.n_sites}"

    def get(self, model: ModelSpec, with_ground_state: bool = False) -> SpectralBounds:
        key = self.key(model)
        if with_ground_state:
            if key not in self._ground:
                bounds = extremal_energies(model, with_ground_state=True)
                self._ground[key] = bounds
                self._store(key, bounds)
            return self._ground[key]
        if key in self._ground:
            return self._ground[key]
        if key not in self._entries:
            self._store(key, extremal_energies(model))
        entry = self._entries[key]
        return SpectralBounds(entry["e_min"], entry["e_max"])

    def _store(self, key: str, bounds: SpectralBounds) -> None:
        self._entries[key] = {"e_min": bounds.e_min, "e_max": bounds.e_max}
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            payload = {"format_version": CACHE_FORMAT_VERSION, "entries": dict(sorted(self._entries.items()))}
            self.path.write_text(json.dumps(payload, indent=1, sort_keys=True))


_default_cache = SpectralCache()


def default_cache() -> SpectralCache:
    return _default_cache
