"""Closed-form TFIM ansatz evaluation through independent pseudospin modes.

After Jordan-Wigner and Bogoliubov transformations the even-N periodic chain
splits into N/2 two-level systems labelled by ``k_n = pi (2n - 1) / N``. Each
layer rotates the Bloch vector of mode ``k`` by ``R_{b_k}(4 alpha)`` and then
by ``R_z(4 beta)``, starting from ``z``. The target ground state of the mode
points along ``v_k = (b_k + g z) / |b_k + g z|``.

The chain residual energy is the mode residual averaged with the single
particle energies ``|b_k + g z|`` as weights; the plain mean is available
for diagnostics only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .models import Schedule

Combination = Literal["weighted", "mean"]
DEFAULT_COMBINATION: Combination = "weighted"

_Z = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class PseudospinMode:
    k: float
    g: float

    def __post_init__(self) -> None:
        if not 0.0 < self.k < math.pi:
            raise ValueError(f"wave-vector {self.k} outside (0, pi)")
        if self.g <= 0:
            raise ValueError(f"field g must be positive, got {self.g}")

    @property
    def b(self) -> np.ndarray:
        return np.array([-math.sin(self.k), 0.0, math.cos(self.k)])

    @property
    def weight(self) -> float:
        """``|b_k + g z|``, half the quasiparticle energy."""
        return math.sqrt(1.0 + self.g * self.g + 2.0 * self.g * math.cos(self.k))

    @property
    def v(self) -> np.ndarray:
        return (self.b + self.g * _Z) / self.weight


def rotation_matrix(axis: Sequence[float], angle: float) -> np.ndarray:
    """Right-handed rotation by ``angle`` about ``axis`` (Rodrigues)."""
    w = np.asarray(axis, dtype=float)
    w = w / np.linalg.norm(w)
    k = np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def _rotate(r: np.ndarray, w: np.ndarray, angle: float) -> np.ndarray:
    # Rodrigues applied to a vector; w is a unit axis
    c, s = math.cos(angle), math.sin(angle)
    return r * c + np.cross(w, r) * s + w * (w @ r) * (1.0 - c)


def mode_wavevectors(n_sites: int) -> np.ndarray:
    if n_sites < 2 or n_sites % 2:
        raise ValueError(f"n_sites must be even and >= 2, got {n_sites}")
    n = np.arange(1, n_sites // 2 + 1)
    return np.pi * (2 * n - 1) / n_sites


def mode_bloch_vector(k: float, schedule: Schedule) -> np.ndarray:
    b = PseudospinMode(k, 1.0).b
    r = _Z.copy()
    for beta, alpha in zip(schedule.betas, schedule.alphas):
        r = _rotate(r, b, 4.0 * alpha)
        r = _rotate(r, _Z, 4.0 * beta)
    return r


def mode_residual(k: float, g: float, schedule: Schedule) -> float:
    """Residual energy of the two-level system at wave-vector ``k``."""
    mode = PseudospinMode(k, g)
    r = mode_bloch_vector(k, schedule)
    return float(min(max(0.5 - 0.5 * (mode.v @ r), 0.0), 1.0))


def _mode_table(n_sites: int, g: float, schedule: Schedule) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode residuals and weights, vectorised over ascending k."""
    if g <= 0:
        raise ValueError(f"field g must be positive, got {g}")
    ks = mode_wavevectors(n_sites)
    b = np.stack([-np.sin(ks), np.zeros_like(ks), np.cos(ks)], axis=1)
    r = np.tile(_Z, (ks.size, 1))
    for beta, alpha in zip(schedule.betas, schedule.alphas):
        c, s = math.cos(4.0 * alpha), math.sin(4.0 * alpha)
        r = r * c + np.cross(b, r) * s + b * np.sum(b * r, axis=1, keepdims=True) * (1.0 - c)
        c, s = math.cos(4.0 * beta), math.sin(4.0 * beta)
        x, y = r[:, 0].copy(), r[:, 1].copy()
        r[:, 0] = c * x - s * y
        r[:, 1] = s * x + c * y
    u = b + g * _Z
    weights = np.linalg.norm(u, axis=1)
    v = u / weights[:, None]
    residuals = np.clip(0.5 - 0.5 * np.sum(v * r, axis=1), 0.0, 1.0)
    return residuals, weights


def tfim_residual_energy(
    n_sites: int, g: float, schedule: Schedule, combination: Combination = DEFAULT_COMBINATION
) -> float:
    residuals, weights = _mode_table(n_sites, g, schedule)
    if combination == "weighted":
        return float(np.clip(np.dot(weights, residuals) / weights.sum(), 0.0, 1.0))
    if combination == "mean":
        return float(residuals.mean())
    raise ValueError(f"unknown combination {combination!r}")


def tfim_energy(n_sites: int, g: float, schedule: Schedule) -> tuple[float, float, float]:
    """``(E, E_min, E_max)`` of the TFIM ansatz from the mode sum."""
    residuals, weights = _mode_table(n_sites, g, schedule)
    total = 2.0 * weights.sum()
    return float(total * (2.0 * np.dot(weights, residuals) / weights.sum() - 1.0)), -total, total


def select_combination(
    n_sites: int = 8, g: float = 1.0, depth: int = 3, n_schedules: int = 10, seed: int = 2024, tol: float = 1e-9
) -> Combination:
    """Pick the mode-combination rule that reproduces the exact residual energy.

    Runs both rules on random schedules and compares with the state-vector
    energy normalised by exact extremal energies.
    """
    from .models import ModelSpec
    from .spectra import extremal_energies, residual_energy
    from .statevector import simulator

    model = ModelSpec.tfim(n_sites, g)
    bounds = extremal_energies(model)
    sim = simulator(model)
    rng = np.random.default_rng(seed)
    worst = {"weighted": 0.0, "mean": 0.0}
    for _ in range(n_schedules):
        schedule = Schedule.random(depth, rng)
        exact = residual_energy(sim.energy(schedule), bounds)
        for rule in worst:
            worst[rule] = max(worst[rule], abs(tfim_residual_energy(n_sites, g, schedule, rule) - exact))
    matching = [rule for rule, err in worst.items() if err < tol]
    if len(matching) != 1:
        raise RuntimeError(f"normalization oracle is inconclusive: {worst}")
    return matching[0]  # type: ignore[return-value]
