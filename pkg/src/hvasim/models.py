"""Model definitions, schedules and Pauli term lists for periodic spin chains.

Sites are 1-based throughout this module; ``site + N`` wraps back to ``site``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np


class InvalidModelError(ValueError):
    """Raised when a model definition violates its invariants."""


class Family(str, enum.Enum):
    XYZ = "XYZ"
    LTFIM = "LTFIM"
    TFIM = "TFIM"


# Keys accepted per family in a config block; anything else is rejected.
_FAMILY_KEYS = {
    Family.XYZ: {"delta_y", "delta_z"},
    Family.LTFIM: {"g_x", "g_z"},
    Family.TFIM: {"g_x"},
}
_DEFAULTS = {"delta_y": 1.0, "delta_z": 1.0, "g_x": 1.0, "g_z": 0.0}


@dataclass(frozen=True)
class ModelSpec:
    """One Hamiltonian family at a given parameter point and chain length."""

    family: Family
    n_sites: int
    delta_y: float = 0.0
    delta_z: float = 0.0
    g_x: float = 0.0
    g_z: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        if isinstance(self.n_sites, bool) or int(self.n_sites) != self.n_sites:
            raise InvalidModelError(f"n_sites must be an integer, got {self.n_sites!r}")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        for name in ("delta_y", "delta_z", "g_x", "g_z"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidModelError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        self._validate()

    def _validate(self) -> None:
        n = self.n_sites
        if n < 2 or n % 2:
            raise InvalidModelError(f"n_sites must be even and >= 2, got {n}")
        if self.family is Family.XYZ:
            if self.delta_y <= 0 or self.delta_z <= 0:
                raise InvalidModelError("XYZ requires delta_y > 0 and delta_z > 0")
            if self.g_x or self.g_z:
                raise InvalidModelError("XYZ takes no g_x/g_z fields")
        else:
            if self.g_x <= 0:
                raise InvalidModelError(f"{self.family.value} requires g_x > 0")
            if self.delta_y or self.delta_z:
                raise InvalidModelError(f"{self.family.value} takes no delta_y/delta_z")
            if self.family is Family.LTFIM and self.g_z < 0:
                raise InvalidModelError("LTFIM requires g_z >= 0")
            if self.family is Family.TFIM and self.g_z != 0:
                raise InvalidModelError("TFIM has g_z = 0 by definition")

    # -- constructors -------------------------------------------------------

    @classmethod
    def xyz(cls, n_sites: int, delta_y: float = 1.0, delta_z: float = 1.0) -> ModelSpec:
        return cls(Family.XYZ, n_sites, delta_y=delta_y, delta_z=delta_z)

    @classmethod
    def ltfim(cls, n_sites: int, g_x: float = 1.0, g_z: float = 1.0) -> ModelSpec:
        return cls(Family.LTFIM, n_sites, g_x=g_x, g_z=g_z)

    @classmethod
    def tfim(cls, n_sites: int, g_x: float = 1.0) -> ModelSpec:
        return cls(Family.TFIM, n_sites, g_x=g_x)

    @classmethod
    def from_config(cls, block: Mapping[str, Any]) -> ModelSpec:
        """Build a spec from a ``family``/``n_sites``/parameter mapping.

        Absent parameters take the family default (Heisenberg point for XYZ,
        ``g_x = 1, g_z = 0`` for the Ising families); unknown keys are rejected.
        """
        if "family" not in block:
            raise InvalidModelError("model block: missing key 'family'")
        try:
            family = Family(str(block["family"]).upper())
        except ValueError:
            raise InvalidModelError(f"model block: unknown family {block['family']!r}") from None
        allowed = {"family", "n_sites"} | _FAMILY_KEYS[family]
        extra = sorted(set(block) - allowed)
        if extra:
            raise InvalidModelError(f"model block: unexpected key(s) {extra} for family {family.value}")
        if "n_sites" not in block:
            raise InvalidModelError("model block: missing key 'n_sites'")
        n = block["n_sites"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise InvalidModelError(f"model block: key 'n_sites' must be an integer, got {n!r}")
        params: dict[str, float] = {}
        for key in _FAMILY_KEYS[family]:
            value = block.get(key, _DEFAULTS[key])
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidModelError(f"model block: key {key!r} must be a number, got {value!r}")
            params[key] = float(value)
        return cls(family, n, **params)

    def to_config(self) -> dict[str, Any]:
        out: dict[str, Any] = {"family": self.family.value, "n_sites": self.n_sites}
        for key in sorted(_FAMILY_KEYS[self.family]):
            out[key] = getattr(self, key)
        return out

    def with_size(self, n_sites: int) -> ModelSpec:
        return ModelSpec(self.family, n_sites, self.delta_y, self.delta_z, self.g_x, self.g_z)

    @property
    def is_ising(self) -> bool:
        return self.family is not Family.XYZ

    @property
    def energy_scale(self) -> float:
        """Factor converting the energy into the size-independent rescaled cost."""
        return 2.0 / self.n_sites if self.family is Family.XYZ else 1.0 / self.n_sites

    def label(self) -> str:
        if self.family is Family.XYZ:
            return f"XYZ(dy={self.delta_y:g},dz={self.delta_z:g})"
        if self.family is Family.LTFIM:
            return f"LTFIM(gx={self.g_x:g},gz={self.g_z:g})"
        return f"TFIM(gx={self.g_x:g})"


@dataclass(frozen=True)
class Schedule:
    """Layer angles ``(beta_m, alpha_m)`` for m = 1..P."""

    betas: tuple[float, ...]
    alphas: tuple[float, ...]

    def __post_init__(self) -> None:
        betas = tuple(float(b) for b in self.betas)
        alphas = tuple(float(a) for a in self.alphas)
        if len(betas) != len(alphas):
            raise ValueError(f"betas ({len(betas)}) and alphas ({len(alphas)}) differ in length")
        if not all(math.isfinite(x) for x in betas + alphas):
            raise ValueError("schedule angles must be finite")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas", alphas)

    @property
    def depth(self) -> int:
        return len(self.betas)

    def __len__(self) -> int:
        return len(self.betas)

    def as_vector(self) -> np.ndarray:
        """Flat parameter vector ``(beta_1..beta_P, alpha_1..alpha_P)``."""
        return np.array(self.betas + self.alphas, dtype=float)

    @classmethod
    def from_vector(cls, x: Sequence[float] | np.ndarray) -> Schedule:
        x = np.asarray(x, dtype=float).ravel()
        if x.size % 2:
            raise ValueError(f"parameter vector must have even length, got {x.size}")
        p = x.size // 2
        return cls(tuple(x[:p]), tuple(x[p:]))

    @classmethod
    def zeros(cls, depth: int) -> Schedule:
        return cls((0.0,) * depth, (0.0,) * depth)

    @classmethod
    def random(cls, depth: int, rng: np.random.Generator, low: float = -np.pi, high: float = np.pi) -> Schedule:
        return cls.from_vector(rng.uniform(low, high, size=2 * depth))

    def __neg__(self) -> Schedule:
        return Schedule(tuple(-b for b in self.betas), tuple(-a for a in self.alphas))


class Axis(str, enum.Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


@dataclass(frozen=True)
class PauliTerm:
    coefficient: float
    sites: tuple[int, ...]
    axes: tuple[Axis, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))
        object.__setattr__(self, "axes", tuple(Axis(a) for a in self.axes))
        if len(self.sites) != len(self.axes):
            raise ValueError("sites and axes must have the same length")
        if len(set(self.sites)) != len(self.sites):
            raise ValueError(f"repeated site in term {self.sites}")

    @property
    def bond(self) -> frozenset[int]:
        return frozenset(self.sites)


@dataclass(frozen=True)
class PauliTermList:
    n_sites: int
    terms: tuple[PauliTerm, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if any(s < 1 or s > self.n_sites for s in term.sites):
                raise ValueError(f"term sites {term.sites} outside [1, {self.n_sites}]")

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __add__(self, other: PauliTermList) -> PauliTermList:
        if other.n_sites != self.n_sites:
            raise ValueError("cannot add term lists on different chain lengths")
        return PauliTermList(self.n_sites, self.terms + other.terms)

    def scaled(self, factor: float) -> PauliTermList:
        return PauliTermList(
            self.n_sites, tuple(PauliTerm(factor * t.coefficient, t.sites, t.axes) for t in self.terms)
        )


def wrap(site: int, n_sites: int) -> int:
    return (site - 1) % n_sites + 1


def _bond_terms(model: ModelSpec, bonds: Iterable[tuple[int, int]]) -> list[PauliTerm]:
    couplings = ((Axis.X, 1.0), (Axis.Y, model.delta_y), (Axis.Z, model.delta_z))
    return [PauliTerm(c, (i, j), (ax, ax)) for i, j in bonds for ax, c in couplings]


def even_bonds(n_sites: int) -> list[tuple[int, int]]:
    return [(2 * j - 1, 2 * j) for j in range(1, n_sites // 2 + 1)]


def odd_bonds(n_sites: int) -> list[tuple[int, int]]:
    return [(2 * j, wrap(2 * j + 1, n_sites)) for j in range(1, n_sites // 2 + 1)]


def all_bonds(n_sites: int) -> list[tuple[int, int]]:
    return [(j, wrap(j + 1, n_sites)) for j in range(1, n_sites + 1)]


def build_target_terms(model: ModelSpec) -> PauliTermList:
    """Term list of the target Hamiltonian for ``model``."""
    n = model.n_sites
    if model.family is Family.XYZ:
        return PauliTermList(n, _bond_terms(model, all_bonds(n)))
    terms = [PauliTerm(1.0, (i, j), (Axis.Z, Axis.Z)) for i, j in all_bonds(n)]
    terms += [PauliTerm(-model.g_x, (j,), (Axis.X,)) for j in range(1, n + 1)]
    if model.g_z != 0:
        terms += [PauliTerm(-model.g_z, (j,), (Axis.Z,)) for j in range(1, n + 1)]
    return PauliTermList(n, terms)


def split_even_odd(model: ModelSpec) -> tuple[PauliTermList, PauliTermList]:
    """``(H_even, H_odd)`` for an XYZ chain; the wrap bond (N, 1) is odd."""
    if model.family is not Family.XYZ:
        raise InvalidModelError(f"even/odd split is defined for XYZ only, got {model.family.value}")
    n = model.n_sites
    return (
        PauliTermList(n, _bond_terms(model, even_bonds(n))),
        PauliTermList(n, _bond_terms(model, odd_bonds(n))),
    )


def ising_generators(model: ModelSpec) -> tuple[PauliTermList, PauliTermList]:
    """``(H_X, H_ZZ - g_z H_Z)`` for the Ising families."""
    if model.family is Family.XYZ:
        raise InvalidModelError("Ising generators requested for an XYZ model")
    n = model.n_sites
    h_x = PauliTermList(n, [PauliTerm(1.0, (j,), (Axis.X,)) for j in range(1, n + 1)])
    diag = [PauliTerm(1.0, (i, j), (Axis.Z, Axis.Z)) for i, j in all_bonds(n)]
    if model.g_z != 0:
        diag += [PauliTerm(-model.g_z, (j,), (Axis.Z,)) for j in range(1, n + 1)]
    return h_x, PauliTermList(n, diag)


def lightcone_threshold(family: Family | str, depth: int) -> int:
    """Chain length beyond which the rescaled landscape at ``depth`` no longer depends on N."""
    family = Family(family)
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    return 4 * depth + 2 if family is Family.XYZ else 2 * depth + 1
