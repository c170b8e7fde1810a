"""State-vector and free-fermion simulation of the Hamiltonian variational ansatz on periodic spin chains."""

from .models import Family, InvalidModelError, ModelSpec, Schedule
from .optimize import OptimizerConfig, minimize
from .statevector import EnergyReport, StateVector, simulator

__version__ = "0.1.0"

__all__ = [
    "EnergyReport",
    "Family",
    "InvalidModelError",
    "ModelSpec",
    "OptimizerConfig",
    "Schedule",
    "StateVector",
    "minimize",
    "simulator",
    "__version__",
]
