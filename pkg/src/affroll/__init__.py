"""Rigid bodies rolling on a plane under affine nonholonomic constraints."""
from ._accel import JIT_ENABLED, backend_name
from .dynamics import FullState, ReducedState, ScenarioParams, SphereReducedState
from .integrate import IntegratorOptions, System, integrate

__version__ = "0.1.0"
__all__ = [
    "JIT_ENABLED",
    "backend_name",
    "FullState",
    "ReducedState",
    "ScenarioParams",
    "SphereReducedState",
    "IntegratorOptions",
    "System",
    "integrate",
]
