"""Off-resonant Raman quantum memory in a warm atomic vapour: analytic
storage and retrieval kernels, a Maxwell-Bloch oracle, optimal-mode bounds and
a measurement-chain emulation."""
from ._accel import backend
from .config import RunConfig, load_config
from .core import (ComplexEnvelope, ControlProfile, DepthGrid, PhysicalParams, SpinWaveProfile,
                   TimeGrid, build_control, gaussian_envelope)
from .errors import RamanMemError
from .model import MemorySetup
from .raman import efficiencies, overlap_visibility, retrieve, store, transmit

__version__ = "0.1.0"

__all__ = [
    "ComplexEnvelope", "ControlProfile", "DepthGrid", "MemorySetup", "PhysicalParams",
    "RamanMemError", "RunConfig", "SpinWaveProfile", "TimeGrid", "backend", "build_control", "efficiencies",
    "gaussian_envelope", "load_config", "overlap_visibility", "retrieve", "store", "transmit",
]
