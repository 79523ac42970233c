"""Iterated function systems on compact metric spaces and their shadowing."""
from .errors import (CertificateViolation, IFSError, InternalInvariantError, NotInvertibleError,
                     PreconditionError, SizeCapError, UniquenessViolation)
from .ifs_core import (CircleAffine, FiniteMap, IFSystem, IntervalClamp, IntervalTent, ShiftMap,
                       SymbolWord, compose_backward, compose_forward, expansion_constants,
                       inverse_system, lipschitz_constant, power_system)
from .orbits import (Orbit, PseudoOrbit, PseudoOrbitEnsemble, generate_decaying_pseudo_orbit,
                     generate_orbit, generate_pseudo_orbit, tilde_distance, verify_pseudo_orbit)
from .spaces import TAU, BinaryShift, Circle, FiniteTable, Interval

__version__ = "0.1.0"

__all__ = [
    "CertificateViolation", "IFSError", "InternalInvariantError", "NotInvertibleError",
    "PreconditionError", "SizeCapError", "UniquenessViolation", "CircleAffine", "FiniteMap",
    "IFSystem", "IntervalClamp", "IntervalTent", "ShiftMap", "SymbolWord", "compose_backward",
    "compose_forward", "expansion_constants", "inverse_system", "lipschitz_constant",
    "power_system", "Orbit", "PseudoOrbit", "PseudoOrbitEnsemble", "generate_decaying_pseudo_orbit",
    "generate_orbit", "generate_pseudo_orbit", "tilde_distance", "verify_pseudo_orbit", "TAU",
    "BinaryShift", "Circle", "FiniteTable", "Interval",
]
