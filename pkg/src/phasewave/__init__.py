"""Entropy-stable DG spectral element solver for weakly compressible
two-phase acoustics with Cahn-Hilliard diffuse interfaces."""

from .basis import NodalBasis, gauss_lobatto
from .config import CaseConfig, ConfigError, parse_config, serialize_config
from .discretization import BoundarySpec, Discretization, FieldStorage
from .mesh import AxisGrading, Mesh, build_cartesian_mesh
from .model import InterfaceParams, PhasePair, SourceSpec, StateVector
from .timestepping import TimeControls, run

__all__ = [
    "AxisGrading", "BoundarySpec", "CaseConfig", "ConfigError",
    "Discretization", "FieldStorage", "InterfaceParams", "Mesh",
    "NodalBasis", "PhasePair", "SourceSpec", "StateVector", "TimeControls",
    "build_cartesian_mesh", "gauss_lobatto", "parse_config", "run",
    "serialize_config",
]

__version__ = "0.1.0"
