"""Cylinder return maps and a bifurcation atlas for a periodically forced
heteroclinic network on the two-sphere."""

from .system import (
    DerivedConstants,
    EquilibriumData,
    ParameterError,
    SystemParams,
    derive_constants,
    equilibria,
    vector_field,
)
from .returnmap import (
    CylinderPoint,
    Jacobian2,
    MapParams,
    cylinder_map,
    cylinder_step,
    iterate_map,
    map_jacobian,
)
from .flow import IntegratorConfig, numerical_return

__version__ = "0.1.0"

__all__ = [
    "SystemParams",
    "DerivedConstants",
    "EquilibriumData",
    "ParameterError",
    "derive_constants",
    "vector_field",
    "equilibria",
    "MapParams",
    "CylinderPoint",
    "Jacobian2",
    "cylinder_map",
    "cylinder_step",
    "iterate_map",
    "map_jacobian",
    "IntegratorConfig",
    "numerical_return",
    "__version__",
]
