"""Local discrete convolution solver for Maxwell's equations on nested grids."""
from .grid import AlignmentError, ConfigurationError, ContractViolation, IndexBox
from .conv import NodeField
from .kernel import DiscreteKernel, PropagatorSet, assemble_propagator_set
from .propagator import Level, StateU, advance_single_level, make_quadrature
from .amr import Hierarchy, advance_hierarchy, composite_field, regrid

__all__ = [
    "AlignmentError",
    "ConfigurationError",
    "ContractViolation",
    "IndexBox",
    "NodeField",
    "DiscreteKernel",
    "PropagatorSet",
    "assemble_propagator_set",
    "Level",
    "StateU",
    "advance_single_level",
    "make_quadrature",
    "Hierarchy",
    "advance_hierarchy",
    "composite_field",
    "regrid",
]
__version__ = "0.1.0"
