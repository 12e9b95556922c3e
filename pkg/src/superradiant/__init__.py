"""Landau theory of superradiant phase transitions in generalized Dicke models."""
from .model import (
    Family,
    MeanRule,
    ModelError,
    ModelSpec,
    PhysicalParams,
    ReducedParams,
    make_spec,
    physical_from_reduced,
    reduce,
    validate,
)

__version__ = "0.1.0"
