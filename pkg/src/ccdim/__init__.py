"""Certified dimension enclosures for cookie-cutter-like sets on the line."""

from __future__ import annotations

from . import _backend
from .errors import (
    CCDimError,
    ConfigError,
    DomainFault,
    ExpansionViolation,
    InputError,
    NumericError,
    ParseError,
)
from .maplang import differentiate, evaluate, parse
from .measure import (
    ball_intersection_count,
    box_count,
    boxdim_regress,
    certified_bounds,
    measure_enclosure,
    moran_cover,
    nu,
)
from .pressure import (
    corollary_check,
    dimension_enclosure,
    partition_sum,
    pressure_bracket,
    pressure_curve,
)
from .system import System, affine_system, distortion_constant, load_system
from .words import Address, Word, enumerate_level, parse_word

__version__ = "0.1.0"


def backend() -> str:
    """Name of the active kernel backend (``"cython"`` or ``"python"``)."""
    return _backend.kernels.NAME


__all__ = [
    "Address", "CCDimError", "ConfigError", "DomainFault", "ExpansionViolation",
    "InputError", "NumericError", "ParseError", "System", "Word", "affine_system",
    "backend", "ball_intersection_count", "box_count", "boxdim_regress",
    "certified_bounds", "corollary_check", "differentiate", "dimension_enclosure",
    "distortion_constant", "enumerate_level", "evaluate", "load_system",
    "measure_enclosure", "moran_cover", "nu", "parse", "parse_word", "partition_sum",
    "pressure_bracket", "pressure_curve",
]
