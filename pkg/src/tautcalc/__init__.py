"""tautcalc: exact tautological-ring calculator on moduli of stable curves."""

from .algebra import (APoly, InterpolationError, Rational, ULaurent,
                      laurent_flip_u, laurent_negative_part, poly_interpolate)
from .graphs import (StableGraph, StarTree, Stratum, automorphism_count,
                     canonical_form, enumerate_pssrt, enumerate_stable_graphs,
                     enumerate_strata, pssrt_count)
from .strata import (TautClass, fundamental, integrate, kappa_class, multiply,
                     pair, psi_class, psi_integral)

__all__ = [
    "APoly", "InterpolationError", "Rational", "ULaurent",
    "laurent_flip_u", "laurent_negative_part", "poly_interpolate",
    "StableGraph", "StarTree", "Stratum", "automorphism_count",
    "canonical_form", "enumerate_pssrt", "enumerate_stable_graphs",
    "enumerate_strata", "pssrt_count",
    "TautClass", "fundamental", "integrate", "kappa_class", "multiply",
    "pair", "psi_class", "psi_integral",
]

__version__ = "0.1.0"
