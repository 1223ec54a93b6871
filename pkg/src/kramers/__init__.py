"""Metastable reduction of non-reversible diffusions on polynomial landscapes."""
__version__ = "0.1.0"

from .chain import assemble_chain, long_time_structure, semigroup, solve_resolvent
from .heights import analyze
from .landscape import find_critical_points, verify_field_conditions
from .potential import CATALOG, PotentialSpec, catalog, load_potential, resolve_potential

__all__ = [
    "__version__", "analyze", "assemble_chain", "long_time_structure", "semigroup",
    "solve_resolvent", "find_critical_points", "verify_field_conditions", "CATALOG",
    "PotentialSpec", "catalog", "load_potential", "resolve_potential",
]
