"""Subdifferentials of pointwise suprema of convex functions: exact
polyhedral calculus, a value-only oracle and certified theorem formulas."""

__version__ = "0.1.0"

from .family import Family, active_set, sup_eval  # noqa: E402
from .oracle import OracleConfig, oracle_eps_subdiff, oracle_subdiff  # noqa: E402
from .theorems import CertReport, Options, TheoremId, build_rhs, certify  # noqa: E402

__all__ = [
    "CertReport",
    "Family",
    "Options",
    "OracleConfig",
    "TheoremId",
    "__version__",
    "active_set",
    "build_rhs",
    "certify",
    "oracle_eps_subdiff",
    "oracle_subdiff",
    "sup_eval",
]
