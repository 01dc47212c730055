"""Time-dependent Hamiltonian mechanics on locally conformal symplectic charts."""

__version__ = "0.1.0"

from .expr import Chart, Expr, parse
from .exterior import DifferentialForm, VectorFieldExpr, exterior_derivative, ldr_differential, wedge
from .lcs import LcsStructure, cotangent_lcs, lee_field, validate_lcs
from .dynamics import HamiltonianSystem, hamiltonian_field, integrate, suspension
from .canonical import CanonicalCandidate, check_canonical, verify_equivalences
from .hamjac import TimeSection, check_theta_closed, gamma_relatedness, hj_residual, vertical_lift
from .contact import ContactPair, builtin_structure, lcs_from_pair, reeb_fields, verify_contact_pair

__all__ = [
    "CanonicalCandidate", "Chart", "ContactPair", "DifferentialForm", "Expr", "HamiltonianSystem",
    "LcsStructure", "TimeSection", "VectorFieldExpr", "builtin_structure", "check_canonical",
    "check_theta_closed", "cotangent_lcs", "exterior_derivative", "gamma_relatedness", "hamiltonian_field",
    "hj_residual", "integrate", "lcs_from_pair", "ldr_differential", "lee_field", "parse", "reeb_fields",
    "suspension", "validate_lcs", "verify_contact_pair", "verify_equivalences",
    "vertical_lift", "wedge",
]
