__version__ = "0.2.0"

from .lattice import EuclideanLattice, dual, degree, direct_sum, from_basis, make_lattice
from .theta import ThetaResult, h0_theta, h1_theta

__all__ = [
    "EuclideanLattice",
    "ThetaResult",
    "degree",
    "direct_sum",
    "dual",
    "from_basis",
    "h0_theta",
    "h1_theta",
    "make_lattice",
]
