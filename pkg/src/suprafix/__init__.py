"""Fixed-point verification in suprametric spaces."""

from .contraction import ContractionSpec, VerificationReport
from .fredholm import FredholmProblem, GridFunction, certify, solve
from .maps import SelfMap
from .picard import OrbitTrace, StoppingCriteria, iterate
from .space import FiniteSpace, IntervalSpace, check_axioms, minimal_rho

__version__ = "0.1.0"

__all__ = [
    "ContractionSpec", "VerificationReport", "FredholmProblem", "GridFunction", "certify", "solve",
    "SelfMap", "OrbitTrace", "StoppingCriteria", "iterate",
    "FiniteSpace", "IntervalSpace", "check_axioms", "minimal_rho",
]
