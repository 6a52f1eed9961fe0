"""Upper and lower bounds on extreme values of observables along polynomial ODE trajectories."""
from .bounds import compute_bound, degree_sweep, iterative_tighten, tightened_spec
from .localization import LevelSetGrid, audit_containment, compute_r_eps, compute_s_delta
from .polynomial import Polynomial, PolynomialParseError, parse
from .sdpsolve import SdpProblem, SdpSolution, Status, solve
from .soscert import BoundResult, assemble_bound_sdp, recover_v
from .system import (BUILTINS, Horizon, ProblemSpec, SemialgebraicSet, augment_integral,
                     builtin_problem, burgers_truncation, lie_derivative)
from .trajectories import (check_certificate, integrate, limit_cycle, lower_bound,
                           max_on_limit_cycle, trajectory_max)

__all__ = [
    "BUILTINS", "BoundResult", "Horizon", "LevelSetGrid", "Polynomial", "PolynomialParseError",
    "ProblemSpec", "SdpProblem", "SdpSolution", "SemialgebraicSet", "Status",
    "assemble_bound_sdp", "audit_containment", "augment_integral", "builtin_problem",
    "burgers_truncation", "check_certificate", "compute_bound", "compute_r_eps",
    "compute_s_delta", "degree_sweep", "integrate", "iterative_tighten", "lie_derivative",
    "limit_cycle", "lower_bound", "max_on_limit_cycle", "parse", "recover_v", "solve",
    "tightened_spec", "trajectory_max",
]
