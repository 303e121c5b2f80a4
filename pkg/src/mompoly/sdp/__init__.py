"""SDP data, the embedded interior-point solver and SDPA file exchange."""
from .problem import SdpBlock, SdpProblem, SdpSolution, recompute_residuals
from .ipm import DEFAULT_TOL, ProblemTooLarge, solve_ipm
from .kernels import ACTIVE as ACTIVE_KERNEL, COMPILED_AVAILABLE
from .sdpa import read_sdpa, read_sdpa_solution, write_sdpa

__all__ = [
    "SdpBlock", "SdpProblem", "SdpSolution", "recompute_residuals", "solve_ipm",
    "DEFAULT_TOL", "ProblemTooLarge", "ACTIVE_KERNEL", "COMPILED_AVAILABLE",
    "write_sdpa", "read_sdpa", "read_sdpa_solution",
]
