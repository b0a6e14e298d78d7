"""Equality-constrained l1 solvers: basis pursuit, truncated basis pursuit and
weighted total variation, all running on an in-house interior-point core."""

from .bp import (
    DEFAULT_CONFIG,
    L0Result,
    L1Problem,
    SolverConfig,
    SolverResult,
    dual_certificate,
    l0_oracle,
    solve_bp,
    solve_bpdn,
    solve_truncated_bp,
    to_real_system,
)
from .lp import LPSolution, Status, lp_solve
from .tv import solve_tv, solve_wtv
