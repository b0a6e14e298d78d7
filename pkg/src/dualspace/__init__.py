"""Dual-space compressed sensing: k-space plus real-space (or finite-difference)
sampling with one feedback round, the single-space baseline, and the tooling
used to measure where the dual program wins."""

from .signals import (
    Image,
    NoiseSpec,
    SparseSpec,
    add_noise,
    fd_inverse,
    fd_transform,
    gen_shepp_logan,
    gen_sparse_image,
    gen_step_signal,
)
from .transforms import (
    DenseOperator,
    MeasurementSet,
    SamplingPlan,
    Space,
    build_operator,
    coherence,
    dft_matrix,
    measure,
    random_plan,
)
from .bpsolver import (
    L1Problem,
    SolverConfig,
    SolverResult,
    Status,
    l0_oracle,
    lp_solve,
    solve_bp,
    solve_truncated_bp,
    solve_wtv,
    to_real_system,
)
from .dualcs import (
    DualPlanSpec,
    PeakPolicy,
    ProgramTrace,
    advantage_condition,
    min_measurements_dual,
    run_dual_cs,
    run_single_cs,
    select_peaks,
)
from .edges import (
    EdgeBudget,
    EdgeMap,
    edge_scores,
    extract_edges,
    rank_candidates,
    run_dual_edge,
    run_single_edge,
)

__version__ = "0.1.0"
