"""Metrics, seeded trial batches, phase transitions, scaling fits, SNR and
null-space checks."""

from .batch import (
    EdgeTrialSpec,
    Trial,
    TrialBatch,
    TrialSpec,
    child_seed,
    parallel_map,
    resolve_workers,
    run_batch,
)
from .metrics import EXACT_FIDELITY, correlation, fidelity, is_exact
from .noise import snr_report
from .nsp import (
    GammaResult,
    RecoveryReport,
    nsp_gamma,
    nsp_search,
    tnsp_gamma,
    tnsp_search,
    verify_exact_recovery_theorem,
)
from .phase import (
    DEFAULT_TARGET,
    BoundFit,
    CurvePoint,
    PhasePoint,
    binomial_stderr,
    curves_overlap,
    edge_turning_point,
    fit_s_bound,
    fit_scaling,
    invert_s_bound,
    phase_transition,
    s_bound,
)
