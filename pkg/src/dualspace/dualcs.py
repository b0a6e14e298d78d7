"""The four-step dual-space program, its single-space baseline and the
measurement-budget model."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .bpsolver import (
    DEFAULT_CONFIG,
    L1Problem,
    SolverConfig,
    SolverResult,
    Status,
    solve_bp,
    solve_truncated_bp,
    to_real_system,
)
from .errors import DimensionError, InvalidSpecError
from .signals import Image
from .transforms import SamplingPlan, Space, build_operator, measure, random_plan

NOISELESS_THRESHOLD = 1e-6


class PeakPolicy(str, enum.Enum):
    LARGEST_MAGNITUDE = "LargestMagnitude"


@dataclass(frozen=True)
class DualPlanSpec:
    m_k: int
    m_x: int
    seed: int = 0
    peak_policy: PeakPolicy = PeakPolicy.LARGEST_MAGNITUDE
    accept_threshold: float = NOISELESS_THRESHOLD

    def __post_init__(self):
        if self.m_k < 1:
            raise InvalidSpecError("m_k must be at least 1")
        if self.m_x < 0:
            raise InvalidSpecError("m_x must be non-negative")
        if self.accept_threshold < 0:
            raise InvalidSpecError("accept_threshold must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidSpecError("seed must fit in 64 unsigned bits")
        object.__setattr__(self, "peak_policy", PeakPolicy(self.peak_policy))

    def check(self, n: int) -> None:
        if self.m_k + self.m_x > n:
            raise InvalidSpecError(f"m_k + m_x = {self.m_k + self.m_x} exceeds n = {n}")

    @classmethod
    def noisy(cls, m_k: int, m_x: int, sigma: float, seed: int = 0) -> "DualPlanSpec":
        """Spec whose acceptance threshold is two noise standard deviations."""
        return cls(m_k, m_x, seed, accept_threshold=2.0 * sigma)


@dataclass
class ProgramTrace:
    intermediate: Image
    selected_idx: np.ndarray
    x_values: np.ndarray
    t: int
    s_T: int
    alpha_x: float
    final: Image
    k_indices: tuple[int, ...] = ()
    intermediate_status: Status = Status.OPTIMAL
    final_status: Status = Status.OPTIMAL
    estimated: bool = False
    s: int = 0
    final_result: SolverResult | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.intermediate_status is Status.OPTIMAL and self.final_status is Status.OPTIMAL

    def to_dict(self) -> dict:
        return {
            "k_indices": [int(i) for i in self.k_indices],
            "intermediate": [float(v) for v in self.intermediate.data],
            "intermediate_status": self.intermediate_status.value,
            "selected_idx": [int(i) for i in self.selected_idx],
            "x_values": [float(v) for v in self.x_values],
            "t": int(self.t),
            "s": int(self.s),
            "s_T": int(self.s_T),
            "alpha_x": float(self.alpha_x),
            "estimated": bool(self.estimated),
            "final": [float(v) for v in self.final.data],
            "final_status": self.final_status.value,
            "shape": list(self.final.shape),
        }


def _k_problem(truth: Image, plan: SamplingPlan) -> tuple[L1Problem, SamplingPlan]:
    ms = measure(truth, plan)
    A, b = to_real_system(build_operator(plan).entries, ms.values)
    return L1Problem(A, b), plan


def _k_plan(truth: Image, m: int, seed: int) -> SamplingPlan:
    shape = truth.shape if truth.rank > 1 else None
    return random_plan(Space.K, truth.n, m, seed, shape=shape)


def run_single_cs(
    truth: Image, m: int, seed: int = 0, cfg: SolverConfig = DEFAULT_CONFIG
) -> tuple[Image, SolverResult]:
    """Conventional CS: ``m`` random k-space samples, then basis pursuit."""
    if not 1 <= m <= truth.n:
        raise InvalidSpecError(f"need 1 <= m <= n, got m={m}, n={truth.n}")
    prob, _ = _k_problem(truth, _k_plan(truth, m, seed))
    res = solve_bp(prob, cfg)
    return Image.from_array(res.solution.reshape(truth.shape)), res


def select_peaks(intermediate: Image, m_x: int) -> np.ndarray:
    """Indices of the ``m_x`` largest-magnitude pixels, ties to the lowest index.

    Returned in ascending index order.
    """
    if not 0 <= m_x <= intermediate.n:
        raise InvalidSpecError(f"m_x={m_x} out of range for n={intermediate.n}")
    order = np.argsort(-np.abs(intermediate.data), kind="stable")
    return np.sort(order[:m_x]).astype(np.int64)


def run_dual_cs(
    truth: Image,
    spec: DualPlanSpec,
    cfg: SolverConfig = DEFAULT_CONFIG,
    *,
    reference: Image | None = None,
    truth_known: bool = True,
) -> tuple[Image, ProgramTrace]:
    """Run steps I to IV of the dual-space program on ``truth``.

    ``truth`` is the object being sampled (possibly noisy). ``reference``
    supplies the support used for ``s`` and ``s_T`` and defaults to
    ``truth``. With ``truth_known=False`` both are instead estimated from
    the final reconstruction and the trace is flagged as estimated.
    """
    spec.check(truth.n)
    if reference is not None and reference.shape != truth.shape:
        raise DimensionError("reference and truth differ in shape")

    # I, II: k-space samples and the preliminary reconstruction
    k_plan = _k_plan(truth, spec.m_k, spec.seed)
    prob, _ = _k_problem(truth, k_plan)
    pre = solve_bp(prob, cfg)
    intermediate = Image.from_array(pre.solution.reshape(truth.shape))

    # III: sample the strongest peaks in real space
    selected = select_peaks(intermediate, spec.m_x)
    x_values = truth.data[selected].copy()
    t = int(np.count_nonzero(np.abs(x_values) > spec.accept_threshold))

    # IV: every sampled pixel becomes a known value
    if spec.m_x == 0:
        post = pre
    else:
        post = solve_truncated_bp(prob, selected, x_values, cfg)
    final = Image.from_array(post.solution.reshape(truth.shape))

    if truth_known:
        support = (reference if reference is not None else truth).support()
    else:
        support = post.support
    s = int(support.size)
    s_T = int(np.setdiff1d(support, selected).size)
    alpha_x = (s - s_T) / spec.m_x if spec.m_x > 0 else 0.0
    trace = ProgramTrace(
        intermediate=intermediate,
        selected_idx=selected,
        x_values=x_values,
        t=t,
        s_T=s_T,
        alpha_x=float(alpha_x),
        final=final,
        k_indices=k_plan.indices,
        intermediate_status=pre.status,
        final_status=post.status,
        estimated=not truth_known,
        s=s,
        final_result=post,
    )
    return final, trace


def min_measurements_dual(s: float, alpha_x: float, m_x: int, n: int, C: float) -> float:
    """Budget ``C (s - alpha_x m_x) log n + m_x``, floored at ``m_x``."""
    if not 0.0 <= alpha_x <= 1.0:
        raise InvalidSpecError("alpha_x must lie in [0, 1]")
    if m_x < 0 or n < 1:
        raise InvalidSpecError("need m_x >= 0 and n >= 1")
    effective = max(s - alpha_x * m_x, 0.0)
    return C * effective * np.log(n) + m_x


def advantage_condition(alpha_x: float, s: float, m_star: float) -> bool:
    """True when real-space peak hits beat the k-space rate ``s / m_star``."""
    if m_star <= 0:
        raise InvalidSpecError("m_star must be positive")
    return bool(alpha_x > s / m_star)
