"""Seeded Monte-Carlo batches of independent trials."""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from ..bpsolver import DEFAULT_CONFIG, SolverConfig
from ..dualcs import DualPlanSpec, run_dual_cs, run_single_cs
from ..edges import EdgeBudget, edge_scores, extract_edges, run_dual_edge, run_single_edge
from ..errors import InvalidSpecError
from ..signals import (
    Image,
    NoiseSpec,
    SparseSpec,
    add_noise,
    gen_shepp_logan,
    gen_sparse_image,
    gen_step_signal,
    peak_snr_sigma,
)
from .metrics import correlation, fidelity, is_exact

WORKERS_ENV = "DUALCS_WORKERS"


def child_seed(master_seed: int, *keys: int) -> int:
    """64-bit seed derived from the master seed and a tuple of integer keys."""
    ss = np.random.SeedSequence([int(master_seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, np.uint64)[0])


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    if workers < 1:
        raise InvalidSpecError("workers must be at least 1")
    return workers


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Ordered map, in-process for one worker and over processes otherwise."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def _safe_correlation(a, b) -> float | None:
    try:
        return correlation(a, b)
    except ValueError:
        return None


@dataclass
class Trial:
    index: int
    seed: int
    params: dict
    fidelity: float
    correlation: float | None
    exact: bool
    alpha_x: float
    t: int = 0
    s_T: int = 0
    status: str = "Optimal"
    extra: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_dict(self, with_timings: bool = False) -> dict:
        d = asdict(self)
        if not with_timings:
            d.pop("timings")
        return d


@dataclass(frozen=True)
class TrialSpec:
    """One sparse-image CS trial: single space when ``m_x == 0``.

    ``snr`` switches on additive Gaussian noise with sigma set so the mean
    non-zero pixel magnitude has that SNR; fidelity is then scored against
    the clean image and the acceptance threshold is two sigma.
    """

    n: int
    s: int
    m_k: int
    m_x: int = 0
    snr: float | None = None
    amplitude_range: tuple[float, float] = (0.5, 1.5)
    signed: bool = False

    def __post_init__(self):
        if self.m_k < 1 or self.m_x < 0 or self.m_k + self.m_x > self.n:
            raise InvalidSpecError(f"invalid budget m_k={self.m_k}, m_x={self.m_x} for n={self.n}")
        if self.snr is not None and self.snr <= 0:
            raise InvalidSpecError("snr must be positive")

    def image(self, seed: int) -> Image:
        return gen_sparse_image(SparseSpec(self.n, self.s, self.amplitude_range, seed, self.signed))

    def run(self, index: int, master_seed: int, cfg: SolverConfig = DEFAULT_CONFIG) -> Trial:
        img_seed = child_seed(master_seed, index)
        plan_seed = child_seed(master_seed, index, 1)
        clean = self.image(img_seed)
        sigma = 0.0
        sampled = clean
        if self.snr is not None and self.s > 0:
            sigma = peak_snr_sigma(clean, self.snr)
            sampled = add_noise(clean, NoiseSpec(sigma, child_seed(master_seed, index, 2)))
        params = {"n": self.n, "s": self.s, "m_k": self.m_k, "m_x": self.m_x, "sigma": sigma}
        t0 = time.perf_counter()
        if self.m_x == 0:
            recon, res = run_single_cs(sampled, self.m_k, plan_seed, cfg)
            status, alpha_x, t, s_T = res.status.value, 0.0, 0, clean.sparsity()
        else:
            spec = (DualPlanSpec.noisy(self.m_k, self.m_x, sigma, plan_seed) if sigma > 0
                    else DualPlanSpec(self.m_k, self.m_x, plan_seed))
            recon, trace = run_dual_cs(sampled, spec, cfg, reference=clean)
            status = trace.final_status.value
            alpha_x, t, s_T = trace.alpha_x, trace.t, trace.s_T
        elapsed = time.perf_counter() - t0
        return Trial(index, img_seed, params, fidelity(recon, clean), _safe_correlation(recon, clean),
                     is_exact(recon, clean), alpha_x, t, s_T, status, timings={"solve_s": elapsed})


@dataclass(frozen=True)
class EdgeTrialSpec:
    """Edge-detection trial on a step signal (``kind='step'``) or a phantom.

    ``m_fd == 0`` runs the single-space TV baseline with ``m_k`` samples.
    """

    kind: str
    size: int
    m_k: int
    m_fd: int = 0
    G0: float = 0.25
    num_steps: int = 2

    def __post_init__(self):
        if self.kind not in ("step", "phantom"):
            raise InvalidSpecError(f"unknown edge image kind {self.kind!r}")

    def image(self, seed: int) -> Image:
        if self.kind == "step":
            return gen_step_signal(self.size, self.num_steps, seed)
        return gen_shepp_logan(self.size)

    def run(self, index: int, master_seed: int, cfg: SolverConfig = DEFAULT_CONFIG) -> Trial:
        img_seed = child_seed(master_seed, index)
        plan_seed = child_seed(master_seed, index, 1)
        truth = self.image(img_seed)
        params = {"n": truth.n, "s": extract_edges(truth, self.G0).count,
                  "m_k": self.m_k, "m_x": self.m_fd, "sigma": 0.0}
        t0 = time.perf_counter()
        if self.m_fd == 0:
            recon, edges = run_single_edge(truth, self.m_k, self.G0, plan_seed, cfg)
            alpha_x, t, s_T, status = 0.0, 0, params["s"], "Optimal"
        else:
            recon, edges, trace = run_dual_edge(truth, EdgeBudget(self.m_k, self.m_fd), self.G0,
                                                plan_seed, cfg)
            alpha_x, t, s_T, status = trace.alpha_x, trace.t, trace.s_T, trace.final_status.value
        elapsed = time.perf_counter() - t0
        tp, fp, ecorr = edge_scores(edges, extract_edges(truth, self.G0))
        f = fidelity(recon, truth)
        return Trial(index, img_seed, params, f, _safe_correlation(recon, truth),
                     f >= 1.0 - 1e-6, alpha_x, t, s_T, status,
                     extra={"edge_correlation": ecorr, "true_positive": tp, "false_positive": fp},
                     timings={"solve_s": elapsed})


def _run_job(job) -> Trial:
    spec, index, master_seed, cfg = job
    return spec.run(index, master_seed, cfg)


@dataclass
class TrialBatch:
    experiment_id: str
    trials: list[Trial]

    def values(self, key: str) -> np.ndarray:
        if key in ("fidelity", "alpha_x", "exact", "t", "s_T"):
            return np.array([getattr(t, key) for t in self.trials], dtype=float)
        return np.array([t.extra[key] for t in self.trials], dtype=float)

    def summary(self) -> dict:
        f = self.values("fidelity")
        ex = self.values("exact")
        n = len(self.trials)
        sem = float(f.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
        p = float(ex.mean()) if n else float("nan")
        return {
            "experiment_id": self.experiment_id,
            "trials": n,
            "mean_fidelity": float(f.mean()) if n else float("nan"),
            "fidelity_ci95": 1.96 * sem,
            "p_exact": p,
            "p_exact_stderr": float(np.sqrt(p * (1 - p) / n)) if n else float("nan"),
            "mean_alpha_x": float(self.values("alpha_x").mean()) if n else float("nan"),
        }

    def records(self, with_timings: bool = False) -> list[dict]:
        return [t.to_dict(with_timings) for t in self.trials]

    @property
    def total_time(self) -> float:
        return float(sum(t.timings.get("solve_s", 0.0) for t in self.trials))


def run_batch(
    spec,
    num_trials: int,
    master_seed: int = 0,
    *,
    experiment_id: str = "batch",
    workers: int = 1,
    cfg: SolverConfig = DEFAULT_CONFIG,
    indices: Iterable[int] | None = None,
) -> TrialBatch:
    """Run ``num_trials`` independent trials of ``spec``.

    Trial ``i`` draws every random choice from ``child_seed(master_seed, i, ...)``
    so the batch is identical for any worker count.
    """
    if num_trials < 1 and indices is None:
        raise InvalidSpecError("num_trials must be positive")
    idx = list(range(num_trials)) if indices is None else list(indices)
    jobs = [(spec, i, master_seed, cfg) for i in idx]
    return TrialBatch(experiment_id, parallel_map(_run_job, jobs, workers))
