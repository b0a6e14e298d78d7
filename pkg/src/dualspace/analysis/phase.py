"""Phase-transition extraction and the measurement-scaling fits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from ..bpsolver import DEFAULT_CONFIG, SolverConfig
from ..errors import FitError, InvalidSpecError
from .batch import EdgeTrialSpec, Trial, TrialSpec, child_seed, parallel_map

DEFAULT_TARGET = 0.8


@dataclass(frozen=True)
class CurvePoint:
    m_k: int
    p_exact: float
    stderr: float
    trials: int
    attempts: int
    mean_alpha_m_x: float
    score: float = float("nan")
    kept: tuple[Trial, ...] = field(default=(), repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"m_k": self.m_k, "p_exact": self.p_exact, "stderr": self.stderr,
                "trials": self.trials, "attempts": self.attempts,
                "mean_alpha_m_x": self.mean_alpha_m_x, "score": self.score}


@dataclass
class PhasePoint:
    """Transition point of one ensemble; ``m_k_star`` is None when unreached."""

    s: int
    m_x: int
    alpha_m_x: float
    m_k_star: int | None
    probability_target: float
    curve: list[CurvePoint] = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.probability_target < 1.0:
            raise InvalidSpecError("probability_target must lie in (0, 1)")

    @property
    def reached(self) -> bool:
        return self.m_k_star is not None

    @property
    def status(self) -> str:
        return "Reached" if self.reached else "Unreached"

    @property
    def h(self) -> float:
        """Effective sparsity left to k-space, ``s - alpha_x m_x``."""
        return self.s - self.alpha_m_x


def binomial_stderr(p: float, n: int) -> float:
    return float(np.sqrt(p * (1.0 - p) / n)) if n > 0 else float("nan")


def _job(job) -> Trial:
    spec, index, seed, cfg = job
    return spec.run(index, seed, cfg)


def scan_curve(
    make_spec: Callable[[int], object],
    m_k_grid: Sequence[int],
    trials_per_point: int,
    target: float,
    master_seed: int,
    *,
    accept: Callable[[Trial], bool] | None = None,
    max_attempts: int | None = None,
    stop_at_target: bool = False,
    score: str = "exact",
    workers: int = 1,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> tuple[int | None, list[CurvePoint]]:
    """A success score against m_k for trials built by ``make_spec(m_k)``.

    ``score`` is ``"exact"`` (empirical P[exact]) or the name of a per-trial
    extra metric whose mean is compared with ``target``.

    Trials failing ``accept`` are discarded (post-selection) and more are
    drawn, in seeded blocks, until ``trials_per_point`` are kept or
    ``max_attempts`` have run. Returns the first grid m_k whose score
    reaches ``target`` and the curve.
    """
    if trials_per_point < 1:
        raise InvalidSpecError("trials_per_point must be positive")
    if max_attempts is None:
        max_attempts = trials_per_point if accept is None else 50 * trials_per_point
    grid = sorted(int(m) for m in m_k_grid)
    star, curve = None, []
    for m_k in grid:
        spec = make_spec(m_k)
        point_seed = child_seed(master_seed, m_k)
        kept: list[Trial] = []
        attempts = 0
        while len(kept) < trials_per_point and attempts < max_attempts:
            need = trials_per_point - len(kept)
            rate = max(len(kept) / attempts, 0.02) if attempts else 1.0
            block = min(int(np.ceil(1.1 * need / rate)), max_attempts - attempts)
            jobs = [(spec, i, point_seed, cfg) for i in range(attempts, attempts + block)]
            attempts += block
            for tr in parallel_map(_job, jobs, workers):
                if (accept is None or accept(tr)) and len(kept) < trials_per_point:
                    kept.append(tr)
        if kept:
            p = float(np.mean([tr.exact for tr in kept]))
            am = float(np.mean([tr.alpha_x * tr.params["m_x"] for tr in kept]))
            sc = p if score == "exact" else float(np.mean([tr.extra[score] for tr in kept]))
        else:
            p, am, sc = float("nan"), float("nan"), float("nan")
        curve.append(CurvePoint(m_k, p, binomial_stderr(p, len(kept)), len(kept), attempts, am,
                                sc, tuple(kept)))
        if star is None and kept and sc >= target:
            star = m_k
            if stop_at_target:
                break
    return star, curve


def phase_transition(
    n: int,
    s: int,
    m_x: int,
    m_k_grid: Sequence[int],
    trials_per_point: int,
    target: float = DEFAULT_TARGET,
    master_seed: int = 0,
    *,
    effective_sparsity: int | None = None,
    stop_at_target: bool = False,
    workers: int = 1,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> PhasePoint:
    """Smallest grid m_k whose empirical P[exact] reaches ``target``.

    With ``effective_sparsity = h`` only trials whose realized
    ``s - alpha_x m_x`` equals ``h`` are kept (per-trial post-selection on
    the trace). Grid points where ``m_k + m_x > n`` are skipped.
    """
    if not 0.0 < target < 1.0:
        raise InvalidSpecError("target must lie in (0, 1)")
    if s < 0 or m_x < 0 or n < 1:
        raise InvalidSpecError("need n >= 1 and s, m_x >= 0")
    if s == 0:
        return PhasePoint(0, m_x, 0.0, 0, target, [CurvePoint(0, 1.0, 0.0, 0, 0, 0.0, 1.0)])
    grid = [m for m in m_k_grid if 1 <= m and m + m_x <= n]
    if not grid:
        raise InvalidSpecError("no admissible m_k on the grid")
    accept = None
    if effective_sparsity is not None:
        h = int(effective_sparsity)
        if not 0 <= s - h <= m_x:
            raise InvalidSpecError(f"s - h = {s - h} must lie in [0, m_x]")
        accept = lambda tr: tr.s_T == h  # noqa: E731
    star, curve = scan_curve(lambda m: TrialSpec(n, s, m, m_x), grid, trials_per_point, target,
                             master_seed, accept=accept, stop_at_target=stop_at_target,
                             workers=workers, cfg=cfg)
    realized = [c.mean_alpha_m_x for c in curve if c.trials > 0]
    am = float(np.mean(realized)) if realized else 0.0
    if effective_sparsity is not None:
        am = float(s - effective_sparsity)
    return PhasePoint(s, m_x, am, star, target, curve)


def curves_overlap(a: Sequence[CurvePoint], b: Sequence[CurvePoint], k: float = 2.0) -> np.ndarray:
    """Per shared grid point: do the two curves agree within ``k`` combined
    binomial standard errors?"""
    bm = {c.m_k: c for c in b}
    out = []
    for ca in a:
        cb = bm.get(ca.m_k)
        if cb is None or ca.trials == 0 or cb.trials == 0:
            continue
        tol = k * np.hypot(ca.stderr, cb.stderr)
        out.append(abs(ca.p_exact - cb.p_exact) <= tol + 1e-12)
    return np.array(out, dtype=bool)


def _r_squared(y: np.ndarray, pred: np.ndarray) -> float:
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - pred) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def fit_scaling(points: Sequence[PhasePoint], n: int) -> tuple[float, float]:
    """Least-squares ``m_k* = C (s - alpha_x m_x) log n`` through the origin.

    Returns ``C`` and the centred coefficient of determination. Unreached
    points are ignored.
    """
    pts = [p for p in points if p.reached]
    if len(pts) < 4:
        raise FitError("need at least 4 reached points")
    if len({(p.s, round(p.alpha_m_x, 9)) for p in pts}) < 4:
        raise FitError("need at least 4 distinct (s, alpha_x m_x) pairs")
    x = np.array([p.h for p in pts]) * np.log(n)
    y = np.array([p.m_k_star for p in pts], dtype=float)
    sxx = float(x @ x)
    if sxx == 0.0:
        raise FitError("design is identically zero")
    C = float(x @ y) / sxx
    return C, _r_squared(y, C * x)


def _bound_shape(m_k: float, m_x: int, n: int) -> float:
    r = m_k - m_x
    return r / (1.0 + np.log((n - m_x) / r))


def s_bound(m_k: float, m_x: int, n: int, c0: float, alpha_x: float) -> float:
    """Sparsity recoverable with ``m_k`` total samples of which ``m_x`` are
    direct reads: ``c0 (m_k - m_x) / (1 + log((n - m_x)/(m_k - m_x))) + alpha_x m_x``."""
    if not (m_k > m_x >= 0 and n > m_x):
        raise InvalidSpecError("need m_k > m_x >= 0 and n > m_x")
    if m_k - m_x > n - m_x:
        raise InvalidSpecError("m_k exceeds n")
    return float(c0 * _bound_shape(m_k, m_x, n) + alpha_x * m_x)


def invert_s_bound(s: float, m_x: int, n: int, c0: float, alpha_x: float) -> float:
    """m_k at which ``s_bound`` equals ``s``; clamped to ``[m_x, n]``."""
    if c0 <= 0:
        raise InvalidSpecError("c0 must be positive")
    g = lambda m: s_bound(m, m_x, n, c0, alpha_x) - s  # noqa: E731
    lo, hi = m_x + 1e-9, float(n)
    if g(lo) >= 0:
        return lo
    if g(hi) <= 0:
        return hi
    return float(brentq(g, lo, hi, xtol=1e-10))


@dataclass(frozen=True)
class BoundFit:
    c0: float
    rms: float
    m_k_range: float
    predicted: tuple[float, ...]

    @property
    def relative_rms(self) -> float:
        return self.rms / self.m_k_range if self.m_k_range > 0 else float("inf")


def fit_s_bound(
    s_values: Sequence[float],
    m_k_star: Sequence[float],
    alpha_x: Sequence[float] | float,
    m_x: int,
    n: int,
) -> BoundFit:
    """Single-parameter fit of ``s_bound`` to measured turning points.

    ``c0`` minimizes the squared error in ``s``; the returned RMS is that of
    the predicted turning points ``m_k`` against the measured ones.
    """
    s = np.asarray(s_values, dtype=float)
    m = np.asarray(m_k_star, dtype=float)
    a = np.broadcast_to(np.asarray(alpha_x, dtype=float), s.shape)
    if s.size < 2 or m.shape != s.shape:
        raise FitError("need at least two matching turning points")
    f = np.array([_bound_shape(mk, m_x, n) for mk in m])
    y = s - a * m_x
    ff = float(f @ f)
    if ff == 0.0:
        raise FitError("turning points give a zero design")
    c0 = float(f @ y) / ff
    pred = np.array([invert_s_bound(si, m_x, n, c0, ai) for si, ai in zip(s, a)])
    rms = float(np.sqrt(np.mean((pred - m) ** 2)))
    return BoundFit(c0, rms, float(m.max() - m.min()), tuple(float(p) for p in pred))


def edge_turning_point(
    n: int,
    num_steps: int,
    m_fd: int,
    m_k_grid: Sequence[int],
    trials_per_point: int,
    target: float = DEFAULT_TARGET,
    master_seed: int = 0,
    G0: float = 0.25,
    *,
    workers: int = 1,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> PhasePoint:
    """Turning point of the 1-D edge program on random step signals: the
    first grid m_k whose mean edge correlation reaches ``target``.

    ``s`` is the number of steps and ``alpha_m_x`` the mean number of true
    edges hit by the ``m_fd`` direct reads at the turning point.
    """
    grid = [m for m in m_k_grid if 1 <= m and m + m_fd <= n]
    star, curve = scan_curve(lambda m: EdgeTrialSpec("step", n, m, m_fd, G0, num_steps), grid,
                             trials_per_point, target, master_seed, stop_at_target=True,
                             score="edge_correlation", workers=workers, cfg=cfg)
    am = curve[-1].mean_alpha_m_x if curve else 0.0
    return PhasePoint(num_steps, m_fd, am, star, target, curve)
