"""Brute-force null-space constants and an empirical check of exact recovery
for truncated basis pursuit."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from math import comb

import numpy as np
from scipy.linalg import null_space

from ..bpsolver import DEFAULT_CONFIG, L1Problem, SolverConfig, Status, lp_solve, solve_truncated_bp
from ..errors import EnumerationBoundError, InvalidSpecError
from .batch import parallel_map

MAX_COLUMNS = 12
MAX_ORDER = 3
MAX_T = 8
MAX_LPS = 200_000


def _check_bounds(q: int, L: int, t: int | None = None) -> None:
    if L < 1:
        raise InvalidSpecError("L must be a positive integer")
    if q > MAX_COLUMNS or L > MAX_ORDER:
        raise EnumerationBoundError(f"enumeration limited to q <= {MAX_COLUMNS}, L <= {MAX_ORDER}")
    if t is not None:
        if not 0 <= t <= q:
            raise InvalidSpecError("t must lie in [0, q]")
        if t > MAX_T and t != q:
            raise EnumerationBoundError(f"enumeration limited to t <= {MAX_T}")


def _rank(M: np.ndarray) -> int:
    return int(np.linalg.matrix_rank(M)) if M.size else 0


def _restricted_sup(B: np.ndarray, S: np.ndarray, R: np.ndarray) -> float:
    """``sup ||eta_S||_1`` over ``B eta = 0`` restricted to columns ``S u R``
    with ``||eta_R||_1 <= 1``; ``inf`` when unbounded."""
    k = S.size
    if k == 0:
        return 0.0
    BS, BR = B[:, S], B[:, R]
    if _rank(BS) < k:
        return float("inf")
    r = R.size
    best = 0.0
    # eta and -eta give the same value, so the first sign is fixed
    for tail in product((1.0, -1.0), repeat=k - 1):
        sigma = np.array((1.0,) + tail)
        # variables: w (k), p (r), m (r), slack (1), all non-negative
        A_eq = np.zeros((B.shape[0] + 1, k + 2 * r + 1))
        A_eq[:-1, :k] = BS * sigma
        A_eq[:-1, k:k + r] = BR
        A_eq[:-1, k + r:k + 2 * r] = -BR
        A_eq[-1, k:] = 1.0
        b_eq = np.zeros(B.shape[0] + 1)
        b_eq[-1] = 1.0
        c = np.zeros(k + 2 * r + 1)
        c[:k] = -1.0
        sol = lp_solve(c, A_eq, b_eq, tol=1e-10, max_iters=300)
        if sol.status is Status.UNBOUNDED:
            return float("inf")
        if sol.status is not Status.OPTIMAL:
            raise RuntimeError(f"NSP LP ended with status {sol.status.value}")
        best = max(best, float(sol.x[:k].sum()))
    return best


def _complement_rows(A: np.ndarray, free_cols: np.ndarray) -> np.ndarray:
    """Rows of ``A`` projected so columns ``free_cols`` drop out of ``A eta = 0``."""
    if free_cols.size == 0:
        return A
    U = null_space(A[:, free_cols].T)
    return U.T @ A


def _nsp_job(job) -> float:
    A, S, R, free = job
    return _restricted_sup(_complement_rows(A, free), S, R)


@dataclass(frozen=True)
class GammaResult:
    gamma: float
    worst_S: tuple[int, ...]
    worst_T: tuple[int, ...]
    sets_checked: int

    @property
    def unbounded(self) -> bool:
        return bool(np.isinf(self.gamma))


def _search(A: np.ndarray, jobs: list, keys: list, workers: int) -> GammaResult:
    vals = parallel_map(_nsp_job, jobs, workers)
    if not vals:
        return GammaResult(0.0, (), (), 0)
    i = int(np.argmax(vals))
    return GammaResult(float(vals[i]), keys[i][0], keys[i][1], len(vals))


def nsp_search(A, L: int, workers: int = 1) -> GammaResult:
    """Tightest NSP constant of order ``L`` with the maximizing set."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    q = A.shape[1]
    _check_bounds(q, L)
    if _rank(A) == q:
        return GammaResult(0.0, (), (), 0)
    k = min(L, q)
    # gamma grows with S, so only the largest admissible sets matter
    if comb(q, k) * 2 ** (k - 1) > MAX_LPS:
        raise EnumerationBoundError("too many sign-pattern LPs")
    full = np.arange(q)
    jobs, keys = [], []
    for S in combinations(range(q), k):
        S = np.array(S)
        R = np.setdiff1d(full, S)
        jobs.append((A, S, R, np.zeros(0, np.int64)))
        keys.append((tuple(int(i) for i in S), tuple(range(q))))
    return _search(A, jobs, keys, workers)


def nsp_gamma(A, L: int, workers: int = 1) -> float:
    """``max_{|S| <= L} sup{||eta_S||_1 : A eta = 0, ||eta_{S^C}||_1 <= 1}``.

    One LP per index set and sign pattern on it; ``inf`` when some null
    vector lives entirely on an admissible ``S``.
    """
    return nsp_search(A, L, workers).gamma


def tnsp_search(A, t: int, L: int, workers: int = 1) -> GammaResult:
    """Tightest t-NSP constant with the maximizing ``(S, T)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    q = A.shape[1]
    _check_bounds(q, L, t)
    if _rank(A) == q or t == 0:
        return GammaResult(0.0, (), (), 0)
    k = min(L, t)
    if comb(q, t) * comb(t, k) * 2 ** (k - 1) > MAX_LPS:
        raise EnumerationBoundError("too many sign-pattern LPs")
    full = np.arange(q)
    jobs, keys = [], []
    for T in combinations(range(q), t):
        T = np.array(T)
        free = np.setdiff1d(full, T)
        for S in combinations(T.tolist(), k):
            S = np.array(S)
            jobs.append((A, S, np.setdiff1d(T, S), free))
            keys.append((tuple(int(i) for i in S), tuple(int(i) for i in T)))
    return _search(A, jobs, keys, workers)


def tnsp_gamma(A, t: int, L: int, workers: int = 1) -> float:
    """``max`` over ``|T| = t``, ``S`` in ``T`` with ``|S| <= L`` of
    ``sup{||eta_S||_1 : A eta = 0, ||eta_{T - S}||_1 <= 1}``.

    Entries outside ``T`` are unconstrained (they are the known pixels).
    """
    return tnsp_search(A, t, L, workers).gamma


@dataclass
class RecoveryReport:
    gamma: float
    t: int
    L: int
    num_signals: int
    exact: int
    counterexamples: list[dict] = field(default_factory=list)

    @property
    def guaranteed(self) -> bool:
        return self.gamma < 1.0

    @property
    def verdict(self) -> str:
        if not self.guaranteed:
            return "no guarantee"
        return "verified" if not self.counterexamples else "counterexample"

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "t": self.t, "L": self.L, "num_signals": self.num_signals,
                "exact": self.exact, "guaranteed": self.guaranteed, "verdict": self.verdict,
                "counterexamples": self.counterexamples}


def verify_exact_recovery_theorem(
    A,
    t: int,
    L: int,
    num_signals: int,
    seed: int = 0,
    cfg: SolverConfig = DEFAULT_CONFIG,
    gamma: float | None = None,
) -> RecoveryReport:
    """Plant random signals that are ``L``-sparse on a random ``|T| = t`` set
    with arbitrary known values off ``T`` and check truncated BP returns them.

    Recovery counts as exact when the residual is within ``feas_tol`` and the
    support on ``T`` matches after ``zero_clip``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    q = A.shape[1]
    if gamma is None:
        gamma = tnsp_gamma(A, t, L)
    rng = np.random.default_rng(seed)
    prob_A = A
    exact = 0
    bad = []
    for i in range(num_signals):
        T = np.sort(rng.choice(q, size=t, replace=False))
        known = np.setdiff1d(np.arange(q), T)
        k = int(rng.integers(0, min(L, t) + 1))
        S = rng.choice(T, size=k, replace=False)
        x = np.zeros(q)
        x[known] = rng.normal(size=known.size)
        mags = rng.uniform(0.5, 1.5, size=k) * rng.choice((-1.0, 1.0), size=k)
        x[S] = mags
        b = prob_A @ x
        res = solve_truncated_bp(L1Problem(prob_A, b), known, x[known], cfg)
        got = np.flatnonzero(np.abs(res.solution[T]) >= cfg.zero_clip)
        want = np.flatnonzero(np.abs(x[T]) >= cfg.zero_clip)
        scale = max(1.0, float(np.abs(b).max()))
        ok = (res.status is Status.OPTIMAL and res.residual_inf <= cfg.feas_tol * scale
              and np.array_equal(got, want)
              and float(np.abs(res.solution - x).max()) <= 1e-5 * max(1.0, float(np.abs(x).max())))
        if ok:
            exact += 1
        else:
            bad.append({"signal": i, "T": T.tolist(), "support": sorted(int(j) for j in S),
                        "status": res.status.value,
                        "error": float(np.abs(res.solution - x).max())})
    return RecoveryReport(float(gamma), t, L, num_signals, exact, bad)
