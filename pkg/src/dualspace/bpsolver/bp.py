"""Basis pursuit on top of the interior-point LP core."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.linalg import null_space

from ..errors import DimensionError, EnumerationBoundError, InvalidSpecError, NotFound
from .lp import Status, lp_solve


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-8
    opt_tol: float = 1e-8
    max_iters: int = 200
    zero_clip: float = 1e-6

    def __post_init__(self):
        if min(self.feas_tol, self.opt_tol, self.zero_clip) <= 0 or self.max_iters <= 0:
            raise InvalidSpecError("solver tolerances and max_iters must be positive")


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True, eq=False)
class L1Problem:
    """``min sum_i w_i |x_i|  s.t.  A x = b`` with real data."""

    A: np.ndarray
    b: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise DimensionError(f"A has {A.shape[0]} rows but b has {b.size} entries")
        if A.shape[0] < 1 or A.shape[1] < 1:
            raise InvalidSpecError("L1Problem needs at least one row and one column")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InvalidSpecError("L1Problem data must be finite")
        w = np.ones(A.shape[1]) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (A.shape[1],) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidSpecError("weights must be a finite non-negative vector, one per column")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "weights", w)

    @property
    def shape(self):
        return self.A.shape


@dataclass
class SolverResult:
    solution: np.ndarray
    status: Status
    objective: float
    residual_inf: float
    iterations: int
    zero_clip: float = DEFAULT_CONFIG.zero_clip
    dual: np.ndarray | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(np.abs(self.solution) >= self.zero_clip)

    def clipped(self) -> np.ndarray:
        """Solution with entries below ``zero_clip`` set to exact zeros."""
        out = self.solution.copy()
        out[np.abs(out) < self.zero_clip] = 0.0
        return out

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "objective": float(self.objective),
            "residual_inf": float(self.residual_inf),
            "iterations": int(self.iterations),
            "support": [int(i) for i in self.support],
            "solution": [float(v) for v in self.solution],
        }


def to_real_system(A_complex, b_complex, tol: float = 1e-12):
    """Split complex equality rows into real and imaginary parts.

    Rows whose coefficients and right-hand side are both real (to ``tol``)
    emit a single row; every other row emits two.
    """
    A = np.atleast_2d(np.asarray(A_complex))
    b = np.asarray(b_complex).ravel()
    if A.shape[0] != b.size:
        raise DimensionError(f"{A.shape[0]} rows but {b.size} right-hand sides")
    rows, rhs = [], []
    for a_i, b_i in zip(A, b):
        rows.append(np.real(a_i))
        rhs.append(np.real(b_i))
        if np.abs(np.imag(a_i)).max(initial=0.0) > tol or abs(np.imag(b_i)) > tol:
            rows.append(np.imag(a_i))
            rhs.append(np.imag(b_i))
    return np.array(rows, dtype=float).reshape(len(rows), A.shape[1]), np.array(rhs, dtype=float)


def _polish(A, b, x, support):
    """Least-norm correction of ``x`` on ``support`` so that ``A x = b`` holds
    to machine precision; returns None when the support cannot absorb the
    residual."""
    if support.size == 0:
        return None
    r = b - A @ x
    dx, *_ = np.linalg.lstsq(A[:, support], r, rcond=None)
    out = x.copy()
    out[support] += dx
    return out


def _ray_exit(x, d, S):
    """Step along ``d`` until the first entry of ``x[S]`` reaches zero."""
    xs, ds = x[S], d[S]
    moving = np.abs(ds) > 1e-12 * np.abs(ds).max()
    toward = moving & (xs * ds < 0)
    if not toward.any():
        return None
    steps = -xs[toward] / ds[toward]
    out = x + steps.min() * d
    out[S[np.flatnonzero(toward)[np.argmin(steps)]]] = 0.0
    return out


def _purify(A, x, w, zero_clip, opt_tol):
    """Move an optimal point of a degenerate problem to a vertex of the
    optimal face.

    While the support columns are dependent, step along a null direction
    that leaves the weighted l1 norm unchanged until an entry vanishes; of
    the two exits the sparser one is kept. The interior-point method lands
    in the middle of the optimal face, so without this step ties in the l1
    objective come back as dense blends.
    """
    x = x.copy()
    x[np.abs(x) < zero_clip] = 0.0
    base = w @ np.abs(x)
    for _ in range(x.size):
        S = np.flatnonzero(x)
        if S.size == 0:
            break
        N = null_space(A[:, S])
        if N.shape[1] == 0:
            break
        d = np.zeros_like(x)
        d[S] = N[:, 0]
        slope = float(w[S] @ (np.sign(x[S]) * d[S]))
        exits = []
        for sign in (1.0, -1.0):
            if sign * slope > opt_tol * (1.0 + base):
                continue
            y = _ray_exit(x, sign * d, S)
            if y is not None:
                y[np.abs(y) < zero_clip] = 0.0
                exits.append(y)
        if not exits:
            break
        x = min(exits, key=lambda y: (np.count_nonzero(y), w @ np.abs(y)))
    return x


def solve_bp(prob: L1Problem, cfg: SolverConfig = DEFAULT_CONFIG) -> SolverResult:
    """Weighted basis pursuit through the split ``x = u - v``, ``u, v >= 0``.

    After the interior-point solve the iterate is moved to a vertex of the
    optimal face and polished on its support (entries above ``zero_clip``);
    the polished point replaces the raw one when it lowers the residual
    without raising the objective by more than ``opt_tol``.
    """
    A, b, w = prob.A, prob.b, prob.weights
    q = A.shape[1]
    sol = lp_solve(np.concatenate([w, w]), np.hstack([A, -A]), b,
                   tol=min(cfg.opt_tol, cfg.feas_tol), max_iters=cfg.max_iters)
    x = sol.x[:q] - sol.x[q:]
    status = sol.status
    if status is Status.OPTIMAL:
        xv = _purify(A, x, w, cfg.zero_clip, cfg.opt_tol)
        support = np.flatnonzero(xv)
        xp = _polish(A, b, xv, support)
        if xp is not None:
            obj_raw, obj_pol = w @ np.abs(x), w @ np.abs(xp)
            if (np.abs(A @ xp - b).max() <= np.abs(A @ x - b).max()
                    and obj_pol <= obj_raw + cfg.opt_tol * (1 + obj_raw)):
                x = xp
    resid = float(np.abs(A @ x - b).max()) if b.size else 0.0
    if status is Status.OPTIMAL and resid > cfg.feas_tol * max(1.0, float(np.abs(b).max())):
        status = Status.NUMERICAL_FAILURE
    return SolverResult(x, status, float(w @ np.abs(x)), resid, sol.iterations, cfg.zero_clip, sol.y)


def dual_certificate(prob: L1Problem, res: SolverResult, tol: float = 1e-8) -> bool:
    """Weak-duality check: ``|A^T y| <= w`` and ``b^T y >= objective`` up to tol."""
    if res.dual is None:
        return False
    y = res.dual
    slack = np.abs(prob.A.T @ y) - prob.weights
    scale = 1.0 + abs(res.objective)
    return bool(slack.max() <= tol * scale and prob.b @ y >= res.objective - tol * scale)


def solve_truncated_bp(
    prob: L1Problem,
    known_idx,
    known_vals,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> SolverResult:
    """Basis pursuit with the pixels in ``known_idx`` fixed to ``known_vals``.

    Known columns are moved to the right-hand side and dropped from the
    unknowns; the returned solution is full length with the known values
    re-inserted.
    """
    known_idx = np.asarray(known_idx, dtype=np.int64).ravel()
    known_vals = np.asarray(known_vals, dtype=float).ravel()
    q = prob.A.shape[1]
    if known_idx.size != known_vals.size:
        raise DimensionError("known_idx and known_vals differ in length")
    if np.unique(known_idx).size != known_idx.size or np.any((known_idx < 0) | (known_idx >= q)):
        raise InvalidSpecError("known indices must be distinct and in range")
    if known_idx.size == 0:
        return solve_bp(prob, cfg)
    free = np.setdiff1d(np.arange(q), known_idx)
    b_t = prob.b - prob.A[:, known_idx] @ known_vals
    full = np.zeros(q)
    full[known_idx] = known_vals
    w = prob.weights
    if free.size == 0:
        resid = float(np.abs(b_t).max())
        ok = resid <= cfg.feas_tol * max(1.0, float(np.abs(prob.b).max()))
        return SolverResult(full, Status.OPTIMAL if ok else Status.INFEASIBLE,
                            float(w @ np.abs(full)), resid, 0, cfg.zero_clip)
    sub = solve_bp(L1Problem(prob.A[:, free], b_t, w[free]), cfg)
    full[free] = sub.solution
    resid = float(np.abs(prob.A @ full - prob.b).max())
    return SolverResult(full, sub.status, float(w @ np.abs(full)), resid,
                        sub.iterations, cfg.zero_clip, sub.dual)


def solve_bpdn(prob: L1Problem, epsilon: float) -> SolverResult:
    """``min sum w|x|  s.t.  ||A x - b||_2 <= epsilon`` (second-order cone).

    Relaxed variant for noisy data; not part of the dual-space program itself.
    """
    import cvxpy as cp

    x = cp.Variable(prob.A.shape[1])
    problem = cp.Problem(cp.Minimize(prob.weights @ cp.abs(x)),
                         [cp.norm(prob.A @ x - prob.b, 2) <= epsilon])
    problem.solve(solver=cp.CLARABEL)
    ok = problem.status in ("optimal", "optimal_inaccurate") and x.value is not None
    sol = np.asarray(x.value if ok else np.zeros(prob.A.shape[1]), dtype=float)
    status = Status.OPTIMAL if problem.status == "optimal" else (
        Status.INFEASIBLE if problem.status == "infeasible" else Status.NUMERICAL_FAILURE)
    return SolverResult(sol, status, float(prob.weights @ np.abs(sol)),
                        float(np.abs(prob.A @ sol - prob.b).max()), 0)


@dataclass
class L0Result:
    solution: np.ndarray
    support: tuple[int, ...]
    unique: bool


def l0_oracle(A, b, s_max: int, feas_tol: float = 1e-8) -> L0Result:
    """Sparsest exact solution by exhaustive support enumeration.

    Supports are tried by increasing size and then lexicographically; the
    first one whose least-squares fit leaves a residual below ``feas_tol``
    wins. ``unique`` records whether it was the only fitting support of that
    size. Raises ``NotFound`` when no support of size ``<= s_max`` fits.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    q = A.shape[1]
    if q > 24 or s_max > 4:
        raise EnumerationBoundError("l0_oracle is limited to q <= 24 and s_max <= 4")
    tol = feas_tol * max(1.0, float(np.abs(b).max(initial=0.0)))
    if np.abs(b).max(initial=0.0) <= tol:
        return L0Result(np.zeros(q), (), True)
    for k in range(1, s_max + 1):
        found = []
        for S in combinations(range(q), k):
            cols = A[:, S]
            coef, *_ = np.linalg.lstsq(cols, b, rcond=None)
            if np.abs(cols @ coef - b).max() <= tol:
                found.append((S, coef))
        if found:
            S, coef = found[0]
            x = np.zeros(q)
            x[list(S)] = coef
            return L0Result(x, S, len(found) == 1)
    raise NotFound(f"no support of size <= {s_max} reproduces b")
