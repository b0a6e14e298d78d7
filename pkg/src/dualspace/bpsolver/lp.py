"""Dense primal-dual interior-point LP solver (Mehrotra predictor-corrector).

Solves ``min c^T x  s.t.  A x = b,  x >= lower`` on dense data of the size
met in desk-scale compressed sensing (a few hundred variables).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    ITER_LIMIT = "IterLimit"
    NUMERICAL_FAILURE = "NumericalFailure"
    UNBOUNDED = "Unbounded"


@dataclass
class LPSolution:
    x: np.ndarray
    status: Status
    iterations: int
    y: np.ndarray  # equality multipliers, one per input row
    objective: float


def _independent_rows(A: np.ndarray, b: np.ndarray, tol: float):
    """Indices of a maximal independent row subset, and whether the dropped
    rows are consistent with the kept ones."""
    if A.shape[0] == 0:
        return np.arange(0), True
    _, R, piv = sla.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        keep = np.arange(0)
    else:
        keep = np.sort(piv[: int(np.count_nonzero(diag > tol * diag[0]))])
    if keep.size == A.shape[0]:
        return keep, True
    if keep.size == 0:
        return keep, bool(np.abs(b).max() <= tol * max(1.0, np.abs(b).max()))
    x_ls, *_ = np.linalg.lstsq(A[keep], b[keep], rcond=None)
    resid = np.abs(A @ x_ls - b).max()
    return keep, bool(resid <= 1e3 * tol * max(1.0, np.abs(b).max()))


def _step_length(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _factor(M: np.ndarray):
    scale = max(float(np.max(np.diag(M))), 1e-300)
    for reg in (0.0, 1e-14, 1e-12, 1e-10, 1e-8, 1e-6):
        try:
            return sla.cho_factor(M + reg * scale * np.eye(M.shape[0]), check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            continue
    return None


def lp_solve(
    c,
    A_eq,
    b_eq,
    lower_bounds=None,
    *,
    tol: float = 1e-8,
    max_iters: int = 200,
) -> LPSolution:
    """Minimise ``c^T x`` subject to ``A_eq x = b_eq`` and ``x >= lower_bounds``.

    Linearly dependent equality rows are dropped after checking they are
    consistent; inconsistent equalities report ``Infeasible`` without
    iterating. Remaining rows are scaled to unit norm before the
    interior-point loop. Output is deterministic for identical inputs.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A_eq, dtype=float))
    b = np.asarray(b_eq, dtype=float).ravel()
    N = c.size
    if A.shape[1] != N and A.size:
        raise ValueError(f"A_eq has {A.shape[1]} columns for {N} variables")
    if A.size == 0:
        A = np.zeros((0, N))
    lb = np.zeros(N) if lower_bounds is None else np.asarray(lower_bounds, dtype=float)
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("LP data must be finite")

    m_in = A.shape[0]
    b_shift = b - A @ lb
    keep, consistent = _independent_rows(A, b_shift, 1e-10)
    if not consistent:
        return LPSolution(lb.copy(), Status.INFEASIBLE, 0, np.zeros(m_in), float(c @ lb))
    Ak, bk = A[keep], b_shift[keep]
    norms = np.linalg.norm(Ak, axis=1)
    Ak, bk = Ak / norms[:, None], bk / norms

    y_full = np.zeros(m_in)
    if Ak.shape[0] == 0:
        if np.any(c < -tol):
            return LPSolution(lb.copy(), Status.UNBOUNDED, 0, y_full, float(c @ lb))
        return LPSolution(lb.copy(), Status.OPTIMAL, 0, y_full, float(c @ lb))

    x, y, status, iters = _mehrotra(c, Ak, bk, tol, max_iters)
    y_full[keep] = y / norms
    xo = x + lb
    return LPSolution(xo, status, iters, y_full, float(c @ xo))


def _ray_status(c, A, b, x, y):
    """Classify a diverging iterate by the Farkas-type ray it points along."""
    ny = np.linalg.norm(y)
    if np.isfinite(ny) and ny > 0:
        yh = y / ny
        if (A.T @ yh).max() <= 1e-6 and b @ yh > 1e-6:
            return Status.INFEASIBLE
    nx = np.linalg.norm(x)
    if np.isfinite(nx) and nx > 0:
        xh = x / nx
        if np.abs(A @ xh).max() <= 1e-6 and c @ xh < -1e-6:
            return Status.UNBOUNDED
    return None


def _mehrotra(c, A, b, tol, max_iters):
    with np.errstate(all="ignore"):
        x, y, status, it = _mehrotra_loop(c, A, b, tol, max_iters)
    if status in (Status.ITER_LIMIT, Status.NUMERICAL_FAILURE):
        status = _ray_status(c, A, b, x, y) or status
    return x, y, status, it


def _mehrotra_loop(c, A, b, tol, max_iters):
    m, N = A.shape
    G = _factor(A @ A.T)
    if G is None:
        return np.zeros(N), np.zeros(m), Status.NUMERICAL_FAILURE, 0

    # Mehrotra's starting point
    x = A.T @ sla.cho_solve(G, b)
    y = sla.cho_solve(G, A @ c)
    s = c - A.T @ y
    x += max(-1.5 * x.min(), 0.0)
    s += max(-1.5 * s.min(), 0.0)
    xs = x @ s
    x += 0.5 * xs / max(s.sum(), 1e-300)
    s += 0.5 * xs / max(x.sum(), 1e-300)
    x = np.maximum(x, 1e-8)
    s = np.maximum(s, 1e-8)

    bnorm = 1.0 + np.abs(b).max()
    cnorm = 1.0 + np.abs(c).max()
    for it in range(max_iters + 1):
        rb = A @ x - b
        rc = A.T @ y + s - c
        mu = (x @ s) / N
        pobj, dobj = c @ x, b @ y
        pres = np.abs(rb).max() / bnorm
        dres = np.abs(rc).max() / cnorm
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        if pres <= tol and dres <= tol and gap <= tol:
            return x, y, Status.OPTIMAL, it
        if max(np.abs(x).max(), np.abs(y).max()) > 1e10:
            ray = _ray_status(c, A, b, x, y)
            if ray is not None:
                return x, y, ray, it
        if it == max_iters:
            break

        d = x / s
        G = _factor((A * d) @ A.T)
        if G is None:
            return x, y, Status.NUMERICAL_FAILURE, it

        def newton(rxs):
            dy = sla.cho_solve(G, -rb - A @ (rxs / s + d * rc))
            ds = -rc - A.T @ dy
            dx = (rxs - x * ds) / s
            return dx, dy, ds

        try:
            dx_a, dy_a, ds_a = newton(-x * s)
            ap, ad = _step_length(x, dx_a), _step_length(s, ds_a)
            mu_aff = ((x + ap * dx_a) @ (s + ad * ds_a)) / N
            sigma = (mu_aff / mu) ** 3
            dx, dy, ds = newton(-x * s - dx_a * ds_a + sigma * mu)
        except ValueError:
            return x, y, Status.NUMERICAL_FAILURE, it

        eta = min(0.9995, max(0.9, 1.0 - mu))
        ap = min(1.0, eta * _step_length(x, dx))
        ad = min(1.0, eta * _step_length(s, ds))
        x = x + ap * dx
        y = y + ad * dy
        s = s + ad * ds
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(s))):
            return x, y, Status.NUMERICAL_FAILURE, it + 1
    return x, y, Status.ITER_LIMIT, max_iters
