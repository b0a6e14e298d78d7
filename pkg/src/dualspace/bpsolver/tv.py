"""Weighted total-variation recovery from k-space and FD-space samples.

Two routes solve the same program ``min sum_a g_a |D_a I|`` subject to the
k-space and FD equality constraints:

* ``fd``: change of variables ``z = FD[I]`` (1-D only). k-space samples of
  ``I`` become k-space samples of ``z`` (multiplied by ``exp(2 pi i k/n) - 1``),
  FD samples become known entries of ``z``, and the image is integrated back
  with ``fd_inverse`` and anchored by the DC sample.
* ``structured``: a primal-dual interior-point method in the image variables
  with auxiliary FD variables. The Newton systems are reduced to a sparse
  weighted graph Laplacian plus a dense Schur complement over the measurement
  rows, which keeps 2-D images tractable.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import DimensionError, InvalidSpecError, UnderdeterminedError
from ..signals import Image, fd_inverse
from ..transforms import MeasurementSet, Space, build_operator, fd_neighbor
from .bp import DEFAULT_CONFIG, L1Problem, SolverConfig, SolverResult, solve_truncated_bp, to_real_system
from .lp import Status, _independent_rows, _step_length

# weight used for FD pairs pinned by an equality constraint: the term is a
# constant there, and a positive weight keeps the auxiliary variables bounded
_PINNED_WEIGHT = 1.0
# zero weights on free pairs leave an unbounded optimal face
_WEIGHT_FLOOR = 1e-8
BREAKDOWN_TOL = 1e-6
REFINE_ROUNDS = 3
# refinement stops once the Newton residual is this small relative to its rhs
STEP_ACCURACY = 1e-12
# worse than this after refinement and the reduced solver hands over to the saddle LU
SWITCH_ACCURACY = 1e-8


def _difference_operator(shape: tuple[int, ...], axes: Sequence[int]) -> sp.csr_matrix:
    n = int(np.prod(shape))
    rows = np.arange(n)
    blocks = []
    for ax in axes:
        nb = fd_neighbor(rows, shape, ax)
        blocks.append(sp.csr_matrix(
            (np.r_[-np.ones(n), np.ones(n)], (np.r_[rows, rows], np.r_[rows, nb])), shape=(n, n)))
    return sp.vstack(blocks, format="csr")


def _kspace_real_rows(k_meas: MeasurementSet):
    A, b = to_real_system(build_operator(k_meas.plan).entries, k_meas.values)
    return A, b


def _fd_rows(fd_meas: Sequence[MeasurementSet], shape) -> tuple[np.ndarray, np.ndarray]:
    n = int(np.prod(shape))
    rows, rhs = [], []
    for ms in fd_meas:
        if ms.plan.space is not Space.FD or ms.plan.shape != tuple(shape):
            raise DimensionError("FD measurement set does not match the k-space grid")
        A = build_operator(ms.plan).entries
        rows.append(A)
        rhs.append(np.asarray(ms.values, dtype=float))
    if not rows:
        return np.zeros((0, n)), np.zeros(0)
    return np.vstack(rows), np.concatenate(rhs)


def _normalise_weights(edge_weights, shape) -> np.ndarray:
    rank = len(shape)
    if edge_weights is None:
        return np.ones((rank,) + tuple(shape))
    w = np.asarray(edge_weights, dtype=float)
    if rank == 1 and w.shape == tuple(shape):
        w = w[None]
    if w.shape != (rank,) + tuple(shape):
        raise DimensionError(f"edge weights must have shape {(rank,) + tuple(shape)}, got {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidSpecError("edge weights must be finite and non-negative")
    return w


def _pinned_pairs(fd_meas: Sequence[MeasurementSet], shape) -> np.ndarray:
    pinned = np.zeros((len(shape),) + tuple(shape), dtype=bool)
    for ms in fd_meas:
        pinned[ms.plan.axis].flat[list(ms.plan.indices)] = True
    return pinned


def solve_wtv(
    k_meas: MeasurementSet,
    fd_meas: MeasurementSet | Sequence[MeasurementSet] | None = None,
    edge_weights=None,
    cfg: SolverConfig = DEFAULT_CONFIG,
    method: str = "auto",
) -> SolverResult:
    """Weighted-TV reconstruction honouring k-space and FD-space samples.

    ``edge_weights`` holds one weight per pixel pair and axis, shaped
    ``(rank, *image_shape)``; entry ``[a, i]`` weighs the pair
    ``(i, i + 1 along a)``. The k-space plan must contain the DC index, which
    fixes the image mean that the TV objective cannot see. ``method`` picks
    the ``fd`` or ``structured`` route; ``auto`` uses ``fd`` for 1-D and
    ``structured`` for 2-D images.
    """
    if k_meas.plan.space is not Space.K:
        raise InvalidSpecError("k_meas must be a k-space measurement set")
    shape = k_meas.plan.shape
    if 0 not in k_meas.plan.indices:
        raise UnderdeterminedError("the k-space plan must include the DC sample (index 0)")
    if fd_meas is None:
        fd_meas = []
    elif isinstance(fd_meas, MeasurementSet):
        fd_meas = [fd_meas]
    fd_meas = [ms for ms in fd_meas if ms.plan.m > 0]
    weights = _normalise_weights(edge_weights, shape)
    if method == "auto":
        method = "fd" if len(shape) == 1 else "structured"
    if method == "fd":
        if len(shape) != 1:
            raise InvalidSpecError("the FD-variable route only handles 1-D images")
        return _wtv_fd_route(k_meas, fd_meas, weights[0], cfg)
    if method != "structured":
        raise InvalidSpecError(f"unknown method {method!r}")

    A_k, b_k = _kspace_real_rows(k_meas)
    A_fd, b_fd = _fd_rows(fd_meas, shape)
    pinned = _pinned_pairs(fd_meas, shape)
    g = np.where(pinned, _PINNED_WEIGHT, np.maximum(weights, _WEIGHT_FLOOR))
    M = np.vstack([A_k, A_fd])
    b = np.concatenate([b_k, b_fd])
    res = solve_tv(shape, M, b, g.reshape(len(shape), -1), cfg)
    D = _difference_operator(shape, range(len(shape)))
    res.objective = float(weights.ravel() @ np.abs(D @ res.solution))
    return res


def _wtv_fd_route(k_meas, fd_meas, weights, cfg):
    n = k_meas.plan.n
    kidx = np.asarray(k_meas.plan.indices)
    vals = np.asarray(k_meas.values, dtype=complex)
    nz = kidx != 0
    F = build_operator(k_meas.plan).entries[nz]
    shift = np.exp(2j * np.pi * kidx[nz] / n) - 1.0
    A_c = np.vstack([F, np.ones((1, n))])
    b_c = np.concatenate([shift * vals[nz], [0.0]])
    A, b = to_real_system(A_c, b_c)

    known = {}
    for ms in fd_meas:
        for i, v in zip(ms.plan.indices, ms.values):
            known[int(i)] = float(v)
    known_idx = np.array(sorted(known), dtype=np.int64)
    known_vals = np.array([known[i] for i in known_idx])
    w = np.maximum(weights, _WEIGHT_FLOOR)
    res = solve_truncated_bp(L1Problem(A, b, w), known_idx, known_vals, cfg)

    z = res.solution - res.solution.mean() * (known_idx.size == 0)
    base = fd_inverse(Image(z, (n,)), 0.0, tol=1e-5).data
    dc = vals[~nz][0].real
    x = base + (dc / np.sqrt(n) - base.mean())

    A_k, b_k = _kspace_real_rows(k_meas)
    A_fd, b_fd = _fd_rows(fd_meas, (n,))
    resid = float(max(np.abs(A_k @ x - b_k).max(), np.abs(A_fd @ x - b_fd).max(initial=0.0)))
    dx = np.roll(x, -1) - x
    return SolverResult(x, res.status, float(weights @ np.abs(dx)), resid, res.iterations, cfg.zero_clip)


def solve_tv(
    shape: tuple[int, ...],
    M: np.ndarray,
    b: np.ndarray,
    weights: np.ndarray,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> SolverResult:
    """Interior-point solve of ``min sum g |D x|  s.t.  M x = b``.

    ``D`` stacks the circular differences along every axis of ``shape`` and
    ``weights`` (one row per axis) must be strictly positive. One row of ``M``
    must be the DC row ``1 / sqrt(n)``: it removes the constant null direction
    of the Laplacian ``D^T Theta D`` in the Newton system.
    """
    shape = tuple(shape)
    n = int(np.prod(shape))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    g = np.asarray(weights, dtype=float).ravel()
    D = _difference_operator(shape, range(len(shape)))
    if M.shape != (b.size, n) or g.size != D.shape[0]:
        raise DimensionError("solve_tv operand shapes disagree")
    if np.any(g <= 0):
        raise InvalidSpecError("solve_tv needs strictly positive weights")

    keep, consistent = _independent_rows(M, b, 1e-10)
    if not consistent:
        return SolverResult(np.zeros(n), Status.INFEASIBLE, 0.0, float(np.abs(b).max()), 0, cfg.zero_clip)
    Mk, bk = M[keep], b[keep]
    norms = np.linalg.norm(Mk, axis=1)
    Mk, bk = Mk / norms[:, None], bk / norms
    dc = np.flatnonzero(np.all(np.abs(Mk - 1.0 / np.sqrt(n)) < 1e-12, axis=1))
    if dc.size == 0:
        raise UnderdeterminedError("solve_tv needs the DC row among the constraints")
    dc = int(dc[0])

    with np.errstate(all="ignore"):
        x, status, it = _tv_ipm(D, Mk, bk, g, dc, cfg)
    resid = float(np.abs(M @ x - b).max())
    if status is Status.OPTIMAL and resid > cfg.feas_tol * max(1.0, float(np.abs(b).max())) * 10:
        status = Status.NUMERICAL_FAILURE
    return SolverResult(x, status, float(g @ np.abs(D @ x)), resid, it, cfg.zero_clip)


def _schur_solver(K, M, Ms, dc):
    """Solve ``K dx - M^T dy = f, M dx = -e`` through the grounded Laplacian.

    Cheap, but loses accuracy once ``K`` becomes near-singular.
    """
    n, p = K.shape[0], M.shape[0]
    rho = 1.0
    a_dc = np.full(n, 1.0 / np.sqrt(n))
    kappa = K.diagonal().mean()
    Kg = (K + sp.csc_matrix(([kappa], ([0], [0])), shape=(n, n))).tocsc()
    lu = spla.splu(Kg, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})

    def ksolve(V):
        # (K + rho/n 11^T)^{-1} V; K annihilates the constant vector
        V2 = V if V.ndim == 2 else V[:, None]
        mean = V2.mean(axis=0)
        W = lu.solve(np.ascontiguousarray(V2 - mean))
        W = W - W.mean(axis=0) + mean / rho
        return W if V.ndim == 2 else W[:, 0]

    Z = ksolve(M.T)
    S = M @ Z
    S_f = sla.cho_factor(S + 1e-14 * np.trace(S) / p * np.eye(p), check_finite=False)

    def solve(f, e):
        # the DC row pins the mean: rho a a^T dx = -rho a e[dc]
        Kq = ksolve(f - rho * a_dc * e[dc])
        dy = sla.cho_solve(S_f, -e - M @ Kq)
        return Kq + Z @ dy, dy

    return solve


def _saddle_solver(K, M, Ms, dc):
    """Same system factored whole by pivoted sparse LU; robust but slower."""
    n = K.shape[0]
    lu = spla.splu(sp.bmat([[K, Ms.T], [Ms, None]], format="csc"), permc_spec="COLAMD")

    def solve(f, e):
        sol = lu.solve(np.concatenate([f, -e]))
        return sol[:n], -sol[n:]

    return solve


def _tv_ipm(D, M, b, g, dc, cfg):
    r, n = D.shape
    p = M.shape[0]
    DT = D.T.tocsr()
    Ms = sp.csc_matrix(M)
    factor = _schur_solver

    x = M.T @ np.linalg.solve(M @ M.T, b)
    z = D @ x
    shift = max(0.1 * np.abs(z).mean(), 1e-2)
    u = np.maximum(z, 0) + shift
    v = np.maximum(-z, 0) + shift
    lam = np.zeros(r)
    y = np.zeros(p)
    su = g.copy()
    sv = g.copy()

    bnorm = 1.0 + np.abs(b).max()
    gnorm = 1.0 + np.abs(g).max()
    tol = min(cfg.opt_tol, cfg.feas_tol)
    for it in range(cfg.max_iters + 1):
        r1 = D @ x - u + v
        r2 = M @ x - b
        rd = DT @ lam + M.T @ y
        ru = g + lam - su
        rv = g - lam - sv
        mu = (u @ su + v @ sv) / (2 * r)
        pobj = g @ (u + v)
        dobj = b @ y
        pres = max(np.abs(r1).max(), np.abs(r2).max()) / bnorm
        dres = max(np.abs(rd).max(), np.abs(ru).max(), np.abs(rv).max()) / gnorm
        gap = abs(pobj - dobj) / (1 + abs(pobj))
        if pres <= tol and dres <= tol and gap <= tol:
            return x, Status.OPTIMAL, it
        if it == cfg.max_iters:
            return x, Status.ITER_LIMIT, it
        # accept the iterate if the linear algebra breaks down this close to the optimum
        near = pres <= BREAKDOWN_TOL and dres <= BREAKDOWN_TOL and gap <= BREAKDOWN_TOL
        fail = Status.OPTIMAL if near else Status.NUMERICAL_FAILURE

        theta = 1.0 / (u / su + v / sv)
        K = (DT @ sp.diags(theta) @ D).tocsc()

        def solve_kkt(e1, e2, ed, eu, ev, cu, cv):
            h = -e1 + (cu - u * eu) / su - (cv - v * ev) / sv
            dx, dy = linsolve(DT @ (theta * h) + ed, e2)
            dlam = theta * (h - D @ dx)
            dsu = dlam + eu
            dsv = -dlam + ev
            du = (cu - u * dsu) / su
            dv = (cv - v * dsv) / sv
            return dx, du, dv, dlam, dy, dsu, dsv

        def newton(cu, cv):
            # iterative refinement against the full KKT residual; returns the
            # step and its residual relative to the right-hand side
            scale = max(np.abs(c).max() for c in (r1, r2, rd, ru, rv, cu, cv)) + 1e-300
            step = solve_kkt(r1, r2, rd, ru, rv, cu, cv)
            size = np.inf
            for _ in range(REFINE_ROUNDS + 1):
                dx, du, dv, dlam, dy, dsu, dsv = step
                e = (r1 + D @ dx - du + dv, r2 + M @ dx, rd + DT @ dlam + M.T @ dy,
                     ru + dlam - dsu, rv - dlam - dsv,
                     cu - su * du - u * dsu, cv - sv * dv - v * dsv)
                new = max(np.abs(c).max() for c in e)
                if not new < 0.5 * size:
                    size = min(size, new)
                    break
                size = new
                if size <= STEP_ACCURACY * scale:
                    break
                corr = solve_kkt(*e)
                step = tuple(a + c for a, c in zip(step, corr))
            return step, size / scale

        def both_steps():
            aff, err_a = newton(-u * su, -v * sv)
            _, du, dv, _, _, dsu, dsv = aff
            ap = min(_step_length(u, du), _step_length(v, dv))
            ad = min(_step_length(su, dsu), _step_length(sv, dsv))
            mu_aff = ((u + ap * du) @ (su + ad * dsu) + (v + ap * dv) @ (sv + ad * dsv)) / (2 * r)
            sigma = (mu_aff / mu) ** 3
            step, err_c = newton(sigma * mu - u * su - du * dsu, sigma * mu - v * sv - dv * dsv)
            return step, max(err_a, err_c)

        try:
            linsolve = factor(K, M, Ms, dc)
            step, err = both_steps()
        except (RuntimeError, ValueError, np.linalg.LinAlgError):
            err = np.inf
        if err > SWITCH_ACCURACY and factor is _schur_solver:
            # the reduced system has become too ill-conditioned: stay on the saddle route
            factor = _saddle_solver
            try:
                linsolve = factor(K, M, Ms, dc)
                step, err = both_steps()
            except (RuntimeError, ValueError, np.linalg.LinAlgError):
                return x, fail, it
        elif not np.isfinite(err):
            return x, fail, it
        dx, du, dv, dlam, dy, dsu, dsv = step

        eta = min(0.9995, max(0.9, 1.0 - mu))
        ap = min(1.0, eta * min(_step_length(u, du), _step_length(v, dv)))
        ad = min(1.0, eta * min(_step_length(su, dsu), _step_length(sv, dsv)))
        x = x + ap * dx
        u = u + ap * du
        v = v + ap * dv
        lam = lam + ad * dlam
        y = y + ad * dy
        su = su + ad * dsu
        sv = sv + ad * dsv
        if not np.all(np.isfinite(x)):
            return x, Status.NUMERICAL_FAILURE, it + 1
    return x, Status.ITER_LIMIT, cfg.max_iters
