"""Sampling plans and operators: partial DFT, pixel selection and circular
finite-difference selection, plus basis coherence."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidSpecError
from .signals import Image


class Space(str, enum.Enum):
    K = "k"
    X = "x"
    FD = "fd"


@dataclass(frozen=True)
class SamplingPlan:
    """Which indices of which space get sampled.

    ``shape`` is the image grid (defaults to ``(n,)``). For FD plans an index
    ``i`` names the pixel pair ``(i, i + 1 along axis)``, wrapping circularly.
    """

    space: Space
    indices: tuple[int, ...]
    n: int
    axis: int | None = None
    shape: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "space", Space(self.space))
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        shape = (self.n,) if self.shape is None else tuple(int(d) for d in self.shape)
        object.__setattr__(self, "shape", shape)
        if int(np.prod(shape)) != self.n:
            raise InvalidSpecError(f"shape {shape} inconsistent with n={self.n}")
        if len(set(idx)) != len(idx):
            raise InvalidSpecError("plan indices must be distinct")
        if any(i < 0 or i >= self.n for i in idx):
            raise InvalidSpecError(f"plan indices must lie in [0, {self.n})")
        if self.space is Space.FD:
            axis = 0 if self.axis is None else int(self.axis)
            if axis not in range(len(shape)):
                raise InvalidSpecError(f"FD axis {axis} out of range for shape {shape}")
            object.__setattr__(self, "axis", axis)
        elif self.axis is not None:
            raise InvalidSpecError("axis only applies to FD plans")

    @property
    def m(self) -> int:
        return len(self.indices)

    def to_dict(self) -> dict:
        d = {"space": self.space.value, "n": self.n}
        if self.axis is not None:
            d["axis"] = self.axis
        if len(self.shape) > 1:
            d["shape"] = list(self.shape)
        d["indices"] = list(self.indices)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingPlan":
        return cls(Space(d["space"]), tuple(d["indices"]), int(d["n"]), d.get("axis"),
                   tuple(d["shape"]) if "shape" in d else None)


@dataclass(frozen=True, eq=False)
class DenseOperator:
    entries: np.ndarray
    row_space: str = ""
    column_space: str = "x"

    def __post_init__(self):
        e = np.asarray(self.entries)
        if e.ndim != 2 or not np.all(np.isfinite(e)):
            raise InvalidSpecError("operator must be a finite 2-D matrix")
        object.__setattr__(self, "entries", e)

    @property
    def shape(self):
        return self.entries.shape

    def __matmul__(self, x):
        return self.entries @ x


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    plan: SamplingPlan
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.plan.m,):
            raise DimensionError(f"{v.shape[0] if v.ndim else 0} values for {self.plan.m} plan indices")
        object.__setattr__(self, "values", v)


def _dft_1d(n: int) -> np.ndarray:
    jk = np.outer(np.arange(n), np.arange(n)) % n
    return np.exp(-2j * np.pi * jk / n) / np.sqrt(n)


def dft_matrix(n: int, shape: tuple[int, ...] | None = None) -> DenseOperator:
    """Unitary DFT, entries ``exp(-2 pi i jk / n) / sqrt(n)``.

    With a 2-D ``shape`` the result is the tensor-product DFT acting on the
    row-major vectorised grid.
    """
    if n < 1:
        raise InvalidSpecError("n must be >= 1")
    shape = (n,) if shape is None else tuple(shape)
    if int(np.prod(shape)) != n:
        raise InvalidSpecError(f"shape {shape} inconsistent with n={n}")
    if len(shape) == 1:
        return DenseOperator(_dft_1d(n), "k", "x")
    return DenseOperator(np.kron(_dft_1d(shape[0]), _dft_1d(shape[1])), "k", "x")


def fd_neighbor(indices, shape: tuple[int, ...], axis: int) -> np.ndarray:
    """Flat index of the pixel one step further along ``axis`` (circular)."""
    idx = np.asarray(indices, dtype=np.int64)
    coords = list(np.unravel_index(idx, shape))
    coords[axis] = (coords[axis] + 1) % shape[axis]
    return np.ravel_multi_index(coords, shape)


def fd_matrix(shape: tuple[int, ...], axis: int = 0) -> np.ndarray:
    n = int(np.prod(shape))
    D = -np.eye(n)
    D[np.arange(n), fd_neighbor(np.arange(n), shape, axis)] += 1.0
    return D


def random_plan(
    space: Space | str,
    n: int,
    m: int,
    seed: int = 0,
    *,
    shape: tuple[int, ...] | None = None,
    axis: int | None = None,
    force: tuple[int, ...] = (),
) -> SamplingPlan:
    """``m`` distinct indices drawn uniformly without replacement.

    Indices in ``force`` are always included and count towards ``m``.
    """
    if m < 0 or m > n:
        raise InvalidSpecError(f"cannot draw m={m} of n={n} indices")
    force = tuple(dict.fromkeys(int(i) for i in force))
    if len(force) > m:
        raise InvalidSpecError("more forced indices than m")
    rng = np.random.default_rng(seed)
    pool = np.setdiff1d(np.arange(n), force)
    drawn = rng.choice(pool, size=m - len(force), replace=False)
    idx = tuple(sorted(force + tuple(int(i) for i in drawn)))
    return SamplingPlan(Space(space), idx, n, axis if Space(space) is Space.FD else None, shape)


def _kspace_rows(plan: SamplingPlan) -> np.ndarray:
    idx = np.asarray(plan.indices, dtype=np.int64)
    if len(plan.shape) == 1:
        j = np.arange(plan.n)
        return np.exp(-2j * np.pi * (np.outer(idx, j) % plan.n) / plan.n) / np.sqrt(plan.n)
    rows, cols = plan.shape
    kr, kc = np.unravel_index(idx, plan.shape)
    fr = np.exp(-2j * np.pi * (np.outer(kr, np.arange(rows)) % rows) / rows) / np.sqrt(rows)
    fc = np.exp(-2j * np.pi * (np.outer(kc, np.arange(cols)) % cols) / cols) / np.sqrt(cols)
    return (fr[:, :, None] * fc[:, None, :]).reshape(len(idx), plan.n)


def build_operator(plan: SamplingPlan) -> DenseOperator:
    """Dense ``m x n`` matrix of the plan acting on the vectorised image."""
    m, n = plan.m, plan.n
    idx = np.asarray(plan.indices, dtype=np.int64)
    if plan.space is Space.K:
        return DenseOperator(_kspace_rows(plan), "k", "x")
    A = np.zeros((m, n))
    A[np.arange(m), idx] = 1.0
    if plan.space is Space.X:
        return DenseOperator(A, "x", "x")
    A[np.arange(m), idx] = -1.0
    A[np.arange(m), fd_neighbor(idx, plan.shape, plan.axis)] += 1.0
    return DenseOperator(A, "fd", "x")


def measure(img: Image, plan: SamplingPlan) -> MeasurementSet:
    if img.n != plan.n or (len(plan.shape) > 1 and img.shape != plan.shape):
        raise DimensionError(f"image {img.shape} does not match plan over {plan.shape}")
    idx = np.asarray(plan.indices, dtype=np.int64)
    if plan.space is Space.K:
        spectrum = np.fft.fftn(img.data.reshape(plan.shape), norm="ortho").ravel()
        return MeasurementSet(plan, spectrum[idx])
    if plan.space is Space.X:
        return MeasurementSet(plan, img.data[idx].copy())
    ahead = img.data[fd_neighbor(idx, plan.shape, plan.axis)]
    return MeasurementSet(plan, ahead - img.data[idx])


def _is_unitary(U: np.ndarray, tol: float) -> bool:
    return U.shape[0] == U.shape[1] and np.abs(U.conj().T @ U - np.eye(U.shape[0])).max() < tol


def coherence(Phi, Psi, tol: float = 1e-9) -> float:
    """``sqrt(n) * max |<phi_i, psi_j>|`` over the columns of two orthonormal bases."""
    P = Phi.entries if isinstance(Phi, DenseOperator) else np.asarray(Phi)
    Q = Psi.entries if isinstance(Psi, DenseOperator) else np.asarray(Psi)
    if P.shape != Q.shape:
        raise DimensionError("bases must have the same dimension")
    if not (_is_unitary(P, tol) and _is_unitary(Q, tol)):
        raise InvalidSpecError("coherence needs two unitary bases")
    return float(np.sqrt(P.shape[0]) * np.abs(P.conj().T @ Q).max())
