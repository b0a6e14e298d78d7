"""Test signals: delta-sparse vectors, Heaviside step signals, the Shepp-Logan
phantom, Gaussian corruption and the circular finite-difference representation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InconsistencyError, InvalidSpecError

# |value| above this counts as a non-zero pixel / FD entry
NONZERO_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Image:
    """Real 1-D or 2-D image stored as a flat row-major vector."""

    data: np.ndarray
    shape: tuple[int, ...]

    def __post_init__(self):
        data = np.ascontiguousarray(np.asarray(self.data, dtype=float).ravel())
        shape = tuple(int(d) for d in self.shape)
        if len(shape) not in (1, 2) or any(d <= 0 for d in shape):
            raise InvalidSpecError(f"image shape must be 1-D or 2-D positive, got {shape}")
        if int(np.prod(shape)) != data.size:
            raise DimensionError(f"shape {shape} does not match {data.size} samples")
        if not np.all(np.isfinite(data)):
            raise InvalidSpecError("image contains NaN or Inf")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def from_array(cls, arr) -> "Image":
        arr = np.asarray(arr, dtype=float)
        return cls(arr.ravel(), arr.shape)

    @property
    def array(self) -> np.ndarray:
        return self.data.reshape(self.shape)

    @property
    def n(self) -> int:
        return self.data.size

    @property
    def rank(self) -> int:
        return len(self.shape)

    def support(self, tol: float = NONZERO_TOL) -> np.ndarray:
        return np.flatnonzero(np.abs(self.data) > tol)

    def sparsity(self, tol: float = NONZERO_TOL) -> int:
        return int(np.count_nonzero(np.abs(self.data) > tol))

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"Image(shape={self.shape}, nnz={self.sparsity()})"


@dataclass(frozen=True)
class SparseSpec:
    n: int
    s: int
    amplitude_range: tuple[float, float] = (0.5, 1.5)
    seed: int = 0
    signed: bool = False

    def __post_init__(self):
        lo, hi = self.amplitude_range
        if self.n <= 0:
            raise InvalidSpecError("n must be positive")
        if self.s < 0 or self.s > self.n:
            raise InvalidSpecError(f"sparsity s={self.s} must lie in [0, n={self.n}]")
        if not (0 < lo <= hi):
            raise InvalidSpecError("amplitude_range must be a positive interval")


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InvalidSpecError("sigma must be non-negative")


def gen_sparse_image(spec: SparseSpec) -> Image:
    """Delta-sparse 1-D image with ``spec.s`` peaks at distinct random pixels.

    Amplitudes are uniform in ``amplitude_range``; signs are positive unless
    ``spec.signed`` is set, in which case each peak gets an independent sign.
    """
    rng = np.random.default_rng(spec.seed)
    out = np.zeros(spec.n)
    idx = rng.choice(spec.n, size=spec.s, replace=False)
    amps = rng.uniform(*spec.amplitude_range, size=spec.s)
    if spec.signed:
        amps *= rng.choice([-1.0, 1.0], size=spec.s)
    out[idx] = amps
    return Image(out, (spec.n,))


def gen_step_signal(
    n: int,
    num_steps: int,
    seed: int = 0,
    amplitude_range: tuple[float, float] = (0.5, 1.5),
    min_amplitude: float = 0.25,
) -> Image:
    """Piecewise-constant signal ``I(x) = sum_i a_i * sgn(x - x_i)``.

    Step positions sit half-way between pixels so ``sgn`` never hits zero.
    The coefficients are shifted to sum to zero, which makes the circular
    difference at the wrap-around vanish: the circular FD image then has
    exactly ``num_steps`` non-zeros (jumps of ``2 * a_i``). Coefficients are
    redrawn until every ``|a_i| >= min_amplitude``.
    """
    if num_steps < 2:
        raise InvalidSpecError("a circular step signal needs at least 2 steps")
    if num_steps >= n:
        raise InvalidSpecError(f"num_steps={num_steps} must be < n={n}")
    rng = np.random.default_rng(seed)
    # positions x_i = j + 1/2 for j in 0..n-2; the wrap pair is left to closure
    cuts = np.sort(rng.choice(n - 1, size=num_steps, replace=False))
    while True:
        a = rng.uniform(*amplitude_range, size=num_steps) * rng.choice([-1.0, 1.0], size=num_steps)
        a -= a.mean()
        if np.all(np.abs(a) >= min_amplitude):
            break
    x = np.arange(n)[:, None]
    signal = (a * np.sign(x - (cuts + 0.5))).sum(axis=1)
    return Image(signal, (n,))


# Shepp-Logan geometry with the high-contrast (Toft) intensities:
# (intensity, semi-axis a, semi-axis b, x0, y0, rotation in degrees)
_SHEPP_LOGAN = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)


def gen_shepp_logan(size: int) -> Image:
    """``size x size`` Shepp-Logan phantom sampled at pixel centres, values in [0, 1]."""
    if size < 16:
        raise InvalidSpecError("phantom size must be >= 16")
    c = (np.arange(size) - (size - 1) / 2) / (size / 2)
    # row 0 is the top of the image (y = +1)
    y, x = np.meshgrid(-c, c, indexing="ij")
    img = np.zeros((size, size))
    for amp, a, b, x0, y0, phi in _SHEPP_LOGAN:
        t = np.radians(phi)
        xr = (x - x0) * np.cos(t) + (y - y0) * np.sin(t)
        yr = -(x - x0) * np.sin(t) + (y - y0) * np.cos(t)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += amp
    # 1 - 0.8 - 0.2 leaves -5e-17 inside the ventricles
    img[np.abs(img) < 1e-12] = 0.0
    return Image.from_array(np.clip(img, 0.0, 1.0))


def add_noise(img: Image, noise: NoiseSpec) -> Image:
    if noise.sigma == 0:
        return img
    rng = np.random.default_rng(noise.seed)
    return Image(img.data + rng.normal(0.0, noise.sigma, size=img.n), img.shape)


def _check_axis(img: Image, axis: int) -> None:
    if axis not in range(img.rank):
        raise DimensionError(f"axis {axis} out of range for rank-{img.rank} image")


def fd_transform(img: Image, axis: int = 0) -> Image:
    """Circular forward difference ``I(x + 1) - I(x)`` along ``axis``."""
    _check_axis(img, axis)
    arr = img.array
    return Image.from_array(np.roll(arr, -1, axis=axis) - arr)


def fd_inverse(fd_img: Image, anchor_value, axis: int = 0, tol: float = 1e-9) -> Image:
    """Integrate a circular FD image back to pixels.

    ``anchor_value`` fixes the first pixel of every line along ``axis``; pass a
    scalar or an array shaped like the image with ``axis`` removed.
    """
    _check_axis(fd_img, axis)
    z = fd_img.array
    closure = z.sum(axis=axis)
    scale = max(1.0, float(np.abs(z).max(initial=0.0)))
    if np.any(np.abs(closure) > tol * scale * z.shape[axis]):
        raise InconsistencyError(
            f"FD image is not integrable: line sums up to {np.abs(closure).max():.3g}"
        )
    csum = np.cumsum(z, axis=axis)
    head = np.zeros_like(np.take(z, [0], axis=axis))
    body = np.concatenate([head, np.take(csum, range(z.shape[axis] - 1), axis=axis)], axis=axis)
    anchor = np.expand_dims(np.broadcast_to(np.asarray(anchor_value, float), closure.shape), axis)
    return Image.from_array(body + anchor)


def fd_sparsity(img: Image, tol: float = NONZERO_TOL) -> int:
    """Non-zero count of the FD representation summed over all axes."""
    return sum(fd_transform(img, ax).sparsity(tol) for ax in range(img.rank))


def peak_snr_sigma(img: Image, snr: float) -> float:
    """Noise level giving the mean non-zero pixel magnitude an SNR of ``snr``."""
    nz = np.abs(img.data[np.abs(img.data) > NONZERO_TOL])
    if nz.size == 0 or snr <= 0:
        raise InvalidSpecError("need a non-zero image and positive SNR")
    return float(nz.mean() / snr)

