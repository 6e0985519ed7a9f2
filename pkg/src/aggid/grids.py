"""Regular space-time grids, finite-difference stencils and discrete convolution.

The spatial domain is the symmetric box [-L, L]^d (d = 1 or 2) sampled at
equidistant nodes x_i = i*dx, i = -M..M per axis, dx = L/M.  Time is
sampled at t^n = n*dt, n = 0..N, dt = T/N.  Everything downstream (forward
solver, operator assembly, denoising) works on these grids.

Boundary convention: fields are extended by zero outside [-L, L]^d.  The
one-sided differences fold that extension into their boundary rows, e.g.
the forward difference at i = M is -v_M/dx.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import ValidationError


@dataclass(frozen=True)
class SpatialGrid:
    """Symmetric uniform grid on [-L, L]^d with 2M+1 nodes per axis."""

    half_width: float
    half_count: int
    dim: int = 1

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"grid dimension must be 1 or 2, got {self.dim}")
        if self.half_width <= 0:
            raise ValidationError("grid half_width must be positive")
        if self.half_count < 1:
            raise ValidationError("grid half_count must be >= 1")

    @property
    def dx(self) -> float:
        return self.half_width / self.half_count

    @property
    def n_axis(self) -> int:
        """Nodes per axis (2M+1)."""
        return 2 * self.half_count + 1

    @property
    def shape(self) -> tuple:
        return (self.n_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.n_axis**self.dim

    def axis_coords(self) -> np.ndarray:
        m = self.half_count
        return np.arange(-m, m + 1) * self.dx

    def meshgrid(self):
        """Coordinate arrays, one per axis, each of shape ``self.shape``."""
        c = self.axis_coords()
        if self.dim == 1:
            return (c,)
        return np.meshgrid(c, c, indexing="ij")

    def node_index(self, x: float) -> int:
        """Signed index of the node nearest to coordinate ``x`` along one axis."""
        i = int(round(x / self.dx))
        return max(-self.half_count, min(self.half_count, i))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid t^n = n*dt, n = 0..N, on [0, T]."""

    horizon: float
    count: int

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValidationError("time horizon must be positive")
        if self.count < 1:
            raise ValidationError("time count must be >= 1")

    @property
    def dt(self) -> float:
        return self.horizon / self.count

    @property
    def n_frames(self) -> int:
        return self.count + 1

    def coords(self) -> np.ndarray:
        return np.arange(self.count + 1) * self.dt


@dataclass
class SpaceTimeField:
    """Density samples U_i^n on a space-time grid.

    ``values`` has shape (N+1, 2M+1) in 1D and (N+1, 2M+1, 2M+1) in 2D,
    frame-major so that ``values[n]`` is a cheap view of frame n.
    """

    grid: SpatialGrid
    times: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.times.n_frames,) + self.grid.shape
        if self.values.shape != expected:
            raise ValidationError(
                f"field shape {self.values.shape} does not match grid {expected}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("field contains non-finite values")

    def frame(self, n: int) -> np.ndarray:
        return self.values[n]

    def restrict(self, start: int, stop: int) -> "SpaceTimeField":
        """Sub-field over frames start..stop inclusive, time origin reset."""
        if not (0 <= start < stop <= self.times.count):
            raise ValidationError(f"bad frame range [{start}, {stop}]")
        count = stop - start
        sub = TimeGrid(horizon=count * self.times.dt, count=count)
        return SpaceTimeField(self.grid, sub, self.values[start : stop + 1].copy())


def _check_spatial(v: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != grid.shape:
        raise ValidationError(f"array shape {v.shape} does not match grid {grid.shape}")
    return v


def dx_forward(v: np.ndarray, grid: SpatialGrid, axis: int = 0) -> np.ndarray:
    """Forward difference (v_{i+1} - v_i)/dx with zero extension past +L."""
    v = _check_spatial(v, grid)
    out = np.empty_like(v)
    dx = grid.dx
    sl = [slice(None)] * v.ndim
    lo, hi, last = list(sl), list(sl), list(sl)
    lo[axis], hi[axis], last[axis] = slice(None, -1), slice(1, None), -1
    out[tuple(lo)] = (v[tuple(hi)] - v[tuple(lo)]) / dx
    out[tuple(last)] = -v[tuple(last)] / dx
    return out


def dx_backward(v: np.ndarray, grid: SpatialGrid, axis: int = 0) -> np.ndarray:
    """Backward difference (v_i - v_{i-1})/dx with zero extension past -L."""
    v = _check_spatial(v, grid)
    out = np.empty_like(v)
    dx = grid.dx
    sl = [slice(None)] * v.ndim
    lo, hi, first = list(sl), list(sl), list(sl)
    lo[axis], hi[axis], first[axis] = slice(None, -1), slice(1, None), 0
    out[tuple(hi)] = (v[tuple(hi)] - v[tuple(lo)]) / dx
    out[tuple(first)] = v[tuple(first)] / dx
    return out


def dx_central(v: np.ndarray, grid: SpatialGrid, axis: int = 0) -> np.ndarray:
    """Central difference, exactly (forward + backward)/2."""
    return 0.5 * (dx_forward(v, grid, axis) + dx_backward(v, grid, axis))


def laplacian(v: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Discrete Laplacian D-D+ (summed over axes in 2D)."""
    v = _check_spatial(v, grid)
    out = np.zeros_like(v)
    for axis in range(grid.dim):
        out += dx_backward(dx_forward(v, grid, axis), grid, axis)
    return out


def dt_forward(fld: SpaceTimeField, n: int) -> np.ndarray:
    """Forward time difference (U^{n+1} - U^n)/dt, defined for n = 0..N-1."""
    if not (0 <= n < fld.times.count):
        raise ValidationError(f"dt_forward needs 0 <= n < N, got n={n}, N={fld.times.count}")
    return (fld.values[n + 1] - fld.values[n]) / fld.times.dt


def convolve(p: np.ndarray, q: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Discrete convolution (p*q)_i = sum_j p_j q_{i-j} on the grid.

    Both factors live on the grid nodes and are treated as zero outside
    [-L, L]^d; the result is returned on the same node set.  2D uses an
    FFT product (agrees with the direct sum to machine precision).
    """
    p = _check_spatial(p, grid)
    q = _check_spatial(q, grid)
    m = grid.half_count
    if grid.dim == 1:
        full = np.convolve(p, q, mode="full")
        return full[m : 3 * m + 1]
    full = fftconvolve(p, q, mode="full")
    return full[m : 3 * m + 1, m : 3 * m + 1]
