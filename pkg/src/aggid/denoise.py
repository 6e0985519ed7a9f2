"""Percent-calibrated Gaussian noise, MLS smoothing, and SDD derivatives.

Noise level: "rho%" noise adds i.i.d. N(0, sigma^2) samples with

    sigma = (rho/100) * sqrt( sum_{n>=1} sum_i (u_i^n)^2 * dx^d * dt ).

Smoothing is Moving Least Squares: at every node a quadratic is fitted to
the whole axis under Gaussian weights exp(-((x_j - x_i)/h)^2) and evaluated
at the node.  MLS is linear in the data, so each (axis, width) pair is
materialized once as a dense smoothing matrix.

SDD (successively denoised differentiation) stabilizes derivatives of
noisy data by smoothing before and after each finite difference:
d/dx ~ S_x D_x S_x and d/dt ~ S_t D_t S_x.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericalError, ValidationError
from .grids import SpaceTimeField, SpatialGrid, TimeGrid, dx_central


@dataclass(frozen=True)
class NoiseSpec:
    """Noise percentage rho and RNG seed."""

    percent: float
    seed: int = 0

    def __post_init__(self):
        if self.percent < 0:
            raise ValidationError("noise percent must be nonnegative")


@dataclass(frozen=True)
class MlsConfig:
    """Smoothing widths for the spatial and temporal MLS fits (degree 2)."""

    h_x: float = 0.04
    h_t: float = 0.04

    def __post_init__(self):
        if self.h_x <= 0 or self.h_t <= 0:
            raise ValidationError("MLS widths must be positive")


def noise_sigma(fld: SpaceTimeField, percent: float) -> float:
    """Standard deviation corresponding to rho% noise on this field."""
    if percent < 0:
        raise ValidationError("noise percent must be nonnegative")
    if fld.times.count < 1:
        raise ValidationError("field has no frames past t=0")
    w = fld.grid.dx**fld.grid.dim * fld.times.dt
    total = float(np.sum(fld.values[1:] ** 2)) * w
    return percent / 100.0 * np.sqrt(total)


def add_noise(fld: SpaceTimeField, spec: NoiseSpec) -> SpaceTimeField:
    """Add seeded i.i.d. Gaussian noise at the rho% level to every sample.

    Uses the counter-based Philox generator so the draw for each sample is
    a pure function of (seed, sample index).
    """
    sigma = noise_sigma(fld, spec.percent)
    if sigma == 0.0:
        return SpaceTimeField(fld.grid, fld.times, fld.values.copy())
    rng = np.random.Generator(np.random.Philox(spec.seed))
    noisy = fld.values + sigma * rng.standard_normal(fld.values.shape)
    return SpaceTimeField(fld.grid, fld.times, noisy)


@lru_cache(maxsize=64)
def _mls_matrix_cached(n: int, step: float, h: float) -> np.ndarray:
    coords = np.arange(n) * step
    return _mls_matrix(coords, h)


def _mls_matrix(coords: np.ndarray, h: float) -> np.ndarray:
    """Dense matrix S with (S v)_i = quadratic MLS fit of v evaluated at node i.

    The fit at node i uses the scaled shifted basis {1, d/h, (d/h)^2},
    d = coords - coords[i], which keeps the 3x3 normal systems well
    conditioned for any axis length.
    """
    n = len(coords)
    if n < 3:
        raise ValidationError("MLS needs at least 3 nodes along the axis")
    s = np.empty((n, n))
    for i in range(n):
        d = (coords - coords[i]) / h
        w = np.exp(-(d**2))
        basis = np.stack([np.ones(n), d, d * d])  # 3 x n
        bw = basis * w
        gram = bw @ basis.T
        try:
            coef = np.linalg.solve(gram, bw)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular MLS normal equations at node {i}") from exc
        s[i] = coef[0]  # row evaluating the fit at d = 0
    return s


def mls_matrix_for_axis(n: int, step: float, h: float) -> np.ndarray:
    """Smoothing matrix for a uniform axis of ``n`` nodes with spacing ``step``."""
    return _mls_matrix_cached(n, float(step), float(h))


def mls_smooth_x(frame: np.ndarray, grid: SpatialGrid, h_x: float) -> np.ndarray:
    """MLS-smooth one spatial frame (applied per axis in 2D)."""
    frame = np.asarray(frame, dtype=float)
    if frame.shape != grid.shape:
        raise ValidationError("frame does not match grid")
    s = mls_matrix_for_axis(grid.n_axis, grid.dx, h_x)
    if grid.dim == 1:
        return s @ frame
    return s @ frame @ s.T


def mls_smooth_t(fld: SpaceTimeField, h_t: float) -> SpaceTimeField:
    """MLS-smooth every spatial node's time series."""
    if fld.times.n_frames < 3:
        raise ValidationError("temporal MLS needs at least 3 frames")
    s = mls_matrix_for_axis(fld.times.n_frames, fld.times.dt, h_t)
    flat = fld.values.reshape(fld.times.n_frames, -1)
    smoothed = (s @ flat).reshape(fld.values.shape)
    return SpaceTimeField(fld.grid, fld.times, smoothed)


def smooth_field_x(fld: SpaceTimeField, h_x: float) -> SpaceTimeField:
    """Spatial MLS applied to every frame."""
    s = mls_matrix_for_axis(fld.grid.n_axis, fld.grid.dx, h_x)
    if fld.grid.dim == 1:
        out = fld.values @ s.T
    else:
        out = np.einsum("ij,njk,lk->nil", s, fld.values, s, optimize=True)
    return SpaceTimeField(fld.grid, fld.times, out)


def denoise_field(fld: SpaceTimeField, mls: MlsConfig) -> SpaceTimeField:
    """Denoised data: spatial smoothing of each frame, then temporal smoothing."""
    return mls_smooth_t(smooth_field_x(fld, mls.h_x), mls.h_t)


def sdd_dx(fld: SpaceTimeField, h_x: float, axis: int = 0) -> SpaceTimeField:
    """S_x D_x S_x applied frame by frame along a spatial axis."""
    grid = fld.grid
    out = np.empty_like(fld.values)
    for n in range(fld.times.n_frames):
        sm = mls_smooth_x(fld.values[n], grid, h_x)
        out[n] = mls_smooth_x(dx_central(sm, grid, axis), grid, h_x)
    return SpaceTimeField(grid, fld.times, out)


def sdd_frame_dx(frame: np.ndarray, grid: SpatialGrid, h_x: float, axis: int = 0) -> np.ndarray:
    """SDD spatial derivative of a single frame."""
    sm = mls_smooth_x(frame, grid, h_x)
    return mls_smooth_x(dx_central(sm, grid, axis), grid, h_x)


def sdd_dt(fld: SpaceTimeField, h_x: float, h_t: float) -> SpaceTimeField:
    """S_t D_t S_x time derivative on frames 0..N-1.

    Frames are spatially smoothed, forward-differenced in time, and the
    N remaining time samples are smoothed along t.
    """
    if fld.times.n_frames < 3:
        raise ValidationError("SDD time derivative needs at least 3 frames")
    sx = smooth_field_x(fld, h_x)
    dt = fld.times.dt
    diff = (sx.values[1:] - sx.values[:-1]) / dt  # frames 0..N-1
    st = mls_matrix_for_axis(diff.shape[0], dt, h_t)
    flat = diff.reshape(diff.shape[0], -1)
    out = (st @ flat).reshape(diff.shape)
    times = TimeGrid(horizon=(fld.times.count - 1) * dt, count=fld.times.count - 1)
    return SpaceTimeField(fld.grid, times, out)
