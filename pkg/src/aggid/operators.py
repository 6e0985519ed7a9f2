"""Assembly of the per-frame operator matrices A^n with L_U phi = A^n phi.

A^n is the exact linearization in phi of the conservative forward step:
per axis the node flux is F^k = U * ((D_k U) * phi) * dx^d, faces are
averaged, the outermost faces carry zero flux, and rows are the face-flux
divergence.  Because the same construction drives the forward solver,
clean self-generated data satisfies D_t U^n = A^n phi* exactly.

``derivative_mode`` selects how D_k U is computed: "raw" central
differences, or "sdd" which smooths U, differences, and smooths again.
Only the derivative factor is stabilized; the U factor multiplying the
convolution stays untouched, which preserves linearity in phi and the
telescoping conservation structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .denoise import sdd_dt, sdd_frame_dx
from .errors import ValidationError
from .grids import SpaceTimeField, SpatialGrid, dx_central
from .potentials import symmetric_expansion_matrix

RAW = "raw"
SDD = "sdd"
_MODES = (RAW, SDD)


@dataclass
class DiffMatrices:
    """Dense matrices realizing the grid stencils (per axis in 2D).

    ``lap`` is the discrete Laplacian D-D+ summed over axes and ``lap2``
    its square; both enter the regularized phi-update systems.
    """

    grid: SpatialGrid
    dplus: list[np.ndarray] = field(repr=False)
    dminus: list[np.ndarray] = field(repr=False)
    lap: np.ndarray = field(repr=False)
    lap2: np.ndarray = field(repr=False)


def _dplus_1d(n: int, dx: float) -> np.ndarray:
    d = np.zeros((n, n))
    idx = np.arange(n)
    d[idx, idx] = -1.0 / dx
    d[idx[:-1], idx[:-1] + 1] = 1.0 / dx
    return d


def _dminus_1d(n: int, dx: float) -> np.ndarray:
    d = np.zeros((n, n))
    idx = np.arange(n)
    d[idx, idx] = 1.0 / dx
    d[idx[1:], idx[1:] - 1] = -1.0 / dx
    return d


def _lift(mat1d: np.ndarray, grid: SpatialGrid, axis: int) -> np.ndarray:
    """Lift a per-axis 1D stencil matrix to the flattened d-dim grid."""
    if grid.dim == 1:
        return mat1d
    eye = np.eye(grid.n_axis)
    return np.kron(mat1d, eye) if axis == 0 else np.kron(eye, mat1d)


@lru_cache(maxsize=16)
def _diff_matrices_cached(grid: SpatialGrid) -> DiffMatrices:
    n, dx = grid.n_axis, grid.dx
    dplus = [_lift(_dplus_1d(n, dx), grid, ax) for ax in range(grid.dim)]
    dminus = [_lift(_dminus_1d(n, dx), grid, ax) for ax in range(grid.dim)]
    lap = sum(dm @ dp for dm, dp in zip(dminus, dplus))
    return DiffMatrices(grid=grid, dplus=dplus, dminus=dminus, lap=lap, lap2=lap @ lap)


def build_diff_matrices(grid: SpatialGrid) -> DiffMatrices:
    """Materialize D+, D-, D-D+ and (D-D+)^2 as dense matrices (cached per grid)."""
    return _diff_matrices_cached(grid)


@lru_cache(maxsize=16)
def _divergence_matrix(grid: SpatialGrid, axis: int) -> sp.csr_matrix:
    """Sparse map from node fluxes to the face-averaged divergence.

    Interior rows are (F_{i+1} - F_{i-1})/(2 dx); the first and last row
    along the axis fold in the zero boundary face.
    """
    n, dx = grid.n_axis, grid.dx
    d = sp.lil_matrix((n, n))
    for i in range(n):
        if 0 < i < n - 1:
            d[i, i + 1] = 0.5 / dx
            d[i, i - 1] = -0.5 / dx
        elif i == 0:
            d[0, 0] = 0.5 / dx
            d[0, 1] = 0.5 / dx
        else:
            d[i, i] = -0.5 / dx
            d[i, i - 1] = -0.5 / dx
    d = d.tocsr()
    if grid.dim == 1:
        return d
    eye = sp.identity(n, format="csr")
    return (sp.kron(d, eye) if axis == 0 else sp.kron(eye, d)).tocsr()


def _toeplitz_gather(v: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Matrix T with T[i, m] = v[i - m] (multi-index difference), zero padded.

    T is the matrix of the convolution phi -> v * phi on the grid.
    """
    m = grid.half_count
    n = grid.n_axis
    if grid.dim == 1:
        pad = np.zeros(2 * n - 1)
        pad[n - 1 - m : n + m] = v  # center v so index 0 of (i - m) maps to n-1
        diff = np.arange(n)[:, None] - np.arange(n)[None, :]
        return pad[diff + (n - 1)]
    pad = np.zeros((2 * n - 1, 2 * n - 1))
    pad[n - 1 - m : n + m, n - 1 - m : n + m] = v
    idx = np.arange(n)
    diff = idx[:, None] - idx[None, :] + (n - 1)
    rows = diff[:, None, :, None]  # i1, i2, m1, m2 -> broadcast
    cols = diff[None, :, None, :]
    t = pad[np.broadcast_to(rows, (n, n, n, n)), np.broadcast_to(cols, (n, n, n, n))]
    return t.reshape(n * n, n * n)


def frame_derivatives(
    u: np.ndarray, grid: SpatialGrid, derivative_mode: str, h_x: float
) -> list[np.ndarray]:
    """Central derivative of one data frame per axis, raw or SDD-stabilized."""
    if derivative_mode not in _MODES:
        raise ValidationError(f"derivative_mode must be one of {_MODES}")
    if derivative_mode == RAW:
        return [dx_central(u, grid, ax) for ax in range(grid.dim)]
    return [sdd_frame_dx(u, grid, h_x, ax) for ax in range(grid.dim)]


def build_operator(
    u: np.ndarray,
    grid: SpatialGrid,
    derivative_mode: str = RAW,
    h_x: float = 0.04,
) -> np.ndarray:
    """Dense matrix A with (A phi) = div(U * ((DU) * phi) * dx^d)."""
    u = np.asarray(u, dtype=float)
    if u.shape != grid.shape:
        raise ValidationError("frame does not match grid")
    w = grid.dx**grid.dim
    uflat = u.reshape(-1)
    a = np.zeros((grid.size, grid.size))
    for ax, du in enumerate(frame_derivatives(u, grid, derivative_mode, h_x)):
        t = _toeplitz_gather(du, grid)
        a += _divergence_matrix(grid, ax) @ (uflat[:, None] * t)
    a *= w
    return a


def build_operator_symmetric(
    u: np.ndarray,
    grid: SpatialGrid,
    derivative_mode: str = RAW,
    h_x: float = 0.04,
) -> np.ndarray:
    """Operator acting on the half vector phi_0..phi_M (1D only).

    Exactly the full operator composed with the even expansion
    phi_{-i} = phi_i, so full and half routes agree on symmetric inputs.
    """
    if grid.dim != 1:
        raise ValidationError("symmetric operator is 1D only")
    return build_operator(u, grid, derivative_mode, h_x) @ symmetric_expansion_matrix(
        grid.half_count
    )


@dataclass
class FidelitySystem:
    """Accumulated normal equations of the data-fidelity term.

    gram = sum_n dt * A^nT A^n, rhs = sum_n dt * A^nT u_t^n and
    const = sum_n dt * |u_t^n|^2, n = 0..N-1.  Together with the grid
    quadrature weight these reproduce the fidelity value
    (dx^d/2) * (phiT gram phi - 2 phiT rhs + const) and its gradient,
    so Bregman iterations never need the per-frame matrices again.
    """

    grid: SpatialGrid
    dt: float
    n_frames: int
    gram: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    const: float = 0.0
    derivative_mode: str = RAW
    h_x: float = 0.04
    h_t: float = 0.04


def assemble_system(
    data: SpaceTimeField,
    derivative_mode: str = RAW,
    h_x: float = 0.04,
    h_t: float = 0.04,
) -> FidelitySystem:
    """Build the fidelity normal system from a data set.

    In "sdd" mode both the spatial derivatives inside A^n and the time
    derivative on the right-hand side are SDD-stabilized; "raw" uses plain
    finite differences throughout.
    """
    if data.times.count < 1:
        raise ValidationError("need at least two frames to assemble the system")
    grid = data.grid
    n_unknown = grid.size
    gram = np.zeros((n_unknown, n_unknown))
    rhs = np.zeros(n_unknown)
    const = 0.0
    dt = data.times.dt

    if derivative_mode == SDD and data.times.n_frames >= 3:
        ut_all = sdd_dt(data, h_x, h_t).values
    else:
        ut_all = (data.values[1:] - data.values[:-1]) / dt

    for n in range(data.times.count):
        a = build_operator(data.values[n], grid, derivative_mode, h_x)
        ut = ut_all[n].reshape(-1)
        gram += dt * (a.T @ a)
        rhs += dt * (a.T @ ut)
        const += dt * float(ut @ ut)
    return FidelitySystem(
        grid=grid,
        dt=dt,
        n_frames=data.times.count,
        gram=gram,
        rhs=rhs,
        const=const,
        derivative_mode=derivative_mode,
        h_x=h_x,
        h_t=h_t,
    )
