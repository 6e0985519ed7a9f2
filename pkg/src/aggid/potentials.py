"""Interaction potential catalogue and initial density profiles.

The analytic 1D potentials are Gaussian-truncated radial profiles

    phi(x) = f(|x|) * exp(-|x|^2 / (4 tau^2)) / sqrt(4 pi tau^2)

with f a repulsive-attractive power law, a Morse profile, or a Topaz
profile.  Two fixed 2D potentials (attraction-repulsion and anisotropic
Gaussian) and a tanh-blended time-varying combination complete the set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ValidationError
from .grids import SpatialGrid


@dataclass
class Potential:
    """Discretized potential on a spatial grid.

    ``values`` always stores the full node set.  ``symmetric`` records
    that the values came from (or should be read as) a radially even
    function; ``half()``/``from_half`` convert to and from the
    nonnegative-axis representation used by the symmetric solver.
    """

    grid: SpatialGrid
    values: np.ndarray = field(repr=False)
    symmetric: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValidationError(
                f"potential shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def half(self) -> np.ndarray:
        """Values on nodes 0..M (1D only)."""
        if self.grid.dim != 1:
            raise ValidationError("half representation is 1D only")
        return self.values[self.grid.half_count :].copy()

    @classmethod
    def from_half(cls, grid: SpatialGrid, half: np.ndarray) -> "Potential":
        """Expand phi_0..phi_M to the full grid via phi_{-i} = phi_i."""
        if grid.dim != 1:
            raise ValidationError("half representation is 1D only")
        half = np.asarray(half, dtype=float)
        if half.shape != (grid.half_count + 1,):
            raise ValidationError("half vector has wrong length")
        full = np.concatenate([half[:0:-1], half])
        return cls(grid, full, symmetric=True)


def symmetric_expansion_matrix(m: int) -> np.ndarray:
    """(2M+1) x (M+1) matrix E with (E h)_{i} = h_{|i|} for i = -M..M."""
    e = np.zeros((2 * m + 1, m + 1))
    for i in range(-m, m + 1):
        e[i + m, abs(i)] = 1.0
    return e


# --- potential specifications -------------------------------------------------


@dataclass(frozen=True)
class RepulsiveAttractive:
    """Truncated power law m0*(|x|^t1/t1 - |x|^t2/t2) with Gaussian cutoff."""

    theta1: float
    theta2: float
    m0: float
    tau: float = 0.1

    def __post_init__(self):
        if self.tau <= 0:
            raise ValidationError("tau must be positive")
        if self.theta1 <= 0 or self.theta2 <= 0:
            raise ValidationError("power-law exponents must be positive")

    def profile(self, r: np.ndarray) -> np.ndarray:
        return self.m0 * (r**self.theta1 / self.theta1 - r**self.theta2 / self.theta2)


@dataclass(frozen=True)
class Morse:
    """Truncated Morse profile -C_A exp(-r/l_A) + C_R exp(-r/l_R)."""

    c_a: float = 0.5
    ell_a: float = 0.5
    c_r: float = 0.2
    ell_r: float = 0.4
    tau: float = 0.1

    def __post_init__(self):
        if self.tau <= 0 or self.ell_a <= 0 or self.ell_r <= 0:
            raise ValidationError("Morse lengths and tau must be positive")

    def profile(self, r: np.ndarray) -> np.ndarray:
        return -self.c_a * np.exp(-r / self.ell_a) + self.c_r * np.exp(-r / self.ell_r)


@dataclass(frozen=True)
class Topaz:
    """Truncated Topaz profile (1+r)^(-a)."""

    a: float = -0.1
    tau: float = 0.1

    def __post_init__(self):
        if self.tau <= 0:
            raise ValidationError("tau must be positive")

    def profile(self, r: np.ndarray) -> np.ndarray:
        return (1.0 + r) ** (-self.a)


@dataclass(frozen=True)
class AttractRepel2D:
    """2D attraction-repulsion: 10*(s^1.1/1.1 - s) * exp(-s/0.1), s = |x|."""

    def profile(self, r: np.ndarray) -> np.ndarray:  # no Gaussian cutoff here
        return 10.0 * ((r**2) ** 0.55 / 1.1 - r) * np.exp(-r / 0.1)


@dataclass(frozen=True)
class Aniso2D:
    """2D anisotropic Gaussian well 0.2*exp(-(x1^2 + 3 x2^2)/0.04)."""


@dataclass(frozen=True)
class TimeVaryingBlend:
    """g(t)*first + (1-g(t))*second with g(t) = 0.5 + 0.5 tanh(kappa (t - t_b))."""

    kappa: float
    t_b: float
    first: object
    second: object

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValidationError("blend rate kappa must be positive")

    def weight(self, t: float) -> float:
        return 0.5 + 0.5 * np.tanh(self.kappa * (t - self.t_b))


@dataclass(frozen=True)
class Tabulated:
    """A potential given by node values (e.g. a previously identified one)."""

    potential: Potential


def is_time_varying(spec) -> bool:
    return isinstance(spec, TimeVaryingBlend)


def _gaussian_cutoff(r: np.ndarray, tau: float) -> np.ndarray:
    return np.exp(-(r**2) / (4.0 * tau**2)) / np.sqrt(4.0 * np.pi * tau**2)


def eval_potential(spec, grid: SpatialGrid, t: float | None = None) -> Potential:
    """Sample a potential specification on the grid nodes.

    Time-varying specs require ``t``; all others ignore it.  The power-law
    value at x = 0 is exactly 0 (both power terms vanish for positive
    exponents).
    """
    if is_time_varying(spec):
        if t is None:
            raise ValidationError("time-varying potential requires an evaluation time t")
        g = spec.weight(t)
        first = eval_potential(spec.first, grid)
        second = eval_potential(spec.second, grid)
        return Potential(
            grid,
            g * first.values + (1.0 - g) * second.values,
            symmetric=first.symmetric and second.symmetric,
        )

    if isinstance(spec, Tabulated):
        if spec.potential.grid.shape != grid.shape:
            raise ValidationError("tabulated potential grid mismatch")
        return Potential(grid, spec.potential.values.copy(), spec.potential.symmetric)

    coords = grid.meshgrid()
    r = np.sqrt(sum(c**2 for c in coords))

    if isinstance(spec, (RepulsiveAttractive, Morse, Topaz)):
        vals = spec.profile(r) * _gaussian_cutoff(r, spec.tau)
        return Potential(grid, vals, symmetric=True)
    if isinstance(spec, AttractRepel2D):
        if grid.dim != 2:
            raise ValidationError("AttractRepel2D requires a 2D grid")
        return Potential(grid, spec.profile(r), symmetric=True)
    if isinstance(spec, Aniso2D):
        if grid.dim != 2:
            raise ValidationError("Aniso2D requires a 2D grid")
        x1, x2 = coords
        vals = 0.2 * np.exp(-(x1**2 + 3.0 * x2**2) / 0.04)
        return Potential(grid, vals, symmetric=False)
    raise ValidationError(f"unknown potential spec {spec!r}")


# --- initial conditions -------------------------------------------------------


def initial_condition_1d(grid: SpatialGrid, m0: float = 0.6) -> np.ndarray:
    """Compactly supported parabolic bump with discrete mass m0.

    u(0,x) = 0.15^(1/3) * m0 * max(C0 - |x|^2/(12*0.15^(2/3)), 0), with the
    normalization constant C0 found by root bracketing so that
    sum(u)*dx = m0 to 1e-12.
    """
    if grid.dim != 1:
        raise ValidationError("initial_condition_1d requires a 1D grid")
    if m0 <= 0:
        raise ValidationError("total mass m0 must be positive")
    x = grid.axis_coords()
    amp = 0.15 ** (1.0 / 3.0) * m0
    denom = 12.0 * 0.15 ** (2.0 / 3.0)

    def mass(c0):
        u = amp * np.maximum(c0 - x**2 / denom, 0.0)
        return u.sum() * grid.dx - m0

    hi = 1.0
    while mass(hi) < 0:
        hi *= 2.0
    c0 = brentq(mass, 0.0, hi, xtol=1e-14, rtol=1e-15)
    return amp * np.maximum(c0 - x**2 / denom, 0.0)


def initial_condition_2d(grid: SpatialGrid) -> np.ndarray:
    """Two unit Gaussians of width 0.2 centered at (0, -0.3) and (0, 0.3)."""
    if grid.dim != 2:
        raise ValidationError("initial_condition_2d requires a 2D grid")
    x1, x2 = grid.meshgrid()
    return np.exp(-(x1**2 + (x2 + 0.3) ** 2) / 0.04) + np.exp(
        -(x1**2 + (x2 - 0.3) ** 2) / 0.04
    )
