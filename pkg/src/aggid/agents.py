"""Agent-based data path: position noise, KDE onto the grid, sampling,
and a small pairwise-force flocking simulator used as a non-PDE data
generator.

Spatial density estimation uses the spherical Epanechnikov kernel

    K(x) = (d+2)/(2 V_d) (1 - |x|^2) 1{|x|^2 <= 1},  V_1 = 2, V_2 = pi,

scaled by a positive-definite diagonal bandwidth matrix H:
K_H(x) = det(H)^{-1/2} K(H^{-1/2} x), so each agent contributes unit
mass.  Temporal regularization reuses the one-dimensional profile on a
causal window: only frames with 0 <= t - t^n < r contribute, and the
weights are renormalized over the included frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .grids import SpaceTimeField, SpatialGrid, TimeGrid


@dataclass
class AgentData:
    """Agent positions per frame: times (N,) and positions (N, V, d)."""

    times: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 3:
            raise ValidationError("positions must have shape (frames, agents, dim)")
        if self.positions.shape[0] != len(self.times):
            raise ValidationError("times and positions disagree on frame count")
        if self.positions.shape[1] < 1:
            raise ValidationError("need at least one agent")
        if self.positions.shape[2] not in (1, 2):
            raise ValidationError("agent dimension must be 1 or 2")
        if not np.all(np.isfinite(self.positions)):
            raise ValidationError("agent positions must be finite")

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]

    @property
    def n_agents(self) -> int:
        return self.positions.shape[1]

    @property
    def dim(self) -> int:
        return self.positions.shape[2]


@dataclass(frozen=True)
class KdeConfig:
    """Bandwidths of the kernel density estimate.

    spatial_h is the diagonal of the bandwidth matrix H (a scalar means
    an isotropic H = h I).  temporal_h and the memory horizon control the
    causal time window.
    """

    spatial_h: float | tuple = 0.04
    temporal_h: float = 0.02
    memory: float = 1.0

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.spatial_h, dtype=float))
        if np.any(h <= 0):
            raise ValidationError("spatial bandwidth must be positive")
        if self.temporal_h <= 0 or self.memory <= 0:
            raise ValidationError("temporal bandwidth and memory must be positive")

    def h_diag(self, dim: int) -> np.ndarray:
        h = np.atleast_1d(np.asarray(self.spatial_h, dtype=float))
        if h.size == 1:
            return np.full(dim, float(h[0]))
        if h.size != dim:
            raise ValidationError("bandwidth diagonal does not match dimension")
        return h


def add_position_noise(agents: AgentData, sigma: float, seed: int = 0) -> AgentData:
    """Perturb every recorded position by i.i.d. N(0, sigma^2 I_d)."""
    if sigma == 0.0:
        return AgentData(agents.times.copy(), agents.positions.copy())
    rng = np.random.Generator(np.random.Philox(seed))
    noise = sigma * rng.standard_normal(agents.positions.shape)
    return AgentData(agents.times.copy(), agents.positions + noise)


def _unit_ball_volume(dim: int) -> float:
    return 2.0 if dim == 1 else np.pi


def kde_frame(agents: AgentData, n: int, grid: SpatialGrid, h_diag) -> np.ndarray:
    """Epanechnikov KDE of frame n on the grid nodes.

    Scatter-add per agent over the nodes inside its bandwidth ellipse;
    cost is O(V * window^d) rather than O(V * nodes).
    """
    if not (0 <= n < agents.n_frames):
        raise ValidationError(f"frame index {n} out of range")
    if agents.dim != grid.dim:
        raise ValidationError("agent dimension does not match grid")
    h = np.atleast_1d(np.asarray(h_diag, dtype=float))
    if h.size == 1:
        h = np.full(grid.dim, float(h[0]))
    if np.any(h <= 0):
        raise ValidationError("bandwidth must be positive")
    half_axis = np.sqrt(h)  # kernel support |H^(-1/2) x| <= 1

    pos = agents.positions[n]
    v_count = agents.n_agents
    m = grid.half_count
    dx = grid.dx
    dim = grid.dim
    norm = (dim + 2.0) / (2.0 * _unit_ball_volume(dim)) / np.sqrt(np.prod(h))
    out = np.zeros(grid.shape)

    windows = []
    for k in range(dim):
        w = int(np.floor(half_axis[k] / dx)) + 1
        windows.append(np.arange(-w, w + 1))

    base = np.rint(pos / dx).astype(int)  # (V, dim)
    if dim == 1:
        idx = base[:, 0:1] + windows[0][None, :]  # (V, W)
        x = idx * dx
        s = (x - pos[:, 0:1]) / half_axis[0]
        vals = np.maximum(0.0, 1.0 - s**2) * norm
        ok = (idx >= -m) & (idx <= m)
        out += np.bincount(idx[ok] + m, weights=vals[ok], minlength=grid.n_axis)
    else:
        i1 = base[:, 0:1] + windows[0][None, :]  # (V, W1)
        i2 = base[:, 1:2] + windows[1][None, :]  # (V, W2)
        s1 = (i1 * dx - pos[:, 0:1]) / half_axis[0]
        s2 = (i2 * dx - pos[:, 1:2]) / half_axis[1]
        s_sq = s1[:, :, None] ** 2 + s2[:, None, :] ** 2  # (V, W1, W2)
        vals = np.maximum(0.0, 1.0 - s_sq) * norm
        ok1 = (i1 >= -m) & (i1 <= m)
        ok2 = (i2 >= -m) & (i2 <= m)
        ok = ok1[:, :, None] & ok2[:, None, :]
        rows = np.broadcast_to(i1[:, :, None], s_sq.shape)[ok] + m
        cols = np.broadcast_to(i2[:, None, :], s_sq.shape)[ok] + m
        np.add.at(out, (rows, cols), vals[ok])
    return out / v_count


def kde_time(
    frames: np.ndarray, times: np.ndarray, t: float, h: float, memory: float
) -> np.ndarray:
    """Causal Epanechnikov average of past frames at time t.

    Frames with 0 <= t - t^n < memory enter with weights
    (1 - ((t - t^n)/h)^2)_+ renormalized to sum to one; if every kernel
    weight vanishes the nearest past frame is used.
    """
    times = np.asarray(times, dtype=float)
    lag = t - times
    in_window = (lag >= -1e-12) & (lag < memory)
    if not np.any(in_window):
        raise ValidationError(f"no frame inside the causal window at t={t:g}")
    w = np.where(in_window, np.maximum(0.0, 1.0 - (lag / h) ** 2), 0.0)
    total = w.sum()
    if total <= 0.0:
        w = np.zeros_like(w)
        candidates = np.where(in_window, lag, np.inf)
        w[int(np.argmin(candidates))] = 1.0
        total = 1.0
    w = w / total
    out = np.zeros_like(np.asarray(frames[0], dtype=float))
    for wn, frame in zip(w, frames):
        if wn != 0.0:
            out += wn * frame
    return out


def agents_to_field(
    agents: AgentData, grid: SpatialGrid, times: TimeGrid, kde: KdeConfig
) -> SpaceTimeField:
    """KDE density of the agent data sampled on a space-time grid."""
    h = kde.h_diag(grid.dim)
    frames = np.stack([kde_frame(agents, n, grid, h) for n in range(agents.n_frames)])
    values = np.empty((times.n_frames,) + grid.shape)
    for n, t in enumerate(times.coords()):
        values[n] = kde_time(frames, agents.times, t, kde.temporal_h, kde.memory)
    return SpaceTimeField(grid, times, values)


def sample_agents_from_density(
    fld: SpaceTimeField, n_agents: int, seed: int = 0
) -> AgentData:
    """Draw agent positions frame by frame from the density field.

    Cell probabilities are proportional to the (nonnegative part of the)
    node values; draws are jittered uniformly inside their cell.
    """
    if n_agents < 1:
        raise ValidationError("need at least one agent")
    rng = np.random.Generator(np.random.Philox(seed))
    grid, dim = fld.grid, fld.grid.dim
    n_frames = fld.times.n_frames
    coords = grid.axis_coords()
    out = np.empty((n_frames, n_agents, dim))
    flat_cells = grid.size
    for n in range(n_frames):
        weights = np.maximum(fld.values[n].reshape(-1), 0.0)
        total = weights.sum()
        if total <= 0.0:
            raise ValidationError(f"frame {n} has nonpositive mass; cannot sample")
        cells = rng.choice(flat_cells, size=n_agents, p=weights / total)
        jitter = rng.uniform(-0.5, 0.5, size=(n_agents, dim)) * grid.dx
        if dim == 1:
            centers = coords[cells][:, None]
        else:
            centers = np.stack([coords[cells // grid.n_axis], coords[cells % grid.n_axis]], axis=1)
        out[n] = centers + jitter
    return AgentData(fld.times.coords(), out)


@dataclass(frozen=True)
class BoidsParams:
    """Pairwise radial force field for the flocking generator.

    Force on agent u from agent v: strength * (1 - d/radius)_+ along the
    separation direction; positive strength repels.  In the
    expand-then-concentrate mode the sign flips at t_switch.
    """

    strength: float = 0.05
    radius: float = 0.5
    box: float = 1.0
    dim: int = 2
    t_switch: float | None = None

    def __post_init__(self):
        if self.radius <= 0 or self.box <= 0:
            raise ValidationError("boids radius and box must be positive")
        if self.dim not in (1, 2):
            raise ValidationError("boids dimension must be 1 or 2")


def boids_simulate(
    n_agents: int, steps: int, dt: float, params: BoidsParams, seed: int = 0
) -> AgentData:
    """Interacting-agent trajectories under the pairwise radial force.

    Agents start uniformly in the box, move synchronously by the summed
    pairwise forces, and are clipped to the box.  This is a configurable
    data generator, not a reproduction of any particular flocking rule
    set.
    """
    if n_agents < 2:
        raise ValidationError("boids needs at least two agents")
    if steps < 1 or dt <= 0:
        raise ValidationError("steps must be >= 1 and dt > 0")
    rng = np.random.Generator(np.random.Philox(seed))
    dim, box = params.dim, params.box
    pos = rng.uniform(-box, box, size=(n_agents, dim))
    frames = np.empty((steps + 1, n_agents, dim))
    frames[0] = pos
    for step in range(steps):
        t = step * dt
        sign = 1.0
        if params.t_switch is not None and t >= params.t_switch:
            sign = -1.0
        diff = pos[:, None, :] - pos[None, :, :]  # (V, V, d), u - v
        dist = np.sqrt(np.sum(diff**2, axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = np.where(
                (dist > 1e-12) & (dist < params.radius),
                sign * params.strength * (1.0 - dist / params.radius) / dist,
                0.0,
            )
        force = np.sum(mag[:, :, None] * diff, axis=1)
        pos = np.clip(pos + dt * force, -box, box)
        frames[step + 1] = pos
    return AgentData(np.arange(steps + 1) * dt, frames)
