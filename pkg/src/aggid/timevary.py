"""Splitting-and-merge identification of time-varying potentials.

The time axis is split into Q subintervals (optionally overlapping by a
ratio rho); a static potential is identified on each; the pieces are
glued into a time-varying potential by Epanechnikov-kernel weighting
around the subinterval midpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bregman import IdentifyDiagnostics, RegularizerSpec, SolverConfig, identify
from .errors import AggidError, ValidationError
from .grids import SpaceTimeField, TimeGrid
from .potentials import Potential

DEFAULT_GLUE_BANDWIDTH = 0.19


@dataclass(frozen=True)
class TimePartition:
    """Frame ranges of the Q (possibly overlapping) subintervals.

    Interior subintervals q = 2..Q-1 cover [(q-1-rho) T/Q, (q+rho) T/Q];
    the first and last are clipped to [0, T].  Midpoints are those of the
    non-overlapped subdivision, ((q-1) + q)/2 * T/Q.
    """

    q_count: int
    overlap: float
    ranges: tuple  # (start_frame, stop_frame) inclusive, per q
    midpoints: tuple

    def __len__(self):
        return self.q_count


def partition(times: TimeGrid, q_count: int, overlap: float = 0.0) -> TimePartition:
    """Split 0..N into Q overlapping frame ranges, each with >= 2 frames."""
    if not (1 <= q_count <= times.count):
        raise ValidationError(f"Q must lie in [1, N], got {q_count}")
    if not (0.0 <= overlap < 1.0):
        raise ValidationError("overlap ratio must lie in [0, 1)")
    t_total = times.horizon
    dt = times.dt
    width = t_total / q_count
    ranges = []
    midpoints = []
    eps = 1e-9 * dt
    for q in range(1, q_count + 1):
        lo = 0.0 if q == 1 else (q - 1 - overlap) * width
        hi = t_total if q == q_count else (q + overlap) * width
        start = int(np.ceil((lo - eps) / dt))
        stop = int(np.floor((hi + eps) / dt))
        start = max(0, start)
        stop = min(times.count, stop)
        if stop - start < 1:
            raise ValidationError(
                f"subinterval {q} of {q_count} holds fewer than 2 frames"
            )
        ranges.append((start, stop))
        midpoints.append((q - 0.5) * width)
    return TimePartition(
        q_count=q_count, overlap=overlap, ranges=tuple(ranges), midpoints=tuple(midpoints)
    )


@dataclass
class TimeVaryingPotential:
    """Kernel-glued family of static potentials at increasing midpoints."""

    midpoints: list
    potentials: list
    bandwidth: float = DEFAULT_GLUE_BANDWIDTH

    def __post_init__(self):
        if not self.potentials:
            raise ValidationError("time-varying potential needs at least one piece")
        if len(self.midpoints) != len(self.potentials):
            raise ValidationError("midpoints and potentials differ in length")
        if np.any(np.diff(self.midpoints) <= 0):
            raise ValidationError("midpoints must be strictly increasing")
        if self.bandwidth <= 0:
            raise ValidationError("glue bandwidth must be positive")

    def weights(self, t: float) -> np.ndarray:
        s = (t - np.asarray(self.midpoints)) / self.bandwidth
        w = np.where(np.abs(s) <= 1.0, 0.75 * (1.0 - s**2), 0.0)
        total = w.sum()
        if total <= 0.0:
            # no kernel covers t (bandwidth below midpoint spacing):
            # fall back to the nearest piece so [0, T] stays covered
            w = np.zeros_like(w)
            w[int(np.argmin(np.abs(s)))] = 1.0
            return w
        return w / total

    def at(self, t: float) -> Potential:
        return glue(self, t)

    def values_at(self, t: float) -> np.ndarray:
        w = self.weights(t)
        out = np.zeros_like(self.potentials[0].values)
        for wq, piece in zip(w, self.potentials):
            if wq != 0.0:
                out += wq * piece.values
        return out


def glue(tvp: TimeVaryingPotential, t: float) -> Potential:
    """Normalized Epanechnikov blend of the pieces at time t."""
    grid = tvp.potentials[0].grid
    sym = all(p.symmetric for p in tvp.potentials)
    return Potential(grid, tvp.values_at(t), symmetric=sym)


def identify_piecewise(
    data: SpaceTimeField,
    reg: RegularizerSpec,
    config: SolverConfig,
    q_count: int,
    overlap: float = 0.0,
) -> tuple[list, list]:
    """Identify one static potential per subinterval.

    Returns (potentials, diagnostics), entry q being None if that
    subinterval's identification failed (the run continues).
    """
    part = partition(data.times, q_count, overlap)
    potentials, diags = [], []
    for q, (start, stop) in enumerate(part.ranges):
        sub = data.restrict(start, stop)
        try:
            pot, diag = identify(sub, reg, config)
        except AggidError as exc:
            pot, diag = None, IdentifyDiagnostics(converged=False)
            diag.error = str(exc)  # type: ignore[attr-defined]
        potentials.append(pot)
        diags.append(diag)
    return potentials, diags


def identify_time_varying(
    data: SpaceTimeField,
    reg: RegularizerSpec,
    config: SolverConfig,
    q_count: int,
    overlap: float = 0.0,
    bandwidth: float = DEFAULT_GLUE_BANDWIDTH,
) -> tuple[TimeVaryingPotential, list]:
    """Full splitting-and-merge run: partition, identify, glue."""
    part = partition(data.times, q_count, overlap)
    potentials, diags = identify_piecewise(data, reg, config, q_count, overlap)
    kept = [(m, p) for m, p in zip(part.midpoints, potentials) if p is not None]
    if not kept:
        raise ValidationError("every subinterval identification failed")
    tvp = TimeVaryingPotential(
        midpoints=[m for m, _ in kept],
        potentials=[p for _, p in kept],
        bandwidth=bandwidth,
    )
    return tvp, diags
