"""Relative L1 error functionals for potentials and trajectories.

All three errors are percentages of plain node sums (quadrature weights
cancel in the ratios):

    e_phi        identified vs. exact potential
    e*(t^n)      simulated vs. exact trajectory, per frame
    e~(t^n)      simulated vs. denoised trajectory, per frame

Time averages run over frames 1..N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .grids import SpaceTimeField
from .potentials import Potential


@dataclass
class ErrorReport:
    """Error series of one evaluation run (percentages, frame-indexed)."""

    e_phi: float | None = None
    e_star: np.ndarray | None = field(default=None, repr=False)
    e_tilde: np.ndarray | None = field(default=None, repr=False)

    @staticmethod
    def _avg(series) -> float:
        # series[0] compares identical initial data and is excluded
        return float(np.mean(series[1:]))

    @property
    def e_star_avg(self) -> float:
        return self._avg(self.e_star)

    @property
    def e_tilde_avg(self) -> float:
        return self._avg(self.e_tilde)


def e_phi(identified: Potential, exact: Potential) -> float:
    """100 * ||phi_hat - phi*||_1 / ||phi*||_1 over the grid nodes."""
    if identified.grid.shape != exact.grid.shape:
        raise ValidationError("e_phi: potentials live on different grids")
    denom = float(np.abs(exact.values).sum())
    if denom == 0.0:
        raise ValidationError("e_phi: reference potential is identically zero")
    return 100.0 * float(np.abs(identified.values - exact.values).sum()) / denom


def e_series(simulated: SpaceTimeField, reference: SpaceTimeField) -> np.ndarray:
    """Per-frame 100 * ||u_hat(t^n) - ref(t^n)||_1 / ||ref(t^n)||_1."""
    if simulated.values.shape != reference.values.shape:
        raise ValidationError("e_series: fields have different shapes")
    axes = tuple(range(1, simulated.values.ndim))
    denom = np.abs(reference.values).sum(axis=axes)
    if np.any(denom == 0.0):
        raise ValidationError("e_series: reference frame with zero norm")
    num = np.abs(simulated.values - reference.values).sum(axis=axes)
    return 100.0 * num / denom


def e_series_avg(simulated: SpaceTimeField, reference: SpaceTimeField) -> float:
    """Time average (1/N) sum_{n=1..N} of the per-frame relative error."""
    return float(np.mean(e_series(simulated, reference)[1:]))
