"""Split-Bregman identification of the interaction potential.

The potential minimizes

    1/2 int (u_t - L_u phi)^2 dx dt  +  R_grad(phi)  +  R_lap(phi)

where each regularizer is off, an L1 norm, or a squared L2 norm of the
first (gradient) or second (Laplacian) derivative.  L1 terms are handled
by splitting (psi = D phi) with a Bregman variable b and pointwise
shrinkage; L2 terms go straight into the linear system.  The phi update
solves

    [ sum_n dt A^nT A^n + R + lambda S + gamma Mask(r) ] phi = rhs

with Mask(r) the indicator of nodes outside the ball B(0, r); the support
radius r grows by a fixed-point step driven by the boundary values of phi
and never shrinks.  A symmetric mode restricts the minimization to even
potentials (the half vector phi_0..phi_M) with a Dirichlet row at x = L;
the boundary condition at x = 0 is natural and holds through the folded
node-0 equation itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import SingularSystemError, ValidationError
from .grids import SpaceTimeField, SpatialGrid
from .operators import (
    RAW,
    SDD,
    FidelitySystem,
    _dminus_1d,
    _dplus_1d,
    assemble_system,
    build_diff_matrices,
)
from .potentials import Potential, symmetric_expansion_matrix

NONE, L1, L2 = "none", "l1", "l2"
_TERMS = (NONE, L1, L2)


@dataclass(frozen=True)
class RegularizerSpec:
    """Choice of first/second-derivative penalty and weights.

    grad in {"none", "l1", "l2"} with weight alpha, lap likewise with
    weight beta.  "l1" is the (isotropic) L1 norm of the derivative,
    "l2" the squared L2 norm with the conventional 1/2.
    """

    grad: str = NONE
    alpha: float = 0.0
    lap: str = NONE
    beta: float = 0.0

    def __post_init__(self):
        if self.grad not in _TERMS or self.lap not in _TERMS:
            raise ValidationError(f"regularizer terms must be one of {_TERMS}")
        for name, w in (("alpha", self.alpha), ("beta", self.beta)):
            if not np.isfinite(w) or w < 0:
                raise ValidationError(f"{name} must be finite and nonnegative")

    @property
    def has_l1(self) -> bool:
        return self.grad == L1 or self.lap == L1

    @classmethod
    def parse(cls, *tokens: str) -> "RegularizerSpec":
        """Parse tokens like 'grad=l1:1e-5' 'lap=l2:1e-7'."""
        kw = {}
        for tok in tokens:
            for part in tok.replace(",", " ").split():
                try:
                    key, val = part.split("=")
                    kind, _, weight = val.partition(":")
                except ValueError as exc:
                    raise ValidationError(f"bad regularizer token {part!r}") from exc
                if key not in ("grad", "lap"):
                    raise ValidationError(f"unknown regularizer target {key!r}")
                kw[key] = kind
                if kind != NONE:
                    if not weight:
                        raise ValidationError(f"missing weight in {part!r}")
                    kw["alpha" if key == "grad" else "beta"] = float(weight)
        return cls(**kw)


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the Bregman identification run.

    r0 = None means L/100, resolved against the grid at run time.
    derivative_mode "sdd" stabilizes the differences entering the operator
    and the time derivative; "raw" uses plain stencils.
    """

    lam: float = 0.05
    gamma: float = 0.0
    r0: float | None = None
    eps: float = 1e-6
    max_iter: int = 10000
    init: str = "zero"
    symmetric: bool = False
    derivative_mode: str = SDD
    h_x: float = 0.04
    h_t: float = 0.04
    pin_boundary: bool = True

    def __post_init__(self):
        if self.eps <= 0:
            raise ValidationError("termination tolerance eps must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if self.init not in ("zero", "h1"):
            raise ValidationError("init must be 'zero' or 'h1'")
        if self.derivative_mode not in (RAW, SDD):
            raise ValidationError("derivative_mode must be 'raw' or 'sdd'")
        if self.gamma < 0:
            raise ValidationError("gamma must be nonnegative")

    def resolve_r0(self, grid: SpatialGrid) -> float:
        r0 = grid.half_width / 100.0 if self.r0 is None else self.r0
        if not (0 < r0 <= grid.half_width):
            raise ValidationError("r0 must lie in (0, L]")
        return r0

    def require_lam(self, reg: RegularizerSpec):
        if reg.has_l1 and self.lam <= 0:
            raise ValidationError("lambda must be positive when an L1 term is active")


@dataclass
class BregmanState:
    """Current iterates of the split-Bregman loop."""

    phi: np.ndarray = field(repr=False)
    psi1: np.ndarray | None = field(default=None, repr=False)  # (dim, n) gradient pair
    b1: np.ndarray | None = field(default=None, repr=False)
    psi2: np.ndarray | None = field(default=None, repr=False)  # (n,) Laplacian pair
    b2: np.ndarray | None = field(default=None, repr=False)
    r: float = 0.0
    k: int = 0
    last_delta: float = np.inf


@dataclass
class IdentifyDiagnostics:
    """Per-run record: convergence, support radius and objective history."""

    iterations: int = 0
    converged: bool = True
    last_delta: float = 0.0
    r_final: float = 0.0
    objective_history: list = field(default_factory=list)
    delta_history: list = field(default_factory=list)


def shrink(p: np.ndarray, alpha: float, lam: float) -> np.ndarray:
    """Isotropic soft threshold max(0, 1 - alpha/(lam |p|)) p.

    For a stacked vector field (shape (dim, n)) the magnitude couples the
    components; |p| <= alpha/lam (including p = 0) maps to 0 without any
    division by zero.
    """
    if lam <= 0:
        raise ValidationError("shrink requires lambda > 0")
    p = np.asarray(p, dtype=float)
    mag = np.abs(p) if p.ndim <= 1 else np.sqrt(np.sum(p * p, axis=0))
    kappa = alpha / lam
    factor = np.where(mag > kappa, 1.0 - kappa / np.where(mag > 0, mag, 1.0), 0.0)
    return factor * p


def grow_radius(
    phi: np.ndarray, r: float, gamma: float, grid: SpatialGrid, symmetric: bool = False
) -> float:
    """One fixed-point step r <- r + (gamma/2) * boundary integral of phi^2.

    In 1D the boundary of B(0, r) is the node pair nearest +-r; in 2D the
    circle integral is approximated by the trapezoid rule over nearest
    nodes.  The result never decreases and is capped at L.
    """
    if gamma == 0.0:
        return r
    if grid.dim == 1:
        idx = grid.node_index(r)
        if symmetric:
            boundary_sq = 2.0 * float(phi[idx] ** 2)
        else:
            m = grid.half_count
            boundary_sq = float(phi[m + idx] ** 2 + phi[m - idx] ** 2)
        r_new = r + 0.5 * gamma * boundary_sq
    else:
        m = grid.half_count
        n_theta = max(16, int(np.ceil(2.0 * np.pi * r / grid.dx)))
        theta = (np.arange(n_theta) + 0.5) * (2.0 * np.pi / n_theta)
        i1 = np.clip(np.rint(r * np.cos(theta) / grid.dx).astype(int), -m, m)
        i2 = np.clip(np.rint(r * np.sin(theta) / grid.dx).astype(int), -m, m)
        vals = phi.reshape(grid.shape)[i1 + m, i2 + m]
        ring = float(np.sum(vals**2)) * r * (2.0 * np.pi / n_theta)
        r_new = r + 0.5 * gamma * ring
    return min(r_new, grid.half_width)


class _Workspace:
    """Matrices and factorizations shared by all iterations of one run."""

    def __init__(self, system: FidelitySystem, reg: RegularizerSpec, config: SolverConfig):
        config.require_lam(reg)
        grid = system.grid
        self.system = system
        self.reg = reg
        self.config = config
        self.grid = grid
        self.sym = config.symmetric
        if self.sym and grid.dim != 1:
            raise ValidationError("symmetric mode is available in 1D only")

        diff = build_diff_matrices(grid)
        if not self.sym:
            full_n = grid.size
            if config.pin_boundary:
                # compact support: eliminate the outermost node layer
                # (phi = 0 there), which also pins the additive-constant
                # direction the fidelity term barely sees
                axis_idx = np.abs(np.arange(-grid.half_count, grid.half_count + 1))
                if grid.dim == 1:
                    on_edge = axis_idx == grid.half_count
                else:
                    on_edge = (
                        np.maximum(axis_idx[:, None], axis_idx[None, :]) == grid.half_count
                    )
                self.inner = np.flatnonzero(~on_edge.reshape(-1))
            else:
                self.inner = np.arange(full_n)
            ix = np.ix_(self.inner, self.inner)
            self.n = len(self.inner)
            self.gram = system.gram[ix]
            self.rhs0 = system.rhs[self.inner]
            # column/row restrictions keep split variables on the full node
            # set; quadratic-form restrictions are exact because phi
            # vanishes on the eliminated layer and the stencils are
            # symmetric
            self.dplus = [dp[:, self.inner] for dp in diff.dplus]
            self.dminus = [dm[self.inner, :] for dm in diff.dminus]
            self.lap = diff.lap[ix]
            self.lap2 = diff.lap2[ix]
            self.lap_to_full = diff.lap[:, self.inner]
            self.lap_to_inner = diff.lap[self.inner, :]
            coords = grid.meshgrid()
            self.node_radius = np.sqrt(sum(c**2 for c in coords)).reshape(-1)[self.inner]
            self.expansion = None
        else:
            m = grid.half_count
            e = symmetric_expansion_matrix(m)
            self.expansion = e
            self.n = m + 1
            self.gram = e.T @ system.gram @ e
            self.rhs0 = e.T @ system.rhs
            # EL rows on [0, L]: full-grid stencils folded through the even
            # expansion; rows 0 and M are later replaced by the boundary
            # conditions, so only the interior folding matters.
            self.lap = (diff.lap @ e)[m:]
            self.lap2 = (diff.lap2 @ e)[m:]
            self.dplus = [_dplus_1d(self.n, grid.dx)]
            self.dminus = [_dminus_1d(self.n, grid.dx)]
            self.lap_to_full = self.lap
            self.lap_to_inner = self.lap
            self.node_radius = np.arange(self.n) * grid.dx

        self._factor_cache: dict[bytes, tuple] = {}

    def mask(self, r: float) -> np.ndarray:
        return (self.node_radius > r * (1.0 + 1e-12)).astype(float)

    def base_matrix(self) -> np.ndarray:
        """System matrix without the support mask (constant across iterations)."""
        reg, lam = self.reg, self.config.lam
        mtx = self.gram.copy()
        if reg.grad == L2:
            mtx -= reg.alpha * self.lap
        elif reg.grad == L1:
            mtx -= lam * self.lap
        if reg.lap == L2:
            mtx += reg.beta * self.lap2
        elif reg.lap == L1:
            mtx += lam * self.lap2
        return mtx

    def rhs(self, state: BregmanState) -> np.ndarray:
        lam = self.config.lam
        out = self.rhs0.copy()
        if state.psi1 is not None:
            for ax in range(len(self.dminus)):
                out -= lam * (self.dminus[ax] @ (state.psi1[ax] - state.b1[ax]))
        if state.psi2 is not None:
            out += lam * (self.lap_to_inner @ (state.psi2 - state.b2))
        if self.sym:
            out[-1] = 0.0
        return out

    def _boundary_rows(self, mtx: np.ndarray):
        # Dirichlet phi_M = 0 at x = L.  The condition at x = 0 is natural:
        # the folded node-0 equation already encodes it weakly, and a strong
        # phi_0 = phi_1 + (psi_0 - b_0) dx replacement both limit-cycles with
        # the shrinkage step and biases sharply curved potentials.
        mtx[-1, :] = 0.0
        mtx[-1, -1] = 1.0

    def solve_phi(self, state: BregmanState) -> np.ndarray:
        gamma = self.config.gamma
        mask = self.mask(state.r) if gamma > 0 else None
        key = mask.tobytes() if mask is not None else b""
        cached = self._factor_cache.get(key)
        if cached is None:
            mtx = self.base_matrix()
            if mask is not None:
                mtx[np.diag_indices(self.n)] += gamma * mask
            if self.sym:
                self._boundary_rows(mtx)
                cached = self._lu(mtx)
            else:
                cached = self._factorize(mtx)
            self._factor_cache[key] = cached
        return self._solve_cached(cached, self.rhs(state))

    @staticmethod
    def _factorize(mtx: np.ndarray) -> tuple:
        try:
            return ("cho", sla.cho_factor(mtx, check_finite=False))
        except np.linalg.LinAlgError:
            return _Workspace._lu(mtx)

    @staticmethod
    def _lu(mtx: np.ndarray) -> tuple:
        try:
            return ("lu", sla.lu_factor(mtx, check_finite=False))
        except (np.linalg.LinAlgError, ValueError):
            return ("lstsq", mtx.copy())

    @staticmethod
    def _solve_cached(cached: tuple, vec: np.ndarray) -> np.ndarray:
        kind, data = cached
        if kind == "cho":
            out = sla.cho_solve(data, vec, check_finite=False)
        elif kind == "lu":
            out = sla.lu_solve(data, vec, check_finite=False)
        else:
            out, *_ = np.linalg.lstsq(data, vec, rcond=None)
        if not np.all(np.isfinite(out)):
            raise SingularSystemError("phi update produced non-finite values")
        return out

    def init_state(self, r0: float) -> BregmanState:
        reg, config = self.reg, self.config
        if config.init == "zero":
            phi = np.zeros(self.n)
        else:
            alpha = reg.alpha if reg.grad != NONE else 0.0
            mtx = self.gram - alpha * self.lap
            vec = self.rhs0.copy()
            if self.sym:
                self._boundary_rows(mtx)
                vec[-1] = 0.0
            kind, data = self._lu(mtx)
            if kind == "lstsq":
                raise SingularSystemError("singular H1 initialization system")
            phi = sla.lu_solve(data, vec, check_finite=False)
            if not np.all(np.isfinite(phi)):
                raise SingularSystemError("singular H1 initialization system")
        state = BregmanState(phi=phi, r=r0)
        if reg.grad == L1:
            grad = np.stack([dp @ phi for dp in self.dplus])
            state.psi1 = grad
            state.b1 = np.zeros_like(grad)
        if reg.lap == L1:
            state.psi2 = self.lap_to_full @ phi
            state.b2 = np.zeros(len(state.psi2))
        return state

    def expand(self, phi: np.ndarray) -> np.ndarray:
        """Unknown vector -> full-grid node values."""
        if self.sym:
            return self.expansion @ phi
        full = np.zeros(self.grid.size)
        full[self.inner] = phi
        return full

    def objective(self, phi: np.ndarray) -> float:
        return objective_value(self.expand(phi), self.system, self.reg)


def objective_value(
    phi: np.ndarray,
    system: FidelitySystem,
    reg: RegularizerSpec,
    workspace: "_Workspace | None" = None,
) -> float:
    """Discrete value of the regularized functional at phi.

    Fidelity carries the dx^d dt quadrature (dt lives in the accumulated
    normal system); regularizers carry dx^d.  Computed from the normal
    system, so it costs O(n^2) instead of a pass over all frames.
    """
    grid = system.grid
    w = grid.dx**grid.dim
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if workspace is not None and workspace.sym:
        gram, rhs = workspace.gram, workspace.rhs0
        phi_full = workspace.expansion @ phi
    else:
        gram, rhs = system.gram, system.rhs
        phi_full = phi
    out = 0.5 * w * float(phi @ (gram @ phi) - 2.0 * phi @ rhs + system.const)

    diff = build_diff_matrices(grid)
    if reg.grad != NONE:
        grad = np.stack([dp @ phi_full for dp in diff.dplus])
        mag2 = np.sum(grad * grad, axis=0)
        if reg.grad == L1:
            out += reg.alpha * float(np.sum(np.sqrt(mag2))) * w
        else:
            out += 0.5 * reg.alpha * float(np.sum(mag2)) * w
    if reg.lap != NONE:
        lap_phi = diff.lap @ phi_full
        if reg.lap == L1:
            out += reg.beta * float(np.sum(np.abs(lap_phi))) * w
        else:
            out += 0.5 * reg.beta * float(np.sum(lap_phi**2)) * w
    return out


def init_state(system: FidelitySystem, reg: RegularizerSpec, config: SolverConfig) -> BregmanState:
    """Initial (phi, psi, b, r): zeros, or the H1-regularized least-squares fit."""
    ws = _Workspace(system, reg, config)
    return ws.init_state(config.resolve_r0(system.grid))


def update_phi(
    state: BregmanState, system: FidelitySystem, reg: RegularizerSpec, config: SolverConfig
) -> np.ndarray:
    """One phi update given the current split/Bregman variables."""
    ws = _Workspace(system, reg, config)
    return ws.solve_phi(state)


def update_b(b: np.ndarray, d_phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Bregman correction b <- b + D phi - psi."""
    b, d_phi, psi = (np.asarray(a, dtype=float) for a in (b, d_phi, psi))
    if b.shape != d_phi.shape or b.shape != psi.shape:
        raise ValidationError("update_b: shape mismatch")
    return b + d_phi - psi


def update_radius(state: BregmanState, phi: np.ndarray, gamma: float, grid: SpatialGrid,
                  symmetric: bool = False) -> float:
    """Support radius step for the given state (wrapper over grow_radius)."""
    return grow_radius(np.asarray(phi, dtype=float).reshape(-1), state.r, gamma, grid, symmetric)


def identify(
    data: SpaceTimeField, reg: RegularizerSpec, config: SolverConfig
) -> tuple[Potential, IdentifyDiagnostics]:
    """Identify the potential from a space-time data set."""
    if data.times.count < 1:
        raise ValidationError("identification needs at least two data frames")
    system = assemble_system(data, config.derivative_mode, config.h_x, config.h_t)
    return identify_from_system(system, reg, config)


def identify_from_system(
    system: FidelitySystem, reg: RegularizerSpec, config: SolverConfig
) -> tuple[Potential, IdentifyDiagnostics]:
    """Run the Bregman loop on a pre-assembled fidelity system.

    Sharing one system across runs is what keeps parameter sweeps cheap:
    the normal matrix does not depend on the regularizer or its weights.
    """
    ws = _Workspace(system, reg, config)
    grid = system.grid
    state = ws.init_state(config.resolve_r0(grid))
    diag = IdentifyDiagnostics(r_final=state.r)

    if not reg.has_l1 and config.gamma == 0.0:
        # smooth functional: the minimizer is a single linear solve
        state.phi = ws.solve_phi(state)
        diag.iterations = 1
        diag.last_delta = 0.0
        diag.objective_history.append(ws.objective(state.phi))
        diag.r_final = state.r
        return _package(state.phi, ws), diag

    for k in range(config.max_iter):
        phi_new = ws.solve_phi(state)
        if reg.grad == L1:
            p = state.b1 + np.stack([dp @ phi_new for dp in ws.dplus])
            state.psi1 = shrink(p, reg.alpha, config.lam)
            state.b1 = p - state.psi1
        if reg.lap == L1:
            p2 = state.b2 + ws.lap_to_full @ phi_new
            state.psi2 = shrink(p2, reg.beta, config.lam)
            state.b2 = p2 - state.psi2
        if config.gamma > 0:
            state.r = grow_radius(ws.expand(phi_new), state.r, config.gamma, grid, ws.sym)
        delta = float(np.max(np.abs(phi_new - state.phi)))
        state.phi = phi_new
        state.k = k + 1
        state.last_delta = delta
        diag.delta_history.append(delta)
        diag.objective_history.append(ws.objective(phi_new))
        if delta < config.eps:
            break
    diag.iterations = state.k
    diag.last_delta = state.last_delta
    diag.converged = state.last_delta < config.eps
    diag.r_final = state.r
    return _package(state.phi, ws), diag


def _package(phi: np.ndarray, ws: _Workspace) -> Potential:
    if ws.sym:
        return Potential.from_half(ws.grid, phi)
    return Potential(ws.grid, ws.expand(phi).reshape(ws.grid.shape))
