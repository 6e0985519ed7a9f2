"""CSV formats for fields, potentials and agent trajectories.

All floats are written with 17 significant digits ('%.17g'), which
round-trips 64-bit values exactly; separators are commas, decimals use
'.', line endings are LF.  Files are written atomically (temp file +
rename) so concurrent sweep cells never expose partial output.

    field:     header "t,i[,j],u",        frame-major, i (and j) = -M..M
    potential: header "i[,j],x[,y],phi"
    agents:    header "t,agent_id,x1[,x2]"
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from .agents import AgentData
from .errors import ValidationError
from .grids import SpaceTimeField, SpatialGrid, TimeGrid
from .potentials import Potential


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _atomic_write(path, lines):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines))
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_field_csv(fld: SpaceTimeField, path) -> None:
    m = fld.grid.half_count
    idx = range(-m, m + 1)
    lines = []
    if fld.grid.dim == 1:
        lines.append("t,i,u")
        for n, t in enumerate(fld.times.coords()):
            ts = _fmt(t)
            vals = fld.values[n]
            lines.extend(f"{ts},{i},{_fmt(vals[i + m])}" for i in idx)
    else:
        lines.append("t,i,j,u")
        for n, t in enumerate(fld.times.coords()):
            ts = _fmt(t)
            vals = fld.values[n]
            lines.extend(
                f"{ts},{i},{j},{_fmt(vals[i + m, j + m])}" for i in idx for j in idx
            )
    _atomic_write(path, lines)


def read_field_csv(path, grid: SpatialGrid) -> SpaceTimeField:
    """Read a field written by write_field_csv; the grid supplies dx and L."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        expected = "t,i,u" if grid.dim == 1 else "t,i,j,u"
        if header != expected:
            raise ValidationError(f"field file header {header!r}; expected {expected!r}")
        raw = np.loadtxt(fh, delimiter=",", ndmin=2)
    per_frame = grid.size
    if raw.shape[0] % per_frame != 0:
        raise ValidationError("field file row count does not fill whole frames")
    n_frames = raw.shape[0] // per_frame
    if n_frames < 2:
        raise ValidationError("field file must contain at least two frames")
    t = raw[::per_frame, 0]
    dt = t[1] - t[0]
    if dt <= 0 or not np.allclose(np.diff(t), dt, rtol=1e-10, atol=1e-12):
        raise ValidationError("field file has a non-uniform time grid")
    times = TimeGrid(horizon=dt * (n_frames - 1), count=n_frames - 1)
    values = raw[:, -1].reshape((n_frames,) + grid.shape)
    return SpaceTimeField(grid, times, values)


def write_potential_csv(pot: Potential, path) -> None:
    m = pot.grid.half_count
    dx = pot.grid.dx
    idx = range(-m, m + 1)
    lines = []
    if pot.grid.dim == 1:
        lines.append("i,x,phi")
        lines.extend(f"{i},{_fmt(i * dx)},{_fmt(pot.values[i + m])}" for i in idx)
    else:
        lines.append("i,j,x,y,phi")
        lines.extend(
            f"{i},{j},{_fmt(i * dx)},{_fmt(j * dx)},{_fmt(pot.values[i + m, j + m])}"
            for i in idx
            for j in idx
        )
    _atomic_write(path, lines)


def read_potential_csv(path) -> Potential:
    """Reconstruct a potential (and its grid) from the CSV node list."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header not in ("i,x,phi", "i,j,x,y,phi"):
            raise ValidationError(f"potential file header {header!r} not recognized")
        dim = 1 if header == "i,x,phi" else 2
        raw = np.loadtxt(fh, delimiter=",", ndmin=2)
    idx = raw[:, 0].astype(int)
    m = int(idx.max())
    if m < 1:
        raise ValidationError("potential file has too few nodes")
    x = raw[:, dim]
    nonzero = idx != 0
    if not np.any(nonzero):
        raise ValidationError("potential file lacks nonzero node indices")
    dx = float(np.median(x[nonzero] / idx[nonzero]))
    grid = SpatialGrid(half_width=dx * m, half_count=m, dim=dim)
    n = grid.n_axis
    if raw.shape[0] != grid.size:
        raise ValidationError("potential file does not cover the full grid")
    if dim == 1:
        order = np.argsort(idx)
        values = raw[order, -1]
    else:
        j = raw[:, 1].astype(int)
        values = np.empty((n, n))
        values[idx + m, j + m] = raw[:, -1]
    return Potential(grid, values.reshape(grid.shape))


def write_agents_csv(agents: AgentData, path) -> None:
    lines = ["t,agent_id," + ("x1" if agents.dim == 1 else "x1,x2")]
    for n, t in enumerate(agents.times):
        ts = _fmt(t)
        for v in range(agents.n_agents):
            coords = ",".join(_fmt(c) for c in agents.positions[n, v])
            lines.append(f"{ts},{v},{coords}")
    _atomic_write(path, lines)


def read_agents_csv(path) -> AgentData:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header not in ("t,agent_id,x1", "t,agent_id,x1,x2"):
            raise ValidationError(f"agent file header {header!r} not recognized")
        dim = 1 if header.endswith("x1") and "x2" not in header else 2
        raw = np.loadtxt(fh, delimiter=",", ndmin=2)
    times, first = np.unique(raw[:, 0], return_index=True)
    times = times[np.argsort(first)]
    n_frames = len(times)
    if raw.shape[0] % n_frames != 0:
        raise ValidationError("agent file frames have unequal agent counts")
    v_count = raw.shape[0] // n_frames
    positions = np.empty((n_frames, v_count, dim))
    for k, t in enumerate(times):
        rows = raw[np.isclose(raw[:, 0], t)]
        if rows.shape[0] != v_count:
            raise ValidationError("agent file frames have unequal agent counts")
        order = np.argsort(rows[:, 1])
        positions[k] = rows[order, 2 : 2 + dim]
    return AgentData(times, positions)


def write_series_csv(path, columns: dict) -> None:
    """Write named columns (equal length) as CSV; floats at 17 digits."""
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    length = len(arrays[0])
    if any(len(a) != length for a in arrays):
        raise ValidationError("series columns differ in length")
    lines = [",".join(names)]
    for row in range(length):
        lines.append(",".join(_fmt(a[row]) for a in arrays))
    _atomic_write(path, lines)
