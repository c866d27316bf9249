"""Output writers (legacy VTK, line-sampled series CSV) and the key-value config reader."""

from __future__ import annotations

import configparser
import csv

import numpy as np

from .errors import InvalidArgument

N_SERIES_SAMPLES = 512


def write_vtk(path, mesh, point_fields=None, cell_fields=None, title="space-time mesh"):
    """Legacy ASCII unstructured grid with ``(x, t, 0)`` points and triangle cells."""
    V, T = mesh.vertices, mesh.triangles
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(V)} double\n")
        for x, t in V:
            fh.write(f"{x!r} {t!r} 0\n")
        fh.write(f"CELLS {len(T)} {4 * len(T)}\n")
        for a, b, c in T:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {len(T)}\n")
        fh.write("5\n" * len(T))
        if cell_fields:
            fh.write(f"CELL_DATA {len(T)}\n")
            _fields(fh, cell_fields, len(T))
        if point_fields:
            fh.write(f"POINT_DATA {len(V)}\n")
            _fields(fh, point_fields, len(V))


def _fields(fh, fields, n):
    for name, vals in fields.items():
        vals = np.asarray(vals, dtype=float)
        if vals.shape != (n,):
            raise InvalidArgument(f"field {name!r} has shape {vals.shape}, expected ({n},)")
        fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        fh.writelines(f"{v!r}\n" for v in vals)


def state_vtk(path, state, indicators=None):
    """Mesh plus the trial fields at the vertices and optional element indicators."""
    mesh = state.mesh
    x, t = mesh.vertices[:, 0], mesh.vertices[:, 1]
    points = {name: getattr(state, name)(x, t) for name in ("zeta", "u", "sigma")}
    cells = {"level": mesh.level.astype(float)}
    if indicators is not None:
        cells["eta"] = indicators
    write_vtk(path, mesh, points, cells)


def sample_line(state, x=None, t=None, n=N_SERIES_SAMPLES):
    """Sample all trial fields along ``x = const`` (over t) or ``t = const`` (over x).

    Returns a dict with the coordinate array and the three fields.
    """
    if (x is None) == (t is None):
        raise InvalidArgument("give exactly one of x or t")
    (x0, x1), (t0, t1) = state.mesh.bounds
    if x is not None:
        if not x0 <= x <= x1:
            raise InvalidArgument(f"x = {x} outside the spatial domain")
        tt = np.linspace(t0, t1, n)
        xx = np.full(n, float(x))
        out = {"t": tt}
    else:
        if not t0 <= t <= t1:
            raise InvalidArgument(f"t = {t} outside the time interval")
        xx = np.linspace(x0, x1, n)
        tt = np.full(n, float(t))
        out = {"x": xx}
    for name in ("zeta", "u", "sigma"):
        out[name] = getattr(state, name)(xx, tt)
    return out


def write_series(path, series, metadata=None):
    cols = list(series)
    with open(path, "w", newline="") as fh:
        for k, v in (metadata or {}).items():
            fh.write(f"# {k} = {v}\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for row in zip(*(series[c] for c in cols)):
            w.writerow([repr(float(v)) for v in row])


def read_series(path):
    with open(path) as fh:
        body = [line for line in fh.read().splitlines() if not line.startswith("#")]
    rows = list(csv.reader(body))
    data = np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    return {c: data[:, i] for i, c in enumerate(rows[0])}


# config: `key = value` lines grouped in [space], [newton], [adapt], [mesh], [run]
CONFIG_KEYS = {
    "space": {"p": int, "r": int, "sigma_degree": int},
    "newton": {"abs_tol": float, "rel_tol": float, "max_iter": int, "linear_solver": str,
               "method": str},
    "adapt": {"theta": float, "refinements": int, "tol": float, "max_dofs": int},
    "mesh": {"mesh": str, "paper_mesh": bool},
    "run": {"slices": int, "out": str, "T": float},
}


def read_config(path):
    """Parse a config file into ``{section: {key: value}}`` with typed values."""
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keys are case-sensitive (``T``)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise InvalidArgument(f"cannot read config {path}: {exc}") from None
    out = {}
    for section in cp.sections():
        if section not in CONFIG_KEYS:
            raise InvalidArgument(f"unknown config section [{section}]")
        known = CONFIG_KEYS[section]
        out[section] = {}
        for key in cp[section]:
            if key not in known:
                raise InvalidArgument(f"unknown key {key!r} in [{section}]")
            conv = known[key]
            try:
                val = cp[section].getboolean(key) if conv is bool else conv(cp[section][key])
            except ValueError:
                raise InvalidArgument(f"bad value for {section}.{key}: {cp[section][key]!r}") from None
            out[section][key] = val
    return out


def parse_mesh(text):
    """``"25x400"`` -> ``(25, 400)``."""
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise InvalidArgument(f"mesh must look like NXxNT, got {text!r}")
    try:
        nx, nt = int(parts[0]), int(parts[1])
    except ValueError:
        raise InvalidArgument(f"mesh must look like NXxNT, got {text!r}") from None
    if nx < 1 or nt < 1:
        raise InvalidArgument("mesh counts must be positive")
    return nx, nt


def rate_fit(h, err):
    """Least-squares slope of ``log(err)`` against ``log(h)``."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.shape != err.shape or h.ndim != 1:
        raise InvalidArgument("h and err must be 1-D arrays of equal length")
    if len(h) < 3:
        raise InvalidArgument("need at least three points")
    if np.any(~np.isfinite(h)) or np.any(~np.isfinite(err)) or np.any(h <= 0) or np.any(err <= 0):
        raise InvalidArgument("h and err must be finite and positive")
    if np.ptp(np.log(h)) == 0:
        raise InvalidArgument("h values must not all coincide")
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])
