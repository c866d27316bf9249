"""Sequential time slices: each slab starts from the previous slab's final trace."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .adapt import AdaptConfig, RunRecord, adapt_loop, record_row
from .errors import InvalidArgument, SWEError
from .fespace import SpaceConfig
from .forms import make_spaces
from .mesh import build_structured, uniform_refine
from .solver import solve

TIMELINE_COLUMNS = ("slice", "t_start", "t_end", "n_elements", "n_dofs", "estimate",
                    "err_L2_zeta", "err_L2_u", "err_L2_sigma", "err_U", "newton_iters")


@dataclass
class SliceConfig:
    """Slice boundaries and the per-slice structured mesh.

    Give ``n_slices`` for equal slices or explicit ``boundaries``.  With
    ``adapt`` set, each slice runs the adaptive loop from the structured
    mesh; ``refinements`` applies uniform refinements otherwise.
    """

    n_slices: int = 1
    boundaries: tuple | None = None
    nx: int = 2
    nt: int = 1
    refinements: int = 0
    adapt: AdaptConfig | None = None

    def resolve(self, t_range):
        if self.boundaries is not None:
            b = np.asarray(self.boundaries, dtype=float)
        else:
            if self.n_slices < 1:
                raise InvalidArgument("n_slices must be at least 1")
            b = np.linspace(t_range[0], t_range[1], self.n_slices + 1)
        if np.any(np.diff(b) <= 0):
            raise InvalidArgument("slice boundaries must be strictly increasing")
        if not (np.isclose(b[0], t_range[0]) and np.isclose(b[-1], t_range[1])):
            raise InvalidArgument("slice boundaries must span the time interval")
        return b


@dataclass
class SliceResult:
    index: int
    t_range: tuple
    spec: object
    state: object
    mesh: object
    spaces: object
    record: RunRecord
    newton: object = None


def _trace_ic(fn, t):
    def ic(x):
        x = np.asarray(x, dtype=float)
        return fn(x, np.full(x.shape, t))
    return ic


def run_slices(spec, slice_cfg=None, space_cfg=None, newton_cfg=None):
    """Solve slice after slice; slice ``k`` takes slice ``k-1`` at ``t_k`` as initial data."""
    slice_cfg = slice_cfg or SliceConfig()
    space_cfg = space_cfg or SpaceConfig()
    bounds = slice_cfg.resolve(spec.t_range)
    results = []
    prev = None
    for k in range(len(bounds) - 1):
        t0, t1 = float(bounds[k]), float(bounds[k + 1])
        sub = spec.replace(t_range=(t0, t1))
        if prev is not None:
            sub = sub.replace(zeta0=_trace_ic(prev.state.zeta, t0), u0=_trace_ic(prev.state.u, t0))
        mesh = build_structured(spec.x_range, (t0, t1), slice_cfg.nx, slice_cfg.nt,
                                inflow_side=spec.inflow_side)
        try:
            if slice_cfg.adapt is not None:
                ar = adapt_loop(sub, space_cfg, slice_cfg.adapt, mesh=mesh, newton_cfg=newton_cfg)
                res = SliceResult(k, (t0, t1), sub, ar.state, ar.mesh, ar.spaces, ar.record,
                                  ar.newton)
            else:
                mesh = uniform_refine(mesh, slice_cfg.refinements)
                spaces = make_spaces(mesh, space_cfg)
                nr = solve(sub, spaces, newton_cfg)
                rec = RunRecord(metadata={"case": spec.name, "slice": k})
                rec.append(**record_row(0, spaces, nr, spec.exact))
                res = SliceResult(k, (t0, t1), sub, nr.state, mesh, spaces, rec, nr)
        except SWEError as exc:
            exc.args = (f"slice {k}: {exc}",) + exc.args[1:]
            raise
        results.append(res)
        prev = res
    return results


def combine(results, step=None):
    """Aggregate one row over all slices: DOFs add, squared errors add."""
    tot = {"n_elements": 0, "n_dofs": 0, "newton_iters": 0}
    sq = {c: 0.0 for c in ("estimate", "err_L2_zeta", "err_L2_u", "err_L2_sigma", "err_U")}
    for r in results:
        rows = r.record.rows
        row = rows[-1] if step is None else rows[min(step, len(rows) - 1)]
        tot["n_elements"] += row["n_elements"]
        tot["n_dofs"] += row["n_dofs"]
        tot["newton_iters"] = max(tot["newton_iters"], row["newton_iters"])
        for c in sq:
            sq[c] += row[c] ** 2
    return {**tot, **{c: math.sqrt(v) for c, v in sq.items()}}


def write_timeline(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMELINE_COLUMNS)
        for r in results:
            row = r.record.rows[-1]
            w.writerow([r.index, repr(r.t_range[0]), repr(r.t_range[1]), row["n_elements"],
                        row["n_dofs"], repr(float(row["estimate"])),
                        *(repr(float(row[c])) for c in TIMELINE_COLUMNS[6:10]),
                        row["newton_iters"]])


@dataclass
class Comparison:
    full: RunRecord
    slices: RunRecord
    slice_results: list = field(default_factory=list)

    def write_csv(self, path):
        cols = ("approach", "step", "n_dofs", "estimate", "err_L2_zeta", "err_L2_u",
                "err_L2_sigma", "err_U")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for name, rec in (("full", self.full), ("slices", self.slices)):
                for r in rec.rows:
                    w.writerow([name, r["refine_step"], r["n_dofs"],
                                *(repr(float(r[c])) for c in cols[3:])])


def compare_full_vs_slices(spec, space_cfg=None, full_mesh=(2, 3), slice_cfg=None,
                           full_adapt=None, uniform_levels=None, newton_cfg=None):
    """Run the full space-time and the sliced drivers and tabulate DOFs against errors.

    Adaptive mode (``full_adapt`` given) refines both drivers with the
    indicators; uniform mode (``uniform_levels`` given) refines both meshes
    uniformly ``0..uniform_levels`` times.
    """
    space_cfg = space_cfg or SpaceConfig()
    slice_cfg = slice_cfg or SliceConfig(n_slices=8)
    full = RunRecord(metadata={"approach": "full", "case": spec.name})
    sliced = RunRecord(metadata={"approach": "slices", "case": spec.name,
                                 "n_slices": slice_cfg.n_slices})
    all_slices = []
    if full_adapt is not None:
        fr = adapt_loop(spec, space_cfg, full_adapt, initial_mesh=full_mesh,
                        newton_cfg=newton_cfg)
        full.rows.extend(fr.record.rows)
        res = run_slices(spec, slice_cfg, space_cfg, newton_cfg)
        all_slices.append(res)
        n_steps = max(len(r.record) for r in res)
        for j in range(n_steps):
            sliced.append(refine_step=j, **combine(res, j))
    else:
        levels = uniform_levels if uniform_levels is not None else 0
        for j in range(levels + 1):
            mesh = uniform_refine(build_structured(spec.x_range, spec.t_range, *full_mesh,
                                                   inflow_side=spec.inflow_side), j)
            spaces = make_spaces(mesh, space_cfg)
            full.append(**record_row(j, spaces, solve(spec, spaces, newton_cfg), spec.exact))
            cfg = SliceConfig(n_slices=slice_cfg.n_slices, boundaries=slice_cfg.boundaries,
                              nx=slice_cfg.nx, nt=slice_cfg.nt, refinements=j)
            res = run_slices(spec, cfg, space_cfg, newton_cfg)
            all_slices.append(res)
            sliced.append(refine_step=j, **combine(res))
    return Comparison(full, sliced, all_slices)


def matched_errors(full, sliced, column):
    """Full-run error log-interpolated at each sliced DOF count inside the full range.

    Returns ``(dofs, sliced_err, full_err)`` arrays.
    """
    fd, fe = full.column("n_dofs"), full.column(column)
    sd, se = sliced.column("n_dofs"), sliced.column(column)
    order = np.argsort(fd)
    fd, fe = fd[order], fe[order]
    inside = (sd >= fd[0]) & (sd <= fd[-1])
    interp = np.exp(np.interp(np.log(sd[inside]), np.log(fd), np.log(fe)))
    return sd[inside], se[inside], interp
