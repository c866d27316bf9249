"""Benchmark drivers: convergence study, adaptivity, lake at rest, tidal wave, dam break, slices.

Every driver writes ``record.csv`` plus case-specific series and VTK files
into an output directory and returns a :class:`BenchResult`.  Wall-clock
time goes to ``summary.txt`` so that the CSV files are reproducible
bit for bit.
"""

from __future__ import annotations

import csv
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import io
from .adapt import AdaptConfig, RunRecord, adapt_loop, indicators, record_row
from .cases import (TIDAL_ALPHA, dambreak_case, lake_case, manufactured_case, tidal_case)
from .errors import InvalidArgument
from .fespace import SpaceConfig, error_norms, l2_norm
from .forms import make_spaces
from .mesh import build_structured, uniform_refine
from .slices import SliceConfig, compare_full_vs_slices, matched_errors, write_timeline
from .solver import NewtonConfig, solve

log = logging.getLogger(__name__)

CASES = ("converge", "adapt", "lake", "tidal", "dambreak", "slices-compare")
DEFAULT_MESH = {"converge": (1, 1), "adapt": (1, 1), "lake": (20, 20), "tidal": (25, 400),
                "dambreak": (400, 20), "slices-compare": (2, 3)}
PAPER_MESH = {"dambreak": (800, 35)}
DAMBREAK_TIMES = (0.1, 10.0, 25.0, 50.0, 100.0, 150.0, 200.0)
TIDAL_PROBE_X = 800.0
CONVERGE_NORMS = ("L2_zeta", "L2_u", "L2_sigma", "H1_zeta", "H1_u", "H1_sigma", "L2", "U")


@dataclass
class BenchmarkCase:
    """A named case with its discretization and output directory."""

    name: str
    p: int = 2
    refinements: int | None = None
    theta: float = 0.5
    slices: int = 8
    mesh: tuple | None = None
    paper_mesh: bool = False
    out: str = "out"
    T: float | None = None
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if self.name not in CASES:
            raise InvalidArgument(f"unknown case {self.name!r}; choose from {', '.join(CASES)}")
        if self.p < 1 or self.p > 4:
            raise InvalidArgument("p must lie in 1..4")
        if self.refinements is not None and self.refinements < 0:
            raise InvalidArgument("refinements must be nonnegative")
        if self.slices < 1:
            raise InvalidArgument("slices must be at least 1")

    @property
    def space(self):
        return SpaceConfig(trial_degree=self.p)

    def resolved_mesh(self):
        if self.mesh is not None:
            return tuple(self.mesh)
        if self.paper_mesh and self.name in PAPER_MESH:
            return PAPER_MESH[self.name]
        return DEFAULT_MESH[self.name]

    def echo(self):
        """Parameters sufficient to rerun the case."""
        nx, nt = self.resolved_mesh()
        return {"case": self.name, "p": self.p, "refinements": self.refinements,
                "theta": self.theta, "slices": self.slices, "mesh": f"{nx}x{nt}",
                "T": self.T, "abs_tol": self.newton.abs_tol, "rel_tol": self.newton.rel_tol,
                "max_iter": self.newton.max_iter, "newton_method": self.newton.method}


@dataclass
class BenchResult:
    name: str
    record: RunRecord
    summary: dict
    checks: dict = field(default_factory=dict)
    state: object = None
    newton: list = field(default_factory=list)

    def summary_line(self):
        parts = [f"{k}={_short(v)}" for k, v in self.summary.items()]
        parts += [f"{k}={'ok' if v else 'FAILED'}" for k, v in self.checks.items()]
        return f"{self.name}: " + " ".join(parts)


def _short(v):
    if isinstance(v, (float, np.floating)):
        return f"{v:.4g}"
    return str(v)


def _prepare(case):
    os.makedirs(case.out, exist_ok=True)


def _write_newton(path, results):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["solve", "iteration", "residual_v_norm", "step_energy_norm",
                    "step_halvings", "direction"])
        for k, res in enumerate(results):
            for row in res.history:
                w.writerow([k, row["iteration"], repr(row["residual_v_norm"]),
                            repr(row["step_energy_norm"]), row["step_halvings"], row["direction"]])


def _finish(case, result, t0):
    result.summary["wall_clock_s"] = round(time.perf_counter() - t0, 3)
    with open(os.path.join(case.out, "summary.txt"), "w") as fh:
        fh.write(result.summary_line() + "\n")
    return result


def _single_solve(case, spec, mesh):
    spaces = make_spaces(mesh, case.space)
    res = solve(spec, spaces, case.newton)
    rec = RunRecord(metadata={**case.echo(), **spec.metadata})
    rec.append(**record_row(0, spaces, res, spec.exact))
    return spaces, res, rec


# ------------------------------------------------------------------ cases

def run_converge(case):
    """Uniform refinement of the manufactured problem with observed-rate fits."""
    t0 = time.perf_counter()
    _prepare(case)
    spec = manufactured_case(T=case.T or 0.5)
    levels = 4 if case.refinements is None else case.refinements
    base = build_structured(spec.x_range, spec.t_range, *case.resolved_mesh())
    rec = RunRecord(metadata={**case.echo(), **spec.metadata})
    rows, newton = [], []
    mesh = base
    for k in range(levels + 1):
        if k:
            mesh = uniform_refine(mesh)
        spaces = make_spaces(mesh, case.space)
        res = solve(spec, spaces, case.newton)
        newton.append(res)
        rec.append(**record_row(k, spaces, res, spec.exact))
        e = error_norms(res.state, spec.exact, case.space.norm_quadrature_degree)
        rows.append({"level": k, "h": float(mesh.diameters.max()), "n_dofs": spaces.n_trial,
                     "estimate": res.representer.norm, **{n: e[n] for n in CONVERGE_NORMS}})
    rec.write_csv(os.path.join(case.out, "record.csv"))
    _write_newton(os.path.join(case.out, "newton.csv"), newton)
    with open(os.path.join(case.out, "errors.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["level", "h", "n_dofs", "estimate", *CONVERGE_NORMS]
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])
    rates = {}
    if len(rows) >= 3:
        h = np.array([r["h"] for r in rows])
        for n in (*CONVERGE_NORMS, "estimate"):
            rates[n] = io.rate_fit(h[-3:], np.array([r[n] for r in rows[-3:]]))
        with open(os.path.join(case.out, "rates.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["norm", "rate"])
            for n, v in rates.items():
                w.writerow([n, repr(v)])
    io.state_vtk(os.path.join(case.out, "mesh_final.vtk"), res.state,
                 indicators(res.representer).eta)
    summary = {"levels": levels, "n_dofs": rows[-1]["n_dofs"], "L2_zeta": rows[-1]["L2_zeta"]}
    summary.update({f"rate_{n}": v for n, v in rates.items()})
    out = BenchResult("converge", rec, summary, state=res.state, newton=newton)
    out.rows, out.rates = rows, rates
    return _finish(case, out, t0)


def run_adapt(case):
    """Adaptive refinement of the manufactured problem."""
    t0 = time.perf_counter()
    _prepare(case)
    spec = manufactured_case(T=case.T or 0.5)
    cfg = AdaptConfig(theta=case.theta,
                      max_refinements=8 if case.refinements is None else case.refinements)
    ar = adapt_loop(spec, case.space, cfg, initial_mesh=case.resolved_mesh(),
                    newton_cfg=case.newton, keep_meshes=True)
    ar.record.metadata.update(case.echo())
    ar.record.write_csv(os.path.join(case.out, "record.csv"))
    _write_newton(os.path.join(case.out, "newton.csv"), [ar.newton])
    io.state_vtk(os.path.join(case.out, "mesh_final.vtk"), ar.state,
                 indicators(ar.newton.representer).eta)
    for k, m in enumerate(ar.meshes):
        io.write_vtk(os.path.join(case.out, f"mesh_{k:02d}.vtk"), m,
                     cell_fields={"level": m.level.astype(float)})
    last = ar.record.rows[-1]
    summary = {"steps": len(ar.record), "n_dofs": last["n_dofs"], "estimate": last["estimate"],
               "L2_zeta": last["err_L2_zeta"], "L2_u": last["err_L2_u"]}
    return _finish(case, BenchResult("adapt", ar.record, summary, state=ar.state,
                                     newton=[ar.newton]), t0)


def run_lake(case):
    """Lake at rest over a bump: the discrete solution must stay at rest."""
    t0 = time.perf_counter()
    _prepare(case)
    spec = lake_case(T=case.T or 10.0)
    mesh = uniform_refine(build_structured(spec.x_range, spec.t_range, *case.resolved_mesh(),
                                           inflow_side=spec.inflow_side), case.refinements or 0)
    spaces, res, rec = _single_solve(case, spec, mesh)
    rec.write_csv(os.path.join(case.out, "record.csv"))
    _write_newton(os.path.join(case.out, "newton.csv"), [res])
    io.state_vtk(os.path.join(case.out, "mesh_final.vtk"), res.state)
    io.write_series(os.path.join(case.out, "series_t_final.csv"),
                    io.sample_line(res.state, t=spec.T), {"case": "lake", "t": spec.T})
    z, u = l2_norm(res.state.zeta), l2_norm(res.state.u)
    summary = {"L2_zeta": z, "L2_u": u, "newton_iters": res.iterations}
    checks = {"well_balanced": z <= 1e-10 and u <= 1e-10}
    return _finish(case, BenchResult("lake", rec, summary, checks, res.state, [res]), t0)


def tidal_checks(t, zeta, u, alpha=TIDAL_ALPHA):
    """Spectral, amplitude and phase diagnostics of the elevation and velocity probes.

    The dominant angular frequency comes from a Hann-windowed, zero-padded
    FFT refined by a parabolic fit of the peak; extrema times are refined
    the same way.  Phase offsets are measured from each elevation maximum to
    the nearest velocity extremum before and after it, in periods.
    """
    t, zeta, u = (np.asarray(a, dtype=float) for a in (t, zeta, u))
    dt = t[1] - t[0]
    nfft = 1 << max(16, int(np.ceil(np.log2(16 * len(t)))))
    spec = np.abs(np.fft.rfft((zeta - zeta.mean()) * np.hanning(len(t)), nfft))
    k = int(np.argmax(spec[1:-1])) + 1
    omega = 2 * np.pi * (k + _parabolic(*spec[k - 1:k + 2])) / (nfft * dt)
    period = 2 * np.pi / alpha
    zp = _peak_times(t, zeta)
    up = np.sort(np.concatenate([_peak_times(t, u), _peak_times(t, -u)]))
    before, after = [], []
    for tp in zp:
        d = up - tp
        if np.any(d < 0) and np.any(d > 0):
            before.append(-d[d < 0].max() / period)
            after.append(d[d > 0].min() / period)
    return {"omega": omega, "omega_rel_err": abs(omega / alpha - 1),
            "max_abs_zeta": float(np.abs(zeta).max()),
            "lead_periods": float(np.mean(before)) if before else float("nan"),
            "lag_periods": float(np.mean(after)) if after else float("nan"),
            "n_peaks": len(before)}


def _parabolic(a, b, c):
    den = a - 2 * b + c
    return 0.0 if den == 0 else 0.5 * (a - c) / den


def _peak_times(t, y):
    i = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])) + 1
    return np.array([t[j] + _parabolic(*y[j - 1:j + 2]) * (t[1] - t[0]) for j in i])


def run_tidal(case):
    """Tidal forcing of a closed channel; probe at x = 800 m."""
    t0 = time.perf_counter()
    _prepare(case)
    spec = tidal_case(T=case.T or 604800.0)
    mesh = uniform_refine(build_structured(spec.x_range, spec.t_range, *case.resolved_mesh(),
                                           inflow_side=spec.inflow_side), case.refinements or 0)
    spaces, res, rec = _single_solve(case, spec, mesh)
    rec.write_csv(os.path.join(case.out, "record.csv"))
    _write_newton(os.path.join(case.out, "newton.csv"), [res])
    io.state_vtk(os.path.join(case.out, "mesh_final.vtk"), res.state)
    series = io.sample_line(res.state, x=TIDAL_PROBE_X)
    io.write_series(os.path.join(case.out, "series_x800.csv"), series,
                    {"case": "tidal", "x": TIDAL_PROBE_X})
    chk = tidal_checks(series["t"], series["zeta"], series["u"])
    summary = {"omega": chk["omega"], "max_abs_zeta": chk["max_abs_zeta"],
               "lead_periods": chk["lead_periods"], "lag_periods": chk["lag_periods"],
               "newton_iters": res.iterations}
    checks = {"frequency": chk["omega_rel_err"] <= 0.01,
              "damped": chk["max_abs_zeta"] <= 0.1 + 1e-3}
    out = BenchResult("tidal", rec, summary, checks, res.state, [res])
    out.series, out.diagnostics = series, chk
    return _finish(case, out, t0)


def front_position(x, zeta, level=5.25, window=(1000.0, 1900.0)):
    """Rightmost crossing of ``level`` inside ``window``, linearly interpolated."""
    x, zeta = np.asarray(x, dtype=float), np.asarray(zeta, dtype=float)
    sel = (x >= window[0]) & (x <= window[1])
    xs, zs = x[sel], zeta[sel]
    above = np.flatnonzero(zs >= level)
    if len(above) == 0:
        return float("nan")
    i = above[-1]
    if i + 1 >= len(xs):
        return float(xs[i])
    return float(xs[i] + (zs[i] - level) / (zs[i] - zs[i + 1]) * (xs[i + 1] - xs[i]))


def dambreak_checks(state, times=DAMBREAK_TIMES, jump_window=(900.0, 1100.0)):
    """Bounds at the first time, jump-region over/undershoot and front positions."""
    first = io.sample_line(state, t=times[0])
    x, z = first["x"], first["zeta"]
    near = (x >= jump_window[0]) & (x <= jump_window[1])
    over = max(z[near].max() - 10.0, 0.0) + max(5.0 - z[near].min(), 0.0)
    fronts = [front_position(*_xz(io.sample_line(state, t=t))) for t in times]
    return {"zeta_min": float(z.min()), "zeta_max": float(z.max()),
            "x_at_min": float(x[np.argmin(z)]), "jump_overshoot": float(over),
            "fronts": fronts}


def _xz(s):
    return s["x"], s["zeta"]


def run_dambreak(case):
    """Dam break between a 10 m and a 5 m reservoir."""
    t0 = time.perf_counter()
    _prepare(case)
    spec = dambreak_case(T=case.T or 200.0)
    mesh = uniform_refine(build_structured(spec.x_range, spec.t_range, *case.resolved_mesh(),
                                           inflow_side=spec.inflow_side), case.refinements or 0)
    spaces, res, rec = _single_solve(case, spec, mesh)
    rec.write_csv(os.path.join(case.out, "record.csv"))
    _write_newton(os.path.join(case.out, "newton.csv"), [res])
    io.state_vtk(os.path.join(case.out, "mesh_final.vtk"), res.state)
    times = tuple(t for t in DAMBREAK_TIMES if t <= spec.T)
    for t in times:
        io.write_series(os.path.join(case.out, f"series_t{t:g}.csv"),
                        io.sample_line(res.state, t=t), {"case": "dambreak", "t": t})
    chk = dambreak_checks(res.state, times)
    fronts = np.array(chk["fronts"])
    summary = {"zeta_min_t0.1": chk["zeta_min"], "zeta_max_t0.1": chk["zeta_max"],
               "jump_overshoot": chk["jump_overshoot"], "newton_iters": res.iterations}
    checks = {"jump_overshoot": chk["jump_overshoot"] <= 0.02 * 5.0,
              "front_advances": bool(np.all(np.diff(fronts) > 0))}
    out = BenchResult("dambreak", rec, summary, checks, res.state, [res])
    out.diagnostics = chk
    return _finish(case, out, t0)


def run_slices_compare(case):
    """Full space-time against sequential slices on the manufactured problem.

    With ``refinements`` unset, both drivers adapt (six refinements per
    slice, enough full-domain steps to cover the sliced DOF range); with it
    set, both refine uniformly that many times.
    """
    t0 = time.perf_counter()
    _prepare(case)
    T = case.T or 0.5
    spec = manufactured_case(T=T)
    nx, nt = case.resolved_mesh()
    slice_cfg = SliceConfig(n_slices=case.slices, nx=nx, nt=nt)
    if case.refinements is None:
        slice_cfg.adapt = AdaptConfig(theta=case.theta, max_refinements=6)
        cmp = compare_full_vs_slices(spec, case.space, full_mesh=(nx, nt), slice_cfg=slice_cfg,
                                     full_adapt=AdaptConfig(theta=case.theta,
                                                            max_refinements=6 + 3 * case.slices),
                                     newton_cfg=case.newton)
    else:
        cmp = compare_full_vs_slices(spec, case.space, full_mesh=(nx, nt * case.slices),
                                     slice_cfg=slice_cfg, uniform_levels=case.refinements,
                                     newton_cfg=case.newton)
    cmp.full.metadata.update(case.echo())
    cmp.slices.metadata.update(case.echo())
    cmp.full.write_csv(os.path.join(case.out, "record.csv"))
    cmp.slices.write_csv(os.path.join(case.out, "record_slices.csv"))
    cmp.write_csv(os.path.join(case.out, "comparison.csv"))
    write_timeline(cmp.slice_results[-1], os.path.join(case.out, "timeline.csv"))
    for r in cmp.slice_results[-1]:
        r.record.write_csv(os.path.join(case.out, f"record_slice{r.index:02d}.csv"))
    f, s = cmp.full.rows[-1], cmp.slices.rows[-1]
    summary = {"full_L2_zeta": f["err_L2_zeta"], "slices_L2_zeta": s["err_L2_zeta"],
               "full_L2_u": f["err_L2_u"], "slices_L2_u": s["err_L2_u"],
               "full_dofs": f["n_dofs"], "slices_dofs": s["n_dofs"]}
    out = BenchResult("slices-compare", cmp.full, summary)
    out.comparison = cmp
    out.matched = {c: matched_errors(cmp.full, cmp.slices, c) for c in ("err_L2_zeta", "err_L2_u")}
    return _finish(case, out, t0)


RUNNERS = {"converge": run_converge, "adapt": run_adapt, "lake": run_lake, "tidal": run_tidal,
           "dambreak": run_dambreak, "slices-compare": run_slices_compare}


def run_case(case):
    return RUNNERS[case.name](case)
