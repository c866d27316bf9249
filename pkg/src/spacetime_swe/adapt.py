"""Error indicators, Dorfler marking and the solve-estimate-mark-refine loop."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, SWEError
from .fespace import SpaceConfig, error_norms
from .forms import FormAssembler, TrialState, make_spaces
from .mesh import bisect, build_structured
from .solver import Condenser, apply_initial_conditions, initial_guess, newton_solve

log = logging.getLogger(__name__)

RECORD_COLUMNS = ("refine_step", "n_elements", "n_dofs", "estimate", "err_L2_zeta",
                  "err_L2_u", "err_L2_sigma", "err_U", "newton_iters")
RECORD_SCHEMA_VERSION = 1


@dataclass
class IndicatorField:
    eta: np.ndarray

    @property
    def estimate(self):
        return float(math.sqrt(np.sum(self.eta**2)))


def indicators(rep):
    """Element indicators: V-norm of the representer restricted to each element."""
    eta = np.asarray(rep.element_norms, dtype=float)
    if not np.all(np.isfinite(eta)) or np.any(eta < 0):
        raise SWEError("indicators must be finite and nonnegative")
    return IndicatorField(eta.copy())


def dorfler_mark(ind, theta=0.5):
    """Smallest set whose squared indicators reach ``theta**2`` of the total.

    Greedy by decreasing indicator; ties go to the lower element index.
    """
    if not 0 < theta <= 1:
        raise InvalidArgument("theta must lie in (0, 1]")
    eta = ind.eta if isinstance(ind, IndicatorField) else np.asarray(ind, dtype=float)
    eta2 = eta**2
    if not np.any(eta2 > 0):
        return set()
    if theta == 1:
        return set(np.flatnonzero(eta2 > 0).tolist())
    order = np.lexsort((np.arange(len(eta2)), -eta2))
    cum = np.cumsum(eta2[order])
    k = int(np.searchsorted(cum, theta**2 * cum[-1], side="left")) + 1
    return set(order[:k].tolist())


@dataclass
class AdaptConfig:
    theta: float = 0.5
    max_refinements: int = 8
    tol: float = 0.0
    max_dofs: int | None = None

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise InvalidArgument("theta must lie in (0, 1]")


@dataclass
class RunRecord:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def append(self, **row):
        self.rows.append(row)

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)

    def write_csv(self, path, columns=RECORD_COLUMNS):
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema = {RECORD_SCHEMA_VERSION}\n")
            for k, v in self.metadata.items():
                fh.write(f"# {k} = {v}\n")
            w = csv.writer(fh)
            w.writerow(columns)
            for r in self.rows:
                w.writerow([_fmt(r.get(c, float("nan"))) for c in columns])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_record(path):
    """Read a CSV written by :meth:`RunRecord.write_csv`."""
    meta, rows = {}, []
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            k, _, v = line[1:].partition("=")
            meta[k.strip()] = v.strip()
        else:
            body.append(line)
    reader = csv.DictReader(body)
    for r in reader:
        rows.append({k: (float(v) if k not in ("approach",) else v) for k, v in r.items()})
    return RunRecord(rows, meta)


def record_row(step, spaces, result, exact=None):
    row = {"refine_step": step, "n_elements": spaces.mesh.n_triangles,
           "n_dofs": spaces.n_trial, "estimate": result.representer.norm,
           "newton_iters": result.iterations}
    if exact is not None:
        e = error_norms(result.state, exact, spaces.config.norm_quadrature_degree)
        row.update(err_L2_zeta=e["L2_zeta"], err_L2_u=e["L2_u"], err_L2_sigma=e["L2_sigma"],
                   err_U=e["U"])
    else:
        row.update(err_L2_zeta=float("nan"), err_L2_u=float("nan"),
                   err_L2_sigma=float("nan"), err_U=float("nan"))
    return row


def energy_error(state, exact, spec, spaces, extra_degree=2):
    """Energy-norm error surrogate: V-norm representer of ``B'(U - U_h)`` on a richer test space.

    The error functional is evaluated from the exact fields with all data
    switched off and the supremum is taken over broken polynomials of degree
    ``r + extra_degree``.  Meaningful for the linearized problem, where the
    form is linear in the trial argument.
    """
    asm = FormAssembler(spaces, spec, test_degree=spaces.config.r + extra_degree)
    samples = asm.sample_exact(exact, subtract=state)
    R = asm.residual_local(samples=samples, with_load=False)
    return Condenser(asm).representer(R).norm


def transfer(state, spaces):
    """Nodal interpolation of a trial state onto new spaces."""
    new = TrialState.zeros(spaces)
    for name in ("zeta", "u", "sigma"):
        old = getattr(state, name)
        target = getattr(new, name)
        xy = target.space.dof_coords
        target.coeffs[:] = old(xy[:, 0], xy[:, 1])
    return new


@dataclass
class AdaptResult:
    record: RunRecord
    state: TrialState
    mesh: object
    spaces: object
    newton: object
    meshes: list = field(default_factory=list)


def adapt_loop(spec, space_cfg=None, adapt_cfg=None, mesh=None, newton_cfg=None,
               initial_mesh=(2, 2), keep_meshes=False):
    """Adaptive space-time solve driven by the built-in error indicators."""
    space_cfg = space_cfg or SpaceConfig()
    adapt_cfg = adapt_cfg or AdaptConfig()
    if mesh is None:
        mesh = build_structured(spec.x_range, spec.t_range, *initial_mesh,
                                inflow_side=spec.inflow_side)
    record = RunRecord(metadata={"case": spec.name, "p": space_cfg.p, "r": space_cfg.r,
                                 "theta": adapt_cfg.theta, **spec.metadata})
    state = None
    meshes = []
    step = 0
    while True:
        spaces = make_spaces(mesh, space_cfg)
        asm = FormAssembler(spaces, spec)
        constraints = apply_initial_conditions(spaces, spec)
        U0 = initial_guess(spaces, spec, constraints) if state is None else transfer(state, spaces)
        try:
            result = newton_solve(U0, spec, spaces, newton_cfg, assembler=asm,
                                  constraints=constraints)
        except SWEError as exc:
            exc.args = (f"refinement step {step}: {exc}",) + exc.args[1:]
            raise
        state = result.state
        record.append(**record_row(step, spaces, result, spec.exact))
        if keep_meshes:
            meshes.append(mesh)
        ind = indicators(result.representer)
        log.info("adapt step %d: %d elements, estimate %.3e", step, mesh.n_triangles, ind.estimate)
        if (step >= adapt_cfg.max_refinements or ind.estimate <= adapt_cfg.tol
                or (adapt_cfg.max_dofs is not None and spaces.n_trial >= adapt_cfg.max_dofs)):
            return AdaptResult(record, state, mesh, spaces, result, meshes)
        marked = dorfler_mark(ind, adapt_cfg.theta)
        mesh = bisect(mesh, marked)
        step += 1
