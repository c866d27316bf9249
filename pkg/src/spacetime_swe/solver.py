"""Mixed (saddle-point) solve by static condensation inside a Newton loop.

The broken test space makes the Gram matrix block diagonal, so the error
representer is eliminated element by element and only the trial unknowns
enter the global system ``B'^T G^-1 B' dU = B'^T G^-1 (F - B(U))``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgument, NonConvergence, SolverFailure
from .fespace import FieldFunction, FESpace
from .forms import FormAssembler, TrialState
from .mesh import BoundaryTag

log = logging.getLogger(__name__)

NEWTON_SWITCH = 0.5


@dataclass
class NewtonConfig:
    abs_tol: float = 1e-14
    rel_tol: float = 1e-12
    max_iter: int = 20
    linear_solver: str = "direct"  # or "cg"
    max_halvings: int = 8
    method: str = "newton"  # or "gauss-newton"
    stall_tol: float = 1e-8

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise InvalidArgument("tolerances must be positive")
        if self.max_iter < 1 or self.max_halvings < 0:
            raise InvalidArgument("max_iter must be positive and max_halvings nonnegative")
        if self.linear_solver not in ("direct", "cg"):
            raise InvalidArgument(f"unknown linear solver {self.linear_solver!r}")
        if self.method not in ("newton", "gauss-newton"):
            raise InvalidArgument(f"unknown Newton variant {self.method!r}")


@dataclass
class ErrorRepresenter:
    """Element-wise Riesz representer of ``F - B(U)`` in the broken test space."""

    coeffs: np.ndarray          # (M, 3, nr)
    element_norms: np.ndarray   # (M,)
    test_space: FESpace

    @property
    def norm(self):
        return float(math.sqrt(np.sum(self.element_norms**2)))

    def fields(self):
        """The three components ``(e, eps, E)`` as broken-space functions."""
        return tuple(FieldFunction(self.test_space, self.coeffs[:, c].reshape(-1))
                     for c in range(3))


@dataclass
class NewtonResult:
    state: TrialState
    representer: ErrorRepresenter
    iterations: int
    history: list = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "residual_v_norm", "step_energy_norm", "step_halvings",
                        "direction"])
            for row in self.history:
                w.writerow([row["iteration"], repr(row["residual_v_norm"]),
                            repr(row["step_energy_norm"]), row["step_halvings"],
                            row["direction"]])


# ------------------------------------------------------------ constraints

def initial_values(spaces, spec, x):
    """Initial elevation and velocity at the points ``x`` (on ``t = t0``)."""
    x = np.asarray(x, dtype=float)
    if spec.ic_interpolation == "linear":
        mesh = spaces.mesh
        verts = np.unique(mesh.boundary_edges[mesh.boundary_tags == BoundaryTag.INITIAL_TIME])
        xv = np.sort(mesh.vertices[verts, 0])
        z0 = np.interp(x, xv, np.broadcast_to(spec.zeta0(xv), xv.shape))
        u0 = np.interp(x, xv, np.broadcast_to(spec.u0(xv), xv.shape))
    else:
        z0 = np.broadcast_to(np.asarray(spec.zeta0(x), dtype=float), x.shape)
        u0 = np.broadcast_to(np.asarray(spec.u0(x), dtype=float), x.shape)
    if not (np.all(np.isfinite(z0)) and np.all(np.isfinite(u0))):
        raise InvalidArgument("initial data are not finite at every node")
    return z0, u0


def apply_initial_conditions(spaces, spec):
    """Global trial indices on ``t = t0`` and their prescribed values.

    Elevation and velocity are fixed by interpolation of the initial data;
    ``sigma`` is left free.
    """
    dofs = spaces.zeta.boundary_dofs_by_tag.get(int(BoundaryTag.INITIAL_TIME), np.array([], int))
    z0, u0 = initial_values(spaces, spec, spaces.zeta.dof_coords[dofs, 0])
    o = spaces.offsets
    idx = np.concatenate([dofs + o[0], dofs + o[1]])
    return idx, np.concatenate([z0, u0])


def initial_guess(spaces, spec, constraints=None):
    """Initial data extended constantly in time; ``sigma = 0``."""
    state = TrialState.zeros(spaces)
    z0, u0 = initial_values(spaces, spec, spaces.zeta.dof_coords[:, 0])
    state.zeta.coeffs[:] = z0
    state.u.coeffs[:] = u0
    idx, vals = constraints if constraints is not None else apply_initial_conditions(spaces, spec)
    vec = state.vector()
    vec[idx] = vals
    return state.with_vector(vec)


# ------------------------------------------------------------ linear algebra

class Condenser:
    """Element Gram inverses and condensed assembly for one mesh and problem."""

    def __init__(self, assembler):
        self.asm = assembler
        G = assembler.gram_local()
        self.G = G
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            worst = _worst_element(G)
            raise SolverFailure(f"Gram matrix of element {worst} is not positive definite",
                                worst_element=worst) from None
        Ginv = np.linalg.inv(G)
        self.Ginv = 0.5 * (Ginv + np.swapaxes(Ginv, -1, -2))
        self.trial_dofmap = assembler.spaces.trial_dofmap()

    def representer(self, R):
        """``G^-1 (F - B(U))`` per element and the element V-norms."""
        e = -np.einsum("mcij,mcj->mci", self.Ginv, R)
        eta2 = np.einsum("mci,mci->m", e, -R)
        return ErrorRepresenter(e, np.sqrt(np.maximum(eta2, 0.0)), self.asm.spaces.test)

    def condensed(self, R, Jl):
        """Sparse ``B'^T G^-1 B'`` and vector ``B'^T G^-1 (F - B)``."""
        M, nr = R.shape[0], R.shape[2]
        Jc = Jl.reshape(M, 3, nr, -1)
        Y = np.einsum("mcij,mcjk->mcik", self.Ginv, Jc)
        A_loc = np.einsum("mcij,mcik->mjk", Jc, Y)
        b_loc = -np.einsum("mcik,mci->mk", Y, R)
        dm = self.trial_dofmap
        n = self.asm.spaces.n_trial
        nl = dm.shape[1]
        rows = np.repeat(dm, nl, axis=1).ravel()
        cols = np.tile(dm, (1, nl)).ravel()
        A = sp.csr_matrix((A_loc.ravel(), (rows, cols)), shape=(n, n))
        b = np.bincount(dm.ravel(), weights=b_loc.ravel(), minlength=n)
        return A, b

    def curvature(self, R):
        """Sparse second-order term ``sum_i (G^-1 R)_i B_i''`` of the exact Newton matrix."""
        y = np.einsum("mcij,mcj->mci", self.Ginv, R)
        H_loc = self.asm.hessian_local(y)
        dm = self.trial_dofmap
        nl = dm.shape[1]
        n = self.asm.spaces.n_trial
        rows = np.repeat(dm, nl, axis=1).ravel()
        cols = np.tile(dm, (1, nl)).ravel()
        return sp.csr_matrix((H_loc.ravel(), (rows, cols)), shape=(n, n))


def _worst_element(G):
    lam = np.linalg.eigvalsh(G.reshape(-1, G.shape[-1], G.shape[-1]))[:, 0]
    return int(np.argmin(lam.reshape(G.shape[0], -1).min(axis=1)))


def _free_mask(n, constrained):
    free = np.ones(n, dtype=bool)
    free[constrained] = False
    return free


def solve_condensed(A, b, free, method="direct"):
    Aff = A[free][:, free].tocsc()
    bf = b[free]
    if method == "cg":
        d = Aff.diagonal()
        if np.any(d <= 0):
            raise SolverFailure("condensed matrix has a nonpositive diagonal entry")
        pre = sp.diags(1.0 / d)
        xf, info = spla.cg(Aff, bf, M=pre, rtol=1e-13, atol=0.0, maxiter=20 * len(bf))
        if info != 0:
            raise SolverFailure(f"conjugate gradient did not converge (info={info})")
    else:
        # symmetric diagonal scaling: unknowns of very different physical size
        # otherwise inflate the condition number of the normal equations
        d = np.abs(Aff.diagonal())
        D = sp.diags(1.0 / np.sqrt(np.where(d > 0, d, 1.0)))
        try:
            lu = spla.splu((D @ Aff @ D).tocsc())
        except RuntimeError as exc:
            raise SolverFailure(f"condensed matrix is singular: {exc}") from None
        xf = D @ lu.solve(D @ bf)
    if not np.all(np.isfinite(xf)):
        raise SolverFailure("linear solve produced non-finite values")
    x = np.zeros(len(b))
    x[free] = xf
    return x


@dataclass
class StepResult:
    delta: np.ndarray
    representer: ErrorRepresenter
    matrix: sp.csr_matrix
    rhs: np.ndarray

    @property
    def energy_norm(self):
        return float(math.sqrt(max(self.delta @ (self.matrix @ self.delta), 0.0)))


def condensed_step(state, spec, spaces, assembler=None, condenser=None, constraints=None,
                   linear_solver="direct"):
    """One Gauss-Newton step on the mixed system via static condensation."""
    asm = assembler or FormAssembler(spaces, spec)
    cond = condenser or Condenser(asm)
    if constraints is None:
        constraints = apply_initial_conditions(spaces, spec)
    R = asm.residual_local(state)
    Jl = asm.jacobian_local(state)
    A, b = cond.condensed(R, Jl)
    delta = solve_condensed(A, b, _free_mask(spaces.n_trial, constraints[0]), linear_solver)
    return StepResult(delta, cond.representer(R), A, b)


def saddle_step(state, spec, spaces, assembler=None, constraints=None):
    """Reference path: the same step from the full two-by-two block system.

    Solves ``[[G, B'], [B'^T, 0]] [e; dU] = [F - B(U); 0]`` on the free trial
    unknowns and returns ``(dU, e)`` with ``e`` shaped (M, 3, nr).
    """
    asm = assembler or FormAssembler(spaces, spec)
    if constraints is None:
        constraints = apply_initial_conditions(spaces, spec)
    R = asm.residual_local(state)
    Jl = asm.jacobian_local(state)
    G = asm.gram_local()
    M, nr = R.shape[0], R.shape[2]
    nt = M * 3 * nr
    Gs = sp.block_diag([sp.block_diag(list(G[m])) for m in range(M)], format="csr")
    test_idx = asm.test_dof_index()
    rows = np.broadcast_to(test_idx[:, :, None], Jl.shape).ravel()
    cols = np.broadcast_to(spaces.trial_dofmap()[:, None, :], Jl.shape).ravel()
    Bp = sp.csr_matrix((Jl.ravel(), (rows, cols)), shape=(nt, spaces.n_trial))
    free = _free_mask(spaces.n_trial, constraints[0])
    Bf = Bp[:, free]
    K = sp.bmat([[Gs, Bf], [Bf.T, None]], format="csc")
    rhs = np.concatenate([-R.reshape(-1), np.zeros(Bf.shape[1])])
    sol = spla.spsolve(K, rhs)
    delta = np.zeros(spaces.n_trial)
    delta[free] = sol[nt:]
    return delta, sol[:nt].reshape(M, 3, nr)


# ------------------------------------------------------------------ Newton

def newton_solve(U0, spec, spaces, cfg=None, assembler=None, constraints=None):
    """Newton iteration on the condensed mixed system with step halving.

    Far from the solution the iteration takes Gauss-Newton steps with the
    matrix ``B'^T G^-1 B'``.  Once the correction is small against the
    residual it switches to exact Newton, which adds the curvature of ``B``
    weighted by the current representer; if that direction fails to reduce
    the representer norm the Gauss-Newton step is used instead.

    Convergence is declared when the Gauss-Newton energy norm of the
    correction drops below ``abs_tol`` or below ``rel_tol`` times that of the
    first correction, or when the residual itself is below ``abs_tol``.  A correction that is below
    ``stall_tol`` times the first one and no longer shrinking sits at the
    round-off floor and also ends the iteration.
    """
    cfg = cfg or NewtonConfig()
    asm = assembler or FormAssembler(spaces, spec)
    cond = Condenser(asm)
    if constraints is None:
        constraints = apply_initial_conditions(spaces, spec)
    idx, vals = constraints
    free = _free_mask(spaces.n_trial, idx)
    vec = U0.vector()
    vec[idx] = vals
    state = U0.with_vector(vec)
    exact_newton = cfg.method == "newton" and not spec.params.linearized

    R = asm.residual_local(state)
    rep = cond.representer(R)
    history = []
    first_step = prev_step = None
    for it in range(cfg.max_iter + 1):
        Jl = asm.jacobian_local(state)
        A, b = cond.condensed(R, Jl)
        delta_gn = solve_condensed(A, b, free, cfg.linear_solver)
        step = float(math.sqrt(max(delta_gn @ (A @ delta_gn), 0.0)))
        if first_step is None:
            first_step = step
        row = {"iteration": it, "residual_v_norm": rep.norm, "step_energy_norm": step,
               "step_halvings": 0, "direction": ""}
        stalled = prev_step is not None and step <= cfg.stall_tol * first_step \
            and step >= 0.5 * prev_step
        prev_step = step
        if (step <= cfg.abs_tol or step <= cfg.rel_tol * first_step or rep.norm <= cfg.abs_tol
                or stalled):
            history.append(row)
            log.debug("newton converged after %d iterations", it)
            return NewtonResult(state, rep, it, history)
        if it == cfg.max_iter:
            history.append(row)
            break
        directions = [("gauss-newton", delta_gn)]
        # the curvature term only helps once the correction is small against the residual
        if exact_newton and step < NEWTON_SWITCH * rep.norm:
            try:
                delta_n = solve_condensed(A + cond.curvature(R), b, free, "direct")
                directions.insert(0, ("newton", delta_n))
            except SolverFailure:
                pass
        for kind, delta in directions:
            lam, halvings = 1.0, 0
            while True:
                trial = state.with_vector(vec + lam * delta)
                R_new = asm.residual_local(trial)
                rep_new = cond.representer(R_new)
                accepted = rep_new.norm <= rep.norm * (1 + 1e-12) + 1e-300
                if accepted or halvings >= cfg.max_halvings:
                    break
                lam *= 0.5
                halvings += 1
            if accepted:
                break
        row["step_halvings"] = halvings
        row["direction"] = kind
        history.append(row)
        vec = vec + lam * delta
        state, R, rep = trial, R_new, rep_new
    raise NonConvergence(f"Newton did not converge in {cfg.max_iter} iterations", history)


def solve(spec, spaces, cfg=None, U0=None):
    """Solve a problem on given spaces from the default or supplied initial guess."""
    asm = FormAssembler(spaces, spec)
    constraints = apply_initial_conditions(spaces, spec)
    if U0 is None:
        U0 = initial_guess(spaces, spec, constraints)
    return newton_solve(U0, spec, spaces, cfg, assembler=asm, constraints=constraints)
