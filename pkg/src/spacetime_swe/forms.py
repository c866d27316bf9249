"""Broken space-time forms of the viscous shallow water system in one space dimension.

Unknowns are elevation ``zeta``, velocity ``u`` and ``sigma = du/dx``; test
functions ``(v, w, q)`` are element-wise polynomials.  Green's identity is
applied in ``x`` only, so edge terms carry the spatial normal component
``n_x`` and faces ``t = const`` contribute nothing.

Element-local test vectors are laid out ``[v_0..v_r, w_0..w_r, q_0..q_r]``
and element-local trial vectors ``[zeta, u, sigma]``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fespace
from .errors import InvalidArgument
from .fespace import (ExactFields, FESpace, FieldFunction, SpaceConfig,
                      edge_reference_points, geometry, quadrature)
from .mesh import BoundaryTag


def _zero(x, t):
    return np.zeros(np.shape(x))


def _zero_x(x):
    return np.zeros(np.shape(x))


@dataclass
class PhysicalParams:
    """Physical coefficients.

    ``h_b`` takes ``x``; ``f`` and ``s_zeta`` take ``(x, t)``.  With
    ``linearized`` the convective term is dropped and the water column is
    frozen at ``H = h_b``.
    """

    g: float = 9.81
    mu: float = 0.0
    tau_bf: float = 0.0
    h_b: Callable = _zero_x
    f: Callable = _zero
    s_zeta: Callable = _zero
    linearized: bool = False

    def __post_init__(self):
        if not self.g > 0:
            raise InvalidArgument("g must be positive")
        if self.mu < 0 or self.tau_bf < 0:
            raise InvalidArgument("mu and tau_bf must be nonnegative")


@dataclass
class ProblemSpec:
    """A space-time initial boundary value problem on ``(x_L, x_R) x (t0, T)``.

    ``zeta_hat`` is imposed on the inflow side, ``u_hat`` on the sides named
    in ``u_sides`` and ``sigma_hat`` on those in ``sigma_sides``; sides are
    ``'inflow'`` or ``'outflow'``.  Boundary data take ``(x, t)``, initial
    data take ``x``.  ``ic_interpolation='linear'`` imposes the initial data
    through their vertex interpolant, which keeps step data within bounds;
    the default ``'nodal'`` interpolates at every trace node.
    """

    params: PhysicalParams
    x_range: tuple = (0.0, 1.0)
    t_range: tuple = (0.0, 1.0)
    inflow_side: str = "left"
    zeta_hat: Callable = _zero
    u_hat: Callable = _zero
    sigma_hat: Callable = _zero
    u_sides: tuple = ("inflow", "outflow")
    sigma_sides: tuple = ()
    zeta0: Callable = _zero_x
    u0: Callable = _zero_x
    exact: ExactFields | None = None
    name: str = "problem"
    metadata: dict = field(default_factory=dict)
    ic_interpolation: str = "nodal"

    def __post_init__(self):
        if self.inflow_side not in ("left", "right"):
            raise InvalidArgument("inflow_side must be 'left' or 'right'")
        if self.ic_interpolation not in ("nodal", "linear"):
            raise InvalidArgument("ic_interpolation must be 'nodal' or 'linear'")
        for s in (*self.u_sides, *self.sigma_sides):
            if s not in ("inflow", "outflow"):
                raise InvalidArgument(f"unknown boundary side {s!r}")
        if not self.x_range[1] > self.x_range[0] or not self.t_range[1] > self.t_range[0]:
            raise InvalidArgument("empty domain")

    @property
    def T(self):
        return self.t_range[1]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def side_tags(self, sides):
        lut = {"inflow": BoundaryTag.SPATIAL_INFLOW, "outflow": BoundaryTag.SPATIAL_OUTFLOW}
        return tuple(int(lut[s]) for s in sides)


@dataclass
class Spaces:
    """Trial spaces for ``zeta, u, sigma`` and the broken test space."""

    mesh: object
    config: SpaceConfig
    zeta: FESpace
    u: FESpace
    sigma: FESpace
    test: FESpace

    @property
    def n_trial(self):
        return self.zeta.n_dofs + self.u.n_dofs + self.sigma.n_dofs

    @property
    def n_test(self):
        return 3 * self.test.n_dofs

    @property
    def offsets(self):
        nz, nu = self.zeta.n_dofs, self.u.n_dofs
        return (0, nz, nz + nu)

    def trial_dofmap(self):
        """(M, nz + nu + ns) global trial indices per element."""
        o = self.offsets
        return np.hstack([self.zeta.dofmap + o[0], self.u.dofmap + o[1],
                          self.sigma.dofmap + o[2]])


def make_spaces(mesh, config=None):
    config = config or SpaceConfig()
    z = FESpace(mesh, config.p, continuous=True)
    return Spaces(mesh, config, z, z, FESpace(mesh, config.sigma_degree, continuous=True),
                  FESpace(mesh, config.r, continuous=False))


@dataclass
class TrialState:
    zeta: FieldFunction
    u: FieldFunction
    sigma: FieldFunction

    @property
    def mesh(self):
        return self.zeta.space.mesh

    def vector(self):
        return np.concatenate([self.zeta.coeffs, self.u.coeffs, self.sigma.coeffs])

    def with_vector(self, vec):
        nz, nu = self.zeta.space.n_dofs, self.u.space.n_dofs
        return TrialState(FieldFunction(self.zeta.space, vec[:nz].copy()),
                          FieldFunction(self.u.space, vec[nz:nz + nu].copy()),
                          FieldFunction(self.sigma.space, vec[nz + nu:].copy()))

    def copy(self):
        return TrialState(self.zeta.copy(), self.u.copy(), self.sigma.copy())

    @classmethod
    def zeros(cls, spaces):
        return cls(FieldFunction(spaces.zeta), FieldFunction(spaces.u), FieldFunction(spaces.sigma))


@dataclass
class GramSpec:
    """Weights of the broken test inner product on one element.

    Gradient terms of ``v`` and ``w`` use the full space-time gradient,
    the divergence term of ``q`` uses ``dq/dx``; all are scaled by
    ``h_m ** 2`` when ``scale_by_diameter`` is set.
    """

    scale_by_diameter: bool = True


def _call_xt(f, x, t):
    return np.broadcast_to(np.asarray(f(x, t), dtype=float), np.shape(x)).copy()


def _call_x(f, x):
    return np.broadcast_to(np.asarray(f(x), dtype=float), np.shape(x)).copy()


class FormAssembler:
    """Precomputed element data for evaluating B - F, B' and the Gram matrices.

    ``test_degree`` overrides the test degree of ``spaces`` (used to build a
    richer test space for error surrogates).
    """

    def __init__(self, spaces, spec, test_degree=None, quadrature_degree=None, gram=None):
        self.spaces = spaces
        self.spec = spec
        self.mesh = mesh = spaces.mesh
        cfg = spaces.config
        self.r = test_degree or cfg.r
        qdeg = quadrature_degree or max(cfg.quadrature_degree, 2 * self.r + 2)
        self.rule = rule = quadrature(qdeg)
        self.gram_spec = gram or GramSpec()
        geo = self.geo = geometry(mesh)
        self.test_basis = tb = fespace.lagrange(self.r)
        self.nr = tb.n

        # volume data
        self.W = rule.weights[None, :] * np.abs(geo.det)[:, None]
        X = geo.to_physical(rule.points)
        self.xq, self.tq = X[..., 0], X[..., 1]
        self.psi = tb.values(rule.points)
        self.dpsi = geo.physical_gradients(tb.gradients(rule.points))

        # edge data: reference points per local edge, weights scaled by length
        s = rule.edge_points
        self.edge_ref = edge_reference_points(s)                    # (3, ns, 2)
        self.We = rule.edge_weights[None, None, :] * mesh.edge_lengths_local[..., None]
        self.nx = mesh.local_normals[..., 0]                          # (M, 3)
        Xe = np.einsum("mij,esj->mesi", geo.jac, self.edge_ref) + geo.origin[:, None, None, :]
        self.xe, self.te = Xe[..., 0], Xe[..., 1]
        self.psi_e = np.stack([tb.values(self.edge_ref[e]) for e in range(3)])  # (3, ns, nr)
        # drop temporal faces once: their n_x vanishes
        self.WeN = self.We * self.nx[..., None]

        tags = mesh.local_edge_tags
        self.gamma_in = tags == BoundaryTag.SPATIAL_INFLOW
        self.u_dir = np.isin(tags, spec.side_tags(spec.u_sides))
        self.sigma_dir = np.isin(tags, spec.side_tags(spec.sigma_sides))

        p = spec.params
        self.hb_q = _call_x(p.h_b, self.xq)
        self.hb_e = _call_x(p.h_b, self.xe)
        self.f_q = _call_xt(p.f, self.xq, self.tq)
        self.s_q = _call_xt(p.s_zeta, self.xq, self.tq)
        self.zeta_hat_e = np.where(self.gamma_in[..., None],
                                   _call_xt(spec.zeta_hat, self.xe, self.te), 0.0)
        self.u_hat_e = np.where(self.u_dir[..., None], _call_xt(spec.u_hat, self.xe, self.te), 0.0)
        self.sigma_hat_e = np.where(self.sigma_dir[..., None],
                                    _call_xt(spec.sigma_hat, self.xe, self.te), 0.0)

        # trial tabulations
        self._trial = {}
        for name in ("zeta", "u", "sigma"):
            sp = getattr(spaces, name)
            b = sp.basis
            self._trial[name] = (
                b.values(rule.points),
                geo.physical_gradients(b.gradients(rule.points)),
                np.stack([b.values(self.edge_ref[e]) for e in range(3)]),
            )

    # ------------------------------------------------------------ sampling
    def sample_state(self, state):
        """Trial fields at volume and edge quadrature points."""
        if state.zeta.space.mesh is not self.mesh:
            raise InvalidArgument("trial state lives on a different mesh")
        out = {}
        for name in ("zeta", "u", "sigma"):
            c = getattr(state, name).local()
            val, grad, edge = self._trial[name]
            out[name] = c @ val.T
            out[name + "_x"] = np.einsum("mn,mqn->mq", c, grad[..., 0])
            out[name + "_t"] = np.einsum("mn,mqn->mq", c, grad[..., 1])
            out[name + "_e"] = np.einsum("mn,esn->mes", c, edge)
        return out

    def sample_exact(self, exact, subtract=None):
        """Exact fields (optionally minus a trial state) at the quadrature points."""
        out = {}
        for name in ("zeta", "u", "sigma"):
            ex = getattr(exact, name)
            out[name] = _call_xt(ex.value, self.xq, self.tq)
            out[name + "_x"] = _call_xt(ex.dx, self.xq, self.tq)
            out[name + "_t"] = _call_xt(ex.dt, self.xq, self.tq)
            out[name + "_e"] = _call_xt(ex.value, self.xe, self.te)
        if subtract is not None:
            s = self.sample_state(subtract)
            out = {k: out[k] - s[k] for k in out}
        return out

    # ------------------------------------------------------------ residual
    def residual_local(self, state=None, samples=None, with_load=True, boundary_data=True):
        """Element residuals ``B(U; phi) - F(phi)`` with shape (M, 3, nr)."""
        S = samples if samples is not None else self.sample_state(state)
        p = self.spec.params
        W, psi, dpsi = self.W, self.psi, self.dpsi
        psix = dpsi[..., 0]
        zeta, u, sigma = S["zeta"], S["u"], S["sigma"]
        H = self.hb_q if p.linearized else zeta + self.hb_q
        Hu = u * H
        conv = 0.0 if p.linearized else u * S["u_x"]

        src_v = self.s_q if with_load else 0.0
        src_w = self.f_q if with_load else 0.0
        R = np.empty((self.mesh.n_triangles, 3, self.nr))
        R[:, 0] = (np.einsum("mq,qj->mj", W * (S["zeta_t"] - src_v), psi)
                   - np.einsum("mq,mqj->mj", W * Hu, psix))
        R[:, 1] = (np.einsum("mq,qj->mj", W * (S["u_t"] + conv + p.tau_bf * u - src_w), psi)
                   + np.einsum("mq,mqj->mj", W * (p.mu * sigma - p.g * zeta), psix))
        R[:, 2] = (np.einsum("mq,qj->mj", W * sigma, psi)
                   + np.einsum("mq,mqj->mj", W * u, psix))

        ze, ue, se = S["zeta_e"], S["u_e"], S["sigma_e"]
        He = self.hb_e if p.linearized else ze + self.hb_e
        use_data = with_load and boundary_data
        zeta_star = np.where(self.gamma_in[..., None], self.zeta_hat_e if use_data else 0.0, ze)
        sigma_star = np.where(self.sigma_dir[..., None], self.sigma_hat_e if use_data else 0.0, se)
        u_star = np.where(self.u_dir[..., None], self.u_hat_e if use_data else 0.0, ue)
        WeN, psi_e = self.WeN, self.psi_e
        R[:, 0] += np.einsum("mes,esj->mj", WeN * ue * He, psi_e)
        R[:, 1] += np.einsum("mes,esj->mj", WeN * (p.g * zeta_star - p.mu * sigma_star), psi_e)
        R[:, 2] -= np.einsum("mes,esj->mj", WeN * u_star, psi_e)
        return R

    def load_local(self):
        """Element load vectors ``F(phi)`` with shape (M, 3, nr)."""
        p = self.spec.params
        F = np.zeros((self.mesh.n_triangles, 3, self.nr))
        F[:, 0] = np.einsum("mq,qj->mj", self.W * self.s_q, self.psi)
        F[:, 1] = np.einsum("mq,qj->mj", self.W * self.f_q, self.psi)
        WeN, psi_e = self.WeN, self.psi_e
        F[:, 1] -= np.einsum("mes,esj->mj", WeN * p.g * self.zeta_hat_e, psi_e)
        F[:, 1] += np.einsum("mes,esj->mj", WeN * p.mu * self.sigma_hat_e, psi_e)
        F[:, 2] += np.einsum("mes,esj->mj", WeN * self.u_hat_e, psi_e)
        return F

    # ------------------------------------------------------------ jacobian
    def jacobian_local(self, state):
        """Element blocks of ``B'(U)`` with shape (M, 3 nr, nz + nu + ns)."""
        S = self.sample_state(state)
        p = self.spec.params
        W, psi, psix = self.W, self.psi, self.dpsi[..., 0]
        WeN, psi_e = self.WeN, self.psi_e
        zv, zg, ze = self._trial["zeta"]
        sv, sg, se = self._trial["sigma"]
        nz, ns, nr = zv.shape[1], sv.shape[1], self.nr
        M = self.mesh.n_triangles
        Jl = np.zeros((M, 3 * nr, 2 * nz + ns))
        u, ux = S["u"], S["u_x"]
        H = self.hb_q if p.linearized else S["zeta"] + self.hb_q
        He = self.hb_e if p.linearized else S["zeta_e"] + self.hb_e
        ue = S["u_e"]
        cH = 0.0 if p.linearized else 1.0
        zt, zx = zg[..., 1], zg[..., 0]
        iz, iu, isg = slice(0, nz), slice(nz, 2 * nz), slice(2 * nz, 2 * nz + ns)
        rv, rw, rq = slice(0, nr), slice(nr, 2 * nr), slice(2 * nr, 3 * nr)

        # continuity row
        Jl[:, rv, iz] = (np.einsum("mq,qj,mqi->mji", W, psi, zt)
                         - cH * np.einsum("mq,mqj,qi->mji", W * u, psix, zv)
                         + cH * np.einsum("mes,esj,esi->mji", WeN * ue, psi_e, ze))
        Jl[:, rv, iu] = (-np.einsum("mq,mqj,qi->mji", W * H, psix, zv)
                         + np.einsum("mes,esj,esi->mji", WeN * He, psi_e, ze))
        # momentum row
        conv = 0.0 if p.linearized else 1.0
        Jl[:, rw, iu] = (np.einsum("mq,qj,mqi->mji", W, psi, zt + conv * u[..., None] * zx)
                         + np.einsum("mq,qj,qi->mji", W * (conv * ux + p.tau_bf), psi, zv))
        keep_z = WeN * (~self.gamma_in)[..., None]
        Jl[:, rw, iz] = (-p.g * np.einsum("mq,mqj,qi->mji", W, psix, zv)
                         + p.g * np.einsum("mes,esj,esi->mji", keep_z, psi_e, ze))
        keep_s = WeN * (~self.sigma_dir)[..., None]
        Jl[:, rw, isg] = (p.mu * np.einsum("mq,mqj,qi->mji", W, psix, sv)
                          - p.mu * np.einsum("mes,esj,esi->mji", keep_s, psi_e, se))
        # constitutive row
        keep_u = WeN * (~self.u_dir)[..., None]
        Jl[:, rq, isg] = np.einsum("mq,qj,qi->mji", W, psi, sv)
        Jl[:, rq, iu] = (np.einsum("mq,mqj,qi->mji", W, psix, zv)
                         - np.einsum("mes,esj,esi->mji", keep_u, psi_e, ze))
        return Jl

    def hessian_local(self, y):
        """Second derivative of ``y . B(U)`` in the trial unknowns, shape (M, nloc, nloc).

        ``y`` holds element test coefficients (M, 3, nr).  Every nonlinearity
        is quadratic, so the result does not depend on ``U``.
        """
        p = self.spec.params
        zv, zg, ze = self._trial["zeta"]
        nz, ns = zv.shape[1], self._trial["sigma"][0].shape[1]
        M = self.mesh.n_triangles
        Hs = np.zeros((M, 2 * nz + ns, 2 * nz + ns))
        if p.linearized:
            return Hs
        W, WeN = self.W, self.WeN
        yv_x = np.einsum("mj,mqj->mq", y[:, 0], self.dpsi[..., 0])
        yv_e = np.einsum("mj,esj->mes", y[:, 0], self.psi_e)
        yw = y[:, 1] @ self.psi.T
        # d2/(dzeta du) of the flux u (zeta + h_b)
        a = (-np.einsum("mq,qi,qj->mij", W * yv_x, zv, zv)
             + np.einsum("mes,esi,esj->mij", WeN * yv_e, ze, ze))
        iz, iu = slice(0, nz), slice(nz, 2 * nz)
        Hs[:, iz, iu] = a
        Hs[:, iu, iz] = np.swapaxes(a, 1, 2)
        # d2/du2 of u u_x
        b = np.einsum("mq,qi,mqj->mij", W * yw, zv, zg[..., 0])
        Hs[:, iu, iu] = b + np.swapaxes(b, 1, 2)
        return Hs

    # ---------------------------------------------------------------- gram
    def gram_local(self):
        """Element Gram blocks for ``(v, w, q)``, shape (M, 3, nr, nr)."""
        W, psi, dpsi = self.W, self.psi, self.dpsi
        h2 = self.mesh.diameters**2 if self.gram_spec.scale_by_diameter else np.ones(self.mesh.n_triangles)
        mass = np.einsum("mq,qi,qj->mij", W, psi, psi)
        kxx = np.einsum("mq,mqi,mqj->mij", W, dpsi[..., 0], dpsi[..., 0])
        ktt = np.einsum("mq,mqi,mqj->mij", W, dpsi[..., 1], dpsi[..., 1])
        G = np.empty((self.mesh.n_triangles, 3, self.nr, self.nr))
        G[:, 0] = G[:, 1] = h2[:, None, None] * (kxx + ktt) + mass
        G[:, 2] = h2[:, None, None] * kxx + mass
        return G

    # -------------------------------------------------------------- global
    def test_dof_index(self):
        """(M, 3 nr) global test index, element-major."""
        M = self.mesh.n_triangles
        return np.arange(M * 3 * self.nr).reshape(M, 3 * self.nr)


def residual(state, spec, test_space=None, assembler=None):
    """Global vector of ``B(U; phi_j) - F(phi_j)`` over all broken test functions."""
    asm = assembler or _assembler_for(state, spec, test_space)
    return asm.residual_local(state).reshape(-1)


def load(spec, spaces, assembler=None):
    asm = assembler or FormAssembler(spaces, spec)
    return asm.load_local().reshape(-1)


def jacobian(state, spec, spaces, assembler=None):
    """Sparse ``B'(U)`` with rows over test functions and columns over trial dofs."""
    import scipy.sparse as sp
    asm = assembler or FormAssembler(spaces, spec)
    Jl = asm.jacobian_local(state)
    rows = np.broadcast_to(asm.test_dof_index()[:, :, None], Jl.shape)
    cols = np.broadcast_to(spaces.trial_dofmap()[:, None, :], Jl.shape)
    return sp.csr_matrix((Jl.ravel(), (rows.ravel(), cols.ravel())),
                         shape=(Jl.shape[0] * Jl.shape[1], spaces.n_trial))


def gram_matrix(spaces, spec, element, gram=None, assembler=None):
    """Dense Gram matrix of one element over its ``(v, w, q)`` test dofs."""
    import scipy.linalg as sla
    asm = assembler or FormAssembler(spaces, spec, gram=gram)
    if not 0 <= element < spaces.mesh.n_triangles:
        raise InvalidArgument("element index out of range")
    return sla.block_diag(*asm.gram_local()[element])


def _assembler_for(state, spec, test_space):
    mesh = state.zeta.space.mesh
    if test_space is not None and test_space.mesh is not mesh:
        raise InvalidArgument("test space and trial state live on different meshes")
    cfg = SpaceConfig(state.zeta.space.degree,
                      test_degree=None if test_space is None else test_space.degree,
                      sigma_degree=state.sigma.space.degree)
    spaces = Spaces(mesh, cfg, state.zeta.space, state.u.space, state.sigma.space,
                    test_space or FESpace(mesh, cfg.r, continuous=False))
    return FormAssembler(spaces, spec)
