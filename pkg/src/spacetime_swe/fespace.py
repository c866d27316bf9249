"""Lagrange spaces on space-time triangles.

Reference triangle is ``(0,0), (1,0), (0,1)`` with coordinates ``(xi, eta)``;
the affine map is ``X = V0 + J @ (xi, eta)`` with ``J = [V1 - V0, V2 - V0]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import roots_jacobi, roots_legendre

from .errors import InvalidArgument
from .mesh import LOCAL_EDGES

MAX_DEGREE = 4

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class SpaceConfig:
    """Polynomial degrees of the discretization.

    ``sigma_degree`` defaults to ``max(p - 1, 1)`` and ``test_degree`` to
    ``p``; ``quadrature_degree`` defaults to ``2 * max(p, r) + 2``.
    """

    trial_degree: int = 2
    test_degree: int | None = None
    sigma_degree: int | None = None
    quadrature_degree: int | None = None

    def __post_init__(self):
        p = self.trial_degree
        if self.test_degree is None:
            object.__setattr__(self, "test_degree", p)
        if self.sigma_degree is None:
            object.__setattr__(self, "sigma_degree", max(p - 1, 1))
        if self.quadrature_degree is None:
            object.__setattr__(self, "quadrature_degree", 2 * max(p, self.test_degree) + 2)
        for d in (p, self.test_degree, self.sigma_degree):
            if not 1 <= d <= MAX_DEGREE:
                raise InvalidArgument(f"polynomial degree {d} outside 1..{MAX_DEGREE}")
        if self.test_degree < p:
            raise InvalidArgument("test degree must be at least the trial degree")

    @property
    def p(self):
        return self.trial_degree

    @property
    def r(self):
        return self.test_degree

    @property
    def norm_quadrature_degree(self):
        return max(10, 2 * self.trial_degree + 4)


# ---------------------------------------------------------------- quadrature

@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray      # (nq, 2) reference coordinates
    weights: np.ndarray     # (nq,), sums to 1/2
    degree: int
    edge_points: np.ndarray  # (ne,) parameters on [0, 1]
    edge_weights: np.ndarray  # (ne,), sums to 1


@lru_cache(maxsize=None)
def quadrature(degree):
    """Collapsed Gauss-Jacobi rule on the reference triangle, exact to ``degree``."""
    n = max(1, math.ceil((degree + 1) / 2))
    a, wa = roots_legendre(n)
    b, wb = roots_jacobi(n, 1.0, 0.0)
    A, B = np.meshgrid(a, b, indexing="ij")
    WA, WB = np.meshgrid(wa, wb, indexing="ij")
    xi = 0.25 * (1 + A) * (1 - B)
    eta = 0.5 * (1 + B)
    pts = np.column_stack([xi.ravel(), eta.ravel()])
    w = (WA * WB).ravel() / 8.0
    s, ws = roots_legendre(n)
    rule = QuadratureRule(pts, w, degree, 0.5 * (s + 1), 0.5 * ws)
    for arr in (rule.points, rule.weights, rule.edge_points, rule.edge_weights):
        arr.setflags(write=False)
    return rule


# ------------------------------------------------------------- Lagrange basis

class LagrangeBasis:
    """Nodal basis of total degree ``k`` on the reference triangle.

    Nodes are ordered vertices, then edge nodes per local edge
    ``(0,1), (1,2), (2,0)`` running from the first vertex, then interior.
    """

    def __init__(self, degree):
        if not 1 <= degree <= MAX_DEGREE:
            raise InvalidArgument(f"unsupported degree {degree}")
        k = self.degree = degree
        bary = []
        for v in range(3):
            idx = [0, 0, 0]
            idx[v] = k
            bary.append(idx)
        for a, b in LOCAL_EDGES:
            for j in range(1, k):
                idx = [0, 0, 0]
                idx[a], idx[b] = k - j, j
                bary.append(idx)
        for i1 in range(1, k):
            for i2 in range(1, k - i1):
                bary.append([k - i1 - i2, i1, i2])
        self.bary = np.array(bary, dtype=np.int64)
        self.nodes = self.bary[:, 1:] / k
        self.n = len(self.bary)
        self.exponents = [(i, j) for i in range(k + 1) for j in range(k + 1 - i)]
        V = self._monomials(self.nodes)
        self._coef = np.linalg.inv(V)  # column i holds basis function i

    def _monomials(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack([x**i * y**j for i, j in self.exponents])

    def _monomial_grads(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        dx = [i * x ** max(i - 1, 0) * y**j if i else np.zeros_like(x) for i, j in self.exponents]
        dy = [j * x**i * y ** max(j - 1, 0) if j else np.zeros_like(x) for i, j in self.exponents]
        return np.stack([np.column_stack(dx), np.column_stack(dy)], axis=-1)

    def values(self, pts):
        """(np, n) basis values at reference points."""
        return self._monomials(np.atleast_2d(pts)) @ self._coef

    def gradients(self, pts):
        """(np, n, 2) reference gradients."""
        g = self._monomial_grads(np.atleast_2d(pts))
        return np.einsum("pmd,mn->pnd", g, self._coef)


@lru_cache(maxsize=None)
def lagrange(degree):
    return LagrangeBasis(degree)


def n_local(degree):
    return (degree + 1) * (degree + 2) // 2


# ----------------------------------------------------------------- geometry

@dataclass
class Geometry:
    """Affine-map data of every triangle of a mesh."""

    origin: np.ndarray  # (M, 2)
    jac: np.ndarray     # (M, 2, 2)
    det: np.ndarray     # (M,)
    jinv: np.ndarray    # (M, 2, 2)

    def to_physical(self, ref_pts):
        """(M, np, 2) physical coordinates of reference points on every triangle."""
        return self.origin[:, None, :] + np.einsum("mij,pj->mpi", self.jac, ref_pts)

    def physical_gradients(self, ref_grads):
        """Map (np, n, 2) reference gradients to (M, np, n, 2) physical ones."""
        # grad_phys[k] = sum_l jinv[l, k] * grad_ref[l]
        return np.einsum("pnl,mlk->mpnk", ref_grads, self.jinv)


def geometry(mesh):
    cached = getattr(mesh, "_geometry_cache", None)
    if cached is not None:
        return cached
    p = mesh.vertices[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    jinv = np.empty_like(jac)
    jinv[:, 0, 0] = jac[:, 1, 1] / det
    jinv[:, 1, 1] = jac[:, 0, 0] / det
    jinv[:, 0, 1] = -jac[:, 0, 1] / det
    jinv[:, 1, 0] = -jac[:, 1, 0] / det
    geo = Geometry(p[:, 0].copy(), jac, det, jinv)
    mesh._geometry_cache = geo
    return geo


def edge_reference_points(s):
    """(3, ns, 2) reference coordinates of edge parameters ``s`` on each local edge."""
    a = REF_VERTICES[LOCAL_EDGES[:, 0]]
    b = REF_VERTICES[LOCAL_EDGES[:, 1]]
    return a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]


# ------------------------------------------------------------------- spaces

class FESpace:
    """Continuous or broken Lagrange space of one degree on a mesh."""

    def __init__(self, mesh, degree, continuous=True):
        if degree < 1:
            raise InvalidArgument("degree must be >= 1")
        if degree > MAX_DEGREE:
            raise InvalidArgument(f"degree {degree} exceeds supported maximum {MAX_DEGREE}")
        self.mesh = mesh
        self.degree = degree
        self.continuous = continuous
        self.basis = lagrange(degree)
        self.dofmap, self.n_dofs = self._build_dofmap()
        coords = geometry(mesh).to_physical(self.basis.nodes)
        self.dof_coords = np.empty((self.n_dofs, 2))
        self.dof_coords[self.dofmap.ravel()] = coords.reshape(-1, 2)

    def __repr__(self):
        kind = "continuous" if self.continuous else "broken"
        return f"FESpace(degree={self.degree}, {kind}, n_dofs={self.n_dofs})"

    @property
    def n_local(self):
        return self.basis.n

    def _build_dofmap(self):
        mesh, k, nloc = self.mesh, self.degree, self.basis.n
        m = mesh.n_triangles
        if not self.continuous:
            return np.arange(m * nloc).reshape(m, nloc), m * nloc
        tri = mesh.triangles
        bary = self.basis.bary
        keys = np.zeros((m, nloc, 4), dtype=np.int64)
        for l, idx in enumerate(bary):
            nz = np.flatnonzero(idx)
            if len(nz) == 1:
                keys[:, l] = np.column_stack([np.zeros(m, np.int64), tri[:, nz[0]],
                                              np.zeros(m, np.int64), np.zeros(m, np.int64)])
            elif len(nz) == 2:
                a, b = nz
                ga, gb = tri[:, a], tri[:, b]
                lo, hi = np.minimum(ga, gb), np.maximum(ga, gb)
                # position measured from the lower-numbered vertex
                pos = np.where(ga < gb, idx[b], idx[a])
                keys[:, l] = np.column_stack([np.ones(m, np.int64), lo, hi, pos])
            else:
                keys[:, l] = np.column_stack([np.full(m, 2, np.int64), np.arange(m),
                                              np.full(m, l, np.int64), np.zeros(m, np.int64)])
        _, inverse = np.unique(keys.reshape(-1, 4), axis=0, return_inverse=True)
        dofmap = inverse.reshape(m, nloc)
        return dofmap, int(dofmap.max()) + 1

    @cached_property
    def boundary_dofs_by_tag(self):
        """Dict ``tag -> sorted dof indices`` of nodes lying on tagged edges."""
        tags = self.mesh.local_edge_tags
        out = {}
        for e, (a, b) in enumerate(LOCAL_EDGES):
            on_edge = np.flatnonzero((self.basis.bary[:, 3 - a - b] == 0))
            for tag in np.unique(tags[:, e]):
                if tag < 0:
                    continue
                rows = np.flatnonzero(tags[:, e] == tag)
                out.setdefault(int(tag), []).append(self.dofmap[np.ix_(rows, on_edge)].ravel())
        return {t: np.unique(np.concatenate(v)) for t, v in out.items()}


def make_space(mesh, degree, continuity="continuous"):
    """Build a Lagrange space; ``continuity`` is ``'continuous'`` or ``'broken'``."""
    if continuity not in ("continuous", "broken"):
        raise InvalidArgument(f"unknown continuity {continuity!r}")
    return FESpace(mesh, degree, continuous=continuity == "continuous")


def tabulate(space, k, points):
    """Basis values and physical ``(x, t)`` gradients on triangle ``k``.

    ``points`` are reference coordinates.  Returns ``(values, grads)`` with
    shapes ``(np, n)`` and ``(np, n, 2)``.
    """
    geo = geometry(space.mesh)
    vals = space.basis.values(points)
    g = space.basis.gradients(points)
    grads = np.einsum("pnl,lk->pnk", g, geo.jinv[k])
    return vals, grads


# ----------------------------------------------------------------- functions

@dataclass
class FieldFunction:
    space: FESpace
    coeffs: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.coeffs is None:
            self.coeffs = np.zeros(self.space.n_dofs)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.n_dofs,):
            raise InvalidArgument("coefficient length does not match the space")

    def copy(self):
        return FieldFunction(self.space, self.coeffs.copy())

    def local(self):
        """(M, n_local) element coefficient blocks."""
        return self.coeffs[self.space.dofmap]

    def at_reference(self, ref_pts):
        """Values and physical gradients at reference points on every element.

        Returns ``(val, grad)`` with shapes ``(M, np)`` and ``(M, np, 2)``.
        """
        c = self.local()
        vals = self.space.basis.values(ref_pts)
        grads = geometry(self.space.mesh).physical_gradients(self.space.basis.gradients(ref_pts))
        return c @ vals.T, np.einsum("mn,mpnk->mpk", c, grads)

    def __call__(self, x, t):
        """Point evaluation at physical ``(x, t)``; raises for points outside the mesh."""
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        pts = np.column_stack([x.ravel(), t.ravel()])
        tri, ref = locate(self.space.mesh, pts)
        vals = self.space.basis.values(ref)
        out = np.einsum("pn,pn->p", vals, self.coeffs[self.space.dofmap[tri]])
        return out.reshape(x.shape)


def interpolate(f, space):
    """Nodal interpolant of ``f(x, t)``."""
    x, t = space.dof_coords[:, 0], space.dof_coords[:, 1]
    vals = np.broadcast_to(np.asarray(f(x, t), dtype=float), x.shape).copy()
    if not np.all(np.isfinite(vals)):
        raise InvalidArgument("interpolated function is not finite at every node")
    return FieldFunction(space, vals)


# ---------------------------------------------------------- point location

def _kdtree(mesh):
    tree = getattr(mesh, "_centroid_tree", None)
    if tree is None:
        # scale coordinates so both axes weigh equally in the search
        (x0, x1), (t0, t1) = mesh.bounds
        scale = np.array([1.0 / (x1 - x0), 1.0 / (t1 - t0)])
        tree = (cKDTree(mesh.centroids * scale), scale)
        mesh._centroid_tree = tree
    return tree


def _reference_coords(mesh, tri, pts):
    geo = geometry(mesh)
    return np.einsum("pij,pj->pi", geo.jinv[tri], pts - geo.origin[tri])


def _inside(ref, tol=1e-10):
    return (ref[:, 0] >= -tol) & (ref[:, 1] >= -tol) & (ref.sum(axis=1) <= 1 + tol)


def locate(mesh, points, k=12):
    """Find a containing triangle and reference coordinates for each point."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    tree, scale = _kdtree(mesh)
    kk = min(k, mesh.n_triangles)
    _, cand = tree.query(points * scale, k=kk)
    cand = cand.reshape(len(points), kk)
    tri = np.full(len(points), -1, dtype=np.int64)
    ref = np.zeros((len(points), 2))
    for j in range(kk):
        todo = np.flatnonzero(tri < 0)
        if todo.size == 0:
            break
        c = cand[todo, j]
        r = _reference_coords(mesh, c, points[todo])
        ok = _inside(r)
        tri[todo[ok]] = c[ok]
        ref[todo[ok]] = r[ok]
    todo = np.flatnonzero(tri < 0)
    if todo.size:
        for i in todo:
            r = _reference_coords(mesh, np.arange(mesh.n_triangles),
                                  np.repeat(points[i:i + 1], mesh.n_triangles, axis=0))
            # least violation of the barycentric bounds
            viol = np.maximum.reduce([-r[:, 0], -r[:, 1], r.sum(axis=1) - 1])
            best = int(np.argmin(viol))
            if viol[best] > 1e-8:
                raise InvalidArgument(f"point {points[i]} lies outside the mesh")
            tri[i] = best
            ref[i] = r[best]
    return tri, ref


# ---------------------------------------------------------------- error norms

@dataclass
class ExactField:
    """Exact scalar field with its ``x`` and ``t`` derivatives, all ``f(x, t)``."""

    value: object
    dx: object
    dt: object


@dataclass
class ExactFields:
    zeta: ExactField
    u: ExactField
    sigma: ExactField


def _eval(f, x, t):
    return np.broadcast_to(np.asarray(f(x, t), dtype=float), np.shape(x))


def _field_error_integrals(fn, exact, rule):
    """Squared L2 norms of the value, x- and t-derivative errors of one field."""
    mesh = fn.space.mesh
    geo = geometry(mesh)
    X = geo.to_physical(rule.points)
    x, t = X[..., 0], X[..., 1]
    W = rule.weights[None, :] * np.abs(geo.det)[:, None]
    val, grad = fn.at_reference(rule.points)
    ev = val - _eval(exact.value, x, t)
    ex = grad[..., 0] - _eval(exact.dx, x, t)
    et = grad[..., 1] - _eval(exact.dt, x, t)
    return (np.sum(W * ev**2), np.sum(W * ex**2), np.sum(W * et**2))


def error_norms(state, exact, quadrature_degree=10):
    """Error norms of a trial state against exact fields.

    Returns a dict with ``L2_<f>`` and ``H1_<f>`` for ``f`` in
    ``zeta, u, sigma`` (``H1_sigma`` is the graph norm of ``d/dx``), the
    combined ``L2`` norm and the trial-space norm ``U``.  H1 norms use the
    full space-time gradient; ``U`` uses spatial derivatives only.
    """
    rule = quadrature(quadrature_degree)
    out = {}
    parts = {}
    for name in ("zeta", "u", "sigma"):
        parts[name] = _field_error_integrals(getattr(state, name), getattr(exact, name), rule)
    for name, (v2, x2, t2) in parts.items():
        out[f"L2_{name}"] = math.sqrt(v2)
        if name == "sigma":
            out["H1_sigma"] = math.sqrt(v2 + x2)
        else:
            out[f"H1_{name}"] = math.sqrt(v2 + x2 + t2)
    out["L2"] = math.sqrt(sum(p[0] for p in parts.values()))
    out["U"] = math.sqrt(sum(p[0] + p[1] for p in parts.values()))
    return out


def l2_norm(fn, quadrature_degree=10):
    """L2 norm of a field over the whole space-time mesh."""
    rule = quadrature(quadrature_degree)
    geo = geometry(fn.space.mesh)
    val, _ = fn.at_reference(rule.points)
    return math.sqrt(np.sum(rule.weights[None, :] * np.abs(geo.det)[:, None] * val**2))
