"""Problem definitions for the benchmark suite."""

from __future__ import annotations

import numpy as np
import sympy as sp

from .fespace import ExactField, ExactFields
from .forms import PhysicalParams, ProblemSpec

TIDAL_ALPHA = 0.00014051891708


def _lambdify(expr, args):
    f = sp.lambdify(args, expr, modules="numpy")

    def wrapped(*a):
        return np.broadcast_to(np.asarray(f(*a), dtype=float), np.shape(a[0]))

    wrapped.expr = expr
    return wrapped


class Manufactured:
    """Symbolic exact solution plus the sources that make it solve the system."""

    def __init__(self, zeta, u, g=9.81, mu=1e-5, tau_bf=1.0, h_b=0, linearized=False):
        x, t = self.x, self.t = sp.symbols("x t", real=True)
        # strings must resolve to the same real symbols used for differentiation
        names = {"x": x, "t": t}
        self.zeta_expr = sp.sympify(zeta, locals=names)
        self.u_expr = sp.sympify(u, locals=names)
        self.sigma_expr = sp.diff(self.u_expr, x)
        self.h_b_expr = sp.sympify(h_b, locals=names)
        self.g, self.mu, self.tau_bf, self.linearized = g, mu, tau_bf, linearized
        H = self.h_b_expr if linearized else self.zeta_expr + self.h_b_expr
        z, u_, s = self.zeta_expr, self.u_expr, self.sigma_expr
        conv = 0 if linearized else u_ * sp.diff(u_, x)
        self.s_zeta_expr = sp.simplify(sp.diff(z, t) + sp.diff(u_ * H, x))
        self.f_expr = sp.simplify(sp.diff(u_, t) + conv + tau_bf * u_
                                  + g * sp.diff(z, x) - mu * sp.diff(s, x))

    def xt(self, expr):
        return _lambdify(expr, (self.x, self.t))

    def exact_fields(self):
        x, t = self.x, self.t
        out = []
        for e in (self.zeta_expr, self.u_expr, self.sigma_expr):
            out.append(ExactField(self.xt(e), self.xt(sp.diff(e, x)), self.xt(sp.diff(e, t))))
        return ExactFields(*out)

    def params(self):
        h_b = _lambdify(self.h_b_expr, (self.x,))
        return PhysicalParams(g=self.g, mu=self.mu, tau_bf=self.tau_bf, h_b=h_b,
                              f=self.xt(self.f_expr), s_zeta=self.xt(self.s_zeta_expr),
                              linearized=self.linearized)

    def initial(self, expr, t0):
        f = self.xt(expr)
        return lambda x: f(x, np.full(np.shape(x), float(t0)))

    def problem(self, x_range, t_range, inflow_side="left", name="manufactured"):
        return ProblemSpec(
            params=self.params(), x_range=tuple(x_range), t_range=tuple(t_range),
            inflow_side=inflow_side, zeta_hat=self.xt(self.zeta_expr),
            u_hat=self.xt(self.u_expr), u_sides=("inflow", "outflow"),
            zeta0=self.initial(self.zeta_expr, t_range[0]),
            u0=self.initial(self.u_expr, t_range[0]),
            exact=self.exact_fields(), name=name,
            metadata={"zeta_exact": str(self.zeta_expr), "u_exact": str(self.u_expr),
                      "mu": self.mu, "tau_bf": self.tau_bf, "g": self.g,
                      "linearized": self.linearized, "T": t_range[1]},
        )


def manufactured_case(T=0.5, mu=1e-5, tau_bf=1.0, linearized=False, x_range=(0.0, 1.0)):
    """Smooth travelling-wave solution ``zeta = cos(x - t)``, ``u = sin(x + t)``."""
    x, t = sp.symbols("x t", real=True)
    if linearized:
        # constant depth keeps the frozen-H problem physically meaningful
        m = Manufactured(sp.cos(x - t), sp.sin(x + t), mu=mu, tau_bf=tau_bf, h_b=1,
                         linearized=True)
    else:
        m = Manufactured(sp.cos(x - t), sp.sin(x + t), mu=mu, tau_bf=tau_bf)
    return m.problem(x_range, (0.0, T), name="manufactured")


def lake_bathymetry(x):
    """``2 - h0`` with a quartic bump of height 0.25 centred at 0.5 m."""
    x = np.asarray(x, dtype=float)
    bump = np.where((x > 0.3) & (x < 0.7), 156.25 * (x - 0.3) ** 2 * (x - 0.7) ** 2, 0.0)
    return 2.0 - bump


def lake_case(T=10.0):
    params = PhysicalParams(mu=1e-5, tau_bf=1.0, h_b=lake_bathymetry)
    return ProblemSpec(params=params, x_range=(0.0, 1.0), t_range=(0.0, T),
                       inflow_side="left", u_sides=("inflow", "outflow"), name="lake",
                       metadata={"mu": 1e-5, "tau_bf": 1.0, "T": T, "bathymetry": "2 - h0"})


def tidal_case(T=604800.0, alpha=TIDAL_ALPHA):
    params = PhysicalParams(mu=25.0, tau_bf=0.01, h_b=lambda x: np.full(np.shape(x), 10.0))

    def zeta_hat(x, t):
        return 0.1 * np.cos(alpha * np.asarray(t))

    return ProblemSpec(params=params, x_range=(0.0, 10000.0), t_range=(0.0, T),
                       inflow_side="left", zeta_hat=zeta_hat,
                       u_sides=("outflow",), sigma_sides=("inflow",), name="tidal",
                       metadata={"mu": 25.0, "tau_bf": 0.01, "h_b": 10.0, "alpha": alpha,
                                 "T": T, "forcing": "zeta(0,t) = 0.1 cos(alpha t)"})


def dambreak_zeta0(x):
    return np.where(np.asarray(x) <= 1000.0, 10.0, 5.0)


def dambreak_case(T=200.0):
    params = PhysicalParams(mu=1e-2, tau_bf=1.0)
    # elevation is prescribed at x = 2000 m, velocity at x = 0
    return ProblemSpec(params=params, x_range=(0.0, 2000.0), t_range=(0.0, T),
                       inflow_side="right", u_sides=("outflow",), zeta0=dambreak_zeta0,
                       ic_interpolation="linear", name="dambreak",
                       metadata={"mu": 1e-2, "tau_bf": 1.0, "h_b": 0.0, "T": T,
                                 "zeta0": "10 for x <= 1000, 5 otherwise",
                                 "ic_interpolation": "linear"})
