import numpy as np
import pytest

from spacetime_swe.cases import (TIDAL_ALPHA, Manufactured, dambreak_case, lake_bathymetry,
                                 lake_case, manufactured_case, tidal_case)

H = 1e-3


def _d(f, x, t, axis):
    """Fourth-order central difference in ``x`` (axis 0) or ``t`` (axis 1)."""
    e = np.array([H, 0.0]) if axis == 0 else np.array([0.0, H])

    def g(s):
        return f(x + s * e[0], t + s * e[1])

    return (-g(2) + 8 * g(1) - 8 * g(-1) + g(-2)) / (12 * H)


@pytest.mark.parametrize("linearized", [False, True])
def test_sources_satisfy_strong_equations(linearized):
    spec = manufactured_case(T=0.5, linearized=linearized)
    p = spec.params
    ex = spec.exact
    x, t = np.meshgrid(np.linspace(0, 1, 100), np.linspace(0, 0.5, 100))
    zeta, u = ex.zeta.value, ex.u.value

    def flux(x, t):
        Hc = p.h_b(x) if linearized else zeta(x, t) + p.h_b(x)
        return u(x, t) * Hc

    def sigma(x, t):
        return _d(u, x, t, 0)

    cont = _d(zeta, x, t, 1) + _d(flux, x, t, 0) - p.s_zeta(x, t)
    conv = 0.0 if linearized else u(x, t) * _d(u, x, t, 0)
    mom = (_d(u, x, t, 1) + conv + p.tau_bf * u(x, t) + p.g * _d(zeta, x, t, 0)
           - p.mu * _d(sigma, x, t, 0) - p.f(x, t))
    assert np.abs(cont).max() <= 1e-10
    assert np.abs(mom).max() <= 1e-10
    assert np.allclose(ex.sigma.value(x, t), sigma(x, t), atol=1e-10)


def test_string_expressions_use_the_same_symbols():
    m = Manufactured("x*t", "x**2", mu=0.0, tau_bf=0.0, h_b=2, linearized=True)
    x = np.array([0.3, 0.7])
    t = np.array([0.1, 0.4])
    # s = d(xt)/dt + d(2 x^2)/dx, f = g t
    assert np.allclose(m.params().s_zeta(x, t), x + 4 * x)
    assert np.allclose(m.params().f(x, t), 9.81 * t)


def test_lake_case():
    spec = lake_case()
    x = np.linspace(0, 1, 201)
    assert lake_bathymetry(0.5) == pytest.approx(1.75)
    assert np.all(lake_bathymetry(x) <= 2.0) and np.all(lake_bathymetry(x) >= 1.75)
    assert lake_bathymetry(0.3) == lake_bathymetry(0.7) == 2.0
    assert not np.any(spec.params.f(x, x)) and not np.any(spec.params.s_zeta(x, x))
    assert not np.any(spec.zeta0(x)) and not np.any(spec.u0(x))
    assert spec.metadata["mu"] == 1e-5 and spec.metadata["T"] == 10.0


def test_tidal_case():
    spec = tidal_case()
    # 2 pi / alpha by direct arithmetic
    assert 2 * np.pi / TIDAL_ALPHA == pytest.approx(44714.16, abs=0.01)
    assert spec.T == 604800.0
    assert spec.zeta_hat(0.0, 0.0) == pytest.approx(0.1)
    assert spec.zeta_hat(0.0, np.pi / TIDAL_ALPHA) == pytest.approx(-0.1)
    assert spec.params.h_b(5000.0) == 10.0
    assert spec.metadata["mu"] == 25.0 and spec.metadata["tau_bf"] == 0.01


def test_dambreak_case():
    spec = dambreak_case()
    assert spec.zeta0(np.array([999.0, 1000.0, 1001.0])).tolist() == [10.0, 10.0, 5.0]
    assert spec.x_range == (0.0, 2000.0) and spec.T == 200.0
    assert spec.metadata["mu"] == 1e-2 and spec.metadata["tau_bf"] == 1.0
    assert spec.ic_interpolation == "linear"


def test_manufactured_metadata():
    spec = manufactured_case(T=4.0)
    for key in ("mu", "tau_bf", "T", "zeta_exact", "u_exact"):
        assert key in spec.metadata
    assert spec.metadata["T"] == 4.0
