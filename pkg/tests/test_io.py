import numpy as np
import pytest
from hypothesis import given, strategies as st

from spacetime_swe import io
from spacetime_swe.errors import InvalidArgument
from spacetime_swe.fespace import SpaceConfig, interpolate
from spacetime_swe.forms import TrialState, make_spaces
from spacetime_swe.mesh import build_structured


def test_rate_fit_recovers_third_order():
    h = np.array([1.0, 0.5, 0.25])
    err = np.array([1e-1, 1.25e-2, 1.5625e-3])
    assert io.rate_fit(h, err) == pytest.approx(3.0, abs=1e-12)
    assert io.rate_fit(h, np.full(3, 0.2)) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(-4, 4), st.floats(1e-6, 1e3), st.integers(3, 8))
def test_rate_fit_exact_power_laws(rate, c, n):
    h = 2.0 ** -np.arange(n)
    assert io.rate_fit(h, c * h**rate) == pytest.approx(rate, abs=1e-9)


@pytest.mark.parametrize("h, err", [([1, 0.5], [1, 0.1]), ([1, 0.5, 0.25], [1, 0, 0.1]),
                                    ([1, 1, 1], [1, 0.5, 0.1]), ([1, 0.5, np.nan], [1, 1, 1]),
                                    ([1, 0.5, 0.25], [1, 0.5])])
def test_rate_fit_rejects_bad_input(h, err):
    with pytest.raises(InvalidArgument):
        io.rate_fit(h, err)


def _state():
    m = build_structured((0, 1), (0, 1), 2, 1)
    spaces = make_spaces(m, SpaceConfig(2))
    st_ = TrialState.zeros(spaces)
    st_.zeta.coeffs[:] = interpolate(lambda x, t: x + t, spaces.zeta).coeffs
    st_.u.coeffs[:] = interpolate(lambda x, t: x * t, spaces.u).coeffs
    return st_


def test_vtk_structure(tmp_path):
    st_ = _state()
    path = tmp_path / "m.vtk"
    io.state_vtk(path, st_, np.arange(4.0))
    text = path.read_text().splitlines()
    assert text[0] == "# vtk DataFile Version 3.0"
    assert "POINTS 6 double" in text
    assert "CELLS 4 16" in text
    i = text.index("CELL_TYPES 4")
    assert text[i + 1:i + 5] == ["5"] * 4
    assert "SCALARS eta double 1" in text and "SCALARS zeta double 1" in text
    with pytest.raises(InvalidArgument):
        io.write_vtk(tmp_path / "bad.vtk", st_.mesh, cell_fields={"x": np.ones(3)})


def test_series_round_trip(tmp_path):
    st_ = _state()
    s = io.sample_line(st_, t=0.5, n=33)
    assert np.allclose(s["zeta"], s["x"] + 0.5)
    io.write_series(tmp_path / "s.csv", s, {"t": 0.5})
    back = io.read_series(tmp_path / "s.csv")
    for k in s:
        assert np.array_equal(back[k], s[k])
    s = io.sample_line(st_, x=0.25, n=9)
    assert np.allclose(s["u"], 0.25 * s["t"])
    for kw in ({}, {"x": 0.1, "t": 0.1}, {"x": 2.0}, {"t": -1.0}):
        with pytest.raises(InvalidArgument):
            io.sample_line(st_, **kw)


def test_config_parsing(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[space]\np = 3\n[newton]\nabs_tol = 1e-10\nmethod = gauss-newton\n"
                 "[adapt]\ntheta = 0.4\n[mesh]\nmesh = 4x2\npaper_mesh = yes\n[run]\nT = 2.5\n")
    cfg = io.read_config(p)
    assert cfg["space"]["p"] == 3
    assert cfg["newton"] == {"abs_tol": 1e-10, "method": "gauss-newton"}
    assert cfg["adapt"]["theta"] == 0.4
    assert cfg["mesh"] == {"mesh": "4x2", "paper_mesh": True}
    assert cfg["run"]["T"] == 2.5
    for body in ("[space]\nq = 1\n", "[solver]\np = 1\n", "[space]\np = two\n", "p = 1\n"):
        p.write_text(body)
        with pytest.raises(InvalidArgument):
            io.read_config(p)
    with pytest.raises(InvalidArgument):
        io.read_config(tmp_path / "missing.ini")


def test_parse_mesh():
    assert io.parse_mesh("25x400") == (25, 400)
    assert io.parse_mesh("3X1") == (3, 1)
    for bad in ("25", "ax3", "0x3", "1x2x3"):
        with pytest.raises(InvalidArgument):
            io.parse_mesh(bad)
