import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spacetime_swe.adapt import (AdaptConfig, IndicatorField, RunRecord, adapt_loop,
                                 dorfler_mark, energy_error, indicators, read_record, transfer)
from spacetime_swe.cases import manufactured_case
from spacetime_swe.errors import InvalidArgument
from spacetime_swe.fespace import SpaceConfig, interpolate
from spacetime_swe.forms import TrialState, make_spaces
from spacetime_swe.mesh import bisect, build_structured
from spacetime_swe.solver import solve


def _brute_force_minimal(eta, theta):
    """Smallest cardinality of any set reaching ``theta**2`` of the total."""
    eta2 = np.asarray(eta) ** 2
    target = theta**2 * eta2.sum()
    for k in range(len(eta2) + 1):
        for subset in itertools.combinations(range(len(eta2)), k):
            if eta2[list(subset)].sum() >= target * (1 - 1e-12):
                return k
    raise AssertionError("no set reached the target")


def _check_marking(eta, theta):
    marked = dorfler_mark(IndicatorField(np.asarray(eta)), theta)
    eta2 = np.asarray(eta) ** 2
    assert eta2[list(marked)].sum() >= theta**2 * eta2.sum() * (1 - 1e-12)
    assert len(marked) == _brute_force_minimal(eta, theta)


@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=12).filter(lambda v: sum(v) > 0),
       st.floats(0.05, 1.0))
def test_dorfler_matches_brute_force(eta, theta):
    _check_marking(eta, theta)


@pytest.mark.parametrize("theta", [0.3, 0.5, 0.7, 0.9])
def test_dorfler_on_solver_indicators_small_meshes(theta):
    spec = manufactured_case(T=0.5)
    for nx, nt in [(1, 1), (2, 1), (1, 2), (3, 1), (2, 2), (3, 2)]:
        m = build_structured(spec.x_range, spec.t_range, nx, nt)
        if m.n_triangles <= 8:
            m = bisect(m, [0])
        assert m.n_triangles <= 12
        res = solve(spec, make_spaces(m, SpaceConfig(2)))
        _check_marking(indicators(res.representer).eta, theta)


def test_dorfler_ties_and_extremes():
    assert dorfler_mark(np.ones(4), 0.5) == {0}
    assert dorfler_mark(np.array([1.0, 0.0, 2.0]), 1.0) == {0, 2}
    assert dorfler_mark(np.zeros(3), 0.5) == set()
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(InvalidArgument):
            dorfler_mark(np.ones(3), bad)
    with pytest.raises(InvalidArgument):
        AdaptConfig(theta=0.0)


def test_indicators_square_sum_to_estimate():
    spec = manufactured_case(T=0.5)
    res = solve(spec, make_spaces(build_structured((0, 1), (0, 0.5), 2, 2), SpaceConfig(2)))
    ind = indicators(res.representer)
    assert ind.estimate == pytest.approx(res.representer.norm, rel=1e-14)
    assert np.all(ind.eta >= 0)


def test_transfer_is_exact_for_polynomials():
    m = build_structured((0, 1), (0, 1), 2, 2)
    old = make_spaces(m, SpaceConfig(2))
    st_ = TrialState.zeros(old)
    st_.zeta.coeffs[:] = interpolate(lambda x, t: x**2 - x * t + 1, old.zeta).coeffs
    st_.u.coeffs[:] = interpolate(lambda x, t: t**2, old.u).coeffs
    st_.sigma.coeffs[:] = interpolate(lambda x, t: x + t, old.sigma).coeffs
    new = make_spaces(bisect(bisect(m, [0, 5]), [1, 2, 3]), SpaceConfig(2))
    moved = transfer(st_, new)
    x, t = new.zeta.dof_coords.T
    assert np.allclose(moved.zeta.coeffs, x**2 - x * t + 1, atol=1e-13)
    assert np.allclose(moved.u.coeffs, t**2, atol=1e-13)


def test_adapt_loop_reduces_estimate(tmp_path):
    spec = manufactured_case(T=0.5)
    ar = adapt_loop(spec, SpaceConfig(2), AdaptConfig(theta=0.5, max_refinements=6),
                    initial_mesh=(1, 1))
    est = ar.record.column("estimate")
    dofs = ar.record.column("n_dofs")
    assert len(ar.record) == 7
    assert np.all(np.diff(dofs) > 0)
    assert np.all(np.diff(est) < 0)
    # optimal rate for p = 2 in two space-time dimensions is N^-1
    assert np.polyfit(np.log(dofs), np.log(est), 1)[0] <= -0.8
    ar.mesh.check_conforming()
    path = tmp_path / "record.csv"
    ar.record.write_csv(path)
    back = read_record(path)
    assert back.metadata["case"] == "manufactured"
    assert back.metadata["theta"] == "0.5"
    for c in ("n_dofs", "estimate", "err_L2_zeta", "newton_iters"):
        assert np.array_equal(back.column(c), ar.record.column(c))


def test_adapt_stops_at_tolerance_and_budget():
    spec = manufactured_case(T=0.5)
    ar = adapt_loop(spec, adapt_cfg=AdaptConfig(max_refinements=20, tol=1e-2), initial_mesh=(1, 1))
    assert ar.record.rows[-1]["estimate"] <= 1e-2
    assert all(r["estimate"] > 1e-2 for r in ar.record.rows[:-1])
    ar = adapt_loop(spec, adapt_cfg=AdaptConfig(max_refinements=20, max_dofs=200),
                    initial_mesh=(1, 1))
    assert ar.record.rows[-1]["n_dofs"] >= 200
    assert all(r["n_dofs"] < 200 for r in ar.record.rows[:-1])


@pytest.mark.parametrize("level", [0, 1, 2])
def test_energy_error_surrogate_tracks_estimate(level):
    from spacetime_swe.mesh import uniform_refine
    spec = manufactured_case(T=0.5, linearized=True)
    spaces = make_spaces(uniform_refine(build_structured((0, 1), (0, 0.5), 2, 1), level),
                         SpaceConfig(2))
    res = solve(spec, spaces)
    ratio = res.representer.norm / energy_error(res.state, spec.exact, spec, spaces)
    assert 0.5 <= ratio <= 2.0


def test_record_column_and_len():
    rec = RunRecord()
    rec.append(n_dofs=3, estimate=0.5)
    rec.append(n_dofs=5, estimate=0.25)
    assert len(rec) == 2
    assert rec.column("n_dofs").tolist() == [3.0, 5.0]


def _rep_one_on_element(k):
    from spacetime_swe.forms import FormAssembler
    from spacetime_swe.solver import ErrorRepresenter
    spec = manufactured_case(T=0.5)
    m = build_structured((0, 1), (0, 0.5), 2, 1)
    spaces = make_spaces(m, SpaceConfig(2))
    asm = FormAssembler(spaces, spec)
    c = np.zeros((m.n_triangles, 3, asm.nr))
    c[k, 0] = 1.0  # the constant 1 on the v-component
    G = asm.gram_local()
    norms = np.sqrt(np.einsum("mci,mcij,mcj->m", c, G, c))
    return ErrorRepresenter(c, norms, spaces.test), m


def test_indicator_examples():
    rep, m = _rep_one_on_element(2)
    ind = indicators(rep)
    assert ind.eta[2] == pytest.approx(np.sqrt(m.areas[2]), rel=1e-13)
    assert np.count_nonzero(ind.eta) == 1
    rep.coeffs[:] = 0
    rep.element_norms[:] = 0
    assert indicators(rep).estimate == 0.0


def test_dorfler_examples_and_scale_invariance():
    assert dorfler_mark(np.array([4.0, 3.0, 2.0, 1.0]), 0.5) == {0}
    assert len(dorfler_mark(np.ones(100), 0.5)) == 25
    eta = np.random.default_rng(3).uniform(0, 1, 40)
    for c in (1e-6, 3.0, 1e4):
        assert dorfler_mark(c * eta, 0.6) == dorfler_mark(eta, 0.6)


def test_adapt_loop_trivial_stops():
    spec = manufactured_case(T=0.5)
    ar = adapt_loop(spec, adapt_cfg=AdaptConfig(max_refinements=0))
    assert len(ar.record) == 1
    ar = adapt_loop(spec, adapt_cfg=AdaptConfig(max_refinements=5, tol=1e3))
    assert len(ar.record) == 1


@pytest.mark.parametrize("mu", [0.0, 1e-5])
def test_estimate_strictly_decreases_over_eight_refinements(mu):
    spec = manufactured_case(T=0.5, mu=mu)
    ar = adapt_loop(spec, adapt_cfg=AdaptConfig(theta=0.5, max_refinements=8),
                    initial_mesh=(1, 1))
    est = ar.record.column("estimate")
    assert len(est) == 9
    assert np.all(np.diff(est) < 0)


def test_adapt_loop_failure_names_refinement_step(monkeypatch):
    from spacetime_swe import adapt as adapt_mod
    from spacetime_swe.errors import NonConvergence

    def fail(*args, **kwargs):
        raise NonConvergence("Newton did not converge in 1 iterations", [])

    monkeypatch.setattr(adapt_mod, "newton_solve", fail)
    with pytest.raises(NonConvergence, match="refinement step 0"):
        adapt_mod.adapt_loop(manufactured_case(T=0.5), initial_mesh=(1, 1))
