import numpy as np
import pytest

from spacetime_swe.cases import dambreak_case, manufactured_case, tidal_case
from spacetime_swe.errors import InvalidArgument, NonConvergence, SolverFailure
from spacetime_swe.fespace import SpaceConfig
from spacetime_swe.forms import FormAssembler, TrialState, make_spaces
from spacetime_swe.mesh import BoundaryTag, bisect, build_structured, uniform_refine
from spacetime_swe.solver import (Condenser, NewtonConfig, apply_initial_conditions,
                                  condensed_step, initial_guess, newton_solve, saddle_step,
                                  solve)


def _spaces(spec, nx=3, nt=2, marks=(0, 4), p=2):
    m = build_structured(spec.x_range, spec.t_range, nx, nt, inflow_side=spec.inflow_side)
    return make_spaces(bisect(m, list(marks)), SpaceConfig(p))


CASES = {"manufactured": (manufactured_case(T=0.5), 0.5),
         "linearized": (manufactured_case(T=0.5, linearized=True), 0.5),
         "tidal": (tidal_case(T=20000.0), 0.05),
         "dambreak": (dambreak_case(T=20.0), 2.0)}


@pytest.mark.parametrize("name", sorted(CASES))
@pytest.mark.parametrize("p", [1, 2, 3])
def test_condensed_step_matches_saddle_system(name, p, rng):
    spec, scale = CASES[name]
    spaces = _spaces(spec, p=p)
    U0 = initial_guess(spaces, spec)
    U = U0.with_vector(U0.vector() + scale * rng.standard_normal(spaces.n_trial))
    asm = FormAssembler(spaces, spec)
    step = condensed_step(U, spec, spaces, asm)
    delta, e = saddle_step(U, spec, spaces, asm)
    assert np.linalg.norm(step.delta - delta) <= 1e-8 * np.linalg.norm(delta)
    # the saddle representer is G^-1 (F - B(U) - B' dU); at dU = 0 it is the condensed one
    rep = Condenser(asm).representer(asm.residual_local(U))
    Jd = np.einsum("mij,mj->mi", asm.jacobian_local(U),
                   delta[spaces.trial_dofmap()]).reshape(e.shape)
    G = asm.gram_local()
    lhs = np.einsum("mcij,mcj->mci", G, e) + Jd
    assert np.allclose(lhs, -asm.residual_local(U), atol=1e-9 * np.abs(lhs).max())
    assert rep.coeffs.shape == e.shape


def test_cg_and_direct_agree(rng):
    spec = manufactured_case(T=0.5)
    spaces = _spaces(spec)
    U = initial_guess(spaces, spec)
    U = U.with_vector(U.vector() + 0.1 * rng.standard_normal(spaces.n_trial))
    a = condensed_step(U, spec, spaces).delta
    b = condensed_step(U, spec, spaces, linear_solver="cg").delta
    assert np.linalg.norm(a - b) <= 1e-8 * np.linalg.norm(a)


@pytest.mark.parametrize("method", ["newton", "gauss-newton"])
def test_newton_converges_quickly_and_keeps_initial_data(method):
    spec = manufactured_case(T=0.5)
    spaces = make_spaces(uniform_refine(build_structured((0, 1), (0, 0.5), 2, 1), 2),
                         SpaceConfig(2))
    res = solve(spec, spaces, NewtonConfig(method=method))
    assert res.iterations <= 6
    hist = res.history
    assert [h["iteration"] for h in hist] == list(range(len(hist)))
    assert hist[-1]["step_energy_norm"] <= max(1e-14, 1e-12 * hist[0]["step_energy_norm"]) \
        or hist[-1]["step_energy_norm"] <= 1e-8 * hist[0]["step_energy_norm"]
    idx, vals = apply_initial_conditions(spaces, spec)
    assert np.array_equal(res.state.vector()[idx], vals)
    dofs = spaces.zeta.boundary_dofs_by_tag[int(BoundaryTag.INITIAL_TIME)]
    x = spaces.zeta.dof_coords[dofs, 0]
    assert np.array_equal(res.state.zeta.coeffs[dofs], spec.zeta0(x))


def test_linear_problem_converges_in_one_step():
    spec = manufactured_case(T=0.5, linearized=True)
    spaces = _spaces(spec)
    res = solve(spec, spaces)
    assert res.iterations == 1


def test_newton_from_zero_guess_reaches_same_state():
    spec = manufactured_case(T=0.5)
    spaces = _spaces(spec)
    a = solve(spec, spaces)
    b = solve(spec, spaces, U0=TrialState.zeros(spaces))
    assert np.allclose(a.state.vector(), b.state.vector(), atol=1e-9)


def test_linear_ic_interpolation_is_vertex_interpolant():
    spec = dambreak_case(T=20.0)
    spaces = make_spaces(build_structured(spec.x_range, spec.t_range, 5, 1,
                                          inflow_side="right"), SpaceConfig(2))
    U = initial_guess(spaces, spec)
    dofs = spaces.zeta.boundary_dofs_by_tag[int(BoundaryTag.INITIAL_TIME)]
    z = U.zeta.coeffs[dofs]
    assert z.min() >= 5.0 and z.max() <= 10.0
    # midpoint of the element holding the step sits halfway
    x = spaces.zeta.dof_coords[dofs, 0]
    assert z[np.isclose(x, 1000.0)] == pytest.approx(7.5)
    nodal = spec.replace(ic_interpolation="nodal")
    assert initial_guess(spaces, nodal).zeta.coeffs[dofs].max() == 10.0


def test_newton_config_validation():
    for bad in ({"abs_tol": 0.0}, {"rel_tol": -1.0}, {"max_iter": 0}, {"max_halvings": -1},
                {"linear_solver": "gmres"}, {"method": "picard"}):
        with pytest.raises(InvalidArgument):
            NewtonConfig(**bad)


def test_nonconvergence_carries_history():
    spec = manufactured_case(T=0.5)
    spaces = _spaces(spec)
    with pytest.raises(NonConvergence) as info:
        solve(spec, spaces, NewtonConfig(max_iter=1))
    assert len(info.value.history) == 2


def test_indefinite_gram_reports_worst_element(monkeypatch):
    spec = manufactured_case(T=0.5)
    spaces = _spaces(spec)
    real = FormAssembler.gram_local

    def broken(self):
        G = real(self).copy()
        G[2, 1] *= -1.0
        return G

    monkeypatch.setattr(FormAssembler, "gram_local", broken)
    with pytest.raises(SolverFailure) as info:
        solve(spec, spaces)
    assert info.value.worst_element == 2


def test_newton_result_csv(tmp_path):
    spec = manufactured_case(T=0.5)
    res = solve(spec, _spaces(spec))
    path = tmp_path / "newton.csv"
    res.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,residual_v_norm,step_energy_norm,step_halvings,direction"
    assert len(lines) == len(res.history) + 1


def test_linear_problem_one_step_from_zero():
    spec = manufactured_case(T=0.5, linearized=True)
    spaces = _spaces(spec)
    asm = FormAssembler(spaces, spec)
    U = TrialState.zeros(spaces)
    idx, vals = apply_initial_conditions(spaces, spec)
    v = U.vector()
    v[idx] = vals
    U = U.with_vector(v)
    U1 = U.with_vector(v + condensed_step(U, spec, spaces, asm).delta)
    second = condensed_step(U1, spec, spaces, asm)
    assert np.abs(second.delta).max() <= 1e-12
    # at the discrete minimizer the residual is orthogonal to B' G^-1, so b = 0
    assert np.abs(second.rhs[np.setdiff1d(np.arange(spaces.n_trial), idx)]).max() <= 1e-12


def test_discrete_solution_gives_zero_step():
    spec = manufactured_case(T=0.5)
    spaces = _spaces(spec)
    res = solve(spec, spaces)
    step = condensed_step(res.state, spec, spaces)
    assert np.linalg.norm(step.delta) <= 1e-10 * np.linalg.norm(res.state.vector())


def test_zero_data_problem_stays_zero():
    from spacetime_swe.forms import PhysicalParams, ProblemSpec
    spec = ProblemSpec(PhysicalParams(mu=1e-3, tau_bf=1.0, h_b=lambda x: 1.0 + 0 * x),
                       t_range=(0.0, 1.0))
    spaces = _spaces(spec)
    res = solve(spec, spaces, U0=TrialState.zeros(spaces))
    assert res.iterations <= 1
    assert not np.any(res.state.vector())


def test_energy_identity_and_condensed_matrix(rng):
    spec = manufactured_case(T=0.5)
    spaces = _spaces(spec)
    asm = FormAssembler(spaces, spec)
    U = initial_guess(spaces, spec)
    U = U.with_vector(U.vector() + 0.3 * rng.standard_normal(spaces.n_trial))
    R = asm.residual_local(U)
    cond = Condenser(asm)
    rep = cond.representer(R)
    # (e, phi)_V = F(phi) - B(U; phi) for every broken basis function
    Ge = np.einsum("mcij,mcj->mci", asm.gram_local(), rep.coeffs)
    assert np.allclose(Ge, -R, atol=1e-10 * np.abs(R).max())
    A, _ = cond.condensed(R, asm.jacobian_local(U))
    A = A.toarray()
    assert np.allclose(A, A.T, atol=1e-12 * np.abs(A).max())
    assert np.linalg.eigvalsh(A).min() >= -1e-10 * np.abs(A).max()


@pytest.mark.parametrize("name", ["manufactured", "dambreak", "tidal"])
def test_residual_nonincreasing_and_constraints_fixed(name):
    spec, _ = CASES[name]
    spaces = _spaces(spec, nx=6, nt=2)
    res = solve(spec, spaces)
    norms = [h["residual_v_norm"] for h in res.history]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(norms, norms[1:]))
    idx, vals = apply_initial_conditions(spaces, spec)
    assert np.array_equal(res.state.vector()[idx], vals)


def test_cg_newton_matches_direct():
    spec = manufactured_case(T=0.5)
    spaces = _spaces(spec)
    a = solve(spec, spaces)
    b = solve(spec, spaces, NewtonConfig(linear_solver="cg"))
    assert np.allclose(a.state.vector(), b.state.vector(), atol=1e-9)
