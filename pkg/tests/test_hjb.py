import json

import numpy as np
import pytest

from ccbo.basis import (
    BasisFamily,
    BoxDomain,
    HyperbolicCross,
    MultiIndexBasis,
    TotalDegree,
    eval_basis,
    eval_basis_gradient,
)
from ccbo.galerkin import GalerkinWorkspace, assemble_load_separable
from ccbo.hjb import (
    BasisMismatchError,
    HJBConfig,
    MonteCarloLoad,
    VersionMismatchError,
    discount_continuation,
    feedback_field,
    integrate_flow,
    load_value_function,
    neg_gradient_field,
    save_value_function,
    solve_hjb,
    successive_approximation,
    value_update_step,
)
from ccbo.objectives import (
    DOUBLE_WELL_GLOBAL_MIN,
    DOUBLE_WELL_LOCAL_MIN,
    double_well_1d,
    quadratic,
    rastrigin,
)


def closed_form_quadratic_coefficient(q, mu=0.1, eps=0.1):
    """Fixed point of mu*s + (2/eps) s^2 = q for the quadratic objective."""
    return eps * (-mu + np.sqrt(mu * mu + 8.0 * q / eps)) / 4.0


def quadratic_setup(q_diag, degree=4):
    d = len(q_diag)
    basis = MultiIndexBasis(BasisFamily.MONOMIAL, BoxDomain.cube(2.0, d), TotalDegree(degree))
    obj = quadratic(np.diag(q_diag))
    ws = GalerkinWorkspace.build(basis)
    load = assemble_load_separable(basis, obj.separable)
    return basis, obj, ws, load


def test_first_iterate_is_projected_gradient_descent():
    # from the zero control, one update solves -mu*mass*c = -F, i.e. the
    # value is the projected objective divided by mu and the next control
    # is -(1/(mu*eps)) grad of that projection
    basis = MultiIndexBasis(BasisFamily.LEGENDRE, BoxDomain.cube(2.0, 2), HyperbolicCross(2))
    obj = rastrigin(2)
    ws = GalerkinWorkspace.build(basis)
    load = assemble_load_separable(basis, obj.separable)
    mu, eps = 0.1, 0.1
    c1 = value_update_step(ws, load, np.zeros(basis.size), mu, eps)
    projection = ws.project(load)
    assert np.allclose(c1, projection / mu, rtol=1e-10, atol=1e-10)


def test_zero_objective_fixed_point():
    basis = MultiIndexBasis(BasisFamily.MONOMIAL, BoxDomain.cube(2.0, 1), TotalDegree(3))
    ws = GalerkinWorkspace.build(basis)
    cfg = HJBConfig()
    c, report = successive_approximation(ws, np.zeros(basis.size), 0.1, cfg)
    assert np.allclose(c, 0.0, atol=0)
    assert report.iterations == 1


def test_quadratic_scalar_fixed_point():
    basis, obj, ws, load = quadratic_setup([1.0])
    cfg = HJBConfig(tol=1e-9)
    c, report = successive_approximation(ws, load, 0.1, cfg)
    idx = [tuple(r) for r in basis.exponents].index((2,))
    s_expected = closed_form_quadratic_coefficient(1.0)
    assert abs(c[idx] - s_expected) < 1e-4
    assert report.iterations <= 30
    others = np.delete(c, idx)
    assert np.max(np.abs(others)) < 1e-6


def test_quadratic_fixed_point_residual():
    basis, obj, ws, load = quadratic_setup([1.0])
    cfg = HJBConfig(tol=1e-9)
    c, _ = successive_approximation(ws, load, 0.1, cfg)
    c_again = value_update_step(ws, load, c, 0.1, cfg.epsilon)
    assert np.linalg.norm(c_again - c) / max(1.0, np.linalg.norm(c)) < 1e-8


@pytest.mark.parametrize("q_diag", [[0.5], [2.0], [0.5, 1.0], [1.0, 2.0], [0.5, 1.0, 2.0]])
def test_quadratic_closed_form_multidim(q_diag):
    basis, obj, ws, load = quadratic_setup(q_diag)
    cfg = HJBConfig(tol=1e-10)
    c, _ = successive_approximation(ws, load, 0.1, cfg)
    exps = [tuple(r) for r in basis.exponents]
    d = len(q_diag)
    for j, q in enumerate(q_diag):
        r = tuple(2 if p == j else 0 for p in range(d))
        assert abs(c[exps.index(r)] - closed_form_quadratic_coefficient(q)) < 1e-4
    quad_rows = {exps.index(tuple(2 if p == j else 0 for p in range(d))) for j in range(d)}
    for i, coeff in enumerate(c):
        if i not in quad_rows:
            assert abs(coeff) < 1e-6


def test_quadratic_feedback_is_linear():
    basis, obj, ws, load = quadratic_setup([1.0, 2.0])
    cfg = HJBConfig(tol=1e-10)
    c, _ = successive_approximation(ws, load, 0.1, cfg)
    from ccbo.hjb import ValueFunctionApprox
    vfa = ValueFunctionApprox(basis, c, cfg.epsilon)
    rng = np.random.default_rng(4)
    pts = rng.uniform(-2, 2, size=(100, 2))
    s = np.array([closed_form_quadratic_coefficient(q) for q in (1.0, 2.0)])
    expected = -(2.0 / cfg.epsilon) * pts * s
    assert np.max(np.abs(vfa.feedback(pts) - expected)) < 1e-4


def test_monotone_value_iterates_quadratic():
    basis, obj, ws, load = quadratic_setup([1.0])
    cfg = HJBConfig(tol=1e-10)
    _, report = successive_approximation(ws, load, 0.1, cfg)
    vals = report.monitored_values[1:]  # solved iterates only
    assert np.diff(vals, axis=0).max() <= 1e-6


def test_feedback_matches_finite_difference_of_value():
    basis = MultiIndexBasis(BasisFamily.LEGENDRE, BoxDomain.cube(2.0, 2), TotalDegree(4))
    obj = rastrigin(2)
    vfa, _ = solve_hjb(basis, obj, HJBConfig())
    rng = np.random.default_rng(9)
    pts = rng.uniform(-1.9, 1.9, size=(100, 2))
    h = 1e-5
    u = vfa.feedback(pts)
    for p in range(2):
        e = np.zeros(2)
        e[p] = h
        dv = (vfa.value(pts + e) - vfa.value(pts - e)) / (2 * h)
        expected = -dv / vfa.epsilon
        scale = np.maximum(np.abs(expected), 1.0)
        assert np.max(np.abs(u[:, p] - expected) / scale) < 1e-6


def test_value_and_feedback_zero_coeffs():
    basis = MultiIndexBasis(BasisFamily.MONOMIAL, BoxDomain.cube(2.0, 2), TotalDegree(2))
    from ccbo.hjb import ValueFunctionApprox
    vfa = ValueFunctionApprox(basis, np.zeros(basis.size), 0.1)
    pts = np.array([[0.3, -0.4], [1.0, 1.0]])
    assert np.all(vfa.value(pts) == 0.0)
    assert np.all(vfa.feedback(pts) == 0.0)


def test_continuation_single_stage_when_tol_mu_large():
    basis, obj, ws, load = quadratic_setup([1.0])
    cfg = HJBConfig(mu=0.1, tol_mu=0.5)
    _, report = discount_continuation(ws, load, cfg)
    assert report.mu_schedule == [0.1]


def test_continuation_schedule_matches_geometric_decay():
    basis, obj, ws, load = quadratic_setup([1.0])
    cfg = HJBConfig(mu=0.1, theta=0.5, tol_mu=0.01)
    _, report = discount_continuation(ws, load, cfg)
    assert report.mu_schedule == pytest.approx([0.1, 0.05, 0.025, 0.0125])


def test_continuation_warm_start_reduces_initial_change():
    basis, obj, ws, load = quadratic_setup([1.0, 1.0])
    cfg = HJBConfig(mu=0.1, theta=0.5, tol_mu=0.01)
    _, report = discount_continuation(ws, load, cfg)
    cold = report.stages[0].initial_change
    for stage in report.stages[1:]:
        assert stage.initial_change < cold


def test_solver_deterministic_across_reruns():
    basis = MultiIndexBasis(BasisFamily.MONOMIAL, BoxDomain.cube(2.0, 2), HyperbolicCross(2))
    obj = rastrigin(2)
    cfg = HJBConfig(load_mode=MonteCarloLoad(n_samples=50_000, seed=5))
    vfa1, _ = solve_hjb(basis, obj, cfg)
    basis2 = MultiIndexBasis(BasisFamily.MONOMIAL, BoxDomain.cube(2.0, 2), HyperbolicCross(2))
    vfa2, _ = solve_hjb(basis2, obj, cfg)
    assert np.array_equal(vfa1.coeffs, vfa2.coeffs)
    assert np.array_equal(vfa1.objective_projection, vfa2.objective_projection)


def test_residual_orthogonality_independent_quadrature():
    # re-evaluate the projected-equation residual by a quadrature that never
    # touches the assembly tables
    basis = MultiIndexBasis(BasisFamily.LEGENDRE, BoxDomain.cube(2.0, 2), HyperbolicCross(2))
    obj = rastrigin(2)
    cfg = HJBConfig()
    ws = GalerkinWorkspace.build(basis)
    load = assemble_load_separable(basis, obj.separable)
    c, report = discount_continuation(ws, load, cfg)
    mu_final = report.mu_schedule[-1]

    xg, wg = np.polynomial.legendre.leggauss(64)
    X, Y = np.meshgrid(2 * xg, 2 * xg, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    w2 = np.outer(2 * wg, 2 * wg).ravel()

    phi = eval_basis(basis, pts)
    grad = eval_basis_gradient(basis, pts)
    V = phi @ c
    DV = np.tensordot(grad, c, axes=([1], [0]))  # (m, d)
    # with u = -(1/eps) DV the frozen-control residual collapses to
    # -mu V - (1/(2 eps)) |DV|^2 + f
    integrand = -mu_final * V - (0.5 / cfg.epsilon) * np.sum(DV * DV, axis=1) + obj(pts)
    resid = phi.T @ (integrand * w2)
    scale = np.linalg.norm(load, ord=np.inf)
    assert np.max(np.abs(resid)) <= 10.0 * cfg.tol * scale


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def double_well_solves():
    # the iteration from the zero control needs a large initial discount on
    # this problem (high degree, wide domain); continuation tracks it down
    obj = double_well_1d()
    out = {}
    for degree in (2, 8):
        basis = MultiIndexBasis(BasisFamily.LEGENDRE, BoxDomain((-4.0,), (4.0,)),
                                TotalDegree(degree))
        vfa, _ = solve_hjb(basis, obj, HJBConfig(mu=10.0))
        out[degree] = vfa
    return obj, out


def test_flow_zero_field_is_constant():
    times, path = integrate_flow(lambda x: np.zeros_like(x), np.array([1.5]), 0.1, 1.0)
    assert path.shape == (11, 1)
    assert np.all(path == 1.5)


def test_gradient_flow_trapped_in_local_minimum(double_well_solves):
    obj, _ = double_well_solves
    _, path = integrate_flow(neg_gradient_field(obj, fd_step=1e-6), np.array([-2.0]),
                             dt=0.01, t_final=10.0)
    assert abs(path[-1, 0] - DOUBLE_WELL_LOCAL_MIN) < 0.1


def test_controlled_flow_escapes_to_global_minimum(double_well_solves):
    obj, solves = double_well_solves
    _, path = integrate_flow(feedback_field(solves[8]), np.array([-2.0]),
                             dt=0.01, t_final=10.0)
    assert abs(path[-1, 0] - DOUBLE_WELL_GLOBAL_MIN) < 0.2


def test_low_degree_controlled_flow_misses_global_minimum(double_well_solves):
    obj, solves = double_well_solves
    _, path = integrate_flow(feedback_field(solves[2]), np.array([-2.0]),
                             dt=0.01, t_final=10.0)
    assert abs(path[-1, 0] - DOUBLE_WELL_GLOBAL_MIN) >= 0.2


def test_flow_divergence_abort():
    from ccbo.hjb import FlowDivergedError
    with pytest.raises(FlowDivergedError) as err:
        integrate_flow(lambda x: x * 10.0, np.array([1.0]), dt=1.0, t_final=20.0)
    assert err.value.step > 0


# ---------------------------------------------------------------------------
# coefficient files
# ---------------------------------------------------------------------------

def test_save_load_round_trip(tmp_path):
    basis, obj, ws, load = quadratic_setup([1.0, 2.0])
    vfa, _ = solve_hjb(basis, obj, HJBConfig())
    path = tmp_path / "vf.json"
    save_value_function(vfa, path, config_hash="abc123")
    loaded = load_value_function(path)
    assert np.array_equal(loaded.coeffs, vfa.coeffs)
    assert np.array_equal(loaded.objective_projection, vfa.objective_projection)
    assert loaded.epsilon == vfa.epsilon
    assert np.array_equal(loaded.basis.exponents, vfa.basis.exponents)

    path2 = tmp_path / "vf2.json"
    save_value_function(loaded, path2, config_hash="abc123")
    assert path.read_bytes() == path2.read_bytes()


def test_load_rejects_tampered_indices(tmp_path):
    basis, obj, ws, load = quadratic_setup([1.0])
    vfa, _ = solve_hjb(basis, obj, HJBConfig())
    path = tmp_path / "vf.json"
    save_value_function(vfa, path)
    doc = json.loads(path.read_text())
    doc["indices"][1] = [7]
    path.write_text(json.dumps(doc))
    with pytest.raises(BasisMismatchError):
        load_value_function(path)


def test_load_rejects_wrong_version(tmp_path):
    basis, obj, ws, load = quadratic_setup([1.0])
    vfa, _ = solve_hjb(basis, obj, HJBConfig())
    path = tmp_path / "vf.json"
    save_value_function(vfa, path)
    doc = json.loads(path.read_text())
    doc["format_version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(VersionMismatchError):
        load_value_function(path)

    path.write_text("{not json")
    from ccbo.hjb import MalformedFileError
    with pytest.raises(MalformedFileError):
        load_value_function(path)


def test_solver_rejects_dimension_mismatch():
    basis = MultiIndexBasis(BasisFamily.MONOMIAL, BoxDomain.cube(2.0, 2), TotalDegree(2))
    with pytest.raises(ValueError):
        solve_hjb(basis, rastrigin(3), HJBConfig())


def test_damped_rescue_settles_limit_cycle():
    # at mu = 25 the plain update cycles on this basis; the automatic damped
    # retry settles it when warm-started from the previous continuation level
    obj = rastrigin(2)
    basis = MultiIndexBasis(BasisFamily.LEGENDRE, BoxDomain.cube(2.0, 2), TotalDegree(4))
    ws = GalerkinWorkspace.build(basis)
    load = assemble_load_separable(basis, obj.separable)
    cfg = HJBConfig(mu=50.0)
    c50, rep50 = successive_approximation(ws, load, 50.0, cfg)
    assert rep50.relaxation == 1.0
    c25, rep25 = successive_approximation(ws, load, 25.0, cfg, c_init=c50)
    assert rep25.relaxation < 1.0
    c_again = value_update_step(ws, load, c25, 25.0, cfg.epsilon)
    assert np.linalg.norm(c_again - c25) / max(1.0, np.linalg.norm(c25)) < 1e-6
