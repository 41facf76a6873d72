import numpy as np
import pytest
from quadrobin.coefficients import PAIRS, PARAMS, first_tables, second_tables
from quadrobin.errors import ConditioningError, ContractError, DomainError
from quadrobin.geometry import QuadParams
from quadrobin.mesh import symmetry_permutation
from quadrobin.sensitivity import (
    SensitivityReport,
    Workspace,
    eigenvector_derivative,
    fd_gradient,
    first_derivative,
    gradient,
    hessian,
    hessian_at_square_closed_form,
    second_derivative,
    sensitivity_report,
    verify_local_max,
)
from quadrobin.solver import solve_quad
from quadrobin.square_exact import quadrature_norms, solve_square
GENERIC = QuadParams(0.3, -0.1, 1.2, 0.9)
# ---------------------------------------------------------------------------
# coefficient tables
def test_first_tables_match_hand_derivatives_at_square():
    p = QuadParams.square(1.0)
    tab = first_tables(p)
    # d/da1 of the upper matrix [[S1/c^2 + a1^2/S1, -a1 c/S1], [., c^2/S1]]
    assert np.allclose(tab["a1"].G_upper, [[0.0, -1.0], [-1.0, 0.0]], atol=1e-15)
    assert np.allclose(tab["a1"].G_lower, 0.0, atol=1e-15)
    # d/dc: upper = lower = diag(-2S/c^3 ..., 2c/Sj) = diag(-2, 2) at the square
    assert np.allclose(tab["c"].G_upper, np.diag([-2.0, 2.0]), atol=1e-15)
    assert np.allclose(tab["c"].G_lower, np.diag([-2.0, 2.0]), atol=1e-15)
    # d/dS1: upper diag(1/c^2 - a^2/S1^2, -c^2/S1^2) = diag(1, -1); lower flips
    assert np.allclose(tab["S1"].G_upper, np.diag([1.0, -1.0]), atol=1e-15)
    assert np.allclose(tab["S1"].G_lower, np.diag([-1.0, 1.0]), atol=1e-15)
    # mass weights move only along S1
    assert np.allclose(tab["S1"].mass, [1.0, -1.0], atol=1e-15)
    for v in ("a1", "a2", "c"):
        assert np.allclose(tab[v].mass, 0.0, atol=1e-15)
    # the edge-ratio derivative in c vanishes at the square (S^2/c^3 = c)
    assert np.allclose(tab["c"].edge, 0.0, atol=1e-15)
def test_tables_match_finite_differences_of_coefficients(rng):
    from quadrobin.assembly import boundary_weights_transformed, pullback_matrices
    p = GENERIC
    h = 1e-6
    tab1 = first_tables(p)
    for k, v in enumerate(PARAMS):
        up = QuadParams(**{**p.to_dict(), v: getattr(p, v) + h})
        dn = QuadParams(**{**p.to_dict(), v: getattr(p, v) - h})
        fd_Gu = (pullback_matrices(up)[0] - pullback_matrices(dn)[0]) / (2 * h)
        fd_Gl = (pullback_matrices(up)[1] - pullback_matrices(dn)[1]) / (2 * h)
        assert np.allclose(tab1[v].G_upper, fd_Gu, atol=1e-7)
        assert np.allclose(tab1[v].G_lower, fd_Gl, atol=1e-7)
        fd_edge = (
            boundary_weights_transformed(up, 1.0) - boundary_weights_transformed(dn, 1.0)
        ) / (2 * h)
        assert np.allclose(tab1[v].edge, fd_edge, atol=1e-7)
    # one second-derivative spot check: d2/dc2 of the edge ratios
    tab2 = second_tables(p)
    up = QuadParams(**{**p.to_dict(), "c": p.c + h})
    dn = QuadParams(**{**p.to_dict(), "c": p.c - h})
    fd2 = (
        boundary_weights_transformed(up, 1.0)
        - 2 * boundary_weights_transformed(p, 1.0)
        + boundary_weights_transformed(dn, 1.0)
    ) / h**2
    assert np.allclose(tab2[("c", "c")].edge, fd2, atol=1e-3)
def test_second_tables_are_pair_symmetric():
    tab = second_tables(GENERIC)
    for v1, v2 in PAIRS:
        assert tab[(v1, v2)] is tab[(v2, v1)]
# ---------------------------------------------------------------------------
# first derivatives
def test_gradient_vanishes_at_the_square(meshes):
    for n in (16, 32):
        grad = gradient(QuadParams.square(), -1.0, meshes(n))
        assert np.abs(grad).max() <= 1e-9
def test_first_derivative_matches_fd(meshes):
    mesh = meshes(32)
    state = solve_quad(GENERIC, -1.0, mesh)
    fd = fd_gradient(GENERIC, -1.0, mesh)
    for k, v in enumerate(PARAMS):
        closed = first_derivative(GENERIC, -1.0, v, mesh, state=state)
        assert abs(closed - fd[k]) <= 1e-5 * max(1.0, abs(fd[k]))
def test_first_derivative_reflection_antisymmetry(meshes):
    mesh = meshes(16)
    p = QuadParams(0.4, 0.2, 1.1, 1.0)
    mirrored = QuadParams(-0.4, -0.2, 1.1, 1.0)
    d1 = first_derivative(p, -1.0, "a1", mesh)
    d2 = first_derivative(mirrored, -1.0, "a1", mesh)
    assert d1 == pytest.approx(-d2, rel=1e-9)
# ---------------------------------------------------------------------------
# eigenvector derivatives
def test_eigenvector_derivative_symmetries_at_square(meshes):
    mesh = meshes(16)
    state = solve_quad(QuadParams.square(), -1.0, mesh)
    ws = Workspace(state)
    scale = ws.psi.max()
    perm_x = symmetry_permutation(mesh, "x")
    perm_y = symmetry_permutation(mesh, "y")
    psi_c = ws.eigenvector_derivative("c")
    assert np.abs(psi_c[perm_x] - psi_c).max() <= 1e-10 * max(scale, np.abs(psi_c).max())
    assert np.abs(psi_c[perm_y] - psi_c).max() <= 1e-10 * max(scale, np.abs(psi_c).max())
    psi_s = ws.eigenvector_derivative("S1")
    assert np.abs(psi_s[perm_x] - psi_s).max() <= 1e-10 * max(scale, np.abs(psi_s).max())
def test_eigenvector_derivative_directional_consistency(meshes):
    mesh = meshes(16)
    state = solve_quad(GENERIC, -1.0, mesh)
    psi = state.psi_h
    psi_c = eigenvector_derivative(GENERIC, -1.0, "c", mesh, state=state)
    def perturbed_eigvec(t):
        q = QuadParams(GENERIC.a1, GENERIC.a2, GENERIC.c + t, GENERIC.S1)
        v = solve_quad(q, -1.0, mesh).psi_h
        return v if v @ psi > 0 else -v
    errs = []
    for t in (2e-3, 1e-3):
        approx = (perturbed_eigvec(t) - psi) / t
        errs.append(np.linalg.norm(approx - psi_c))
    assert errs[0] / errs[1] == pytest.approx(2.0, abs=0.5)  # first-order accurate
    assert errs[1] <= 0.05 * np.linalg.norm(psi_c)
def test_eigenvector_derivative_mass_constraint(meshes):
    mesh = meshes(16)
    ws = Workspace(solve_quad(GENERIC, -1.0, mesh))
    M = ws.M
    for v in PARAMS:
        psi_v = ws.eigenvector_derivative(v)
        Mv = ws.mass_derivative(v)
        expected = 0.0 if Mv is None else -0.5 * float(ws.psi @ (Mv @ ws.psi))
        assert float(ws.psi @ (M @ psi_v)) == pytest.approx(expected, abs=1e-11)
def test_tiny_gap_raises_conditioning_error(meshes):
    state = solve_quad(GENERIC, -1.0, meshes(8))
    state.gap_estimate = 1e-12
    with pytest.raises(ConditioningError):
        Workspace(state)
def test_workspace_requires_transformed_form(meshes):
    state = solve_quad(GENERIC, -1.0, meshes(8), form="plain")
    with pytest.raises(ContractError):
        Workspace(state)
# ---------------------------------------------------------------------------
# second derivatives
def test_second_derivative_cross_terms_vanish_at_square(meshes):
    mesh = meshes(32)
    state = solve_quad(QuadParams.square(), -1.0, mesh)
    ws = Workspace(state)
    for v1, v2 in (("a1", "c"), ("a2", "c"), ("a1", "S1"), ("a2", "S1"), ("c", "S1")):
        assert abs(ws.second(v1, v2)) <= 1e-6
def test_second_derivative_mixed_partial_symmetry(meshes):
    mesh = meshes(16)
    state = solve_quad(GENERIC, -1.0, mesh)
    ws = Workspace(state)
    for v1, v2 in PAIRS:
        forward = ws.second(v1, v2)
        backward = ws.second(v2, v1)
        assert abs(forward - backward) <= 1e-9 * max(1.0, abs(forward))
def test_hessian_matches_fd(meshes):
    mesh = meshes(24)
    H = hessian(GENERIC, -1.0, mesh)
    Hfd = pytest.importorskip("quadrobin.sensitivity").fd_hessian(GENERIC, -1.0, mesh)
    rel = np.abs(H - Hfd) / np.maximum(1.0, np.abs(Hfd))
    assert rel.max() <= 1e-2
def test_gram_form_positive_semidefinite(rng, meshes):
    ws = Workspace(solve_quad(GENERIC, -1.0, meshes(16)))
    for _ in range(100):
        f = rng.standard_normal(len(ws.psi))
        assert ws.gram(f, f) >= -1e-12 * np.dot(f, f)
def test_concavity_implication_at_square(meshes):
    # whenever the assembled second-derivative form is negative at the
    # eigenvector, the full second derivative is negative as well (the
    # eigenvector-relaxation correction can only push it down)
    mesh = meshes(16)
    for alpha in (-0.25, -1.0, -4.0):
        ws = Workspace(solve_quad(QuadParams.square(), alpha, mesh))
        for v in PARAMS:
            pure = float(ws.psi @ (ws.stiffness_second_derivative(v, v) @ ws.psi))
            full = ws.second(v, v)
            assert full <= pure + 1e-10
            if pure < 0.0:
                assert full < 0.0
# ---------------------------------------------------------------------------
# closed-form Hessian at the square
def test_closed_form_pure_parts_match_quadrature_norms(meshes):
    for alpha in (-0.25, -1.0):
        sq = hessian_at_square_closed_form(alpha, 1.0, meshes(8))
        qn = quadrature_norms(solve_square(alpha, 1.0))
        grad, trace = qn.grad, qn.edges.sum()
        S = 1.0
        assert sq.plain_form_pure["a"] == pytest.approx(
            grad / (2 * S) + alpha * trace / (8 * S), abs=1e-10
        )
        assert sq.plain_form_pure["c"] == pytest.approx(
            4 * grad / S + 2 * alpha * trace / S, abs=1e-10
        )
        assert sq.plain_form_pure["S1"] == pytest.approx(
            3 * grad / S**2 + 5 * alpha * trace / (4 * S**2), abs=1e-10
        )
        assert sq.pure_forms["S1"] == pytest.approx(
            grad / S**2 + alpha * trace / (4 * S**2), abs=1e-10
        )
def test_pure_form_signs_flip_at_large_alpha(meshes):
    mesh = meshes(8)
    small = hessian_at_square_closed_form(-0.25, 1.0, mesh)
    assert all(v < 0 for v in small.pure_forms.values())
    large = hessian_at_square_closed_form(-4.0, 1.0, mesh)
    # the a- and S1-coefficient parts turn positive for large |alpha| (their
    # trace deficit is below 1/2); the c-part stays negative; the Hessian
    # entries stay negative because the relaxation corrections dominate
    assert large.pure_forms["a"] > 0
    assert large.pure_forms["S1"] > 0
    assert large.pure_forms["c"] < 0
    assert np.all(np.diag(large.matrix) < 0)
def test_closed_form_hessian_close_to_discrete(meshes):
    mesh = meshes(24)
    closed = hessian_at_square_closed_form(-1.0, 1.0, mesh)
    discrete = hessian(QuadParams.square(), -1.0, mesh)
    assert np.allclose(closed.matrix, discrete, atol=2e-3)
    assert closed.matrix[0, 1] == pytest.approx(discrete[0, 1], abs=1e-9)
def test_closed_form_requires_negative_alpha(meshes):
    with pytest.raises(DomainError):
        hessian_at_square_closed_form(0.5, 1.0, meshes(8))
def test_verify_local_max(meshes):
    mesh = meshes(24)
    for alpha in (-0.25, -1.0, -4.0):
        verdict = verify_local_max(alpha, 1.0, mesh)
        assert verdict.negative_definite
        assert verdict.trace_condition and verdict.det_condition
        assert verdict.offblock_max <= 1e-6
        assert verdict.gram_cauchy_schwarz >= -1e-12
        assert np.abs(verdict.gradient).max() <= 1e-8
        assert verdict.verdict == "negative definite"
        data = verdict.to_dict()
        assert data["negative_definite"] is True
# ---------------------------------------------------------------------------
# reports
def test_sensitivity_report_methods_and_roundtrip(meshes):
    mesh = meshes(16)
    rep = sensitivity_report(GENERIC, -1.0, mesh, method="discrete_formula")
    again = SensitivityReport.from_json(rep.to_json())
    assert again.params == rep.params
    assert np.allclose(again.hessian, rep.hessian)
    rep_fd = sensitivity_report(GENERIC, -1.0, mesh, method="finite_difference")
    assert np.allclose(rep.gradient, rep_fd.gradient, atol=1e-4)
    closed = sensitivity_report(QuadParams.square(), -1.0, mesh, method="closed_form")
    assert np.all(closed.gradient == 0.0)
    assert closed.hessian[0, 2] == 0.0
    with pytest.raises(ContractError):
        sensitivity_report(GENERIC, -1.0, mesh, method="closed_form")
    with pytest.raises(ValueError):
        sensitivity_report(GENERIC, -1.0, mesh, method="nope")
