from dataclasses import replace
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from mmdg.assembly import (
    NonFiniteError,
    assemble_load,
    assemble_mass,
    assemble_nonlinear,
    assemble_nonlinear_jacobian,
    assemble_stiffness_sipg,
    assemble_system,
    face_lengths,
    penalty_parameter,
    project_initial,
)
from mmdg.dg_space import DgSolution, eval_basis, interpolate_function, jump
from mmdg.driver import l2_error
from mmdg.mesh import PhysicalMesh, uniform_mesh
from mmdg.problems import ProblemSpec, burgers, schlogl

from conftest import random_meshes


def _problem(f, df_du, df_dux, eps=1.0, **kw):
    base = dict(name="test", epsilon=eps, f=f, df_du=df_du, df_dux=df_dux,
                u0=lambda x: 0 * x, x_left=0.0, x_right=1.0, t0=0.0, tf=1.0)
    base.update(kw)
    return ProblemSpec(**base)


ZERO = _problem(lambda u, p: 0 * u, lambda u, p: 0 * u, lambda u, p: 0 * u)
LINEAR = _problem(lambda u, p: u, lambda u, p: 1 + 0 * u, lambda u, p: 0 * u)


def _form(S, u):
    return float(u @ (S @ u))


def test_penalty_parameter():
    assert penalty_parameter(1.0, 2) == 90.0
    assert penalty_parameter(1e-3, 1) == 40.0  # never below the eps = 1 value
    assert penalty_parameter(4.0, 1, sigma_scale=1.0) == 16.0


def test_face_lengths():
    m = PhysicalMesh([0, 0.1, 0.5, 1])
    np.testing.assert_allclose(face_lengths(m), [0.1, 0.25, 0.45, 0.5])


def test_mass_block_linear():
    M = assemble_mass(PhysicalMesh([0, 0.3, 1.0]), 1).toarray()
    np.testing.assert_allclose(M[:2, :2], 0.3 * np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]]), atol=1e-15)
    np.testing.assert_allclose(M[2:, 2:], 0.7 * np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]]), atol=1e-15)
    assert np.all(M[:2, 2:] == 0)


def test_mass_block_quadratic_matches_adaptive_quadrature():
    M = assemble_mass(PhysicalMesh([0, 1, 2]), 2).toarray()[:3, :3]
    frozen = np.array([[2 / 15, 1 / 15, -1 / 30], [1 / 15, 8 / 15, 1 / 15], [-1 / 30, 1 / 15, 2 / 15]])
    np.testing.assert_allclose(M, frozen, atol=1e-15)
    oracle = np.array([[quad(lambda t: eval_basis(2, t)[0][i] * eval_basis(2, t)[0][j], 0, 1)[0]
                        for j in range(3)] for i in range(3)])
    np.testing.assert_allclose(M, oracle, atol=1e-13)


@given(random_meshes(), st.sampled_from([1, 2, 3, 4]))
def test_mass_spd_and_total(mesh, k):
    M = assemble_mass(mesh, k).toarray()
    np.testing.assert_allclose(M, M.T, atol=0)
    np.linalg.cholesky(M)
    length = mesh.x_right - mesh.x_left
    assert M.sum() == pytest.approx(length, rel=1e-12)
    np.testing.assert_allclose(M.sum(axis=1).reshape(-1, k + 1).sum(axis=1), mesh.sizes, rtol=1e-12)


@given(random_meshes(), st.sampled_from([1, 2, 3]), st.floats(1e-4, 10.0))
def test_stiffness_symmetric_and_psd(mesh, k, eps):
    S = assemble_stiffness_sipg(mesh, k, eps, penalty_parameter(eps, k))
    dense = S.toarray()
    smax = np.abs(dense).max()
    assert np.abs(dense - dense.T).max() <= 1e-12 * smax
    probes = np.random.default_rng(0).standard_normal((dense.shape[0], 32))
    forms = np.einsum("ip,ip->p", probes, dense @ probes)
    assert forms.min() >= -1e-10 * smax


def test_stiffness_block_tridiagonal():
    S = assemble_stiffness_sipg(uniform_mesh(0, 1, 6), 2, 1.0, 90.0).toarray()
    for i in range(6):
        for j in range(6):
            if abs(i - j) > 1:
                assert np.all(S[3 * i:3 * i + 3, 3 * j:3 * j + 3] == 0)


def test_coercivity_probe_warns_for_tiny_sigma():
    with pytest.warns(RuntimeWarning):
        assemble_stiffness_sipg(uniform_mesh(0, 1, 8), 2, 1.0, 0.0, check=True)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assemble_stiffness_sipg(uniform_mesh(0, 1, 8), 2, 1.0, 90.0, check=True)


@pytest.mark.parametrize("k", [2, 3])
def test_continuous_function_has_only_volume_energy(k):
    # g vanishes at both ends, so every jump is zero: a(g, g) = eps int g'^2
    mesh = PhysicalMesh([0, 0.2, 0.35, 0.7, 1.0])
    eps = 0.37
    u = interpolate_function(lambda x: x * (1 - x), mesh, k)
    S = assemble_stiffness_sipg(mesh, k, eps, 50.0)
    assert _form(S, u.vector) == pytest.approx(eps / 3, abs=1e-10)


@pytest.mark.parametrize("k", [1, 2])
def test_linear_function_form(k):
    # interior jumps vanish; the boundary terms are written out by hand
    mesh = PhysicalMesh([0, 0.2, 0.35, 0.7, 1.0])
    eps, sigma, a, b = 0.5, 30.0, 2.0, -1.0
    g0, g1 = b, a + b
    u = interpolate_function(lambda x: a * x + b, mesh, k)
    S = assemble_stiffness_sipg(mesh, k, eps, sigma)
    h = mesh.sizes
    # [g(x0)] = -g0, [g(xN)] = g1, {eps g'} = eps a at both ends
    boundary = (-2 * eps * a * (-g0) + sigma / h[0] * g0**2
                - 2 * eps * a * g1 + sigma / h[-1] * g1**2)
    assert _form(S, u.vector) == pytest.approx(eps * a**2 + boundary, abs=1e-10)


@given(random_meshes(), st.sampled_from([1, 2]))
def test_penalty_scaling(mesh, k):
    rng = np.random.default_rng(3)
    u = DgSolution(mesh, k, rng.standard_normal(mesh.n_elements * (k + 1)))
    eps, sigma = 0.3, 20.0
    S1 = assemble_stiffness_sipg(mesh, k, eps, sigma)
    S2 = assemble_stiffness_sipg(mesh, k, eps, 2 * sigma)
    hf = face_lengths(mesh)
    jumps = np.array([jump(u, n) for n in range(mesh.n_elements + 1)])
    expected = np.sum(sigma / hf * jumps**2)
    got = _form(S2, u.vector) - _form(S1, u.vector)
    assert got == pytest.approx(expected, rel=1e-10)


@given(random_meshes(), st.floats(0.1, 10.0), st.sampled_from([1, 2]))
def test_scaling_covariance(mesh, lam, k):
    scaled = PhysicalMesh(mesh.nodes * lam)
    M, Ms = assemble_mass(mesh, k), assemble_mass(scaled, k)
    np.testing.assert_allclose(Ms.toarray(), lam * M.toarray(), rtol=1e-10, atol=1e-14)
    S, Ss = (assemble_stiffness_sipg(m, k, 0.2, 15.0) for m in (mesh, scaled))
    np.testing.assert_allclose(Ss.toarray(), S.toarray() / lam, rtol=1e-9, atol=1e-9 * abs(S).max())


def test_load_vector():
    mesh = uniform_mesh(0, 1, 4)
    assert not np.any(assemble_load(mesh, 2, 0.1, 40.0, 0.0, 0.0))
    eps, sigma = 0.1, 40.0
    d = assemble_load(mesh, 1, eps, sigma, 1.0, 0.0)
    assert np.all(d[2:] == 0)
    h1 = 0.25
    # v(x0) = 1 for the first basis function, v'(x0) = -1/h1
    assert d[0] == pytest.approx(eps * (-1 / h1) + sigma / h1, rel=1e-14)
    assert d[1] == pytest.approx(eps * (1 / h1), rel=1e-14)
    dr = assemble_load(mesh, 1, eps, sigma, 0.0, 1.0)
    assert np.all(dr[:-2] == 0)
    assert dr[-1] == pytest.approx(sigma / h1 - eps * (1 / h1), rel=1e-14)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_discrete_steady_states(k):
    # constants and linears solve the heat equation with matching data
    mesh = PhysicalMesh([0, 0.1, 0.45, 0.6, 1.0])
    eps = 0.7
    sigma = penalty_parameter(eps, k)
    S = assemble_stiffness_sipg(mesh, k, eps, sigma)
    for g in (lambda x: 0 * x + 1.3, lambda x: 2 * x - 0.4):
        u = interpolate_function(g, mesh, k)
        d = assemble_load(mesh, k, eps, sigma, g(0.0), g(1.0))
        assert np.max(np.abs(S @ u.vector - d)) <= 1e-10 * max(1.0, np.abs(d).max())


def test_nonlinear_vector_examples(rng):
    mesh = PhysicalMesh([0, 0.3, 0.5, 1.0])
    v = rng.standard_normal(9)
    assert not np.any(assemble_nonlinear(v, mesh, ZERO, 2))
    const = np.full(9, 0.8)
    np.testing.assert_allclose(assemble_nonlinear(const, mesh, burgers(), 2), 0, atol=1e-15)
    M = assemble_mass(mesh, 2)
    np.testing.assert_allclose(assemble_nonlinear(v, mesh, LINEAR, 2), M @ v, atol=1e-14)


@pytest.mark.parametrize("k,rtol", [(1, 1e-13), (2, 1e-4)])
def test_nonlinear_matches_adaptive_quadrature(k, rtol):
    # cubic f: exact at k = 1 (integrand degree 4), near-exact at k = 2 (degree 8)
    mesh = PhysicalMesh([0, 0.4, 1.0])
    p = schlogl(delta=0.5)
    v = np.linspace(0.9, 0.1, 2 * (k + 1))
    got = assemble_nonlinear(v, mesh, p, k)
    h = mesh.sizes
    nl = k + 1
    for e in range(2):
        for i in range(nl):
            def integrand(t):
                phi = eval_basis(k, t)[0]
                return p.f(phi @ v[nl * e:nl * e + nl]) * phi[i] * h[e]
            ref = quad(integrand, 0, 1, epsabs=1e-15)[0]
            assert got[nl * e + i] == pytest.approx(ref, rel=rtol, abs=1e-14)


def test_nonfinite_nonlinearity():
    bad = _problem(lambda u, p: np.log(u), lambda u, p: 1 / u, lambda u, p: 0 * u)
    with pytest.raises(NonFiniteError), np.errstate(all="ignore"):
        assemble_nonlinear(-np.ones(6), uniform_mesh(0, 1, 2), bad, 2)


@pytest.mark.parametrize("problem", [burgers(), schlogl(delta=0.05)])
@pytest.mark.parametrize("k", [1, 2])
def test_jacobian_finite_differences(problem, k):
    rng = np.random.default_rng(7)
    mesh = PhysicalMesh([0, 0.15, 0.5, 0.6, 1.0])
    v = rng.uniform(-0.5, 1.5, mesh.n_elements * (k + 1))
    J = assemble_nonlinear_jacobian(v, mesh, problem, k).toarray()
    h0 = assemble_nonlinear(v, mesh, problem, k)
    errs = {}
    for delta in (1e-5, 1e-6):
        fd = np.column_stack([
            (assemble_nonlinear(v + delta * e, mesh, problem, k) - h0) / delta
            for e in np.eye(v.size)
        ])
        errs[delta] = np.abs(fd - J).max()
    scale = 1 + np.abs(J).max()
    assert errs[1e-6] <= 1e-4 * scale
    # O(delta): shrinking delta tenfold does not make the error grow
    assert errs[1e-6] <= 0.2 * errs[1e-5] + 1e-8 * scale


def test_jacobian_linear_and_zero():
    mesh = uniform_mesh(0, 1, 3)
    v = np.linspace(0, 1, 9)
    np.testing.assert_allclose(assemble_nonlinear_jacobian(v, mesh, LINEAR, 2).toarray(),
                               assemble_mass(mesh, 2).toarray(), atol=1e-15)
    assert assemble_nonlinear_jacobian(v, mesh, ZERO, 2).count_nonzero() == 0


def test_system_uses_boundary_data_at_time():
    p = schlogl(epsilon=0.1, delta=0.1)
    mesh = uniform_mesh(0, 1, 4)
    sysm = assemble_system(mesh, 2, p, 0.5)
    sigma = penalty_parameter(0.1, 2)
    np.testing.assert_allclose(
        sysm.load, assemble_load(mesh, 2, 0.1, sigma, p.u_left(0.5), p.u_right(0.5)))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_projection_reproduces_polynomials(k):
    mesh = PhysicalMesh([-1, -0.7, -0.2, 0.0])
    p = replace(burgers(), x_left=-1.0, x_right=0.0)
    assert np.allclose(project_initial(p, mesh, k, u0=lambda x: 0 * x + 2.5).vector, 2.5, atol=1e-13)
    poly = np.polynomial.Polynomial([0.3, -1.0, 2.0, 0.5][: k + 1])
    u = project_initial(p, mesh, k, u0=poly)
    np.testing.assert_allclose(u.coefficients, poly(u.nodal_points()), atol=1e-11)


@pytest.mark.parametrize("k", [1, 2])
def test_projection_order_on_burgers_data(k):
    p = burgers()
    errs = []
    for n in (8, 16, 32, 64):
        u = project_initial(p, uniform_mesh(0, 1, n), k)
        errs.append(l2_error(u, lambda x, t: p.u0(x), 0.0))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > k + 1 - 0.15)
