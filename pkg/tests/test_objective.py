import numpy as np
import pytest

import saddlekit as sk
from saddlekit.errors import CoefficientError, DimensionError, OffManifoldError
from saddlekit.objective import COEFFICIENT_PRESETS, sphere_frame

from conftest import fd_gradient


class _Energy:
    """Adapter for finite-difference checks on an objective's value."""

    def __init__(self, L):
        self.L = L

    def energy(self, y):
        return self.L.value(y)


def _dense_hessian_of(L, y):
    d = y.size
    H = np.column_stack([L.hessian_vec(y, e) for e in np.eye(d)])
    return 0.5 * (H + H.T)


def test_coefficient_condition():
    p = sk.make_builtin("double_well")
    v = np.array([1.0, 0.0])
    with pytest.raises(CoefficientError):
        sk.build_flat(p, np.zeros(2), v, 0.0, 0.0)
    with pytest.raises(CoefficientError):
        sk.build_flat(p, np.zeros(2), v, 0.5, 0.5)  # boundary excluded
    sk.build_flat(p, np.zeros(2), v, 1.0, 1.0)  # sums above 1 accepted


def test_direction_must_be_unit():
    p = sk.make_builtin("double_well")
    with pytest.raises(ValueError):
        sk.build_flat(p, np.zeros(2), np.array([1.0, 1.0]), 2.0, 0.0)


def test_value_at_anchor_collapses(three_hole):
    rng = np.random.default_rng(1)
    x = rng.standard_normal(2)
    v = rng.standard_normal(2)
    v /= np.linalg.norm(v)
    for a, b in ((2.0, 0.0), (0.0, 2.0), (1.0, 1.0), (1.3, 0.4)):
        L = sk.build_flat(three_hole, x, v, a, b)
        assert np.isclose(L.value(x), (1.0 - b) * three_hole.energy(x), atol=1e-12)


def test_double_well_hyperplane_preset_closed_form(double_well2):
    # with the mode along x, the (2, 0) objective flips the quartic term and
    # keeps the transverse parabola, shifted by a constant of the anchor
    x = np.array([0.3, -0.2])
    L = sk.build_flat(double_well2, x, np.array([1.0, 0.0]), 2.0, 0.0)
    const = 0.5 * (x[0] ** 2 - 1.0) ** 2
    rng = np.random.default_rng(2)
    for _ in range(5):
        y = rng.standard_normal(2)
        expected = -0.25 * (y[0] ** 2 - 1.0) ** 2 + 0.5 * 2.0 * y[1] ** 2 + const
        assert np.isclose(L.value(y), expected, atol=1e-12)


def test_quadratic_worked_example():
    # diagonal quadratic with one negative eigenvalue: both presets are
    # convex quadratics sharing Hessian diag(|mu1|, mu2, ...), minimizer 0,
    # and differ by twice the anchor energy
    mu = np.array([-1.0, 2.0, 3.0])
    p = sk.from_quadratic(np.diag(mu))
    rng = np.random.default_rng(3)
    x = rng.standard_normal(3)
    v = np.array([1.0, 0.0, 0.0])
    L1 = sk.build_flat(p, x, v, 2.0, 0.0)
    L2 = sk.build_flat(p, x, v, 0.0, 2.0)
    for _ in range(5):
        y = rng.standard_normal(3)
        w1 = mu[0] * x[0] ** 2 - 0.5 * mu[0] * y[0] ** 2 + 0.5 * (mu[1] * y[1] ** 2 + mu[2] * y[2] ** 2)
        w2 = -(mu[1] * x[1] ** 2 + mu[2] * x[2] ** 2) - 0.5 * mu[0] * y[0] ** 2 \
            + 0.5 * (mu[1] * y[1] ** 2 + mu[2] * y[2] ** 2)
        assert np.isclose(L1.value(y), w1, atol=1e-12)
        assert np.isclose(L2.value(y), w2, atol=1e-12)
        assert np.isclose(L1.value(y) - L2.value(y), 2.0 * p.energy(x), atol=1e-12)
    H = _dense_hessian_of(L1, x)
    assert np.allclose(np.linalg.eigvalsh(H), [1.0, 2.0, 3.0], atol=1e-10)


def test_gradient_at_anchor_formula(three_hole):
    rng = np.random.default_rng(4)
    for a, b in ((2.0, 0.0), (0.0, 2.0), (1.0, 1.0)):
        x = rng.standard_normal(2)
        v = rng.standard_normal(2)
        v /= np.linalg.norm(v)
        L = sk.build_flat(three_hole, x, v, a, b)
        g = three_hole.gradient(x)
        expected = g - (a + b) * (v @ g) * v
        assert np.allclose(L.gradient(x), expected, atol=1e-12)


def test_gradient_vanishes_at_stationary_anchor(three_hole):
    sp = three_hole.stationary_points[0][0]
    for a, b in ((2.0, 0.0), (0.7, 0.7), (0.0, 2.0)):
        v = np.array([np.cos(0.3), np.sin(0.3)])
        L = sk.build_flat(three_hole, sp, v, a, b)
        assert np.linalg.norm(L.gradient(sp)) < 1e-9


def test_gradient_matches_fd(three_hole):
    rng = np.random.default_rng(5)
    x = np.array([0.1, -0.25])
    v = rng.standard_normal(2)
    v /= np.linalg.norm(v)
    for a, b in ((2.0, 0.0), (0.0, 2.0), (1.0, 1.0)):
        L = sk.build_flat(three_hole, x, v, a, b)
        for _ in range(3):
            y = x + 0.3 * rng.standard_normal(2)
            gfd = fd_gradient(_Energy(L), y)
            g = L.gradient(y)
            assert np.linalg.norm(g - gfd) <= 1e-6 * max(1.0, np.linalg.norm(gfd))


def test_hessian_vec_matches_fd_of_gradient(three_hole):
    rng = np.random.default_rng(6)
    x = np.array([-0.2, 0.4])
    v = rng.standard_normal(2)
    v /= np.linalg.norm(v)
    L = sk.build_flat(three_hole, x, v, 1.0, 1.0)
    y = x + 0.2 * rng.standard_normal(2)
    u = rng.standard_normal(2)
    h = 1e-6
    un = np.linalg.norm(u)
    hfd = (L.gradient(y + (h / un) * u) - L.gradient(y - (h / un) * u)) * (un / (2 * h))
    assert np.linalg.norm(L.hessian_vec(y, u) - hfd) <= 1e-5 * max(1.0, np.linalg.norm(hfd))
    # symmetry
    w = rng.standard_normal(2)
    assert abs(u @ L.hessian_vec(y, w) - w @ L.hessian_vec(y, u)) < 1e-10


def test_anchor_hessian_spectrum(three_hole):
    sp = three_hole.stationary_points[0][0]
    lam = sk.dense_eigensolve(three_hole, sp).eigenvalues
    modes = sk.min_modes(three_hole, sp, m=1, tol=1e-13)
    for a, b in ((2.0, 0.0), (0.0, 2.0), (1.0, 1.0), (1.5, 1.5)):
        L = sk.build_flat(three_hole, sp, modes.eigenvectors[:, 0], a, b)
        got = np.linalg.eigvalsh(_dense_hessian_of(L, sp))
        expected = sorted([(1.0 - a - b) * lam[0], lam[1]])
        assert np.allclose(got, expected, rtol=1e-8)


def test_optimal_sum_condition_number():
    diag = np.array([-1.0, 2.0, 3.5, 5.0, 7.0])
    p = sk.from_quadratic(np.diag(diag))
    v = np.eye(5)[:, 0]
    target = 1.0 + diag[1] / abs(diag[0])
    L = sk.build_flat(p, np.zeros(5), v, target / 2, target / 2)
    evals = np.linalg.eigvalsh(_dense_hessian_of(L, np.zeros(5)))
    assert np.isclose(evals[-1] / evals[0], diag[-1] / diag[1], rtol=1e-10)


def test_objective_convex_near_saddle():
    rng = np.random.default_rng(7)
    Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    H = Q @ np.diag([-2.0, 1.0, 2.0, 3.0, 4.0]) @ Q.T
    p = sk.from_quadratic(H)
    v = Q[:, 0]
    L = sk.build_flat(p, 0.1 * rng.standard_normal(5), v, 1.0, 1.0)
    y = 0.1 * rng.standard_normal(5)
    evals = np.linalg.eigvalsh(_dense_hessian_of(L, y))
    assert evals[0] > 0


def test_mode_sign_invariance(three_hole):
    rng = np.random.default_rng(8)
    x = rng.standard_normal(2)
    v = rng.standard_normal(2)
    v /= np.linalg.norm(v)
    Lp = sk.build_flat(three_hole, x, v, 1.2, 0.6)
    Lm = sk.build_flat(three_hole, x, -v, 1.2, 0.6)
    for _ in range(5):
        y = x + rng.standard_normal(2)
        assert abs(Lp.value(y) - Lm.value(y)) < 1e-12
        assert np.linalg.norm(Lp.gradient(y) - Lm.gradient(y)) < 1e-12


# -- index-m ----------------------------------------------------------------


def test_index_one_reduces_to_flat(three_hole):
    rng = np.random.default_rng(9)
    x = rng.standard_normal(2)
    v = rng.standard_normal(2)
    v /= np.linalg.norm(v)
    flat = sk.build_flat(three_hole, x, v, 1.4, 0.8)
    gen = sk.build_index_m(three_hole, x, v[:, None],
                           subset_alpha={(0,): 1.4}, subset_beta={(0,): 0.8})
    for _ in range(100):
        y = x + rng.standard_normal(2)
        assert abs(flat.value(y) - gen.value(y)) < 1e-12
    y = x + rng.standard_normal(2)
    assert np.allclose(flat.gradient(y), gen.gradient(y), atol=1e-12)
    u = rng.standard_normal(2)
    assert np.allclose(flat.hessian_vec(y, u), gen.hessian_vec(y, u), atol=1e-12)


def test_index_two_full_reversal():
    p = sk.from_quadratic(np.diag([-2.0, -1.0, 3.0]))
    V2 = np.eye(3)[:, :2]
    L = sk.build_index_m(p, np.zeros(3), V2, subset_alpha={},
                         subset_beta={(0, 1): 2.0})
    evals = np.linalg.eigvalsh(_dense_hessian_of(L, np.zeros(3)))
    assert np.allclose(sorted(evals), [1.0, 2.0, 3.0], atol=1e-10)
    # anchor away from the saddle still minimizes at the saddle (quadratic V)
    x = np.array([0.4, -0.3, 0.2])
    modes = sk.min_modes(p, x, m=2, tol=1e-13)
    L = sk.build_index_m(p, x, modes.eigenvectors)
    from saddlekit.subsolve import SubsolveConfig, minimize
    sol = minimize(L, x, SubsolveConfig(grad_tol=1e-14, max_inner_iters=200))
    assert np.linalg.norm(sol.y) < 1e-10


def test_index_m_default_coefficients():
    p = sk.from_quadratic(np.diag([-2.0, -1.0, 3.0]))
    L = sk.build_index_m(p, np.zeros(3), np.eye(3)[:, :2])
    assert L.subset_beta == {(0, 1): 2.0}
    assert L.coefficient_sum == 2.0


def test_index_m_validation():
    p = sk.from_quadratic(np.diag([-2.0, -1.0, 3.0]))
    V2 = np.eye(3)[:, :2]
    with pytest.raises(CoefficientError):
        sk.build_index_m(p, np.zeros(3), V2, subset_beta={(0, 1): 0.5})
    with pytest.raises(ValueError):
        sk.build_index_m(p, np.zeros(3), np.ones((3, 2)))
    with pytest.raises(ValueError):
        sk.build_index_m(p, np.zeros(3), V2, subset_beta={(2,): 2.0})


def test_index_m_gradient_fd():
    rng = np.random.default_rng(10)
    from conftest import make_index2_cubic
    q = make_index2_cubic()
    x = 0.2 * rng.standard_normal(3)
    modes = sk.min_modes(q, x, m=2, tol=1e-12)
    L = sk.build_index_m(q, x, modes.eigenvectors,
                         subset_alpha={(0,): 0.5}, subset_beta={(1,): 0.4, (0, 1): 1.0})
    y = x + 0.1 * rng.standard_normal(3)
    gfd = fd_gradient(_Energy(L), y)
    assert np.linalg.norm(L.gradient(y) - gfd) <= 1e-6 * max(1.0, np.linalg.norm(gfd))
    u = rng.standard_normal(3)
    h, un = 1e-6, np.linalg.norm(rng.standard_normal(3))
    u = rng.standard_normal(3)
    un = np.linalg.norm(u)
    hfd = (L.gradient(y + (h / un) * u) - L.gradient(y - (h / un) * u)) * (un / (2 * h))
    assert np.linalg.norm(L.hessian_vec(y, u) - hfd) <= 1e-5 * max(1.0, np.linalg.norm(hfd))


# -- sphere -----------------------------------------------------------------


def _frame(rng, x=None):
    if x is None:
        x = rng.standard_normal(3)
        x /= np.linalg.norm(x)
    v = rng.standard_normal(3)
    return sphere_frame(x, v)


def test_sphere_frame_orthonormal():
    rng = np.random.default_rng(11)
    f = _frame(rng)
    for vec in (f.x, f.v, f.v_perp):
        assert np.isclose(np.linalg.norm(vec), 1.0)
    assert abs(f.x @ f.v) < 1e-12
    assert abs(f.x @ f.v_perp) < 1e-12
    assert abs(f.v @ f.v_perp) < 1e-12


def test_sphere_value_at_anchor(sphere_quad):
    rng = np.random.default_rng(12)
    f = _frame(rng)
    for variant, (a, b) in COEFFICIENT_PRESETS.items():
        L = sk.build_manifold(sphere_quad, f, variant)
        assert np.isclose(L.value(f.x), (1.0 - b) * sphere_quad.energy(f.x), atol=1e-12)


def test_sphere_gradient_matches_fd(sphere_quad):
    rng = np.random.default_rng(13)
    f = _frame(rng)
    for variant in ("hyperplane", "ray", "mix"):
        L = sk.build_manifold(sphere_quad, f, variant)
        for _ in range(3):
            y = f.x + 1e-5 * rng.standard_normal(3)
            y /= np.linalg.norm(y)
            # ambient finite differences with a step small enough to stay
            # within the manifold tolerance of the objective
            g = L.gradient(y)
            gfd = np.empty(3)
            h = 4e-9
            for i in range(3):
                e = np.zeros(3)
                e[i] = h
                gfd[i] = (L.value(y + e) - L.value(y - e)) / (2 * h)
            assert np.linalg.norm(g - gfd) <= 2e-5 * max(1.0, np.linalg.norm(gfd))


def test_sphere_off_manifold_rejected(sphere_quad):
    rng = np.random.default_rng(14)
    L = sk.build_manifold(sphere_quad, _frame(rng), "ray")
    with pytest.raises(OffManifoldError):
        L.value(np.array([1.1, 0.0, 0.0]))


def test_sphere_saddle_is_constrained_minimizer(sphere_quad):
    from saddlekit.manifold import sphere, solve_constrained_subproblem, tangent_projector
    from saddlekit.subsolve import SubsolveConfig

    sp = np.array([0.0, 1.0, 0.0])
    M = sphere(3)
    proj = tangent_projector(M, sp)
    modes = sk.min_modes(sphere_quad, sp, m=1, tol=1e-13, projector=proj)
    for variant in ("hyperplane", "ray", "mix"):
        f = sphere_frame(sp, modes.eigenvectors[:, 0])
        L = sk.build_manifold(sphere_quad, f, variant)
        # the anchor is a constrained stationary point of the objective
        assert np.linalg.norm(proj(L.gradient(sp))) < 1e-12
        # and a strict local minimizer: solving from a tangent offset returns
        start = M.retraction(sp, 0.05 * proj.basis[:, 0])
        sol = solve_constrained_subproblem(L, M, start, SubsolveConfig(grad_tol=1e-13, max_inner_iters=300))
        assert np.linalg.norm(sol.y - sp) < 1e-8


def test_sphere_naive_gradient_fd(sphere_quad):
    rng = np.random.default_rng(15)
    f = _frame(rng)
    L = sk.build_sphere_naive(sphere_quad, f)
    y = f.x + 1e-5 * rng.standard_normal(3)
    y /= np.linalg.norm(y)
    g = L.gradient(y)
    gfd = np.empty(3)
    h = 4e-9
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        gfd[i] = (L.value(y + e) - L.value(y - e)) / (2 * h)
    assert np.linalg.norm(g - gfd) <= 2e-5 * max(1.0, np.linalg.norm(gfd))


def test_dimension_checks(three_hole):
    L = sk.build_flat(three_hole, np.zeros(2), np.array([1.0, 0.0]), 2.0, 0.0)
    with pytest.raises(DimensionError):
        L.value(np.zeros(3))
    with pytest.raises(DimensionError):
        L.hessian_vec(np.zeros(2), np.zeros(3))
