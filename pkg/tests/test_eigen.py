import numpy as np
import pytest

import saddlekit as sk
from saddlekit.errors import EigensolveError
from saddlekit.manifold import sphere, tangent_projector


def test_double_well_min_mode_at_saddle(double_well2):
    res = sk.min_modes(double_well2, np.zeros(2), m=1, tol=1e-12)
    assert np.isclose(res.eigenvalues[0], -1.0, atol=1e-10)
    assert abs(abs(res.eigenvectors[0, 0]) - 1.0) < 1e-10


def test_double_well_mode_switch(double_well2):
    # for |x| past the crossover the soft mode flips to the y axis
    res = sk.min_modes(double_well2, np.array([1.2, 0.0]), m=1, tol=1e-12)
    assert np.isclose(res.eigenvalues[0], 2.0, atol=1e-10)
    assert abs(abs(res.eigenvectors[1, 0]) - 1.0) < 1e-10


def test_result_contract(double_well2):
    res = sk.min_modes(double_well2, np.array([0.5, 0.1]), m=2, tol=1e-12)
    assert np.all(np.diff(res.eigenvalues) >= 0)
    assert np.allclose(res.eigenvectors.T @ res.eigenvectors, np.eye(2), atol=1e-10)
    assert np.all(res.residual_norms <= 1e-12 * np.maximum(1.0, np.abs(res.eigenvalues)))


def test_three_hole_saddle_is_index_one(three_hole):
    sp = three_hole.stationary_points[0][0]
    evals, _ = sk.dense_eigensolve(three_hole, sp)
    assert evals[0] < 0 < evals[1]


def test_dense_eigensolve_cap(three_hole):
    with pytest.raises(ValueError):
        sk.dense_eigensolve(three_hole, np.zeros(2), cap=1)


@pytest.mark.parametrize("name,params", [
    ("double_well", {"mu": 2.0}),
    ("three_hole", {}),
    ("sphere_quadratic", {}),
])
def test_agreement_with_dense_oracle(name, params):
    p = sk.make_builtin(name, params)
    rng = np.random.default_rng(11)
    tol = 1e-10
    for _ in range(4):
        x = 0.8 * rng.standard_normal(p.dimension)
        dense = sk.dense_eigensolve(p, x)
        gap = dense.eigenvalues[1] - dense.eigenvalues[0]
        res = sk.min_modes(p, x, m=1, tol=tol)
        assert abs(res.eigenvalues[0] - dense.eigenvalues[0]) <= 10 * tol
        if gap > 1e-6:
            v, vd = res.eigenvectors[:, 0], dense.eigenvectors[:, 0]
            angle = np.sqrt(max(0.0, 1.0 - (v @ vd) ** 2))
            assert angle <= 1e-6


def test_quadratic_block(double_well2):
    H = np.diag([-1.0, 2.0, 3.5, 5.0, 9.0])
    p = sk.from_quadratic(H)
    res = sk.min_modes(p, np.zeros(5), m=2, tol=1e-11)
    assert np.allclose(res.eigenvalues, [-1.0, 2.0], atol=1e-9)


def test_warm_start_seeds_iteration(three_hole):
    x = np.array([0.2, -0.1])
    cold = sk.min_modes(three_hole, x, m=1, tol=1e-12)
    warm = sk.min_modes(three_hole, x + 1e-3, m=1, v0=cold.eigenvectors, tol=1e-12)
    assert warm.iterations <= max(cold.iterations, 3)


def test_projected_min_mode_matches_reduced_oracle(sphere_quad):
    x = np.array([0.0, 1.0, 0.0])
    M = sphere(3)
    proj = tangent_projector(M, x)
    res = sk.min_modes(sphere_quad, x, m=1, tol=1e-12, projector=proj)
    # reduced 2x2 oracle
    B = proj.basis
    Hk = np.array([[B[:, i] @ sphere_quad.hessian_vec(x, B[:, j]) for j in range(2)]
                   for i in range(2)])
    evals = np.linalg.eigvalsh(0.5 * (Hk + Hk.T))
    assert abs(res.eigenvalues[0] - evals[0]) < 1e-10
    # eigenvector stays in the tangent space
    v = res.eigenvectors[:, 0]
    assert np.linalg.norm(v - proj(v)) <= 1e-10
    assert abs(v @ x) <= 1e-10


def test_projected_min_mode_random_tangent_plane(sphere_quad):
    rng = np.random.default_rng(4)
    x = rng.standard_normal(3)
    x /= np.linalg.norm(x)
    proj = tangent_projector(sphere(3), x)
    res = sk.min_modes(sphere_quad, x, m=2, tol=1e-12, projector=proj)
    B = proj.basis
    Hk = B.T @ np.column_stack([sphere_quad.hessian_vec(x, B[:, j]) for j in range(2)])
    evals = np.linalg.eigvalsh(0.5 * (Hk + Hk.T))
    assert np.allclose(res.eigenvalues, evals, atol=1e-9)


def test_nonconvergence_carries_best_result():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((80, 80)))
    evals = np.concatenate([[1.0, 1.0 + 1e-9], np.linspace(2.0, 60.0, 78)])
    p = sk.from_quadratic(Q @ np.diag(evals) @ Q.T)
    with pytest.raises(EigensolveError) as err:
        sk.min_modes(p, np.zeros(80), m=1, tol=1e-14, max_iters=2, guard=0)
    best = err.value.result
    assert best is not None
    assert best.eigenvalues.shape == (1,)
    assert best.iterations == 2


def test_near_degenerate_flag():
    p = sk.from_quadratic(np.diag([1.0, 1.0, 3.0]))
    res = sk.min_modes(p, np.zeros(3), m=1, tol=1e-10)
    assert res.near_degenerate


def test_too_many_modes(double_well2):
    with pytest.raises(ValueError):
        sk.min_modes(double_well2, np.zeros(2), m=3)


def test_stationary_index_classification(three_hole):
    for q, idx in three_hole.stationary_points:
        assert sk.stationary_index(three_hole, q) == idx
