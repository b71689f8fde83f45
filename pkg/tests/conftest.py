import numpy as np
import pytest

import saddlekit as sk


@pytest.fixture(scope="session")
def three_hole():
    return sk.make_builtin("three_hole")


@pytest.fixture(scope="session")
def double_well2():
    return sk.make_builtin("double_well", {"mu": 2.0})


@pytest.fixture(scope="session")
def sphere_quad():
    return sk.make_builtin("sphere_quadratic")


@pytest.fixture(scope="session")
def morse():
    return sk.make_builtin("morse_island")


@pytest.fixture(scope="session")
def morse_minimum(morse):
    """Relaxed island minimum (one NCG minimization, reused by slow tests)."""
    from saddlekit.subsolve import SubsolveConfig, minimize

    class AsObjective:
        def __init__(self, p):
            self.p = p

        def value(self, y):
            return self.p.energy(y)

        def gradient(self, y):
            return self.p.gradient(y)

        def hessian_vec(self, y, u):
            return self.p.hessian_vec(y, u)

        def precondition_diag(self, y):
            return self.p.hessian_diag_fn(y)

    x0 = morse.extras["coords"][~morse.extras["frozen"]].ravel().copy()
    sol = minimize(AsObjective(morse), x0, SubsolveConfig(grad_tol=1e-11, max_inner_iters=6000))
    assert sol.grad_norm < 1e-10
    return sol.y


def fd_gradient(p, x, h=1e-5):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (p.energy(x + e) - p.energy(x - e)) / (2.0 * h)
    return g


def circle_point(center, radius, theta):
    return np.asarray(center, float) + radius * np.array([np.cos(theta), np.sin(theta)])


def make_index2_cubic(l1=-0.8, l2=-0.5, l3=2.0, c1=0.3, c2=0.4, c3=0.2, c4=0.25):
    """3-d non-quadratic surface with an exact index-2 point at the origin."""

    def energy(x):
        return (0.5 * (l1 * x[0] ** 2 + l2 * x[1] ** 2 + l3 * x[2] ** 2)
                + c1 * x[0] ** 2 * x[1] + c2 * x[0] * x[1] * x[2]
                + c3 * (x[0] ** 3 + x[1] ** 3)
                + c4 * (x[0] ** 4 + x[1] ** 4 + x[2] ** 4))

    def grad(x):
        return np.array([
            l1 * x[0] + 2 * c1 * x[0] * x[1] + c2 * x[1] * x[2]
            + 3 * c3 * x[0] ** 2 + 4 * c4 * x[0] ** 3,
            l2 * x[1] + c1 * x[0] ** 2 + c2 * x[0] * x[2]
            + 3 * c3 * x[1] ** 2 + 4 * c4 * x[1] ** 3,
            l3 * x[2] + c2 * x[0] * x[1] + 4 * c4 * x[2] ** 3,
        ])

    def hvec(x, u):
        H = np.array([
            [l1 + 2 * c1 * x[1] + 6 * c3 * x[0] + 12 * c4 * x[0] ** 2,
             2 * c1 * x[0] + c2 * x[2], c2 * x[1]],
            [2 * c1 * x[0] + c2 * x[2],
             l2 + 6 * c3 * x[1] + 12 * c4 * x[1] ** 2, c2 * x[0]],
            [c2 * x[1], c2 * x[0], l3 + 12 * c4 * x[2] ** 2],
        ])
        return H @ u

    return sk.PotentialModel(
        name="index2_cubic",
        dimension=3,
        energy_fn=energy,
        gradient_fn=grad,
        hessian_vec_fn=hvec,
        stationary_points=((np.zeros(3), 2),),
    )
