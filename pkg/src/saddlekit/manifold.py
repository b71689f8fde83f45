"""Equality-constraint manifolds: tangent projection, geodesic projection on
the unit sphere, and retraction-based constrained inner solves."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import OffManifoldError, SubsolveError
from .subsolve import InnerSolve, SubsolveConfig, _ARMIJO_C1, _MAX_HALVINGS

__all__ = [
    "ManifoldSpec",
    "TangentProjector",
    "sphere",
    "tangent_project",
    "tangent_projector",
    "sphere_geodesic_project",
    "solve_constrained_subproblem",
    "constrained_index",
]

_FEAS_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ManifoldSpec:
    """Manifold cut out by equality constraints c_i(x) = 0 in R^d.

    ``constraints`` and ``constraint_grads`` are parallel tuples of callables;
    ``retraction`` maps (point, tangent step) back onto the manifold.
    ``constraint_hessian_vecs`` (optional, one (x, u) -> vector per
    constraint) enable intrinsic second-order classification at critical
    points.
    """

    name: str
    ambient_dim: int
    constraints: tuple
    constraint_grads: tuple
    retraction: callable
    constraint_hessian_vecs: tuple = None

    @property
    def n_constraints(self):
        return len(self.constraints)

    def residuals(self, x):
        return np.array([c(x) for c in self.constraints], dtype=float)

    def check_feasible(self, x, tol=_FEAS_TOL):
        r = self.residuals(x)
        if np.any(np.abs(r) > tol):
            raise OffManifoldError(
                f"point violates {self.name} constraints: residuals {r}"
            )


def sphere(dim=3) -> ManifoldSpec:
    """Unit sphere |x| = 1 in R^dim with metric-projection retraction."""

    def c(x):
        return 0.5 * (float(x @ x) - 1.0)

    def grad_c(x):
        return np.asarray(x, dtype=float)

    def retract(x, step):
        y = np.asarray(x, dtype=float) + np.asarray(step, dtype=float)
        n = np.linalg.norm(y)
        if n == 0.0:
            raise SubsolveError("retraction of a vanishing point is undefined")
        return y / n

    return ManifoldSpec(
        name=f"sphere{dim - 1}",
        ambient_dim=dim,
        constraints=(c,),
        constraint_grads=(grad_c,),
        retraction=retract,
        constraint_hessian_vecs=(lambda x, u: np.asarray(u, dtype=float),),
    )


@dataclass(frozen=True, eq=False)
class TangentProjector:
    """Orthogonal projector onto a tangent space, with an explicit basis."""

    basis: np.ndarray  # (d, d-p), orthonormal columns spanning the tangent space
    normals: np.ndarray  # (d, p), orthonormal columns spanning the normal space

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return u - self.normals @ (self.normals.T @ u)


def tangent_projector(M: ManifoldSpec, x) -> TangentProjector:
    """Build the tangent projector at a feasible point.

    Raises on rank-deficient constraint gradients (tolerance 1e-10 relative
    to the largest singular value).
    """
    x = np.asarray(x, dtype=float)
    M.check_feasible(x)
    N = np.column_stack([g(x) for g in M.constraint_grads])
    U, s, _ = np.linalg.svd(N, full_matrices=True)
    p = N.shape[1]
    if s.size < p or s[p - 1] <= 1e-10 * s[0]:
        raise ValueError(
            f"constraint gradients are rank deficient at x (singular values {s})"
        )
    return TangentProjector(basis=U[:, p:], normals=U[:, :p])


def tangent_project(M: ManifoldSpec, x, u) -> np.ndarray:
    """Remove the normal-space component of ``u`` at the feasible point ``x``."""
    return tangent_projector(M, x)(np.asarray(u, dtype=float))


def sphere_geodesic_project(x, v, y):
    """Closest point to ``y`` on the great circle through ``x`` tangent to ``v``.

    Returns ``(theta, point)`` with ``point = x cos(theta) + v sin(theta)``.
    Of the two arctan branches the one with the smaller geodesic distance is
    kept; the antipodal tie (y orthogonal to the circle plane) resolves to
    theta = pi/2 with a warning.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    for name, vec in (("x", x), ("v", v), ("y", y)):
        if abs(np.linalg.norm(vec) - 1.0) > 1e-10:
            raise OffManifoldError(f"{name} must be a unit vector")
    if abs(x @ v) > 1e-10:
        raise ValueError("v must be tangent at x")
    a = float(x @ y)
    b = float(v @ y)
    if a == 0.0 and b == 0.0:
        warnings.warn(
            "geodesic projection is degenerate (y orthogonal to the circle); "
            "resolving to theta = pi/2",
            RuntimeWarning,
        )
        theta = 0.5 * math.pi
    else:
        theta = math.atan2(b, a)
    return theta, x * math.cos(theta) + v * math.sin(theta)


def solve_constrained_subproblem(L, M: ManifoldSpec, y0, cfg: SubsolveConfig) -> InnerSolve:
    """Minimize ``L`` over ``M`` by projected descent with retraction.

    Tangent-projected gradients drive a Polak-Ribiere+ conjugate direction
    (transported by projection) or plain steepest descent; trial points are
    retracted onto the manifold before evaluation.  Convergence is measured
    on the tangent gradient norm.
    """
    y = np.asarray(y0, dtype=float).copy()
    M.check_feasible(y)

    def tangent_grad(pt):
        proj = tangent_projector(M, pt)
        return proj(L.gradient(pt))

    f = L.value(y)
    g = tangent_grad(y)
    gnorm = float(np.linalg.norm(g))
    f_slack = 4.0 * np.finfo(float).eps * (1.0 + abs(f))
    best_f, best_y, best_gnorm = f, y.copy(), gnorm
    d = -g
    t_prev = None
    iters = 0
    stalled = 0

    while iters < cfg.max_inner_iters and gnorm > cfg.grad_tol:
        gd = float(g @ d)
        if gd >= 0.0:
            d = -g
            gd = float(g @ d)
            if gd >= 0.0:
                break
        Hd = L.hessian_vec(y, d)
        curv = float(d @ Hd)
        if curv > 0.0:
            t = -gd / curv
        elif t_prev is not None:
            t = t_prev
        else:
            t = cfg.step_size / max(np.linalg.norm(d), 1e-300)

        accepted = False
        slack = 4.0 * np.finfo(float).eps * (1.0 + abs(f))
        for _ in range(_MAX_HALVINGS):
            y_trial = M.retraction(y, t * d)
            if np.array_equal(y_trial, y):
                break
            f_trial = L.value(y_trial)
            if f_trial <= f + _ARMIJO_C1 * t * gd + slack:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if iters == 0 and gnorm > cfg.grad_tol:
                raise SubsolveError(
                    f"no descent on {M.name} from the starting point "
                    f"(tangent |grad| = {gnorm:.3e})",
                    trace=[y0],
                )
            break

        g_new = tangent_grad(y_trial)
        if cfg.method == "ncg":
            proj_new = tangent_projector(M, y_trial)
            d_t = proj_new(d)
            g_t = proj_new(g)
            beta = max(0.0, float(g_new @ (g_new - g_t)) / max(float(g_t @ g_t), 1e-300))
            d = -g_new + beta * d_t
        else:
            d = -g_new
        step_norm = float(np.linalg.norm(y_trial - y))
        y, f, g = y_trial, f_trial, g_new
        gnorm = float(np.linalg.norm(g))
        t_prev = t
        iters += 1
        if f < best_f - f_slack or (f <= best_f + f_slack and gnorm < best_gnorm):
            best_f, best_y, best_gnorm = min(f, best_f), y.copy(), gnorm
        if step_norm <= 1e-16 * (1.0 + float(np.linalg.norm(y))):
            stalled += 1
            if stalled >= 2:
                break
        else:
            stalled = 0

    return InnerSolve(best_y, iters, best_gnorm)


def constrained_index(p, M: ManifoldSpec, x) -> int:
    """Intrinsic Hessian index of a constrained critical point at ``x``.

    The normal component of the energy gradient determines Lagrange
    multipliers; their constraint curvature is subtracted from the energy
    Hessian before restriction to the tangent basis.  Without constraint
    Hessians the bare projected energy Hessian is used (correct only for
    affine constraints).
    """
    x = np.asarray(x, dtype=float)
    proj = tangent_projector(M, x)
    B = proj.basis
    N = np.column_stack([g(x) for g in M.constraint_grads])
    mult, *_ = np.linalg.lstsq(N, p.gradient(x), rcond=None)

    def hvec(u):
        out = p.hessian_vec(x, u)
        if M.constraint_hessian_vecs is not None:
            for mu, chv in zip(mult, M.constraint_hessian_vecs):
                out = out - mu * chv(x, u)
        return out

    k = B.shape[1]
    Hk = np.empty((k, k))
    for i in range(k):
        Hk[:, i] = B.T @ hvec(B[:, i])
    Hk = 0.5 * (Hk + Hk.T)
    evals = np.linalg.eigvalsh(Hk)
    thresh = 1e-8 * max(1.0, float(np.abs(evals).max()))
    return int(np.sum(evals < -thresh))
