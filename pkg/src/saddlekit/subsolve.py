"""Inner minimizers for the per-iteration objective, plus a Newton baseline.

``minimize`` drives steepest descent or Polak-Ribiere+ nonlinear CG with a
curvature-informed line search safeguarded by Armijo backtracking.  An
optional infinity-norm trust box around the starting point keeps the solve
stable when the objective is unbounded below (anchor in a convex region of
the energy); accepted points are clipped into the box coordinate-wise.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .eigen import dense_hessian, stationary_index
from .errors import SubsolveError

__all__ = [
    "SubsolveConfig",
    "InnerSolve",
    "NewtonResult",
    "minimize",
    "sd_single_step",
    "newton_stationary",
]

_ARMIJO_C1 = 1e-4
_MAX_HALVINGS = 60


@dataclass(frozen=True)
class SubsolveConfig:
    """Inner-solver settings.

    ``box_radius`` bounds ``||y - y0||_inf`` over the whole solve when set.
    ``ncg_restart`` forces a steepest-descent restart every so many
    iterations (0 means the problem dimension).  ``step_size`` seeds the
    line search when no curvature information is usable.
    """

    method: str = "ncg"
    max_inner_iters: int = 500
    grad_tol: float = 1e-12
    step_size: float = 0.1
    box_radius: float = None
    ncg_restart: int = 0

    def __post_init__(self):
        if self.method not in ("sd", "ncg"):
            raise ValueError(f"method must be 'sd' or 'ncg', got {self.method!r}")
        if self.grad_tol <= 0 or self.step_size <= 0 or self.max_inner_iters < 1:
            raise ValueError("tolerances, step size and iteration budget must be positive")
        if self.box_radius is not None and self.box_radius <= 0:
            raise ValueError("box_radius must be positive when present")


class InnerSolve(NamedTuple):
    y: np.ndarray
    inner_iters: int
    grad_norm: float


class NewtonResult(NamedTuple):
    x: np.ndarray
    index: int  # Hessian index at the terminal point, None on failure
    converged: bool
    iterations: int
    message: str


def sd_single_step(L, y0, dt) -> np.ndarray:
    """One explicit steepest-descent step y0 - dt * grad L(y0).

    Kept separate (no line search, no box) because it is the exact bridge
    between the minimization map and the gentlest ascent flow.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    y0 = np.asarray(y0, dtype=float)
    return y0 - dt * L.gradient(y0)


def _clip_to_box(y, lo, hi):
    if lo is None:
        return y
    return np.minimum(np.maximum(y, lo), hi)


def _preconditioner(L, y0):
    """Inverse-diagonal scaling from the objective's curvature hint."""
    hint = getattr(L, "precondition_diag", None)
    if hint is None:
        return None
    diag = hint(y0)
    if diag is None:
        return None
    diag = np.asarray(diag, dtype=float)
    pos = diag[diag > 0]
    if pos.size == 0:
        return None
    floor = 0.05 * float(np.median(pos))
    return 1.0 / np.maximum(diag, floor)


def minimize(L, y0, cfg: SubsolveConfig) -> InnerSolve:
    """Approximately minimize ``L`` from ``y0``.

    The returned point is the best visited: never worse than ``y0`` beyond
    roundoff in the objective value (sufficient-decrease tests carry an
    eps-level slack so the solve can keep polishing the gradient once value
    differences fall below float resolution).  Raises
    :class:`SubsolveError` if no descent is possible from ``y0`` while the
    gradient is still above tolerance (an unbounded or ill-posed subproblem
    with no trust box typically lands here).
    """
    y = np.asarray(y0, dtype=float).copy()
    lo = hi = None
    if cfg.box_radius is not None:
        lo, hi = y - cfg.box_radius, y + cfg.box_radius
    restart_every = cfg.ncg_restart if cfg.ncg_restart > 0 else max(4, y.size)
    scale_inv = _preconditioner(L, y)

    f = L.value(y)
    g = L.gradient(y)
    gnorm = float(np.linalg.norm(g))
    # best-visited tracking: value decides, gradient norm breaks roundoff ties
    f_slack = 4.0 * np.finfo(float).eps * (1.0 + abs(f))
    best_f, best_y, best_gnorm = f, y.copy(), gnorm
    z = g if scale_inv is None else scale_inv * g
    d = -z
    t_prev = None
    iters = 0
    since_restart = 0
    stalled = 0

    while iters < cfg.max_inner_iters and gnorm > cfg.grad_tol:
        gd = float(g @ d)
        if gd >= 0.0:  # not a descent direction: restart on the gradient
            d = -z
            gd = float(g @ d)
            since_restart = 0
            if gd >= 0.0:
                break

        # curvature-exact trial step where the directional curvature is
        # positive; otherwise reuse the last accepted scale
        Hd = L.hessian_vec(y, d)
        curv = float(d @ Hd)
        if curv > 0.0:
            t = -gd / curv
        elif t_prev is not None:
            t = t_prev
        else:
            t = cfg.step_size / max(np.linalg.norm(d), 1e-300)

        accepted = False
        clipped = False
        # allow roundoff-level non-decrease: sufficient-decrease tests are
        # meaningless once |g.step| drops below the float resolution of f
        slack = 4.0 * np.finfo(float).eps * (1.0 + abs(f))
        for _ in range(_MAX_HALVINGS):
            y_trial = _clip_to_box(y + t * d, lo, hi)
            step = y_trial - y
            if not np.any(step):
                break
            f_trial = L.value(y_trial)
            if f_trial <= f + _ARMIJO_C1 * float(g @ step) + slack:
                accepted = True
                clipped = lo is not None and not np.array_equal(y_trial, y + t * d)
                break
            t *= 0.5
        if not accepted:
            if iters == 0 and gnorm > cfg.grad_tol:
                raise SubsolveError(
                    f"no descent from the starting point (|grad| = {gnorm:.3e}); "
                    "the subproblem may be unbounded -- consider a trust box",
                    trace=[y0],
                )
            break

        g_new = L.gradient(y_trial)
        z_new = g_new if scale_inv is None else scale_inv * g_new
        if cfg.method == "ncg" and not clipped and since_restart < restart_every:
            beta = max(0.0, float(z_new @ (g_new - g)) / max(float(z @ g), 1e-300))
            d = -z_new + beta * d
            since_restart += 1
        else:
            d = -z_new
            since_restart = 0
        step_inf = float(np.linalg.norm(y_trial - y, ord=np.inf))
        y, f, g, z = y_trial, f_trial, g_new, z_new
        gnorm = float(np.linalg.norm(g))
        t_prev = t
        iters += 1
        if f < best_f - f_slack or (f <= best_f + f_slack and gnorm < best_gnorm):
            best_f, best_y, best_gnorm = min(f, best_f), y.copy(), gnorm
        # machine-precision floor: stop once steps stop moving the iterate
        if step_inf <= 1e-16 * (1.0 + float(np.linalg.norm(y, ord=np.inf))):
            stalled += 1
            if stalled >= 2:
                break
        else:
            stalled = 0

    return InnerSolve(best_y, iters, best_gnorm)


def newton_stationary(p, x0, tol=1e-10, max_iters=200, step_limit=10.0) -> NewtonResult:
    """Plain Newton iteration on grad V = 0 with dense Hessian solves.

    Baseline root finder: converges to stationary points of any index, or
    fails on singular Hessians, oversized steps, or iteration exhaustion.
    The terminal point is classified by its dense Hessian index.
    """
    x = np.asarray(x0, dtype=float).copy()
    for it in range(max_iters):
        g = p.gradient(x)
        if float(np.linalg.norm(g, ord=np.inf)) <= tol:
            return NewtonResult(x, stationary_index(p, x), True, it, "converged")
        H = dense_hessian(p, x)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            return NewtonResult(x, None, False, it, "singular Hessian")
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > step_limit:
            return NewtonResult(x, None, False, it, "step exceeded limit")
        x = x + step
    return NewtonResult(x, None, False, max_iters, "iteration budget exhausted")
