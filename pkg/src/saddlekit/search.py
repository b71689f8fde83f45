"""Outer saddle-search iteration: eigensolve, objective build, inner solve.

Each step maps the current point to the minimizer of a locally reversed
objective anchored there.  Near a saddle whose smallest Hessian eigenvalue
is simple, the step map has a vanishing Jacobian at the saddle, so the
iteration converges quadratically once the inner solves are accurate.
"""

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import manifold as mf
from . import objective as obj
from .eigen import min_modes, stationary_index
from .errors import (
    ConvexRegionError,
    EigensolveError,
    OrderEstimateError,
    SubsolveError,
)
from .subsolve import SubsolveConfig, minimize

__all__ = [
    "SearchState",
    "SearchConfig",
    "ConvergenceRecord",
    "initial_state",
    "step",
    "run",
    "jacobian_of_step_map",
    "estimate_order",
    "estimate_order_pooled",
]


@dataclass(frozen=True, eq=False)
class SearchState:
    """Current iterate plus the mode data that produced it.

    ``modes``/``eigenvalues`` describe the smallest Hessian eigenpair(s) at
    the *anchor* of the last step (None before the first step).
    """

    x: np.ndarray
    modes: np.ndarray = None
    eigenvalues: np.ndarray = None
    outer_iter: int = 0
    grad_norm: float = np.nan
    last_step_norm: float = 0.0
    last_step_inf: float = 0.0
    last_inner_iters: int = 0


@dataclass(frozen=True)
class SearchConfig:
    """Outer-loop settings.

    The reversal strength alpha + beta must exceed 1 (index-1); index-m runs
    take subset-keyed coefficient dicts instead (see ``build_index_m``).
    ``grad_tol`` is on the infinity norm of the energy gradient (tangent
    gradient on a manifold).  ``reference`` enables error reporting against a
    known saddle.  ``on_sphere`` switches to the great-circle construction
    with ``sphere_variant`` in {"hyperplane", "ray", "mix", "naive"}.
    """

    alpha: float = 1.0
    beta: float = 1.0
    index: int = 1
    subset_alpha: dict = None
    subset_beta: dict = None
    eig_tol: float = 1e-10
    subsolve: SubsolveConfig = field(default_factory=SubsolveConfig)
    grad_tol: float = 1e-10
    max_outer_iters: int = 100
    reference: tuple = None
    on_sphere: bool = False
    sphere_variant: str = "ray"
    adaptive_sum: bool = False
    divergence_radius: float = np.inf
    energy_floor: float = -np.inf
    domain: tuple = None  # ((lo...), (hi...)) box; leaving it ends the run
    verify_index: bool = True
    verify_cap: int = 1000
    # inner-iteration cap while the anchor is in a convex region: the
    # reversed objective is then unbounded and the solve only walks the
    # trust box, so high precision buys nothing
    convex_inner_cap: int = 200

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("index must be >= 1")
        if self.index == 1 and self.subset_alpha is None and self.subset_beta is None:
            if self.alpha + self.beta <= 1.0:
                raise ValueError(
                    f"alpha + beta = {self.alpha + self.beta:g} must exceed 1"
                )
        if self.grad_tol <= 0 or self.eig_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.on_sphere and self.sphere_variant not in ("hyperplane", "ray", "mix", "naive"):
            raise ValueError(f"unknown sphere variant {self.sphere_variant!r}")


def initial_state(p, x0, cfg: SearchConfig = None) -> SearchState:
    x0 = np.asarray(x0, dtype=float).copy()
    g = p.gradient(x0)
    if cfg is not None and cfg.on_sphere:
        M = mf.sphere(p.dimension)
        g = mf.tangent_project(M, x0, g)
    return SearchState(x=x0, grad_norm=float(np.linalg.norm(g, ord=np.inf)))


def _coefficients(p, x, cfg, lam, warm):
    """Effective (alpha, beta), optionally rescaled to 1 + lam2/|lam1|."""
    alpha, beta = cfg.alpha, cfg.beta
    if not cfg.adaptive_sum or lam[0] >= 0.0:
        return alpha, beta
    try:
        pair = min_modes(p, x, m=min(2, p.dimension), v0=warm, tol=max(cfg.eig_tol, 1e-6))
    except EigensolveError as exc:
        pair = exc.result
    lam2 = float(pair.eigenvalues[-1])
    if lam2 <= 0.0:
        return alpha, beta
    target = 1.0 + lam2 / abs(float(lam[0]))
    scale = target / (alpha + beta)
    return alpha * scale, beta * scale


def step(p, state: SearchState, cfg: SearchConfig) -> SearchState:
    """One outer iteration from ``state.x``; returns the updated state."""
    x = state.x
    try:
        if cfg.on_sphere:
            M = mf.sphere(p.dimension)
            proj = mf.tangent_projector(M, x)
            modes = min_modes(p, x, m=1, v0=state.modes, tol=cfg.eig_tol, projector=proj)
        else:
            modes = min_modes(p, x, m=cfg.index, v0=state.modes, tol=cfg.eig_tol)
    except EigensolveError as exc:
        raise EigensolveError(
            f"outer iteration {state.outer_iter + 1}: {exc}", result=exc.result
        ) from exc

    lam = modes.eigenvalues
    if cfg.on_sphere:
        frame = obj.sphere_frame(x, modes.eigenvectors[:, 0])
        if cfg.sphere_variant == "naive":
            L = obj.build_sphere_naive(p, frame)
        else:
            L = obj.build_manifold(p, frame, variant=cfg.sphere_variant)
        sol = mf.solve_constrained_subproblem(L, M, x, cfg.subsolve)
        g_new = mf.tangent_project(M, sol.y, p.gradient(sol.y))
    else:
        if lam[0] > 0.0 and cfg.subsolve.box_radius is None:
            raise ConvexRegionError(
                f"outer iteration {state.outer_iter + 1}: smallest Hessian "
                f"eigenvalue {lam[0]:.3e} > 0, so the reversed objective is "
                "unbounded below; configure a trust box to proceed"
            )
        if cfg.index == 1 and cfg.subset_alpha is None and cfg.subset_beta is None:
            alpha, beta = _coefficients(p, x, cfg, lam, modes.eigenvectors)
            L = obj.build_flat(p, x, modes.eigenvectors[:, 0], alpha, beta)
        else:
            L = obj.build_index_m(
                p, x, modes.eigenvectors, cfg.subset_alpha, cfg.subset_beta
            )
        sub = cfg.subsolve
        # while escaping (convex anchor, or the previous step already slammed
        # into the trust box) the minimizer is box-limited: cap the effort
        escaping = lam[0] > 0.0 or (
            sub.box_radius is not None
            and state.last_step_inf >= 0.999 * sub.box_radius
        )
        if escaping and cfg.convex_inner_cap and sub.max_inner_iters > cfg.convex_inner_cap:
            sub = replace(sub, max_inner_iters=cfg.convex_inner_cap)
        try:
            sol = minimize(L, x, sub)
        except SubsolveError as exc:
            raise SubsolveError(
                f"outer iteration {state.outer_iter + 1}: {exc}", trace=exc.trace
            ) from exc
        g_new = p.gradient(sol.y)

    return SearchState(
        x=sol.y,
        modes=modes.eigenvectors,
        eigenvalues=lam,
        outer_iter=state.outer_iter + 1,
        grad_norm=float(np.linalg.norm(g_new, ord=np.inf)),
        last_step_norm=float(np.linalg.norm(sol.y - x)),
        last_step_inf=float(np.linalg.norm(sol.y - x, ord=np.inf)),
        last_inner_iters=sol.inner_iters,
    )


@dataclass
class ConvergenceRecord:
    """Per-iteration search history plus the terminal classification.

    ``rows`` hold (iteration, x, error, grad_norm, lambda1, inner_iters);
    iteration 0 is the starting point.  ``error`` is the Euclidean distance
    to the configured reference saddle (None when no reference is known).
    """

    rows: list = field(default_factory=list)
    status: str = "max_iters"
    message: str = ""
    terminal_index: int = None
    reference: np.ndarray = None

    def add(self, iteration, x, error, grad_norm, lam1, inner_iters):
        self.rows.append(
            (int(iteration), np.asarray(x, float).copy(),
             None if error is None else float(error),
             float(grad_norm), lam1 if lam1 is None else float(lam1),
             int(inner_iters))
        )

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def iterations(self):
        return self.rows[-1][0] if self.rows else 0

    @property
    def x(self):
        return self.rows[-1][1]

    def errors(self, include_start=True):
        rows = self.rows if include_start else self.rows[1:]
        return [r[2] for r in rows if r[2] is not None]

    def grad_norms(self):
        return [r[3] for r in self.rows]

    def to_csv(self, path, max_point_columns=8):
        d = len(self.rows[0][1]) if self.rows else 0
        with_x = d <= max_point_columns
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["iter", "error", "grad_norm", "lambda1", "inner_iters"]
            if with_x:
                head += [f"x{i}" for i in range(d)]
            w.writerow(head)
            for it, x, err, gn, lam, inner in self.rows:
                row = [
                    it,
                    "" if err is None else f"{err:.17g}",
                    f"{gn:.17g}",
                    "" if lam is None else f"{lam:.17g}",
                    inner,
                ]
                if with_x:
                    row += [f"{xi:.17g}" for xi in x]
                w.writerow(row)

    def summary(self) -> dict:
        out = {
            "status": self.status,
            "message": self.message,
            "iterations": self.iterations,
            "terminal_index": self.terminal_index,
            "terminal_x": [float(v) for v in self.x] if self.rows else None,
            "terminal_grad_norm": self.rows[-1][3] if self.rows else None,
            "errors": self.errors(),
        }
        try:
            out["estimated_order"] = estimate_order(self.errors())
        except OrderEstimateError:
            out["estimated_order"] = None
        return out

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


def _error_to(reference, x):
    if reference is None:
        return None
    return float(np.linalg.norm(x - reference))


def run(p, x0, cfg: SearchConfig) -> ConvergenceRecord:
    """Iterate ``step`` from ``x0`` until tolerance, budget, or failure.

    Never raises on solver failures: the record's ``status``/``message``
    report them.  On convergence the terminal stationary point index is
    verified with a dense eigensolve when the dimension allows.
    """
    ref = None if cfg.reference is None else np.asarray(cfg.reference, float)
    record = ConvergenceRecord(reference=ref)
    state = initial_state(p, x0, cfg)
    record.add(0, state.x, _error_to(ref, state.x), state.grad_norm, None, 0)

    if state.grad_norm <= cfg.grad_tol:
        # started on a stationary point
        record.status = "converged"
    else:
        while state.outer_iter < cfg.max_outer_iters:
            try:
                state = step(p, state, cfg)
            except (EigensolveError, SubsolveError, ConvexRegionError) as exc:
                record.status = "failed"
                record.message = str(exc)
                break
            lam1 = float(state.eigenvalues[0])
            record.add(
                state.outer_iter, state.x, _error_to(ref, state.x),
                state.grad_norm, lam1, state.last_inner_iters,
            )
            if cfg.domain is not None:
                lo, hi = (np.asarray(b, float) for b in cfg.domain)
                if np.any(state.x < lo) or np.any(state.x > hi):
                    record.status = "left_region"
                    break
            if (np.linalg.norm(state.x) > cfg.divergence_radius
                    or p.energy(state.x) < cfg.energy_floor):
                record.status = "diverged"
                break
            if state.grad_norm <= cfg.grad_tol:
                record.status = "converged"
                break

    if record.converged and cfg.verify_index and p.dimension <= cfg.verify_cap:
        if cfg.on_sphere:
            record.terminal_index = mf.constrained_index(p, mf.sphere(p.dimension), record.x)
        else:
            record.terminal_index = stationary_index(p, record.x, cap=cfg.verify_cap)
    return record


def jacobian_of_step_map(p, x, cfg: SearchConfig, h=1e-4) -> np.ndarray:
    """Central-difference Jacobian of the one-step map x -> step(x).

    Requires a tight inner tolerance to be meaningful; each column costs two
    full outer steps.  At a saddle the result should vanish to O(h^2) plus
    solver noise.
    """
    x = np.asarray(x, dtype=float)
    d = p.dimension
    J = np.empty((d, d))
    e = np.zeros(d)
    for i in range(d):
        e[i] = h
        plus = step(p, initial_state(p, x + e, cfg), cfg)
        minus = step(p, initial_state(p, x - e, cfg), cfg)
        J[:, i] = (plus.x - minus.x) / (2.0 * h)
        e[i] = 0.0
    return J


def _qualifying(errors, floor):
    """Positive entries above the saturation floor, maximal decreasing suffix."""
    usable = []
    for v in (float(v) for v in errors):
        if not np.isfinite(v) or v <= floor:
            break
        usable.append(v)
    start = len(usable) - 1
    while start > 0 and usable[start - 1] > usable[start]:
        start -= 1
    return usable[start:]


def estimate_order(errors, floor=1e-14) -> float:
    """Least-squares convergence order from an error sequence.

    Entries at or below ``floor`` (machine-precision saturation) and anything
    after them are dropped, then the maximal strictly decreasing suffix is
    kept.  The slope of log e_{k+1} against log e_k over the surviving pairs
    is returned; at least three usable entries are required.
    """
    usable = _qualifying(errors, floor)
    if len(usable) < 3:
        raise OrderEstimateError(
            f"need at least 3 usable decreasing errors above {floor:g}, "
            f"got {len(usable)}"
        )
    logs = np.log(np.asarray(usable))
    slope, _ = np.polyfit(logs[:-1], logs[1:], 1)
    return float(slope)


def estimate_order_pooled(error_sequences, floor=1e-14) -> float:
    """Single convergence order fitted over the pairs of several runs.

    Short individual sequences (quadratic methods reach the floor in three
    or four steps) give noisy per-run slopes; pooling the
    (log e_k, log e_{k+1}) pairs of repeated runs of the same protocol
    stabilizes the fit.
    """
    xs, ys = [], []
    for seq in error_sequences:
        usable = _qualifying(seq, floor)
        logs = np.log(np.asarray(usable))
        xs.extend(logs[:-1])
        ys.extend(logs[1:])
    if len(xs) < 3:
        raise OrderEstimateError(f"need at least 3 pooled pairs, got {len(xs)}")
    slope, _ = np.polyfit(np.asarray(xs), np.asarray(ys), 1)
    return float(slope)
