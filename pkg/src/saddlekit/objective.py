"""Per-iteration modified objectives whose minimizers step toward saddles.

Given an anchor point x and the smallest-eigenvalue direction(s) of the
Hessian there, the energy is locally recombined so that the saddle of the
original surface becomes a strict local *minimum*: the component of V along
the unstable direction(s) enters with reversed sign while all other
directions are untouched.  Three constructions are provided:

* flat index-1 (``build_flat``): reversal along a single unit vector v,
  controlled by coefficients (alpha, beta) with alpha + beta > 1;
* index-m (``build_index_m``): reversal over subsets of m orthonormal
  directions with subset-indexed coefficients;
* sphere (``build_manifold``): the index-1 construction on the unit sphere,
  with projections taken along great circles instead of straight lines.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoefficientError, DimensionError, OffManifoldError

__all__ = [
    "ModifiedObjective",
    "GeodesicFrame",
    "build_flat",
    "build_index_m",
    "build_manifold",
    "build_sphere_naive",
    "sphere_frame",
    "COEFFICIENT_PRESETS",
]

# named (alpha, beta) presets: reverse off the complement hyperplane, reverse
# along the mode ray, or split evenly
COEFFICIENT_PRESETS = {
    "hyperplane": (2.0, 0.0),
    "ray": (0.0, 2.0),
    "mix": (1.0, 1.0),
}


@dataclass(frozen=True, eq=False)
class GeodesicFrame:
    """Anchor on the unit sphere with a tangent direction and its complement."""

    x: np.ndarray
    v: np.ndarray
    v_perp: np.ndarray

    def __post_init__(self):
        for name in ("x", "v", "v_perp"):
            vec = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, vec)
        if abs(np.linalg.norm(self.x) - 1.0) > 1e-10:
            raise OffManifoldError("frame anchor must lie on the unit sphere")
        for vec in (self.v, self.v_perp):
            if abs(np.linalg.norm(vec) - 1.0) > 1e-10 or abs(vec @ self.x) > 1e-10:
                raise OffManifoldError("frame directions must be unit tangents")


def sphere_frame(x, v) -> GeodesicFrame:
    """Build a frame at ``x`` on S^2; the complement is the cross product."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != (3,):
        raise DimensionError("sphere frames are defined in 3 dimensions")
    v = v - (v @ x) * x
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("tangent direction vanishes after projection")
    v = v / n
    return GeodesicFrame(x=x, v=v, v_perp=np.cross(x, v))


def _as_unit(v, what="direction"):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if abs(n - 1.0) > 1e-8:
        raise ValueError(f"{what} must be a unit vector (norm {n:.3e})")
    return v / n


def _geodesic_theta(x, t, y):
    """Great-circle parameter minimizing geodesic distance from y.

    Of the two arctan branches the one maximizing <x cos t + v sin t, y> is
    kept, which atan2 returns directly.  The antipodal tie resolves to pi/2.
    """
    a = float(x @ y)
    b = float(t @ y)
    if a == 0.0 and b == 0.0:
        return 0.5 * math.pi, a, b
    return math.atan2(b, a), a, b


@dataclass(frozen=True, eq=False)
class ModifiedObjective:
    """Locally reversed energy L(y) anchored at a point and mode direction(s).

    Instances are immutable; evaluation is pure.  ``variant`` is one of
    ``"flat"``, ``"index"``, ``"sphere"`` or ``"sphere_naive"``.
    ``coefficient_sum`` is the total reversal weight, which must exceed 1
    for the anchor construction to be convex near a saddle.
    """

    potential: object
    anchor: np.ndarray
    directions: np.ndarray  # (d, m) orthonormal columns
    variant: str
    alpha: float = 0.0
    beta: float = 0.0
    subset_alpha: dict = field(default_factory=dict)
    subset_beta: dict = field(default_factory=dict)
    frame: GeodesicFrame = None

    @property
    def coefficient_sum(self) -> float:
        if self.variant == "index":
            return float(
                sum(self.subset_alpha.values()) + sum(self.subset_beta.values())
            )
        return self.alpha + self.beta

    def _check(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != self.anchor.shape:
            raise DimensionError(
                f"objective expects points of shape {self.anchor.shape}, got {y.shape}"
            )
        if self.variant in ("sphere", "sphere_naive") and abs(np.linalg.norm(y) - 1.0) > 1e-8:
            raise OffManifoldError(f"point is off the unit sphere: |y| = {np.linalg.norm(y)!r}")
        return y

    # -- flat index-1 ---------------------------------------------------

    def _flat_value(self, y):
        p, x, v = self.potential, self.anchor, self.directions[:, 0]
        c = v @ (y - x)
        out = 0.0
        if self.alpha != 1.0:
            out += (1.0 - self.alpha) * p.energy(y)
        if self.alpha != 0.0:
            out += self.alpha * p.energy(y - c * v)
        if self.beta != 0.0:
            out -= self.beta * p.energy(x + c * v)
        return out

    def _flat_gradient(self, y):
        p, x, v = self.potential, self.anchor, self.directions[:, 0]
        c = v @ (y - x)
        g = np.zeros_like(y)
        if self.alpha != 1.0:
            g += (1.0 - self.alpha) * p.gradient(y)
        if self.alpha != 0.0:
            gh = p.gradient(y - c * v)
            g += self.alpha * (gh - (v @ gh) * v)
        if self.beta != 0.0:
            gr = p.gradient(x + c * v)
            g -= self.beta * (v @ gr) * v
        return g

    def _flat_hessian_vec(self, y, u):
        p, x, v = self.potential, self.anchor, self.directions[:, 0]
        c = v @ (y - x)
        out = np.zeros_like(u)
        if self.alpha != 1.0:
            out += (1.0 - self.alpha) * p.hessian_vec(y, u)
        if self.alpha != 0.0:
            up = u - (v @ u) * v
            hv = p.hessian_vec(y - c * v, up)
            out += self.alpha * (hv - (v @ hv) * v)
        if self.beta != 0.0:
            hr = p.hessian_vec(x + c * v, (v @ u) * v)
            out -= self.beta * (v @ hr) * v
        return out

    # -- index-m --------------------------------------------------------

    def _index_terms(self, y):
        x, V = self.anchor, self.directions
        dy = y - x
        coeff = V.T @ dy
        for s in set(self.subset_alpha) | set(self.subset_beta):
            cols = list(s)
            proj = V[:, cols] @ coeff[cols]
            yield s, x + (dy - proj), x + proj

    def _index_value(self, y):
        p = self.potential
        a_tot = sum(self.subset_alpha.values())
        out = (1.0 - a_tot) * p.energy(y) if a_tot != 1.0 else 0.0
        for s, y_perp, y_par in self._index_terms(y):
            a = self.subset_alpha.get(s, 0.0)
            b = self.subset_beta.get(s, 0.0)
            if a != 0.0:
                out += a * p.energy(y_perp)
            if b != 0.0:
                out -= b * p.energy(y_par)
        return out

    def _index_gradient(self, y):
        p, V = self.potential, self.directions
        a_tot = sum(self.subset_alpha.values())
        g = (1.0 - a_tot) * p.gradient(y) if a_tot != 1.0 else np.zeros_like(y)
        for s, y_perp, y_par in self._index_terms(y):
            cols = list(s)
            Vs = V[:, cols]
            a = self.subset_alpha.get(s, 0.0)
            b = self.subset_beta.get(s, 0.0)
            if a != 0.0:
                gh = p.gradient(y_perp)
                g += a * (gh - Vs @ (Vs.T @ gh))
            if b != 0.0:
                gr = p.gradient(y_par)
                g -= b * (Vs @ (Vs.T @ gr))
        return g

    def _index_hessian_vec(self, y, u):
        p, V = self.potential, self.directions
        a_tot = sum(self.subset_alpha.values())
        out = (1.0 - a_tot) * p.hessian_vec(y, u) if a_tot != 1.0 else np.zeros_like(u)
        for s, y_perp, y_par in self._index_terms(y):
            cols = list(s)
            Vs = V[:, cols]
            a = self.subset_alpha.get(s, 0.0)
            b = self.subset_beta.get(s, 0.0)
            if a != 0.0:
                up = u - Vs @ (Vs.T @ u)
                hv = p.hessian_vec(y_perp, up)
                out += a * (hv - Vs @ (Vs.T @ hv))
            if b != 0.0:
                hr = p.hessian_vec(y_par, Vs @ (Vs.T @ u))
                out -= b * (Vs @ (Vs.T @ hr))
        return out

    # -- sphere ---------------------------------------------------------

    def _sphere_points(self, y):
        f = self.frame
        th, a, b = _geodesic_theta(f.x, f.v, y)
        tp, ap, bp = _geodesic_theta(f.x, f.v_perp, y)
        along = f.x * math.cos(th) + f.v * math.sin(th)
        perp = f.x * math.cos(tp) + f.v_perp * math.sin(tp)
        return (th, a, b, along), (tp, ap, bp, perp)

    def _sphere_value(self, y):
        p = self.potential
        (_, _, _, along), (_, _, _, perp) = self._sphere_points(y)
        out = 0.0
        if self.alpha != 1.0:
            out += (1.0 - self.alpha) * p.energy(y)
        if self.alpha != 0.0:
            out += self.alpha * p.energy(perp)
        if self.beta != 0.0:
            out -= self.beta * p.energy(along)
        return out

    def _sphere_gradient(self, y):
        p, f = self.potential, self.frame
        (th, a, b, along), (tp, ap, bp, perp) = self._sphere_points(y)
        g = np.zeros_like(y)
        if self.alpha != 1.0:
            g += (1.0 - self.alpha) * p.gradient(y)
        if self.alpha != 0.0:
            # d/dy V(xi(theta_y)) = <grad V, xi'(theta)> dtheta/dy
            dxi = -f.x * math.sin(tp) + f.v_perp * math.cos(tp)
            dth = (ap * f.v_perp - bp * f.x) / (ap * ap + bp * bp)
            g += self.alpha * float(p.gradient(perp) @ dxi) * dth
        if self.beta != 0.0:
            dxi = -f.x * math.sin(th) + f.v * math.cos(th)
            dth = (a * f.v - b * f.x) / (a * a + b * b)
            g -= self.beta * float(p.gradient(along) @ dxi) * dth
        return g

    def _sphere_hessian_vec(self, y, u):
        # central differences on the analytic gradient
        h = 1e-6 * (1.0 + np.linalg.norm(y, ord=np.inf))
        un = np.linalg.norm(u)
        if un == 0.0:
            return np.zeros_like(u)
        step = (h / un) * u
        grad = self._sphere_gradient if self.variant == "sphere" else self._naive_gradient
        gp = grad(y + step)
        gm = grad(y - step)
        return (gp - gm) * (un / (2.0 * h))

    # -- sphere, straight-line projection pulled back by retraction ------

    def _naive_point(self, y):
        f = self.frame
        c = float(f.v @ (y - f.x))
        w = f.x + c * f.v
        n = float(np.linalg.norm(w))
        return w / n, n

    def _naive_value(self, y):
        p = self.potential
        xi, _ = self._naive_point(y)
        return p.energy(y) - self.beta * p.energy(xi)

    def _naive_gradient(self, y):
        p, f = self.potential, self.frame
        xi, n = self._naive_point(y)
        gxi = p.gradient(xi)
        gxi = gxi - (xi @ gxi) * xi
        return p.gradient(y) - (self.beta / n) * float(f.v @ gxi) * f.v

    # -- public evaluation ----------------------------------------------

    def value(self, y) -> float:
        y = self._check(y)
        if self.variant == "flat":
            return float(self._flat_value(y))
        if self.variant == "index":
            return float(self._index_value(y))
        if self.variant == "sphere":
            return float(self._sphere_value(y))
        return float(self._naive_value(y))

    def gradient(self, y) -> np.ndarray:
        y = self._check(y)
        if self.variant == "flat":
            return self._flat_gradient(y)
        if self.variant == "index":
            return self._index_gradient(y)
        if self.variant == "sphere":
            return self._sphere_gradient(y)
        return self._naive_gradient(y)

    def hessian_vec(self, y, u) -> np.ndarray:
        y = self._check(y)
        u = np.asarray(u, dtype=float)
        if u.shape != y.shape:
            raise DimensionError("hessian_vec direction has wrong shape")
        if self.variant == "flat":
            return self._flat_hessian_vec(y, u)
        if self.variant == "index":
            return self._index_hessian_vec(y, u)
        return self._sphere_hessian_vec(y, u)

    def precondition_diag(self, y):
        """Curvature-scale hint for inner solvers (None when unavailable).

        The energy's own Hessian diagonal is a good enough preconditioner
        for the reversed objective; exactness is irrelevant here.
        """
        if self.potential.hessian_diag_fn is None:
            return None
        return np.asarray(self.potential.hessian_diag_fn(np.asarray(y, float)), dtype=float)


def build_flat(p, x, v, alpha, beta) -> ModifiedObjective:
    """Index-1 objective: reverse V along unit vector ``v`` anchored at ``x``.

    L(y) = (1-alpha) V(y) + alpha V(y - vv^T (y-x)) - beta V(x + vv^T (y-x)).
    Requires alpha + beta > 1, otherwise the anchor Hessian
    H - (alpha+beta) lambda_1 vv^T is not positive definite at a saddle.
    """
    if alpha + beta <= 1.0:
        raise CoefficientError(
            f"alpha + beta = {alpha + beta:g} <= 1: the reversed curvature "
            "-(alpha+beta-1)*lambda_1 would not be positive at a saddle"
        )
    x = np.asarray(x, dtype=float)
    v = _as_unit(v)
    if v.shape != x.shape:
        raise DimensionError("anchor and direction dimensions differ")
    return ModifiedObjective(
        potential=p,
        anchor=x,
        directions=v[:, None],
        variant="flat",
        alpha=float(alpha),
        beta=float(beta),
    )


def _normalize_subsets(coeffs, m, what):
    out = {}
    for key, val in (coeffs or {}).items():
        s = tuple(sorted(set(int(i) for i in key)))
        if not s or s[0] < 0 or s[-1] >= m:
            raise ValueError(f"{what} key {key!r} is not a nonempty subset of 0..{m - 1}")
        if s in out:
            raise ValueError(f"{what} key {key!r} duplicates subset {s}")
        if val != 0.0:
            out[s] = float(val)
    return out


def build_index_m(p, x, directions, subset_alpha=None, subset_beta=None) -> ModifiedObjective:
    """Index-m objective over orthonormal ``directions`` (d, m).

    Coefficients are dicts keyed by tuples of 0-based mode indices (nonempty
    subsets of range(m)); their total must exceed 1.  With no coefficients
    given, the full-subset beta defaults to 2, the minimal symmetric choice.
    """
    x = np.asarray(x, dtype=float)
    V = np.asarray(directions, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] != x.shape[0]:
        raise DimensionError("directions and anchor dimensions differ")
    m = V.shape[1]
    if not np.allclose(V.T @ V, np.eye(m), atol=1e-10):
        raise ValueError("mode directions must be orthonormal to 1e-10")
    if subset_alpha is None and subset_beta is None:
        subset_beta = {tuple(range(m)): 2.0}
    sa = _normalize_subsets(subset_alpha, m, "subset_alpha")
    sb = _normalize_subsets(subset_beta, m, "subset_beta")
    total = sum(sa.values()) + sum(sb.values())
    if total <= 1.0:
        raise CoefficientError(
            f"sum of subset coefficients = {total:g} <= 1: reversal too weak "
            "for the anchor Hessian to be positive definite at a saddle"
        )
    return ModifiedObjective(
        potential=p,
        anchor=x,
        directions=V,
        variant="index",
        subset_alpha=sa,
        subset_beta=sb,
    )


def build_manifold(p, frame: GeodesicFrame, variant="ray", alpha=None, beta=None) -> ModifiedObjective:
    """Index-1 objective on the unit sphere using great-circle projections.

    ``variant`` picks a coefficient preset ("hyperplane" reverses off the
    complement geodesic, "ray" along the mode geodesic, "mix" both); explicit
    ``alpha``/``beta`` override it.  The alpha term samples V on the geodesic
    tangent to the complement direction, the beta term on the geodesic
    tangent to the mode itself.
    """
    if variant not in COEFFICIENT_PRESETS:
        raise ValueError(f"unknown variant {variant!r}; choose from {sorted(COEFFICIENT_PRESETS)}")
    pa, pb = COEFFICIENT_PRESETS[variant]
    alpha = pa if alpha is None else float(alpha)
    beta = pb if beta is None else float(beta)
    if alpha + beta <= 1.0:
        raise CoefficientError(f"alpha + beta = {alpha + beta:g} <= 1")
    if p.dimension != 3:
        raise DimensionError("sphere objectives require a 3-dimensional potential")
    return ModifiedObjective(
        potential=p,
        anchor=frame.x,
        directions=frame.v[:, None],
        variant="sphere",
        alpha=alpha,
        beta=beta,
        frame=frame,
    )


def build_sphere_naive(p, frame: GeodesicFrame, beta=2.0) -> ModifiedObjective:
    """Comparison variant: straight-line mode projection retracted to S^2.

    L(y) = V(y) - beta V(R_x(vv^T (y-x))) with R_x(u) = (x+u)/|x+u|.  It
    ignores the curvature of the sphere, which degrades the outer iteration
    to a linear rate; kept only to contrast with the geodesic construction.
    """
    if float(beta) <= 1.0:
        raise CoefficientError(f"beta = {beta:g} <= 1")
    if p.dimension != 3:
        raise DimensionError("sphere objectives require a 3-dimensional potential")
    return ModifiedObjective(
        potential=p,
        anchor=frame.x,
        directions=frame.v[:, None],
        variant="sphere_naive",
        alpha=0.0,
        beta=float(beta),
        frame=frame,
    )
