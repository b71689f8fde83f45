"""Energy surfaces: the model abstraction and the built-in benchmark problems.

Every surface exposes energy, gradient and Hessian-vector products through
:class:`PotentialModel`.  The four builtins are a 2-d double well, a 2-d
three-hole surface, a 3-d axis-aligned quadratic (used on the unit sphere),
and a Morse-potential adatom island on an FCC(111) slab.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

__all__ = [
    "PotentialModel",
    "MorseClusterSpec",
    "make_builtin",
    "from_quadratic",
    "build_morse_lattice",
    "morse_pair_energy",
    "write_xyz",
    "BUILTIN_NAMES",
]

BUILTIN_NAMES = ("double_well", "three_hole", "sphere_quadratic", "morse_island")


@dataclass(frozen=True, eq=False)
class PotentialModel:
    """Evaluable energy surface with analytic or finite-difference derivatives.

    ``stationary_points`` is optional test metadata: tuples of
    ``(point, hessian_index)`` for known critical points.  ``extras`` carries
    problem-specific data (cluster geometry, element symbol, ...).
    """

    name: str
    dimension: int
    energy_fn: callable
    gradient_fn: callable
    hessian_vec_fn: callable = None
    hessian_diag_fn: callable = None  # optional preconditioner hint
    stationary_points: tuple = ()
    extras: dict = field(default_factory=dict)

    def _check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise DimensionError(
                f"{self.name}: expected point of length {self.dimension}, "
                f"got shape {x.shape}"
            )
        return x

    def energy(self, x) -> float:
        return float(self.energy_fn(self._check_point(x)))

    def gradient(self, x) -> np.ndarray:
        return np.asarray(self.gradient_fn(self._check_point(x)), dtype=float)

    def hessian_vec(self, x, u) -> np.ndarray:
        """Action of the Hessian at ``x`` on ``u`` (central FD fallback)."""
        x = self._check_point(x)
        u = self._check_point(u)
        if self.hessian_vec_fn is not None:
            return np.asarray(self.hessian_vec_fn(x, u), dtype=float)
        unorm = np.linalg.norm(u)
        if unorm == 0.0:
            return np.zeros_like(u)
        h = 1e-5 * (1.0 + np.linalg.norm(x, ord=np.inf))
        un = u / unorm
        gp = self.gradient_fn(x + h * un)
        gm = self.gradient_fn(x - h * un)
        return (np.asarray(gp) - np.asarray(gm)) * (unorm / (2.0 * h))

    def saddle_points(self):
        """Known index-1 stationary points from the metadata."""
        return [np.asarray(p, float) for p, idx in self.stationary_points if idx == 1]


# ----------------------------------------------------------------------------
# 2-d double well:  V(x, y) = (x^2 - 1)^2 / 4 + mu y^2 / 2


def _double_well(mu: float) -> PotentialModel:
    if mu <= 0:
        raise ValueError(f"double_well requires mu > 0, got {mu}")

    def energy(p):
        x, y = p
        return 0.25 * (x * x - 1.0) ** 2 + 0.5 * mu * y * y

    def gradient(p):
        x, y = p
        return np.array([(x * x - 1.0) * x, mu * y])

    def hess_vec(p, u):
        x, _ = p
        return np.array([(3.0 * x * x - 1.0) * u[0], mu * u[1]])

    points = (
        (np.array([1.0, 0.0]), 0),
        (np.array([-1.0, 0.0]), 0),
        (np.array([0.0, 0.0]), 1),
    )
    return PotentialModel(
        name="double_well",
        dimension=2,
        energy_fn=energy,
        gradient_fn=gradient,
        hessian_vec_fn=hess_vec,
        stationary_points=points,
        extras={"mu": mu},
    )


# ----------------------------------------------------------------------------
# 2-d three-hole surface: two deep wells near (+-1, 0), a shallow well above,
# three index-1 saddles between them and one maximum.

# (coefficient, x-center, y-center) of the Gaussian terms
_THREE_HOLE_TERMS = (
    (3.0, 0.0, 1.0 / 3.0),
    (-3.0, 0.0, 5.0 / 3.0),
    (-5.0, 1.0, 0.0),
    (-5.0, -1.0, 0.0),
)

# critical points refined to machine precision by Newton iteration
_THREE_HOLE_POINTS = (
    ((0.0, -0.31582655047813868), 1),
    ((-0.61727230787645981, 1.1027345175080963), 1),
    ((0.61727230787645981, 1.1027345175080963), 1),
    ((-1.0480549928242195, -0.04209366630667781), 0),
    ((1.0480549928242195, -0.04209366630667781), 0),
    ((0.0, 1.5370820044494622), 0),
    ((0.0, 0.51918674189207281), 2),
)


def _three_hole() -> PotentialModel:
    terms = _THREE_HOLE_TERMS
    exp = math.exp

    def energy(p):
        x, y = p
        v = 0.2 * x ** 4 + 0.2 * (y - 1.0 / 3.0) ** 4
        for c, a, b in terms:
            dx = x - a
            dy = y - b
            v += c * exp(-dx * dx - dy * dy)
        return v

    def gradient(p):
        x, y = p
        gx = 0.8 * x ** 3
        gy = 0.8 * (y - 1.0 / 3.0) ** 3
        for c, a, b in terms:
            dx = x - a
            dy = y - b
            e = c * exp(-dx * dx - dy * dy)
            gx -= 2.0 * e * dx
            gy -= 2.0 * e * dy
        return np.array([gx, gy])

    def hess_vec(p, u):
        x, y = p
        hxx = 2.4 * x * x
        hyy = 2.4 * (y - 1.0 / 3.0) ** 2
        hxy = 0.0
        for c, a, b in terms:
            dx = x - a
            dy = y - b
            e = c * exp(-dx * dx - dy * dy)
            hxx += e * (4.0 * dx * dx - 2.0)
            hyy += e * (4.0 * dy * dy - 2.0)
            hxy += e * 4.0 * dx * dy
        return np.array([hxx * u[0] + hxy * u[1], hxy * u[0] + hyy * u[1]])

    points = tuple((np.array(p), idx) for p, idx in _THREE_HOLE_POINTS)
    return PotentialModel(
        name="three_hole",
        dimension=2,
        energy_fn=energy,
        gradient_fn=gradient,
        hessian_vec_fn=hess_vec,
        stationary_points=points,
    )


# ----------------------------------------------------------------------------
# 3-d quadratic x1^2 + 2 x2^2 + 3 x3^2 (interesting once restricted to S^2)

_SPHERE_QUAD_DIAG = np.array([2.0, 4.0, 6.0])  # Hessian diagonal


def _sphere_quadratic() -> PotentialModel:
    diag = _SPHERE_QUAD_DIAG

    def energy(p):
        return float(p[0] ** 2 + 2.0 * p[1] ** 2 + 3.0 * p[2] ** 2)

    def gradient(p):
        return diag * p

    def hess_vec(p, u):
        return diag * u

    return PotentialModel(
        name="sphere_quadratic",
        dimension=3,
        energy_fn=energy,
        gradient_fn=gradient,
        hessian_vec_fn=hess_vec,
        stationary_points=((np.zeros(3), 0),),
    )


def from_quadratic(matrix, name="quadratic") -> PotentialModel:
    """Model for V(x) = x^T H x / 2 with a constant symmetric ``matrix``."""
    H = np.asarray(matrix, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("quadratic matrix must be square")
    if not np.allclose(H, H.T, atol=1e-12):
        raise ValueError("quadratic matrix must be symmetric")
    d = H.shape[0]
    index = int(np.sum(np.linalg.eigvalsh(H) < 0.0))
    return PotentialModel(
        name=name,
        dimension=d,
        energy_fn=lambda x: 0.5 * float(x @ H @ x),
        gradient_fn=lambda x: H @ x,
        hessian_vec_fn=lambda x, u: H @ u,
        stationary_points=((np.zeros(d), index),),
        extras={"matrix": H},
    )


# ----------------------------------------------------------------------------
# Morse adatom island on an FCC(111) slab


@dataclass(frozen=True)
class MorseClusterSpec:
    """Parameters of the Morse island problem.

    Defaults reproduce diffusion barriers on Pt(111): pair well depth ``A``
    in eV, inverse range ``a`` in 1/Angstrom, equilibrium distance ``r0`` and
    cutoff ``rc`` in Angstrom.  The slab is ``slab_layers`` hexagonal layers
    of ``atoms_per_layer`` atoms with the bottom ``frozen_layers`` held fixed;
    ``island_atoms`` adatoms (a compact heptamer by default) sit on hollow
    sites above the top layer.
    """

    A: float = 0.7102
    a: float = 1.6047
    r0: float = 2.8970
    rc: float = 9.5
    lattice_constant: float = 2.74412
    slab_layers: int = 6
    atoms_per_layer: int = 56
    frozen_layers: int = 3
    island_atoms: int = 7

    def __post_init__(self):
        for name in ("A", "a", "r0", "rc", "lattice_constant"):
            if getattr(self, name) <= 0:
                raise ValueError(f"MorseClusterSpec.{name} must be positive")
        if self.slab_layers < 1 or self.atoms_per_layer < 1:
            raise ValueError("slab must contain at least one layer of atoms")
        if not 0 <= self.frozen_layers <= self.slab_layers:
            raise ValueError("frozen_layers must lie in [0, slab_layers]")
        if not 0 <= self.island_atoms <= 7:
            raise ValueError("island_atoms supports 0..7 (compact heptamer)")


def morse_pair_energy(r, spec: MorseClusterSpec) -> float:
    """Cut-and-shifted Morse pair energy at separation ``r``.

    The raw well is A*(exp(-2a(r-r0)) - 2 exp(-a(r-r0))); the value is
    shifted to vanish at the cutoff and is exactly zero beyond it.  The
    derivative is left discontinuous at the cutoff.
    """
    r = float(r)
    if r >= spec.rc:
        return 0.0
    w = math.exp(-spec.a * (r - spec.r0))
    wc = math.exp(-spec.a * (spec.rc - spec.r0))
    return spec.A * (w * w - 2.0 * w) - spec.A * (wc * wc - 2.0 * wc)


def _layer_grid(n: int):
    """Factor a layer size into (cols, rows) as close to square as possible."""
    rows = int(math.isqrt(n))
    while n % rows:
        rows -= 1
    return n // rows, rows


def build_morse_lattice(spec: MorseClusterSpec = None):
    """Construct slab + island coordinates and the frozen-atom mask.

    Returns ``(coords, frozen)`` with ``coords`` of shape (n_atoms, 3) and
    ``frozen`` a boolean vector marking the bottom ``frozen_layers`` layers.
    Layers stack ABC with interlayer spacing d*sqrt(2/3); the island occupies
    fcc hollow sites (continuing the bulk stacking) centered on the slab.
    """
    if spec is None:
        spec = MorseClusterSpec()
    d = spec.lattice_constant
    a1 = np.array([d, 0.0])
    a2 = np.array([0.5 * d, 0.5 * math.sqrt(3.0) * d])
    stack = (a1 + a2) / 3.0
    height = d * math.sqrt(2.0 / 3.0)
    cols, rows = _layer_grid(spec.atoms_per_layer)

    coords = []
    frozen = []
    for layer in range(spec.slab_layers):
        off = layer * stack
        z = -layer * height
        fixed = layer >= spec.slab_layers - spec.frozen_layers
        for j in range(rows):
            for i in range(cols):
                xy = i * a1 + j * a2 + off
                coords.append([xy[0], xy[1], z])
                frozen.append(fixed)

    if spec.island_atoms:
        # hollow sites continue the ABC sequence one layer above the surface
        off = -stack
        center = (cols // 2) * a1 + (rows // 2) * a2 + off
        ring = [a1, a2, a2 - a1, -a1, -a2, a1 - a2]
        sites = [center] + [center + r for r in ring]
        for xy in sites[: spec.island_atoms]:
            coords.append([xy[0], xy[1], height])
            frozen.append(False)

    return np.array(coords, dtype=float), np.array(frozen, dtype=bool)


def _morse_island(spec: MorseClusterSpec = None) -> PotentialModel:
    if spec is None:
        spec = MorseClusterSpec()
    base, frozen = build_morse_lattice(spec)
    n_atoms = len(base)
    free_idx = np.flatnonzero(~frozen)
    dim = 3 * len(free_idx)

    iu, ju = np.triu_indices(n_atoms, 1)
    # frozen-frozen pairs never move: fold their energy into a constant
    static = frozen[iu] & frozen[ju]
    ia, ja = iu[~static], ju[~static]
    A, aa, r0, rc = spec.A, spec.a, spec.r0, spec.rc
    wc = math.exp(-aa * (rc - r0))
    shift = A * (wc * wc - 2.0 * wc)

    # interaction list pruned on the reference geometry: pairs farther than
    # rc + margin can only enter the cutoff if atoms move more than margin/2,
    # which the assembly guard rejects (saddle hops displace atoms ~2 A)
    margin = 6.0
    ref_d = np.linalg.norm(base[ia] - base[ja], axis=1)
    keep = ref_d < rc + margin
    ia, ja = ia[keep], ja[keep]

    def _pair_terms(r):
        w = np.exp(-aa * (r - r0))
        phi = A * (w * w - 2.0 * w) - shift
        dphi = 2.0 * aa * A * (w - w * w)
        ddphi = 2.0 * aa * aa * A * (2.0 * w * w - w)
        return phi, dphi, ddphi

    if static.any():
        dvec = base[iu[static]] - base[ju[static]]
        r = np.linalg.norm(dvec, axis=1)
        m = r < rc
        w = np.exp(-aa * (r[m] - r0))
        e_static = float(np.sum(A * (w * w - 2.0 * w) - shift))
    else:
        e_static = 0.0

    base_free = base[free_idx]

    def _assemble(x):
        xa = x.reshape(-1, 3)
        disp = np.sqrt(np.max(np.sum((xa - base_free) ** 2, axis=1)))
        if disp > 0.5 * margin:
            raise ValueError(
                f"atom moved {disp:.2f} A from the reference geometry, beyond "
                f"the {0.5 * margin:.2f} A validity radius of the pruned "
                "interaction list"
            )
        full = base.copy()
        full[free_idx] = xa
        return full

    def energy(x):
        full = _assemble(x)
        dvec = full[ia] - full[ja]
        r = np.sqrt(np.einsum("ij,ij->i", dvec, dvec))
        m = r < rc
        phi, _, _ = _pair_terms(r[m])
        return float(phi.sum()) + e_static

    def gradient(x):
        full = _assemble(x)
        dvec = full[ia] - full[ja]
        r = np.sqrt(np.einsum("ij,ij->i", dvec, dvec))
        m = r < rc
        i, j, rm = ia[m], ja[m], r[m]
        _, dphi, _ = _pair_terms(rm)
        f = (dphi / rm)[:, None] * dvec[m]
        g = np.zeros((n_atoms, 3))
        for k in range(3):
            g[:, k] = np.bincount(i, weights=f[:, k], minlength=n_atoms)
            g[:, k] -= np.bincount(j, weights=f[:, k], minlength=n_atoms)
        return g[free_idx].ravel()

    def hess_vec(x, u):
        full = _assemble(x)
        ufull = np.zeros((n_atoms, 3))
        ufull[free_idx] = u.reshape(-1, 3)
        dvec = full[ia] - full[ja]
        r = np.sqrt(np.einsum("ij,ij->i", dvec, dvec))
        m = r < rc
        i, j, rm = ia[m], ja[m], r[m]
        _, dphi, ddphi = _pair_terms(rm)
        rhat = dvec[m] / rm[:, None]
        s = ufull[i] - ufull[j]
        radial = np.einsum("ij,ij->i", rhat, s)
        tang = dphi / rm
        hv = (ddphi - tang)[:, None] * radial[:, None] * rhat + tang[:, None] * s
        out = np.zeros((n_atoms, 3))
        for k in range(3):
            out[:, k] = np.bincount(i, weights=hv[:, k], minlength=n_atoms)
            out[:, k] -= np.bincount(j, weights=hv[:, k], minlength=n_atoms)
        return out[free_idx].ravel()

    def hess_diag(x):
        full = _assemble(x)
        dvec = full[ia] - full[ja]
        r = np.sqrt(np.einsum("ij,ij->i", dvec, dvec))
        m = r < rc
        i, j, rm = ia[m], ja[m], r[m]
        _, dphi, ddphi = _pair_terms(rm)
        rhat = dvec[m] / rm[:, None]
        tang = dphi / rm
        dd = (ddphi - tang)[:, None] * rhat * rhat + tang[:, None]
        out = np.zeros((n_atoms, 3))
        for k in range(3):
            out[:, k] = np.bincount(i, weights=dd[:, k], minlength=n_atoms)
            out[:, k] += np.bincount(j, weights=dd[:, k], minlength=n_atoms)
        return out[free_idx].ravel()

    return PotentialModel(
        name="morse_island",
        dimension=dim,
        energy_fn=energy,
        gradient_fn=gradient,
        hessian_vec_fn=hess_vec,
        hessian_diag_fn=hess_diag,
        extras={
            "spec": spec,
            "coords": base,
            "frozen": frozen,
            "free_indices": free_idx,
            "element": "Pt",
        },
    )


def morse_full_coordinates(model: PotentialModel, x) -> np.ndarray:
    """Expand a Morse optimization vector into the full (n_atoms, 3) array."""
    full = model.extras["coords"].copy()
    full[model.extras["free_indices"]] = np.asarray(x, float).reshape(-1, 3)
    return full


# ----------------------------------------------------------------------------


def make_builtin(name: str, params: dict = None) -> PotentialModel:
    """Instantiate a benchmark surface by name.

    ``params`` overrides problem constants, e.g. ``{"mu": 2.0}`` for the
    double well or any :class:`MorseClusterSpec` field for the island.
    """
    params = dict(params or {})
    if name == "double_well":
        mu = float(params.pop("mu", 1.0))
        if params:
            raise ValueError(f"double_well: unknown parameters {params}")
        return _double_well(mu=mu)
    if name == "three_hole":
        if params:
            raise ValueError(f"three_hole takes no parameters, got {params}")
        return _three_hole()
    if name == "sphere_quadratic":
        if params:
            raise ValueError(f"sphere_quadratic takes no parameters, got {params}")
        return _sphere_quadratic()
    if name == "morse_island":
        return _morse_island(MorseClusterSpec(**params))
    raise ValueError(f"unknown builtin {name!r}; choose from {BUILTIN_NAMES}")


def write_xyz(path, coords, symbol="Pt", comment=""):
    """Write coordinates (n, 3) to a standard XYZ text file."""
    coords = np.asarray(coords, dtype=float).reshape(-1, 3)
    with open(path, "w") as fh:
        fh.write(f"{len(coords)}\n{comment}\n")
        for row in coords:
            fh.write(f"{symbol} {row[0]:.10f} {row[1]:.10f} {row[2]:.10f}\n")
