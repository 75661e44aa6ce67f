"""Model manifolds with exact Laplace spectra, geodesic geometry and ball quadrature.

Three models are supported: the circle of circumference L, the flat torus
R^n / (L_1 Z x ... x L_n Z), and the unit round 2-sphere. Points are numpy
arrays: scalars (or 1-D arrays of scalars) on the circle, length-n vectors on
the torus, unit vectors in R^3 on the sphere.
"""
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from . import sphharm
from ._validation import as_points, check_positive, check_positive_int
from .errors import EmptyWindow, RadiusTooLarge

#: Window membership rule used everywhere: T - eta < t <= T.
WINDOW_CONVENTION = "T-eta < t <= T"


class ManifoldModel:
    """Common interface of the explicit model manifolds."""

    kind: str
    dimension: int

    @property
    def volume(self):
        raise NotImplementedError

    @property
    def injectivity_radius(self):
        raise NotImplementedError

    @property
    def point_dim(self):
        """Number of coordinates used to represent one point."""
        raise NotImplementedError

    def distance(self, x, y):
        raise NotImplementedError


@dataclass(frozen=True)
class FlatTorus(ManifoldModel):
    """Flat torus with side lengths ``lengths``."""

    lengths: tuple

    kind = "torus"

    def __post_init__(self):
        lengths = tuple(check_positive(float(v), "side length") for v in self.lengths)
        if not lengths:
            raise ValueError("a torus needs at least one side length")
        object.__setattr__(self, "lengths", lengths)

    @property
    def dimension(self):
        return len(self.lengths)

    @property
    def volume(self):
        return float(math.prod(self.lengths))

    @property
    def injectivity_radius(self):
        return min(self.lengths) / 2.0

    @property
    def point_dim(self):
        return self.dimension

    def wrap(self, x):
        return np.mod(x, np.asarray(self.lengths))

    def displacement(self, x, y):
        """Shortest displacement vector from ``y`` to ``x`` on the fundamental domain."""
        L = np.asarray(self.lengths)
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return d - L * np.round(d / L)

    def distance(self, x, y):
        X, _ = as_points(x, self.dimension)
        Y, _ = as_points(y, self.dimension)
        return np.sqrt(np.sum(self.displacement(X, Y) ** 2, axis=-1))


class Circle(FlatTorus):
    """Circle of circumference ``circumference``."""

    kind = "circle"

    def __init__(self, circumference=2 * math.pi):
        super().__init__((circumference,))

    @property
    def circumference(self):
        return self.lengths[0]

    def __repr__(self):
        return f"Circle(circumference={self.circumference!r})"


@dataclass(frozen=True)
class Sphere2(ManifoldModel):
    """Unit round 2-sphere embedded in R^3."""

    kind = "sphere"
    dimension = 2

    @property
    def volume(self):
        return 4.0 * math.pi

    @property
    def injectivity_radius(self):
        return math.pi

    @property
    def point_dim(self):
        return 3

    def distance(self, x, y):
        X, _ = as_points(x, 3)
        Y, _ = as_points(y, 3)
        cross = np.linalg.norm(np.cross(X, Y), axis=-1)
        dot = np.sum(X * Y, axis=-1)
        # atan2 form agrees with clamped arccos but keeps precision for tiny angles
        return np.arctan2(cross, dot)


@dataclass(frozen=True)
class SpectralWindow:
    """Frequency window ``T - eta < t <= T``."""

    center_frequency: float
    width: float

    def __post_init__(self):
        T = check_positive(self.center_frequency, "center_frequency")
        eta = check_positive(self.width, "width")
        if eta >= T:
            raise ValueError(f"window width {eta} must be below the center frequency {T}")
        object.__setattr__(self, "center_frequency", T)
        object.__setattr__(self, "width", eta)

    @property
    def lower(self):
        return self.center_frequency - self.width

    def contains(self, t):
        t = np.asarray(t, dtype=float)
        return (t > self.lower) & (t <= self.center_frequency)


@dataclass(frozen=True, order=True)
class EigenMode:
    """One orthonormal real Laplace eigenfunction.

    ``descriptor`` is ``(k, parity)`` on a torus or circle, with ``k`` an
    integer tuple and parity ``"cos"``/``"sin"``, and ``(l, m, flag)`` on the
    sphere.
    """

    frequency: float
    descriptor: tuple
    id: int = field(default=0, compare=False)
    model: ManifoldModel = field(default=None, compare=False, repr=False)

    @property
    def eigenvalue(self):
        return self.frequency**2


def _torus_modes(model, window):
    L = np.asarray(model.lengths)
    scale = 2.0 * math.pi / L
    T = window.center_frequency
    bounds = [int(math.floor(T / s)) for s in scale]
    axes = [np.arange(-b, b + 1) for b in bounds]
    lattice = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(L))
    t2 = np.sum((lattice * scale) ** 2, axis=1)
    lo = window.lower
    inside = (t2 > lo * lo) & (t2 <= T * T)
    lattice = lattice[inside]
    t2 = t2[inside]
    # one representative per +-k pair: first nonzero component positive
    nz = lattice != 0
    first = np.argmax(nz, axis=1)
    lead = lattice[np.arange(len(lattice)), first]
    zero = ~nz.any(axis=1)
    rep = (lead > 0) | zero
    entries = []
    for k, tt, is_zero in zip(lattice[rep], t2[rep], zero[rep]):
        k = tuple(int(v) for v in k)
        t = math.sqrt(tt)
        entries.append((t, (k, "cos")))
        if not is_zero:
            entries.append((t, (k, "sin")))
    return entries


def _sphere_modes(window):
    T = window.center_frequency
    lo = window.lower
    entries = []
    ell = 0
    while ell * (ell + 1) <= T * T:
        t2 = ell * (ell + 1)
        if t2 > lo * lo:
            t = math.sqrt(t2)
            entries.append((t, (ell, 0, "cos")))
            for m in range(1, ell + 1):
                entries.append((t, (ell, m, "cos")))
                entries.append((t, (ell, m, "sin")))
        ell += 1
    return entries


def enumerate_modes(model, window):
    """All orthonormal real eigenmodes with frequency in the window, sorted by (t, descriptor)."""
    if isinstance(model, Sphere2):
        entries = _sphere_modes(window)
    else:
        entries = _torus_modes(model, window)
    if not entries:
        raise EmptyWindow(
            f"no eigenvalue of {model!r} in ({window.lower}, {window.center_frequency}]"
        )
    entries.sort()
    return [EigenMode(t, d, id=j, model=model) for j, (t, d) in enumerate(entries)]


def mode_count(model, window):
    """Number of modes in the window; 0 when empty."""
    try:
        return len(enumerate_modes(model, window))
    except EmptyWindow:
        return 0


def design_matrix(modes, points):
    """Matrix of mode values, shape (number of points, number of modes)."""
    if not modes:
        raise ValueError("empty mode list")
    model = modes[0].model
    if isinstance(model, Sphere2):
        P, _ = as_points(points, 3)
        return sphharm.real_harmonics([m.descriptor for m in modes], P)
    P, _ = as_points(points, model.dimension)
    L = np.asarray(model.lengths)
    ks = np.array([m.descriptor[0] for m in modes], dtype=float)
    is_sin = np.array([m.descriptor[1] == "sin" for m in modes])
    is_zero = ~np.any(ks != 0, axis=1)
    amp = np.where(is_zero, 1.0, math.sqrt(2.0)) / math.sqrt(model.volume)
    phase = P @ (ks * (2.0 * math.pi / L)).T
    vals = np.where(is_sin, np.sin(phase), np.cos(phase))
    return vals * amp


def evaluate_mode(mode, x):
    """Value of the orthonormal eigenfunction ``mode`` at ``x``."""
    model = mode.model
    dim = 3 if isinstance(model, Sphere2) else model.dimension
    P, single = as_points(x, dim)
    vals = design_matrix([mode], P)[:, 0]
    return float(vals[0]) if single else vals


def geodesic_distance(model, x, y):
    """Exact geodesic distance; scalar for single points, array otherwise."""
    d = model.distance(x, y)
    return float(d[0]) if np.ndim(d) == 1 and d.shape[0] == 1 else d


def _unit_ball_volume(n):
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def _check_radius(model, r):
    r = check_positive(r, "radius")
    if r >= model.injectivity_radius:
        raise RadiusTooLarge(
            f"radius {r} must be below the injectivity radius {model.injectivity_radius}"
        )
    return r


def ball_volume(model, r):
    """Exact volume of a geodesic ball of radius ``r``."""
    r = _check_radius(model, r)
    if isinstance(model, Sphere2):
        return 2.0 * math.pi * (1.0 - math.cos(r))
    return _unit_ball_volume(model.dimension) * r**model.dimension


@dataclass(frozen=True)
class Quadrature:
    """Nodes and positive weights for integrating over a region of a model."""

    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    model: ManifoldModel = field(repr=False, default=None)

    @property
    def volume(self):
        """Volume of the region as seen by the rule (sum of weights)."""
        return float(np.sum(self.weights))

    @property
    def size(self):
        return len(self.weights)

    def integrate(self, values):
        """Integrate samples taken at ``nodes`` (leading axis) against the weights."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


@dataclass(frozen=True)
class BallQuadrature(Quadrature):
    """Quadrature rule on the geodesic ball of radius ``radius`` around ``center``."""

    center: np.ndarray = None
    radius: float = 0.0

    @property
    def exact_volume(self):
        return ball_volume(self.model, self.radius)


def _sphere_frame(z):
    z = np.asarray(z, dtype=float)
    z = z / np.linalg.norm(z)
    helper = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = helper - np.dot(helper, z) * z
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(z, e1)
    return z, e1, e2


def sphere_exp(z, rho, psi):
    """Exponential map of the unit sphere at ``z`` in polar coordinates (rho, psi)."""
    z, e1, e2 = _sphere_frame(z)
    rho = np.asarray(rho, dtype=float)[..., None]
    psi = np.asarray(psi, dtype=float)[..., None]
    return np.cos(rho) * z + np.sin(rho) * (np.cos(psi) * e1 + np.sin(psi) * e2)


def _s2_directions(resolution):
    # product rule on S^2: Gauss-Legendre in cos(theta) x trapezoid in phi
    xg, wg = np.polynomial.legendre.leggauss(resolution)
    nphi = 2 * resolution
    phi = 2 * math.pi * np.arange(nphi) / nphi
    ct, ph = np.meshgrid(xg, phi, indexing="ij")
    st = np.sqrt(1 - ct**2)
    dirs = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1).reshape(-1, 3)
    w = np.repeat(wg, nphi) * (2 * math.pi / nphi)
    return dirs, w


def ball_quadrature(model, z, r, resolution):
    """Geodesic-polar product rule on B_r(z).

    Radial Gauss-Legendre with ``resolution`` nodes times a uniform angular
    rule with ``2 * resolution`` nodes (dimension 2). On the circle it is a
    plain Gauss-Legendre rule with ``resolution`` nodes.
    """
    r = _check_radius(model, r)
    resolution = check_positive_int(resolution, "resolution")
    xg, wg = np.polynomial.legendre.leggauss(resolution)
    if isinstance(model, Sphere2):
        zc, _, _ = _sphere_frame(z)
        rho = 0.5 * r * (xg + 1.0)
        wr = 0.5 * r * wg * np.sin(rho)
        npsi = 2 * resolution
        psi = 2 * math.pi * np.arange(npsi) / npsi
        R, Psi = np.meshgrid(rho, psi, indexing="ij")
        nodes = sphere_exp(zc, R.ravel(), Psi.ravel())
        weights = np.repeat(wr, npsi) * (2 * math.pi / npsi)
        return BallQuadrature(nodes, weights, model, center=zc, radius=r)

    n = model.dimension
    zc = np.asarray(z, dtype=float).reshape(n)
    if n == 1:
        nodes = zc + r * xg[:, None]
        return BallQuadrature(model.wrap(nodes), r * wg, model, center=zc, radius=r)
    rho = 0.5 * r * (xg + 1.0)
    wr = 0.5 * r * wg * rho ** (n - 1)
    if n == 2:
        npsi = 2 * resolution
        psi = 2 * math.pi * np.arange(npsi) / npsi
        dirs = np.stack([np.cos(psi), np.sin(psi)], axis=-1)
        wd = np.full(npsi, 2 * math.pi / npsi)
    elif n == 3:
        dirs, wd = _s2_directions(resolution)
    else:
        raise NotImplementedError("ball quadrature is implemented for dimensions 1, 2 and 3")
    nodes = zc + (rho[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    weights = np.outer(wr, wd).ravel()
    return BallQuadrature(model.wrap(nodes), weights, model, center=zc, radius=r)


def manifold_quadrature(model, resolution):
    """Quadrature over the whole manifold, exact for band-limited integrands.

    Torus and circle: uniform periodic grid with ``resolution`` points per
    side (exact for trigonometric polynomials of degree < resolution).
    Sphere: Gauss-Legendre in cos(theta) times uniform longitudes.
    """
    resolution = check_positive_int(resolution, "resolution")
    if isinstance(model, Sphere2):
        dirs, w = _s2_directions(resolution)
        return Quadrature(dirs, w, model)
    axes = [np.arange(resolution) * (L / resolution) for L in model.lengths]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, model.dimension)
    w = np.full(pts.shape[0], model.volume / pts.shape[0])
    return Quadrature(pts, w, model)


def _grid_counts(model, spacing):
    n = model.dimension
    counts = []
    for L in model.lengths:
        m = math.ceil(L / spacing - 1e-12)
        if n > 4:
            m = max(m, math.ceil(L * math.sqrt(n) / (2 * spacing) - 1e-12))
        counts.append(max(m, 1))
    return tuple(counts)


def torus_grid_counts(model, spacing):
    """Points per axis of the product grid emitted by :func:`covering_grid`."""
    return _grid_counts(model, check_positive(spacing, "spacing"))


def covering_grid(model, spacing):
    """Finite point set with every point of the manifold within ``spacing`` of it."""
    spacing = check_positive(spacing, "spacing")
    if isinstance(model, Sphere2):
        nbands = max(1, math.ceil(math.pi / spacing))
        dtheta = math.pi / nbands
        pts = []
        for i in range(nbands):
            theta = (i + 0.5) * dtheta
            # widest circle met by this band
            smax = 1.0 if (i * dtheta <= math.pi / 2 <= (i + 1) * dtheta) else max(
                math.sin(i * dtheta), math.sin((i + 1) * dtheta)
            )
            half_lat = dtheta / 2
            room = max(spacing**2 - half_lat**2, (0.25 * spacing) ** 2)
            m = max(1, math.ceil(math.pi * smax / (0.95 * math.sqrt(room))))
            phi = 2 * math.pi * (np.arange(m) + 0.5 * (i % 2)) / m
            st = math.sin(theta)
            pts.append(np.stack([st * np.cos(phi), st * np.sin(phi), np.full(m, math.cos(theta))], -1))
        return np.concatenate(pts)
    counts = _grid_counts(model, spacing)
    axes = [np.arange(m) * (L / m) for m, L in zip(counts, model.lengths)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, model.dimension)
    return grid[:, 0] if isinstance(model, Circle) else grid


def probe_points(model, count, seed=0):
    """Dense probe set used to certify coverings (uniform random plus structured points)."""
    rng = np.random.default_rng(seed)
    if isinstance(model, Sphere2):
        # Fibonacci lattice plus the poles
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        phi = math.pi * (1 + 5**0.5) * i
        s = np.sqrt(1 - z * z)
        pts = np.stack([s * np.cos(phi), s * np.sin(phi), z], -1)
        return np.concatenate([pts, [[0, 0, 1.0], [0, 0, -1.0]]])
    return rng.uniform(0, 1, size=(count, model.dimension)) * np.asarray(model.lengths)


def covering_radius(model, grid, probes):
    """Largest distance from a probe point to its nearest grid point."""
    if isinstance(model, Sphere2):
        chord, _ = cKDTree(np.asarray(grid)).query(np.asarray(probes))
        return float(np.max(2 * np.arcsin(np.clip(chord / 2, 0, 1))))
    L = np.asarray(model.lengths)
    G, _ = as_points(grid, model.dimension)
    Q, _ = as_points(probes, model.dimension)
    # cKDTree periodic boxes need coordinates in [0, L)
    tree = cKDTree(model.wrap(G) % L, boxsize=L)
    d, _ = tree.query(model.wrap(Q) % L)
    return float(np.max(d))


class VolumeEstimate(NamedTuple):
    value: float
    stderr: float


def _uniform_in_ball(model, z, r, count, rng):
    if isinstance(model, Sphere2):
        cos_rho = rng.uniform(math.cos(r), 1.0, size=count)
        psi = rng.uniform(0, 2 * math.pi, size=count)
        return sphere_exp(z, np.arccos(cos_rho), psi)
    n = model.dimension
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1)[:, None]
    rho = r * rng.uniform(0, 1, size=count) ** (1.0 / n)
    pts = np.asarray(z, dtype=float).reshape(n) + rho[:, None] * g
    return model.wrap(pts)


def symmetric_difference_volume(model, z, z_prime, r, resolution, seed=0):
    """Monte Carlo estimate of vol(B_r(z) symmetric-difference B_r(z')).

    Draws ``resolution`` uniform points in each ball and counts those outside
    the other ball. Returns a :class:`VolumeEstimate` with its standard error.
    """
    r = _check_radius(model, r)
    resolution = check_positive_int(resolution, "resolution")
    sep = float(np.atleast_1d(model.distance(z, z_prime))[0])
    if sep >= model.injectivity_radius - r:
        raise RadiusTooLarge(
            f"centers {sep} apart need separation below injectivity radius minus r"
        )
    if sep == 0.0:
        return VolumeEstimate(0.0, 0.0)
    rng = np.random.default_rng(seed)
    vol = ball_volume(model, r)
    value = 0.0
    var = 0.0
    for a, b in ((z, z_prime), (z_prime, z)):
        pts = _uniform_in_ball(model, a, r, resolution, rng)
        outside = model.distance(pts, b) > r
        p = outside.mean()
        value += vol * p
        var += vol**2 * p * (1 - p) / resolution
    return VolumeEstimate(value, math.sqrt(var))
