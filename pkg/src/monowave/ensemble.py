"""Coefficient laws and the monochromatic random field sum_j c_j phi_j."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from ._validation import as_points, check_positive, check_positive_int, check_seed
from .manifolds import SpectralWindow, design_matrix

LAW_KINDS = ("gaussian", "rademacher", "uniform")

#: Samples per counter block; fixed so results do not depend on worker count.
CHUNK = 2048


@dataclass(frozen=True)
class CoefficientLaw:
    """Centered symmetric coefficient law with variance ``variance``.

    ``uniform`` is uniform on [-sqrt(3 var), sqrt(3 var)].
    """

    kind: str
    variance: float = 1.0

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise ValueError(f"unknown coefficient law {self.kind!r}; expected one of {LAW_KINDS}")
        object.__setattr__(self, "variance", check_positive(self.variance, "variance"))

    @property
    def sigma(self):
        return math.sqrt(self.variance)

    @property
    def fourth_moment(self):
        s4 = self.variance**2
        return {"gaussian": 3.0 * s4, "rademacher": s4, "uniform": 9.0 * s4 / 5.0}[self.kind]

    @property
    def excess_fourth_moment(self):
        """E[c^4] - 3 sigma^4, the coefficient of the non-Gaussian covariance term."""
        if self.kind == "gaussian":
            return 0.0
        return self.fourth_moment - 3.0 * self.variance**2

    def with_variance(self, variance):
        return CoefficientLaw(self.kind, variance)

    def draw(self, seed, start, count, width):
        """Coefficients for samples ``start .. start+count-1`` as a (count, width) array."""
        if self.kind == "gaussian":
            z = rng.standard_normal_block(seed, start, count, width)
        elif self.kind == "rademacher":
            z = rng.sign_block(seed, start, count, width)
        else:
            u = rng.uniform_block(seed, start, count, width)
            z = math.sqrt(3.0) * (2.0 * u - 1.0)
        return self.sigma * z


@dataclass(frozen=True)
class RandomField:
    """One sample of the monochromatic wave."""

    window: SpectralWindow
    modes: tuple = field(repr=False)
    coefficients: np.ndarray = field(repr=False)
    law: CoefficientLaw
    seed: int

    def __post_init__(self):
        if len(self.coefficients) != len(self.modes):
            raise ValueError("need exactly one coefficient per mode")

    @property
    def model(self):
        return self.modes[0].model

    def __call__(self, x):
        return evaluate_field(self, x)


def normalization_variance(model, N):
    """Coefficient variance vol(M)/N making E[(1/vol M) int_M phi^2] = 1."""
    N = check_positive_int(N, "N")
    return model.volume / N


def sample_field(modes, law, seed, window=None):
    """Draw i.i.d. coefficients; coefficient j depends only on (seed, j)."""
    seed = check_seed(seed)
    modes = tuple(modes)
    coeffs = law.draw(seed, 0, 1, len(modes))[0]
    if window is None:
        window = enclosing_window(modes)
    return RandomField(window, modes, coeffs, law, seed)


def enclosing_window(modes):
    """Narrowest window of the form (T - eta, T] holding every mode, with a small margin.

    Mode sets containing the constant mode fit no such window; None is returned.
    """
    t = [m.frequency for m in modes]
    lo, hi = min(t), max(t)
    if lo <= 0:
        return None
    margin = min(0.5, 0.5 * lo)
    return SpectralWindow(hi, hi - lo + margin)


def evaluate_field(field, x):
    """phi(x) = sum_j c_j phi_j(x)."""
    pts, single = as_points(x, field.model.point_dim)
    vals = design_matrix(list(field.modes), pts) @ field.coefficients
    return float(vals[0]) if single else vals


def expected_local_mass(modes, quadrature, sigma2):
    """sigma^2 / vol(B) * int_B K(x, x) dx for a quadrature domain B."""
    phi = design_matrix(list(modes), quadrature.nodes)
    diag = np.sum(phi * phi, axis=1)
    return float(sigma2 * quadrature.integrate(diag) / quadrature.volume)


def map_chunks(func, samples, workers=1, chunk=CHUNK):
    """Apply ``func(start, count)`` over fixed sample chunks and concatenate in order."""
    bounds = rng.chunk_bounds(check_positive_int(samples, "samples"), chunk)
    if workers is None or workers <= 1 or len(bounds) == 1:
        parts = [func(s, c) for s, c in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: func(*b), bounds))
    return np.concatenate(parts, axis=0)


def sample_coefficients(law, N, samples, seed, workers=1):
    """All coefficient vectors for ``samples`` draws, shape (samples, N)."""
    return map_chunks(lambda s, c: law.draw(seed, s, c, N), samples, workers)
