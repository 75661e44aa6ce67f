"""Two-point kernel of the window projector and its Bessel-asymptotic main term."""
import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_points, check_positive
from .bessel import normalized_bessel
from .errors import EtaExceedsT
from .manifolds import design_matrix


class TwoPointKernel:
    """K(x, y) = sum_j phi_j(x) phi_j(y) over a fixed list of modes."""

    def __init__(self, modes):
        if not modes:
            raise ValueError("empty mode list")
        self.modes = tuple(modes)
        self.model = self.modes[0].model

    @property
    def n_modes(self):
        return len(self.modes)

    def values(self, points):
        return design_matrix(list(self.modes), points)

    def matrix(self, x, y=None):
        """Kernel matrix K(x_a, y_b) by direct summation over the modes."""
        phi_x = self.values(x)
        phi_y = phi_x if y is None else self.values(y)
        return phi_x @ phi_y.T

    def diagonal(self, x):
        phi = self.values(x)
        return np.sum(phi * phi, axis=1)

    def __call__(self, x, y):
        return kernel_exact(self, x, y)


def kernel_exact(kernel, x, y):
    """K(x, y) for single points (float) or paired arrays of points (vector)."""
    dim = kernel.model.point_dim
    X, single_x = as_points(x, dim)
    Y, single_y = as_points(y, dim)
    vals = np.sum(kernel.values(X) * kernel.values(Y), axis=1)
    return float(vals[0]) if single_x and single_y else vals


def sphere_area(n):
    """Surface measure of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class KernelPrediction:
    """Main term of the window kernel as a function of geodesic distance."""

    n: int
    T: float
    eta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.n!r}")
        check_positive(self.T, "T")
        check_positive(self.eta, "eta")
        if self.eta >= self.T:
            raise EtaExceedsT(f"eta={self.eta} must be below T={self.T}")

    @property
    def shell_factor(self):
        """(1 - (1 - eta/T)^n) / n, the radial integral of s^{n-1} over [1 - eta/T, 1]."""
        return (1.0 - (1.0 - self.eta / self.T) ** self.n) / self.n

    @property
    def peak(self):
        return (self.T / (2 * math.pi)) ** self.n * self.shell_factor * sphere_area(self.n)

    def __call__(self, rho):
        return kernel_predicted(self, rho)


def kernel_predicted(pred, rho):
    """(T/2pi)^n * shell factor * |S^{n-1}| * normalized_bessel(n, T rho)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be nonnegative")
    vals = pred.peak * normalized_bessel(pred.n, pred.T * rho)
    return float(vals) if np.ndim(vals) == 0 else vals


def kernel_envelope(n, T, eta, rho):
    """Upper envelope T^{n-1} eta ((T rho)^{-(n-1)/2} + 1/eta), capped at T^{n-1} eta for rho <= 1/T."""
    T = check_positive(T, "T")
    eta = check_positive(eta, "eta")
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be nonnegative")
    scale = T ** (n - 1) * eta
    with np.errstate(divide="ignore"):
        far = scale * ((T * np.maximum(rho, 1e-300)) ** (-(n - 1) / 2.0) + 1.0 / eta)
    vals = np.where(rho <= 1.0 / T, scale, far)
    return float(vals) if vals.ndim == 0 else vals
