"""Local mass X_z = (1/vol B) int_B phi^2 as a quadratic form in the coefficients.

With c_j = sigma z_j the local mass is z^T A z where

    A_jk = sigma^2 / vol(B) * int_B phi_j phi_k.

The matrix is kept in factored form A = scale * G^T G with G the
square-root-weighted design matrix on the ball nodes, so its nonzero spectrum
can be read off whichever of G^T G or G G^T is smaller.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._validation import check_positive
from .kernel import TwoPointKernel
from .manifolds import design_matrix


@dataclass(frozen=True)
class SpectrumSummary:
    """Eigenvalues of A in descending order with their first two power sums."""

    eigenvalues: np.ndarray = field(repr=False)
    lambda_max: float
    trace: float
    second_moment: float

    @classmethod
    def from_eigenvalues(cls, eigenvalues):
        lam = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
        return cls(lam, float(lam[0]), float(np.sum(lam)), float(np.sum(lam * lam)))

    @property
    def n(self):
        return len(self.eigenvalues)

    def power_sum(self, p):
        return float(np.sum(self.eigenvalues**p))


class LocalMassMatrix:
    """The symmetric PSD matrix A of a ball, in factored form."""

    def __init__(self, modes, quadrature, sigma2, quadrature_resolution=None):
        self.modes = tuple(modes)
        self.ball = quadrature
        self.sigma2 = check_positive(sigma2, "sigma2")
        self.quadrature_resolution = quadrature_resolution
        phi = design_matrix(list(self.modes), quadrature.nodes)
        self.factor = np.sqrt(quadrature.weights)[:, None] * phi
        self.scale = self.sigma2 / quadrature.volume

    @property
    def n(self):
        return len(self.modes)

    @cached_property
    def entries(self):
        a = self.scale * (self.factor.T @ self.factor)
        return 0.5 * (a + a.T)

    def quadratic_form(self, z):
        """z^T A z for one vector or each row of a matrix of standardized coefficients."""
        g = np.asarray(z) @ self.factor.T
        return self.scale * np.sum(g * g, axis=-1)

    @cached_property
    def low_rank(self):
        """Eigenvalues and an N x rank factor F with A ~ F diag(lam) F^T, rank-truncated."""
        G = self.factor
        if G.shape[0] >= G.shape[1]:
            lam, U = np.linalg.eigh(self.entries)
        else:
            gram = self.scale * (G @ G.T)
            mu, Q = np.linalg.eigh(0.5 * (gram + gram.T))
            keep = mu > 0
            lam = mu[keep]
            # u_k = G^T q_k / ||G^T q_k||
            U = G.T @ Q[:, keep]
            U /= np.sqrt(lam / self.scale)
        order = np.argsort(lam)[::-1]
        lam, U = lam[order], U[:, order]
        keep = lam > 1e-15 * lam[0]
        return lam[keep], U[:, keep]

    def sample_values(self, z):
        """Quadratic form through the truncated eigenbasis; fast for many samples."""
        lam, U = self.low_rank
        y = np.asarray(z) @ U
        return (y * y) @ lam

    def spectrum(self):
        return matrix_spectrum(self)


def local_mass(field, quadrature):
    """X_z = (1/vol B) int_B phi^2 for a sampled field."""
    phi = design_matrix(list(field.modes), quadrature.nodes) @ field.coefficients
    return float(quadrature.integrate(phi * phi) / quadrature.volume)


def build_matrix(modes, quadrature, sigma2, resolution=None):
    """Assemble A for the ball described by ``quadrature``."""
    return LocalMassMatrix(modes, quadrature, sigma2, resolution)


def matrix_spectrum(A, symmetry_tol=1e-10):
    """Full eigenvalue list of A (dense array or :class:`LocalMassMatrix`).

    Dense input that is asymmetric by at most ``symmetry_tol`` (relative) is
    symmetrized; larger asymmetry is rejected.
    """
    if isinstance(A, LocalMassMatrix):
        G = A.factor
        if G.shape[0] >= G.shape[1]:
            lam = np.linalg.eigvalsh(A.entries)
        else:
            # nonzero spectrum of scale G^T G equals that of scale G G^T
            gram = A.scale * (G @ G.T)
            mu = np.linalg.eigvalsh(0.5 * (gram + gram.T))
            lam = np.concatenate([mu, np.zeros(G.shape[1] - G.shape[0])])
        return SpectrumSummary.from_eigenvalues(lam)
    M = np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix_spectrum needs a square matrix")
    asym = np.max(np.abs(M - M.T)) if M.size else 0.0
    if asym > symmetry_tol * max(np.max(np.abs(M)), 1e-300):
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    return SpectrumSummary.from_eigenvalues(np.linalg.eigvalsh(0.5 * (M + M.T)))


def kernel_gram(modes, quadrature):
    """Weighted kernel matrix K(x_a, x_b) w_b on the quadrature nodes."""
    K = TwoPointKernel(modes).matrix(quadrature.nodes)
    return K * quadrature.weights[None, :]


def trace_power_via_kernel(modes, quadrature, p, sigma2):
    """tr(A^p) as a p-fold integral of cyclic kernel products, p in {2, 3}.

    tr(A^p) = sigma^{2p} / vol(B)^p * int_B^p prod_j K(x_j, x_{j-1}).
    """
    if p not in (2, 3):
        raise ValueError("trace_power_via_kernel supports p = 2 and p = 3")
    M = kernel_gram(modes, quadrature)
    scale = (sigma2 / quadrature.volume) ** p
    if p == 2:
        # sum_ab w_a w_b K_ab^2
        return float(scale * np.sum(M * M.T))
    # sum_abc w_a w_b w_c K(x_a, x_c) K(x_b, x_a) K(x_c, x_b)
    M2 = M @ M
    return float(scale * np.sum(M2 * M.T))


def variance_exact(modes, quadrature, sigma2):
    """var X_z for real Gaussian coefficients: 2 sigma^4 / vol(B)^2 int_B int_B K^2."""
    return 2.0 * trace_power_via_kernel(modes, quadrature, 2, sigma2)


def variance_envelope(n, T, r, eta):
    """(rT)^{-(n-1)} + eta^{-1} (rT)^{-(n-1)/2} + eta^{-2}."""
    rt = r * T
    return rt ** (-(n - 1)) + rt ** (-(n - 1) / 2.0) / eta + eta**-2.0
