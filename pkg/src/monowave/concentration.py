"""Chernoff bounds for Gaussian quadratic forms, covariance formulas, and Monte Carlo checks."""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import check_positive, check_positive_int, check_seed
from .ensemble import map_chunks
from .errors import DomainError
from .kernel import TwoPointKernel
from .local_mass import LocalMassMatrix, matrix_spectrum
from .manifolds import design_matrix

DEFAULT_C = 0.25


@dataclass(frozen=True)
class ChernoffParams:
    """Chernoff parameter s = c / sqrt(sum lambda^2) with 0 < c < 1/2, at deviation epsilon."""

    epsilon: float
    c: float = DEFAULT_C

    def __post_init__(self):
        if not 0.0 < self.c < 0.5:
            raise ValueError(f"c must lie in (0, 1/2), got {self.c}")
        check_positive(self.epsilon, "epsilon")


class ChernoffBound(NamedTuple):
    total: float
    upper_tail: float
    lower_tail: float


@dataclass(frozen=True)
class TailReport:
    epsilon: float
    analytic_upper: float
    empirical: float
    mc_stderr: float
    samples: int
    seed: int

    @property
    def dominated(self):
        """Empirical tail below the analytic bound up to three standard errors."""
        return self.empirical <= self.analytic_upper + 3.0 * self.mc_stderr


class CovarianceTerms(NamedTuple):
    value: float
    kernel_term: float
    fourth_moment_term: float


def _eigenvalues(spectrum):
    return np.asarray(getattr(spectrum, "eigenvalues", spectrum), dtype=float)


def log_mgf_upper(spectrum, s):
    lam = _eigenvalues(spectrum)
    x = 2.0 * s * lam
    if np.any(x >= 1.0):
        raise DomainError(f"g(s) is undefined: 2 s lambda_max = {x.max():.6g} >= 1")
    return float(-0.5 * np.sum(np.log1p(-x)))


def mgf_upper(spectrum, s):
    """g(s) = E exp(s z^T A z) = prod_j (1 - 2 s lambda_j)^{-1/2}."""
    return math.exp(log_mgf_upper(spectrum, s))


def log_mgf_lower(spectrum, s):
    if s < 0:
        raise DomainError("g_-(s) is evaluated for s >= 0")
    lam = _eigenvalues(spectrum)
    return float(-0.5 * np.sum(np.log1p(2.0 * s * lam)))


def mgf_lower(spectrum, s):
    """g_-(s) = E exp(-s z^T A z) = prod_j (1 + 2 s lambda_j)^{-1/2}."""
    return math.exp(log_mgf_lower(spectrum, s))


def chernoff_s(spectrum, c=DEFAULT_C):
    return c / math.sqrt(spectrum.second_moment)


def chernoff_two_sided(spectrum, params):
    """(e^{2c^2/(1-2c)^2} + e^{c^2}) exp(-c eps / sqrt(sum lambda^2)) and its two pieces."""
    c = params.c
    decay = math.exp(-c * params.epsilon / math.sqrt(spectrum.second_moment))
    upper = math.exp(2 * c * c / (1 - 2 * c) ** 2) * decay
    lower = math.exp(c * c) * decay
    return ChernoffBound(upper + lower, upper, lower)


def chernoff_bound(spectrum, epsilon, c=DEFAULT_C):
    """Two-sided Chernoff value; ``epsilon = 0`` gives the bare prefactor."""
    if epsilon == 0:
        return math.exp(2 * c * c / (1 - 2 * c) ** 2) + math.exp(c * c)
    return chernoff_two_sided(spectrum, ChernoffParams(epsilon, c)).total


def chernoff_lower_optimal(spectrum, epsilon):
    """Lower-tail bound at the unconstrained minimizer s = eps / (2 sum lambda^2)."""
    check_positive(epsilon, "epsilon")
    s = epsilon / (2.0 * spectrum.second_moment)
    return math.exp(log_mgf_lower(spectrum, s) + s * spectrum.trace - s * epsilon)


def taylor_remainder_gap(c, x):
    """x^2/(1-2c)^2 - (-log(1-x) - x); nonnegative on [0, 2c] for 0 < c < 1/2."""
    x = np.asarray(x, dtype=float)
    return x * x / (1 - 2 * c) ** 2 + np.log1p(-x) + x


def theorem_bound(n, T, r, eta, epsilon, C_eps=1.0, c_eps=1.0):
    """C_eps T^n exp(-c_eps ((rT)^{-(n-1)/2} + 1/eta)^{-1}).

    ``epsilon`` only enters through the caller's constants; it is validated
    and kept in the signature so call sites stay explicit.
    """
    for name, v in (("T", T), ("r", r), ("eta", eta), ("epsilon", epsilon), ("C_eps", C_eps), ("c_eps", c_eps)):
        check_positive(v, name)
    rate = (r * T) ** (-(n - 1) / 2.0) + 1.0 / eta
    return C_eps * T**n * math.exp(-c_eps / rate)


def assembled_bound(n, T, r, eta, epsilon, c=DEFAULT_C, variance_constant=1.0):
    """T^n times the two-sided Chernoff bound at epsilon/3 with sum lambda^2 replaced by

    variance_constant * ((rT)^{-(n-1)/2} + 1/eta)^2.
    """
    rate = (r * T) ** (-(n - 1) / 2.0) + 1.0 / eta
    prefactor = math.exp(2 * c * c / (1 - 2 * c) ** 2) + math.exp(c * c)
    return T**n * prefactor * math.exp(-c * (epsilon / 3.0) / (math.sqrt(variance_constant) * rate))


# Monte Carlo


def local_mass_samples(A, law, samples, seed, workers=1):
    """Draws of X_z = z^T A z with coefficients from ``law`` (variance must match A.sigma2)."""
    seed = check_seed(seed)
    samples = check_positive_int(samples, "samples")
    sigma = math.sqrt(A.sigma2)
    law = law.with_variance(A.sigma2)
    A.low_rank  # factor once, outside worker threads

    def chunk(start, count):
        return A.sample_values(law.draw(seed, start, count, A.n) / sigma)

    return map_chunks(chunk, samples, workers)


def tail_fraction(x, mean, epsilon):
    """Fraction of samples with |x - mean| > epsilon and its binomial standard error."""
    x = np.asarray(x)
    p = float(np.mean(np.abs(x - mean) > epsilon))
    return p, math.sqrt(p * (1 - p) / len(x))


def empirical_tail(modes, ball, law, epsilon, samples, seed, workers=1, c=DEFAULT_C, A=None):
    """Monte Carlo P(|X_z - E X_z| > eps) next to the analytic two-sided bound.

    The center is the exact mean sum_j lambda_j, not the sample mean.
    """
    if A is None:
        A = LocalMassMatrix(modes, ball, law.variance)
    spectrum = matrix_spectrum(A)
    x = local_mass_samples(A, law, samples, seed, workers)
    return tail_reports(spectrum, x, [epsilon], seed, c)[0]


def tail_reports(spectrum, x, epsilons, seed, c=DEFAULT_C):
    reports = []
    for eps in epsilons:
        p, se = tail_fraction(x, spectrum.trace, eps)
        reports.append(TailReport(float(eps), chernoff_bound(spectrum, eps, c), p, se, len(x), seed))
    return reports


def mgf_empirical(x, s):
    """Sample mean of exp(s X) and its standard error."""
    e = np.exp(s * np.asarray(x))
    return float(e.mean()), float(e.std(ddof=1) / math.sqrt(len(e)))


def _unnormalized_mass_matrix(modes, quadrature):
    # scale 1: quadratic form c^T M c = int_B phi^2 for raw coefficients c
    return LocalMassMatrix(modes, quadrature, quadrature.volume)


def covariance_exact(modes, ball_b, ball_b2, sigma2, law):
    """cov[int_B phi^2, int_B' phi^2] = 2 sigma^4 int int K^2 + (E c^4 - 3 sigma^4) int int sum_j phi_j^2 phi_j^2."""
    sigma2 = check_positive(sigma2, "sigma2")
    kern = TwoPointKernel(modes)
    K = kern.matrix(ball_b.nodes, ball_b2.nodes)
    kernel_term = 2.0 * sigma2**2 * float(ball_b.weights @ (K * K) @ ball_b2.weights)
    excess = law.with_variance(sigma2).excess_fourth_moment
    fourth = 0.0
    if excess != 0.0:
        fourth = excess * diagonal_product_integral(modes, ball_b, ball_b2)
    return CovarianceTerms(kernel_term + fourth, kernel_term, fourth)


def diagonal_product_integral(modes, ball_b, ball_b2):
    """int_B int_B' sum_j phi_j(x)^2 phi_j(x')^2 = sum_j (int_B phi_j^2)(int_B' phi_j^2)."""
    pb = design_matrix(list(modes), ball_b.nodes)
    pb2 = design_matrix(list(modes), ball_b2.nodes)
    return float(ball_b.integrate(pb * pb) @ ball_b2.integrate(pb2 * pb2))


def jackknife_covariance(a, b):
    """Sample covariance with its delete-one jackknife standard error."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(a)
    if n < 3:
        raise ValueError("need at least three samples")
    a = a - a.mean()
    b = b - b.mean()
    sa, sb, sab = a.sum(), b.sum(), np.dot(a, b)
    cov = (sab - sa * sb / n) / (n - 1)
    loo = ((sab - a * b) - (sa - a) * (sb - b) / (n - 1)) / (n - 2)
    se = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return float(cov), se


def mass_samples(modes, balls, law, samples, seed, workers=1):
    """Unnormalized masses int_B phi^2 for each ball, shape (samples, len(balls))."""
    seed = check_seed(seed)
    forms = [_unnormalized_mass_matrix(modes, b) for b in balls]
    for f in forms:
        f.low_rank
    N = len(modes)

    def chunk(start, count):
        c = law.draw(seed, start, count, N)
        return np.stack([f.sample_values(c) for f in forms], axis=1)

    return map_chunks(chunk, check_positive_int(samples, "samples"), workers)


def covariance_empirical(modes, ball_b, ball_b2, law, samples, seed, workers=1):
    """Sample covariance of the two unnormalized ball masses with jackknife standard error."""
    m = mass_samples(modes, [ball_b, ball_b2], law, samples, seed, workers)
    return jackknife_covariance(m[:, 0], m[:, 1])
