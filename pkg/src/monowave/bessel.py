"""Normalized Bessel profile J_{n/2-1}(u) / u^{n/2-1}, scaled to equal 1 at u = 0.

This is the angular average of a plane wave over the unit sphere in R^n:

    (1 / |S^{n-1}|) * integral over S^{n-1} of exp(i u alpha.omega) d alpha

Small arguments use the power series, large arguments the Hankel asymptotic
expansion. Both are evaluated in-repo so the library carries no special
function dependency.
"""
import math

import numpy as np

SERIES_CUTOFF = 12.0
_SERIES_TERMS = 80
_ASYMPTOTIC_TERMS = 60


def _series(nu, u):
    # sum_k (-u^2/4)^k / (k! (nu+1)_k)
    x = -0.25 * u * u
    term = np.ones_like(u)
    total = np.ones_like(u)
    for k in range(1, _SERIES_TERMS):
        term = term * x / (k * (nu + k))
        total = total + term
        if np.all(np.abs(term) <= 1e-18 * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def _hankel(nu, u):
    # J_nu(u) = sqrt(2/(pi u)) (P cos chi - Q sin chi), chi = u - nu pi/2 - pi/4
    mu = 4.0 * nu * nu
    p = np.ones_like(u)
    q = np.zeros_like(u)
    coef = 1.0
    last = np.full_like(u, np.inf)
    active = np.ones(u.shape, dtype=bool)
    for k in range(1, _ASYMPTOTIC_TERMS):
        coef *= (mu - (2 * k - 1) ** 2) / (k * 8.0)
        if coef == 0.0:
            break
        term = coef / u**k
        mag = np.abs(term)
        # asymptotic series: stop each element once its terms start to grow
        active &= mag < last
        last = np.where(active, mag, last)
        sign = -1.0 if (k // 2) % 2 else 1.0
        contrib = np.where(active, sign * term, 0.0)
        if k % 2 == 0:
            p = p + contrib
        else:
            q = q + contrib
        if not active.any() or np.all(mag < 1e-18):
            break
    chi = u - (0.5 * nu + 0.25) * np.pi
    jnu = np.sqrt(2.0 / (np.pi * u)) * (p * np.cos(chi) - q * np.sin(chi))
    # Gamma(nu+1) (2/u)^nu J_nu(u), computed in log space for large nu
    logscale = math.lgamma(nu + 1.0) + nu * np.log(2.0 / u)
    return np.exp(logscale) * jnu


def normalized_bessel(n, u):
    """Evaluate Gamma(n/2) (2/u)^{n/2-1} J_{n/2-1}(u) for dimension ``n`` >= 1.

    Equals 1 at ``u = 0``; for ``n = 1`` it is ``cos u`` and for ``n = 3`` it is
    ``sin(u)/u``. Accepts scalars or arrays of nonnegative ``u``.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"dimension n must be a positive integer, got {n!r}")
    nu = 0.5 * n - 1.0
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("normalized_bessel requires finite u >= 0")
    flat = arr.ravel()
    out = np.empty_like(flat)
    small = flat <= SERIES_CUTOFF
    if small.any():
        out[small] = _series(nu, flat[small])
    if (~small).any():
        out[~small] = _hankel(nu, flat[~small])
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out
