"""Real spherical harmonics from fully normalized associated Legendre recurrences.

The normalization is chosen so that the real harmonics are orthonormal in
L^2 of the unit sphere with its round area measure (total area 4 pi). The
Condon-Shortley phase is omitted.
"""
import numpy as np


def normalized_legendre(lmax, x, wanted=None):
    """Fully normalized associated Legendre functions at ``x = cos(theta)``.

    Returns a dict mapping ``(l, m)`` to arrays shaped like ``x``. The
    normalization makes each function have unit L^2 norm on [-1, 1]. If
    ``wanted`` is given, only those ``(l, m)`` pairs are kept.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    keep = set(wanted) if wanted is not None else None
    out = {}
    pmm = np.full_like(x, np.sqrt(0.5))
    for m in range(lmax + 1):
        if m > 0:
            pmm = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pmm
        if keep is None or (m, m) in keep:
            out[(m, m)] = pmm
        if m == lmax:
            break
        p_prev = pmm
        p_cur = np.sqrt(2.0 * m + 3.0) * x * pmm
        if keep is None or (m + 1, m) in keep:
            out[(m + 1, m)] = p_cur
        for ell in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * ell * ell - 1.0) / (ell * ell - m * m))
            b = np.sqrt(((ell - 1.0) ** 2 - m * m) / (4.0 * (ell - 1.0) ** 2 - 1.0))
            p_prev, p_cur = p_cur, a * (x * p_cur - b * p_prev)
            if keep is None or (ell, m) in keep:
                out[(ell, m)] = p_cur
    if keep is not None:
        return {key: out[key] for key in keep}
    return out


def to_spherical(points):
    """cos(colatitude) and longitude of unit vectors given as an (m, 3) array."""
    p = np.asarray(points, dtype=float)
    z = np.clip(p[..., 2], -1.0, 1.0)
    phi = np.arctan2(p[..., 1], p[..., 0])
    return z, phi


def real_harmonics(descriptors, points):
    """Evaluate real spherical harmonics at unit vectors.

    ``descriptors`` is a sequence of ``(l, m, flag)`` with ``m >= 0`` and
    ``flag`` either ``"cos"`` or ``"sin"``. Returns an array of shape
    ``(len(points), len(descriptors))``.
    """
    z, phi = to_spherical(points)
    if not descriptors:
        return np.zeros((z.shape[0], 0))
    lmax = max(d[0] for d in descriptors)
    legendre = normalized_legendre(lmax, z, wanted={(d[0], d[1]) for d in descriptors})
    out = np.empty((z.shape[0], len(descriptors)))
    trig = {}
    for col, (ell, m, flag) in enumerate(descriptors):
        p = legendre[(ell, m)]
        if m == 0:
            out[:, col] = p / np.sqrt(2.0 * np.pi)
            continue
        key = (m, flag)
        if key not in trig:
            trig[key] = (np.cos if flag == "cos" else np.sin)(m * phi) / np.sqrt(np.pi)
        out[:, col] = p * trig[key]
    return out
