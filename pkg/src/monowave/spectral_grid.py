"""Exact grid evaluation of fields and ball averages on flat tori via the FFT.

A field on the torus is a trigonometric polynomial, so its square and the
ball average of its square are too. The ball average of exp(i xi.x) over
B_r(z) is exp(i xi.z) * normalized_bessel(n + 2, |xi| r), hence X_z on a whole
product grid costs a few FFTs per sample and carries no quadrature error.
"""
import math

import numpy as np
from scipy import fft as sfft

from .bessel import normalized_bessel
from .manifolds import FlatTorus


def max_wavenumber(modes):
    return max(max(abs(k) for k in m.descriptor[0]) for m in modes)


def fft_size(kmax, factor):
    """Smallest FFT-friendly size holding frequencies |q| <= factor * kmax without aliasing."""
    return sfft.next_fast_len(2 * factor * kmax + 1)


class TorusFieldSynth:
    """Turns coefficient vectors into grid values of phi, phi^2 and ball averages."""

    def __init__(self, modes):
        model = modes[0].model
        if not isinstance(model, FlatTorus):
            raise TypeError("spectral grid evaluation needs a flat torus or circle")
        self.model = model
        self.modes = tuple(modes)
        self.n = model.dimension
        self.kmax = max_wavenumber(modes)
        ks = np.array([m.descriptor[0] for m in modes], dtype=int)
        is_sin = np.array([m.descriptor[1] == "sin" for m in modes])
        is_zero = ~np.any(ks != 0, axis=1)
        amp = np.where(is_zero, 1.0, math.sqrt(2.0)) / math.sqrt(model.volume)
        # phi = sum_k a_k exp(i 2 pi k.x / L); cos -> (e + e*)/2, sin -> (e - e*)/(2i)
        half = np.where(is_zero, 1.0, 0.5) * amp
        self._plus = np.where(is_sin, -1j, 1.0) * half
        self._minus = np.where(is_sin, 1j, 1.0) * half
        self._minus[is_zero] = 0.0
        self._k = ks

    def _index(self, ks, size):
        return tuple(np.mod(ks[:, d], size) for d in range(self.n))

    def coefficient_grid(self, coeffs, size):
        """Fourier coefficient arrays of shape (batch, size, ..., size)."""
        coeffs = np.atleast_2d(coeffs)
        out = np.zeros((coeffs.shape[0],) + (size,) * self.n, dtype=complex)
        ip = self._index(self._k, size)
        im = self._index(-self._k, size)
        for b in range(coeffs.shape[0]):
            np.add.at(out[b], ip, coeffs[b] * self._plus)
            np.add.at(out[b], im, coeffs[b] * self._minus)
        return out

    def field_on_grid(self, coeffs, size):
        """phi at the points (j_1 L_1/size, ..., j_n L_n/size)."""
        a = self.coefficient_grid(coeffs, size)
        axes = tuple(range(1, self.n + 1))
        return np.real(sfft.ifftn(a, axes=axes, norm="forward"))

    def ball_average_grid(self, coeffs, r, counts):
        """X_z = (1/vol B) int_{B_r(z)} phi^2 for z on the product grid with ``counts`` per axis."""
        size = fft_size(self.kmax, 2)
        axes = tuple(range(1, self.n + 1))
        phi = self.field_on_grid(coeffs, size)
        b = sfft.fftn(phi * phi, axes=axes, norm="forward")
        freqs = [sfft.fftfreq(size, 1.0 / size) * (2 * math.pi / L) for L in self.model.lengths]
        mesh = np.meshgrid(*freqs, indexing="ij")
        xi = np.sqrt(sum(f * f for f in mesh))
        b = b * normalized_bessel(self.n + 2, xi * r)
        counts = tuple(int(c) for c in counts)
        if counts == (size,) * self.n:
            folded = b
        else:
            # fold onto the target grid: exact for point values of a trig polynomial
            q = [np.mod(np.round(sfft.fftfreq(size, 1.0 / size)).astype(int), c) for c in counts]
            folded = np.zeros((b.shape[0],) + counts, dtype=complex)
            idx = np.meshgrid(*q, indexing="ij")
            for i in range(b.shape[0]):
                np.add.at(folded[i], tuple(idx), b[i])
        return np.real(sfft.ifftn(folded, axes=axes, norm="forward"))
