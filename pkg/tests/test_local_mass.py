import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monowave import (
    Circle,
    CoefficientLaw,
    FlatTorus,
    LocalMassMatrix,
    SpectralWindow,
    Sphere2,
    ball_quadrature,
    enumerate_modes,
    expected_local_mass,
    local_mass,
    manifold_quadrature,
    matrix_spectrum,
    normalization_variance,
    trace_power_via_kernel,
    variance_envelope,
    variance_exact,
)
from monowave.concentration import local_mass_samples
from monowave.ensemble import RandomField
from monowave.local_mass import SpectrumSummary, build_matrix
from monowave.manifolds import EigenMode

TORUS = FlatTorus((2 * math.pi, 2 * math.pi))


def _torus_setup(T=12.0, eta=4.0, r=0.5, res=16):
    modes = enumerate_modes(TORUS, SpectralWindow(T, eta))
    sigma2 = normalization_variance(TORUS, len(modes))
    return modes, sigma2, ball_quadrature(TORUS, [1.0, 2.0], r, res)


def test_constant_mode_local_mass():
    s = Sphere2()
    y00 = EigenMode(0.0, (0, 0, "cos"), model=s)
    field = RandomField(None, (y00,), np.array([1.0]), CoefficientLaw("gaussian"), 0)
    q = ball_quadrature(s, [0, 0, 1.0], 0.8, 12)
    assert local_mass(field, q) == pytest.approx(1 / (4 * math.pi), rel=1e-12)


def test_whole_manifold_matrix_is_scalar():
    modes = enumerate_modes(TORUS, SpectralWindow(6.0, 2.0))
    sigma2 = normalization_variance(TORUS, len(modes))
    A = build_matrix(modes, manifold_quadrature(TORUS, 16), sigma2)
    assert np.allclose(A.entries, np.eye(len(modes)) / len(modes), atol=1e-14)
    q = manifold_quadrature(TORUS, 16)
    N = len(modes)
    assert trace_power_via_kernel(modes, q, 2, sigma2) == pytest.approx(1 / N, rel=1e-12)
    assert trace_power_via_kernel(modes, q, 3, sigma2) == pytest.approx(1 / N**2, rel=1e-12)
    assert variance_exact(modes, q, sigma2) == pytest.approx(2 / N, rel=1e-12)


def test_circle_arc_closed_form():
    a, r = 0.4, 0.6
    lo, hi = a - r, a + r
    modes = enumerate_modes(Circle(), SpectralWindow(3.0, 0.5))
    sigma2 = 1.3
    A = build_matrix(modes, ball_quadrature(Circle(), [a], r, 32), sigma2).entries
    L = hi - lo
    cc = L / 2 + (math.sin(6 * hi) - math.sin(6 * lo)) / 12
    ss = L / 2 - (math.sin(6 * hi) - math.sin(6 * lo)) / 12
    cs = -(math.cos(6 * hi) - math.cos(6 * lo)) / 12
    ref = sigma2 / (L * math.pi) * np.array([[cc, cs], [cs, ss]])
    assert np.allclose(A, ref, atol=1e-13)


def test_quadratic_form_identity():
    modes, sigma2, q = _torus_setup()
    A = LocalMassMatrix(modes, q, sigma2)
    law = CoefficientLaw("gaussian", sigma2)
    c = law.draw(1, 0, 100, len(modes))
    z = c / law.sigma
    direct = np.array([local_mass(RandomField(None, tuple(modes), ci, law, 1), q) for ci in c])
    assert np.max(np.abs(A.quadratic_form(z) - direct) / direct) < 1e-8
    assert np.max(np.abs(A.sample_values(z) - direct) / direct) < 1e-8


def test_quadrature_refinement():
    modes, sigma2, _ = _torus_setup()
    a = LocalMassMatrix(modes, ball_quadrature(TORUS, [1.0, 2.0], 0.5, 12), sigma2).entries
    b = LocalMassMatrix(modes, ball_quadrature(TORUS, [1.0, 2.0], 0.5, 24), sigma2).entries
    assert np.max(np.abs(a - b)) < 1e-8


def test_spectrum_invariants():
    modes, sigma2, q = _torus_setup()
    A = LocalMassMatrix(modes, q, sigma2)
    spec = matrix_spectrum(A)
    assert len(spec.eigenvalues) == len(modes)
    assert np.all(np.diff(spec.eigenvalues) <= 0)
    assert spec.eigenvalues.min() >= -1e-10 * spec.lambda_max
    assert spec.lambda_max <= math.sqrt(spec.second_moment)
    assert spec.trace == pytest.approx(1.0, abs=1e-10)
    assert abs(spec.trace - np.trace(A.entries)) < 1e-10
    assert spec.second_moment == pytest.approx(np.trace(A.entries @ A.entries), abs=1e-10)
    assert np.allclose(A.entries, A.entries.T, atol=1e-12)


def test_gram_route_matches_dense_route():
    # fewer quadrature nodes than modes triggers the node-side Gram eigenproblem
    modes, sigma2, _ = _torus_setup(T=20.0, eta=8.0)
    q = ball_quadrature(TORUS, [1.0, 2.0], 0.3, 8)
    A = LocalMassMatrix(modes, q, sigma2)
    assert A.factor.shape[0] < A.factor.shape[1]
    dense = matrix_spectrum(A.entries)
    gram = matrix_spectrum(A)
    assert np.allclose(gram.eigenvalues, dense.eigenvalues, atol=1e-12)


def test_matrix_spectrum_symmetry_checks():
    m = np.array([[2.0, 1.0], [1.0 + 1e-14, 2.0]])
    assert matrix_spectrum(m).trace == pytest.approx(4.0)
    with pytest.raises(ValueError):
        matrix_spectrum(np.array([[1.0, 0.0], [0.5, 1.0]]))


def test_spectrum_summary_from_eigenvalues():
    s = SpectrumSummary.from_eigenvalues([0.1, 0.5, 0.2])
    assert list(s.eigenvalues) == [0.5, 0.2, 0.1]
    assert s.lambda_max == 0.5 and s.trace == pytest.approx(0.8) and s.second_moment == pytest.approx(0.3)


def test_trace_power_rejects_other_p():
    modes, sigma2, q = _torus_setup()
    with pytest.raises(ValueError):
        trace_power_via_kernel(modes, q, 4, sigma2)


def test_mc_mean_matches_expectation():
    modes, sigma2, q = _torus_setup()
    A = LocalMassMatrix(modes, q, sigma2)
    x = local_mass_samples(A, CoefficientLaw("gaussian", sigma2), 20000, seed=7)
    e = expected_local_mass(modes, q, sigma2)
    assert abs(x.mean() - e) < 3 * x.std(ddof=1) / math.sqrt(len(x))


def test_variance_envelope_fit_holds_at_larger_T():
    # fitted at the smallest T, reused unchanged at larger T
    ratios = {}
    for T in (20.0, 40.0, 80.0):
        eta = math.log(T) ** 2
        r = eta / T
        modes = enumerate_modes(TORUS, SpectralWindow(T, eta))
        sigma2 = normalization_variance(TORUS, len(modes))
        q = ball_quadrature(TORUS, [1.0, 1.0], r, math.ceil(0.75 * T * r) + 12)
        ratios[T] = variance_exact(modes, q, sigma2) / variance_envelope(2, T, r, eta)
    C = ratios[20.0]
    assert ratios[40.0] <= C and ratios[80.0] <= C


def test_slope_steepens_with_r_eta():
    # the -1 regime needs r * eta of order one; wide windows decorrelate within the ball
    def slope(eta, T=40.0):
        v = []
        for rt in (4, 8, 16, 32):
            modes = enumerate_modes(TORUS, SpectralWindow(T, eta))
            sigma2 = normalization_variance(TORUS, len(modes))
            q = ball_quadrature(TORUS, [1.0, 1.0], rt / T, math.ceil(0.75 * rt) + 12)
            v.append(variance_exact(modes, q, sigma2))
        return np.polyfit(np.log([4, 8, 16, 32]), np.log(v), 1)[0]

    narrow, wide = slope(1.0), slope(13.0)
    assert -1.3 < narrow < -0.7
    assert wide < narrow - 0.3


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 1.2), st.floats(0.0, 2 * math.pi), st.floats(0.0, 2 * math.pi))
def test_trace_is_one_for_any_ball(r, x, y):
    modes = enumerate_modes(TORUS, SpectralWindow(6.0, 2.0))
    sigma2 = normalization_variance(TORUS, len(modes))
    spec = matrix_spectrum(LocalMassMatrix(modes, ball_quadrature(TORUS, [x, y], r, 14), sigma2))
    assert spec.trace == pytest.approx(1.0, abs=1e-10)
    assert spec.eigenvalues.min() >= -1e-10 * spec.lambda_max
