import math

import numpy as np
import pytest

from monowave import (
    Circle,
    CoefficientLaw,
    FlatTorus,
    SpectralWindow,
    Sphere2,
    ball_quadrature,
    enumerate_modes,
    local_mass,
    normalization_variance,
)
from monowave.ensemble import RandomField, evaluate_field
from monowave.manifolds import torus_grid_counts
from monowave.spectral_grid import TorusFieldSynth, fft_size

TORUS = FlatTorus((2 * math.pi, 3.0))


def _field(model, T, eta, seed):
    modes = enumerate_modes(model, SpectralWindow(T, eta))
    law = CoefficientLaw("gaussian", normalization_variance(model, len(modes)))
    c = law.draw(seed, 0, 1, len(modes))[0]
    return modes, RandomField(None, tuple(modes), c, law, seed)


def test_field_on_grid_matches_direct_evaluation():
    modes, f = _field(TORUS, 9.0, 3.0, 1)
    synth = TorusFieldSynth(modes)
    size = fft_size(synth.kmax, 1)
    grid = synth.field_on_grid(f.coefficients, size)[0]
    i, j = 3, 7
    x = np.array([i * TORUS.lengths[0] / size, j * TORUS.lengths[1] / size])
    assert grid[i, j] == pytest.approx(evaluate_field(f, x), abs=1e-12)


@pytest.mark.parametrize("model", [TORUS, Circle()])
def test_ball_average_grid_matches_quadrature(model):
    modes, f = _field(model, 9.0, 3.0, 2)
    r = 0.4
    counts = torus_grid_counts(model, 0.3)
    X = TorusFieldSynth(modes).ball_average_grid(f.coefficients, r, counts)[0]
    idx = (2,) * model.dimension
    z = np.array([k * L / c for k, L, c in zip(idx, model.lengths, counts)])
    ref = local_mass(f, ball_quadrature(model, z, r, 24))
    assert X[idx] == pytest.approx(ref, rel=1e-10)


def test_batches_are_independent():
    modes, _ = _field(TORUS, 7.0, 2.0, 3)
    law = CoefficientLaw("gaussian", normalization_variance(TORUS, len(modes)))
    c = law.draw(4, 0, 5, len(modes))
    synth = TorusFieldSynth(modes)
    counts = torus_grid_counts(TORUS, 0.5)
    batch = synth.ball_average_grid(c, 0.3, counts)
    single = synth.ball_average_grid(c[2:3], 0.3, counts)
    assert np.allclose(batch[2], single[0], rtol=1e-13, atol=1e-15)


def test_single_mode_sup_norm_on_circle():
    modes = enumerate_modes(Circle(), SpectralWindow(3.0, 0.5))
    c = np.array([1.7, 0.0])
    grid = TorusFieldSynth(modes).field_on_grid(c, 4 * 3 * 2)[0]
    assert np.max(np.abs(grid)) == pytest.approx(1.7 / math.sqrt(math.pi))


def test_rejects_sphere():
    with pytest.raises(TypeError):
        TorusFieldSynth(enumerate_modes(Sphere2(), SpectralWindow(3.5, 1.0)))
