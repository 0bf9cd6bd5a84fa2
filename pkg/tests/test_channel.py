"""Channel statistics, noise scaling, and the complex-to-real maps."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smdiv.channel import (
    NoiseModel,
    add_noise,
    draw_channel,
    realify_matrix,
    realify_vector,
    snr_to_sigma2,
    substream,
)


def test_channel_moments():
    rng = substream(42, 0)
    h = draw_channel(1000, 1000, rng).h
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.01)
    assert abs(np.mean(h.real)) < 0.01
    assert abs(np.mean(h.imag)) < 0.01


def test_channel_seed_determinism():
    h1 = draw_channel(4, 4, substream(7, 1)).h
    h2 = draw_channel(4, 4, substream(7, 1)).h
    np.testing.assert_array_equal(h1, h2)
    h3 = draw_channel(4, 4, substream(7, 2)).h
    assert not np.array_equal(h1, h3)


def test_draw_channel_rejects_bad_dims():
    with pytest.raises(ValueError):
        draw_channel(0, 2, substream(0))


def test_noise_variance_per_dimension():
    rng = substream(3, 0)
    noise = NoiseModel(sigma2=0.37)
    y = add_noise(np.zeros(500_000, dtype=complex), noise, rng)
    assert np.var(y.real) == pytest.approx(0.37, rel=0.01)
    assert np.var(y.imag) == pytest.approx(0.37, rel=0.01)


def test_zero_noise_returns_input_unchanged():
    y = np.array([1 + 2j, 3 - 1j])
    out = add_noise(y, NoiseModel(0.0), substream(1))
    np.testing.assert_array_equal(out, y)


def test_total_noise_energy_two_receivers():
    rng = substream(9, 0)
    sigma2 = 0.2
    n = add_noise(np.zeros((2, 250_000), dtype=complex), NoiseModel(sigma2), rng)
    energy = np.mean(np.sum(np.abs(n) ** 2, axis=0))
    assert energy == pytest.approx(2 * (2 * sigma2), rel=0.01)


@pytest.mark.parametrize("snr_db,expected", [(0, 0.5), (10, 0.05), (20, 0.005)])
def test_snr_to_sigma2(snr_db, expected):
    assert snr_to_sigma2(snr_db).sigma2 == pytest.approx(expected, rel=1e-12)


def test_negative_variance_rejected():
    with pytest.raises(ValueError):
        NoiseModel(-1.0)


class TestRealify:
    def test_vector_layout(self):
        np.testing.assert_array_equal(realify_vector(np.array([1 + 2j])), [1.0, 2.0])

    def test_pure_imaginary_block(self):
        np.testing.assert_array_equal(realify_matrix(np.array([[1j]])),
                                      [[0.0, -1.0], [1.0, 0.0]])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2 ** 31))
    def test_vector_norm_isometry(self, n, seed):
        rng = np.random.default_rng(seed)
        z = rng.normal(size=n) + 1j * rng.normal(size=n)
        assert np.linalg.norm(realify_vector(z)) == pytest.approx(
            np.linalg.norm(z), rel=1e-12)

    def test_ring_homomorphism(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
            b = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
            z = rng.normal(size=4) + 1j * rng.normal(size=4)
            np.testing.assert_allclose(realify_matrix(a @ b),
                                       realify_matrix(a) @ realify_matrix(b),
                                       atol=1e-12)
            np.testing.assert_allclose(realify_vector(a @ z),
                                       realify_matrix(a) @ realify_vector(z),
                                       atol=1e-12)


def test_substream_paths_are_independent():
    a = substream(1, 2, 3).standard_normal(8)
    b = substream(1, 2, 3).standard_normal(8)
    c = substream(1, 2, 4).standard_normal(8)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
