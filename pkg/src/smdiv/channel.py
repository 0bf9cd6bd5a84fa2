"""Block-Rayleigh channel draws, AWGN, SNR bookkeeping, and real-valued maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseModel:
    """Additive complex Gaussian noise, ``sigma2`` variance per real dimension."""

    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("noise variance cannot be negative")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One quasi-static channel matrix, held constant for ``block_len`` uses."""

    h: np.ndarray
    block_len: int = 2

    @property
    def n_r(self) -> int:
        return self.h.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.h.shape[1]


def snr_to_sigma2(snr_db: float) -> NoiseModel:
    """Noise model for a given SNR in dB.

    SNR is the ratio of average transmitted symbol energy per channel use
    (unity for every scheme here, exactly one unit-energy symbol is active
    per use) to the total complex noise power 2*sigma2.
    """
    return NoiseModel(10.0 ** (-snr_db / 10.0) / 2.0)


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Counter-style RNG substream keyed by (master_seed, *path).

    Streams for distinct paths are independent and do not depend on how work
    is split across workers, so simulation results are bit-reproducible for
    any worker count.
    """
    seq = np.random.SeedSequence((int(master_seed),) + tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))


def draw_channel(n_r: int, n_a: int, rng: np.random.Generator) -> ChannelRealization:
    """i.i.d. circularly symmetric complex Gaussian entries, unit variance each."""
    if n_r < 1 or n_a < 1:
        raise ValueError("channel dimensions must be positive")
    h = (rng.standard_normal((n_r, n_a)) + 1j * rng.standard_normal((n_r, n_a)))
    h *= np.sqrt(0.5)
    return ChannelRealization(h=h)


def add_noise(y: np.ndarray, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Add complex AWGN with ``noise.sigma2`` variance per real dimension."""
    y = np.asarray(y)
    if noise.sigma2 == 0.0:
        return y
    n = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    return y + n * np.sqrt(noise.sigma2)


def realify_vector(z: np.ndarray) -> np.ndarray:
    """[z1, z2, ...] -> [Re z1, Im z1, Re z2, Im z2, ...]."""
    z = np.asarray(z).ravel()
    out = np.empty(2 * z.size)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def realify_matrix(a: np.ndarray) -> np.ndarray:
    """Replace each complex entry by its 2x2 real rotation block.

    The map is a ring homomorphism: realify(A @ B) = realify(A) @ realify(B)
    and realify_vector(A @ z) = realify_matrix(A) @ realify_vector(z).
    """
    a = np.asarray(a)
    m, n = a.shape
    out = np.empty((2 * m, 2 * n))
    out[0::2, 0::2] = a.real
    out[0::2, 1::2] = -a.imag
    out[1::2, 0::2] = a.imag
    out[1::2, 1::2] = a.real
    return out
