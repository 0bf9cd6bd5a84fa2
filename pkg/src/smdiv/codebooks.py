"""Bit-to-codeword maps for the plain index-modulation scheme and the two
interleaved transmit-diversity schemes, plus their rate calculators.

The low-DoSM scheme picks one of N_t codebooks, placing the interleaved pair
on antennas (l, l mod N_t + 1) over two channel uses.  The high-DoSM scheme
uses N_t + 1 antennas and N_t codebook sets of N_t codebooks each; codebook
(i, j) puts the first symbol on antenna j and the second on antenna
((j + i - 1) mod (N_t + 1)) + 1, and every codeword of set i is scaled by a
unit-magnitude phase attached to that set.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constellation import (
    Constellation,
    Normalization,
    ROTATION_ANGLE,
    constellation_from_name,
    rotate,
)


class Scheme(enum.Enum):
    SM = "sm"
    LOW_DOSM = "low-dosm"
    HIGH_DOSM = "high-dosm"


# Coding-gain optimized per-set phases on the 16-point unit-circle grid
# (exp(j*pi*k/8)); regression references for the phase optimizer.
REFERENCE_PHASES: dict[str, tuple[int, ...]] = {
    "bpsk": (1, 14, 12, 10),
    "qam4": (7, 4, 2, 1),
}


def grid_phases(indices: tuple[int, ...], grid_n: int = 16) -> tuple[complex, ...]:
    return tuple(complex(np.exp(2j * np.pi * k / grid_n)) for k in indices)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SchemeConfig:
    """Everything a transmitter or detector needs to know about one scheme."""

    scheme: Scheme
    n_t: int
    constellation: Constellation
    cbs_phases: tuple[complex, ...] | None = None

    def __post_init__(self):
        if not _is_pow2(self.n_t) or self.n_t < 2:
            raise ValueError("n_t must be a power of two >= 2")
        if self.scheme is Scheme.SM and self.constellation.theta != 0.0:
            raise ValueError("the plain scheme uses the unrotated signal set")
        if self.scheme is Scheme.HIGH_DOSM:
            if self.cbs_phases is None or len(self.cbs_phases) != self.n_t:
                raise ValueError("high-DoSM needs one phase per codebook set")
            for p in self.cbs_phases:
                if abs(abs(p) - 1.0) > 1e-12:
                    raise ValueError("codebook-set phases must have unit magnitude")
        elif self.cbs_phases is not None:
            raise ValueError("cbs_phases only apply to the high-DoSM scheme")

    @property
    def m(self) -> int:
        return self.constellation.order

    @property
    def n_antennas(self) -> int:
        return self.n_t + 1 if self.scheme is Scheme.HIGH_DOSM else self.n_t

    @property
    def channel_uses(self) -> int:
        return 1 if self.scheme is Scheme.SM else 2

    @property
    def antenna_bits(self) -> int:
        b = int(math.log2(self.n_t))
        return 2 * b if self.scheme is Scheme.HIGH_DOSM else b

    @property
    def symbol_bits(self) -> int:
        b = int(math.log2(self.m))
        return b if self.scheme is Scheme.SM else 2 * b

    @property
    def block_bits(self) -> int:
        return self.antenna_bits + self.symbol_bits

    @property
    def n_codewords(self) -> int:
        return 1 << self.block_bits


def make_config(
    scheme: Scheme,
    n_t: int,
    modulation: str | Constellation,
    normalization: Normalization = Normalization.UNIT_AVERAGE_ENERGY,
    base_rotation: bool = True,
    cbs_phases: tuple[complex, ...] | None = None,
) -> SchemeConfig:
    """Build a scheme configuration from a modulation name or constellation.

    ``base_rotation`` controls whether the diversity schemes rotate the
    signal set by arctan(2)/2 before interleaving (on by default; without it
    the same-codebook coordinate coding degenerates).  For the high-DoSM
    scheme with BPSK or 4-QAM the stored reference phases are used when none
    are given.
    """
    if isinstance(modulation, Constellation):
        const = modulation
        mod_name = None
    else:
        mod_name = modulation.lower()
        const = constellation_from_name(mod_name, normalization)
    if scheme is not Scheme.SM and base_rotation:
        const = rotate(const, ROTATION_ANGLE)
    if scheme is Scheme.HIGH_DOSM and cbs_phases is None:
        if mod_name in REFERENCE_PHASES:
            cbs_phases = grid_phases(REFERENCE_PHASES[mod_name])
        else:
            raise ValueError(
                "no stored codebook-set phases for this modulation; pass cbs_phases "
                "(see analysis.optimize_phases)"
            )
    if scheme is not Scheme.HIGH_DOSM:
        cbs_phases = None
    return SchemeConfig(scheme=scheme, n_t=n_t, constellation=const,
                        cbs_phases=cbs_phases)


@dataclass(frozen=True)
class SpaceTimeCodeword:
    """Sparse space-time matrix: one (antenna, symbol) slot per channel use."""

    slots: tuple[tuple[int, complex], ...]
    n_antennas: int

    def __post_init__(self):
        for ant, _ in self.slots:
            if not 1 <= ant <= self.n_antennas:
                raise ValueError("antenna index out of range")

    def dense(self) -> np.ndarray:
        x = np.zeros((self.n_antennas, len(self.slots)), dtype=complex)
        for use, (ant, sym) in enumerate(self.slots):
            x[ant - 1, use] = sym
        return x


@dataclass(frozen=True)
class CodewordLabel:
    """Decoded identity of a codeword: antenna selector(s) plus symbol indices.

    ``antennas`` is (l,) for the single-codebook-index schemes and (i, j)
    for the high-DoSM scheme; ``symbols`` are positions in the signal set.
    """

    antennas: tuple[int, ...]
    symbols: tuple[int, ...]


def interleave(s1: complex, s2: complex) -> tuple[complex, complex]:
    """Swap the imaginary parts of the two symbols."""
    return s1.real + 1j * s2.imag, s2.real + 1j * s1.imag


def deinterleave(y1: complex, y2: complex) -> tuple[complex, complex]:
    """Undo :func:`interleave` (the map is an involution)."""
    return y1.real + 1j * y2.imag, y2.real + 1j * y1.imag


def _bits_to_int(bits) -> int:
    value = 0
    for b in bits:
        b = int(b)
        if b not in (0, 1):
            raise ValueError("bits must be 0 or 1")
        value = (value << 1) | b
    return value


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.int8)


def label_index(label: CodewordLabel, cfg: SchemeConfig) -> int:
    """Position of a label in natural-binary block order."""
    m = cfg.m
    if cfg.scheme is Scheme.SM:
        (l,), (k,) = label.antennas, label.symbols
        return (l - 1) * m + k
    if cfg.scheme is Scheme.LOW_DOSM:
        (l,), (k1, k2) = label.antennas, label.symbols
        return ((l - 1) * m + k1) * m + k2
    (i, j), (k1, k2) = label.antennas, label.symbols
    return (((i - 1) * cfg.n_t + (j - 1)) * m + k1) * m + k2


def label_from_index(index: int, cfg: SchemeConfig) -> CodewordLabel:
    m = cfg.m
    if not 0 <= index < cfg.n_codewords:
        raise ValueError("label index out of range")
    if cfg.scheme is Scheme.SM:
        return CodewordLabel(antennas=(index // m + 1,), symbols=(index % m,))
    k2 = index % m
    k1 = (index // m) % m
    head = index // (m * m)
    if cfg.scheme is Scheme.LOW_DOSM:
        return CodewordLabel(antennas=(head + 1,), symbols=(k1, k2))
    return CodewordLabel(antennas=(head // cfg.n_t + 1, head % cfg.n_t + 1),
                         symbols=(k1, k2))


def label_to_bits(label: CodewordLabel, cfg: SchemeConfig) -> np.ndarray:
    return _int_to_bits(label_index(label, cfg), cfg.block_bits)


def bits_to_label(bits, cfg: SchemeConfig) -> CodewordLabel:
    bits = list(bits)
    if len(bits) != cfg.block_bits:
        raise ValueError(f"expected a block of {cfg.block_bits} bits, got {len(bits)}")
    return label_from_index(_bits_to_int(bits), cfg)


def sm_encode(bits, cfg: SchemeConfig) -> SpaceTimeCodeword:
    """One channel use: antenna bits pick the active row, symbol bits the point."""
    if cfg.scheme is not Scheme.SM:
        raise ValueError("sm_encode needs a plain-scheme config")
    label = bits_to_label(bits, cfg)
    return label_to_codeword(label, cfg)


def low_dosm_encode(bits, cfg: SchemeConfig) -> SpaceTimeCodeword:
    """Codebook bits pick l; the interleaved pair goes on antennas (l, l mod N_t + 1)."""
    if cfg.scheme is not Scheme.LOW_DOSM:
        raise ValueError("low_dosm_encode needs a low-DoSM config")
    label = bits_to_label(bits, cfg)
    return label_to_codeword(label, cfg)


def high_dosm_template(i: int, j: int, cfg: SchemeConfig) -> tuple[int, int]:
    """Antenna rows used by codebook (i, j); the extra antenna never carries slot 1."""
    if cfg.scheme is not Scheme.HIGH_DOSM:
        raise ValueError("high_dosm_template needs a high-DoSM config")
    if not (1 <= i <= cfg.n_t and 1 <= j <= cfg.n_t):
        raise ValueError("codebook-set and codebook indices must lie in [1, n_t]")
    row2 = (j + i - 1) % (cfg.n_t + 1) + 1
    return j, row2


def high_dosm_encode(bits, cfg: SchemeConfig) -> SpaceTimeCodeword:
    if cfg.scheme is not Scheme.HIGH_DOSM:
        raise ValueError("high_dosm_encode needs a high-DoSM config")
    label = bits_to_label(bits, cfg)
    return label_to_codeword(label, cfg)


def label_to_codeword(label: CodewordLabel, cfg: SchemeConfig) -> SpaceTimeCodeword:
    pts = cfg.constellation.points
    if cfg.scheme is Scheme.SM:
        (l,), (k,) = label.antennas, label.symbols
        return SpaceTimeCodeword(slots=((l, pts[k]),), n_antennas=cfg.n_antennas)
    k1, k2 = label.symbols
    t1, t2 = interleave(pts[k1], pts[k2])
    if cfg.scheme is Scheme.LOW_DOSM:
        (l,) = label.antennas
        return SpaceTimeCodeword(
            slots=((l, t1), (l % cfg.n_t + 1, t2)),
            n_antennas=cfg.n_antennas,
        )
    i, j = label.antennas
    row1, row2 = high_dosm_template(i, j, cfg)
    phase = cfg.cbs_phases[i - 1]
    return SpaceTimeCodeword(
        slots=((row1, phase * t1), (row2, phase * t2)),
        n_antennas=cfg.n_antennas,
    )


def encode(bits, cfg: SchemeConfig) -> SpaceTimeCodeword:
    return label_to_codeword(bits_to_label(bits, cfg), cfg)


def enumerate_codewords(cfg: SchemeConfig) -> list[SpaceTimeCodeword]:
    """All codewords in natural-binary label order."""
    return [label_to_codeword(label_from_index(i, cfg), cfg)
            for i in range(cfg.n_codewords)]


def legitimate_pairs(cfg: SchemeConfig) -> tuple[tuple[int, int, complex], ...]:
    """(slot-1 antenna, slot-2 antenna, absorbed phase) in label order."""
    if cfg.scheme is Scheme.LOW_DOSM:
        return tuple((l, l % cfg.n_t + 1, 1.0 + 0j) for l in range(1, cfg.n_t + 1))
    if cfg.scheme is Scheme.HIGH_DOSM:
        out = []
        for i in range(1, cfg.n_t + 1):
            for j in range(1, cfg.n_t + 1):
                r1, r2 = high_dosm_template(i, j, cfg)
                out.append((r1, r2, complex(cfg.cbs_phases[i - 1])))
        return tuple(out)
    raise ValueError("the plain scheme has no two-use antenna pairs")


@dataclass(frozen=True, eq=False)
class CodewordTable:
    """Dense arrays over the codeword enumeration, for vectorized detection."""

    rows1: np.ndarray
    syms1: np.ndarray
    rows2: np.ndarray | None
    syms2: np.ndarray | None


@lru_cache(maxsize=32)
def codeword_table(cfg: SchemeConfig) -> CodewordTable:
    words = enumerate_codewords(cfg)
    rows1 = np.array([w.slots[0][0] for w in words])
    syms1 = np.array([w.slots[0][1] for w in words])
    if cfg.scheme is Scheme.SM:
        return CodewordTable(rows1=rows1, syms1=syms1, rows2=None, syms2=None)
    rows2 = np.array([w.slots[1][0] for w in words])
    syms2 = np.array([w.slots[1][1] for w in words])
    return CodewordTable(rows1=rows1, syms1=syms1, rows2=rows2, syms2=syms2)


def rate_bpcu(cfg: SchemeConfig) -> float:
    """Information bits carried per channel use."""
    return cfg.block_bits / cfg.channel_uses


def stbc_sm_rate(n_t: int, m: int, p: int | None = None) -> float:
    """Rate of the two-antenna orthogonal-code index scheme, as a comparison utility.

    ``c`` is the number of antenna-pair activations, floored to a power of
    two (2**p when p is given, otherwise the largest power of two that fits).
    """
    if n_t < 2:
        raise ValueError("need at least two transmit antennas")
    pairs = n_t * (n_t - 1) // 2
    if p is None:
        c = 1 << (pairs.bit_length() - 1)
    else:
        c = 1 << p
        if c > pairs:
            raise ValueError(f"2**{p} exceeds the {pairs} available antenna pairs")
    return (math.log2(c) + 2 * math.log2(m)) / 2.0
