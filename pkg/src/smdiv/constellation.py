"""Signal-set construction and geometry.

Square-QAM, rectangular QAM, and BPSK sets together with the metadata the
rest of the library leans on: the PAM decomposition of the pre-rotation
axes, the rotation state, the coordinate product distance, and the
nearest-level quantizer used by the reduced-complexity detector.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

# Counterclockwise tilt that maximizes the coordinate product distance of
# integer-grid constellations; equals arctan(2)/2.
ROTATION_ANGLE = math.atan(2.0) / 2.0


class Kind(enum.Enum):
    SQUARE_QAM = "square-qam"
    RECT_QAM = "rect-qam"
    BPSK = "bpsk"


class Normalization(enum.Enum):
    UNIT_AVERAGE_ENERGY = "unit-energy"
    UNIT_HALF_SPACING = "unit-half-spacing"


@dataclass(frozen=True)
class PamGrid:
    """Uniform, zero-symmetric amplitude grid along one axis."""

    levels: tuple[float, ...]
    spacing: float

    def __post_init__(self):
        if not self.levels:
            raise ValueError("PAM grid needs at least one level")
        if abs(sum(self.levels)) > 1e-9 * max(1.0, self.spacing):
            raise ValueError("PAM levels must be symmetric about zero")
        for lo, hi in zip(self.levels, self.levels[1:]):
            if abs((hi - lo) - self.spacing) > 1e-9 * self.spacing:
                raise ValueError("PAM levels must be uniformly spaced")

    @property
    def n(self) -> int:
        return len(self.levels)

    @cached_property
    def array(self) -> np.ndarray:
        return np.array(self.levels)


def _pam_levels(n: int, d: float) -> PamGrid:
    if n == 1:
        return PamGrid((0.0,), 2.0 * d)
    return PamGrid(tuple(d * (2 * k + 1 - n) for k in range(n)), 2.0 * d)


@dataclass(frozen=True)
class Constellation:
    """An ordered complex signal set with its pre-rotation PAM skeleton.

    ``points`` are the transmit symbols after applying ``theta``; the PAM
    grids always describe the unrotated axes (the rotation is modelled
    separately by the detector, so the grids stay valid after rotate()).
    """

    kind: Kind
    points: tuple[complex, ...]
    d: float
    theta: float
    pam_i: PamGrid
    pam_q: PamGrid

    @property
    def order(self) -> int:
        return len(self.points)

    @cached_property
    def array(self) -> np.ndarray:
        return np.array(self.points)

    @cached_property
    def grid_to_index(self) -> np.ndarray:
        """Map (I-level index, Q-level index) to the point's position in ``points``."""
        base = self.array * np.exp(-1j * self.theta)
        table = np.full((self.pam_i.n, self.pam_q.n), -1, dtype=int)
        for idx, p in enumerate(base):
            ki = int(np.argmin(np.abs(self.pam_i.array - p.real)))
            kq = int(np.argmin(np.abs(self.pam_q.array - p.imag)))
            table[ki, kq] = idx
        if (table < 0).any():
            raise ValueError("points do not cover the PAM grid product")
        return table

    def average_energy(self) -> float:
        return float(np.mean(np.abs(self.array) ** 2))


def _rect_shape(m: int) -> tuple[int, int]:
    bits = m.bit_length() - 1
    if m != 1 << bits:
        raise ValueError(f"constellation size must be a power of two, got {m}")
    n1 = 1 << ((bits + 1) // 2)
    return n1, m // n1


def build_constellation(
    kind: Kind,
    m: int,
    normalization: Normalization = Normalization.UNIT_AVERAGE_ENERGY,
) -> Constellation:
    """Construct an unrotated signal set of the given kind and size.

    Unit-average-energy scaling solves mean(|point|^2) = 1; unit-half-spacing
    pins the PAM half-spacing d to 1 so the levels are the odd integers.
    """
    if kind is Kind.BPSK:
        if m != 2:
            raise ValueError("BPSK means exactly two points")
        d = 1.0
        return Constellation(
            kind=kind,
            points=(complex(d, 0.0), complex(-d, 0.0)),
            d=d,
            theta=0.0,
            pam_i=_pam_levels(2, d),
            pam_q=_pam_levels(1, d),
        )

    if kind is Kind.SQUARE_QAM:
        root = math.isqrt(m)
        if m < 4 or root * root != m:
            raise ValueError(f"square QAM needs a perfect-square size >= 4, got {m}")
        n1 = n2 = root
    elif kind is Kind.RECT_QAM:
        n1, n2 = _rect_shape(m)
        if n2 < 2 or n1 == n2:
            raise ValueError(f"rectangular QAM needs a non-square power-of-two size >= 8, got {m}")
    else:
        raise ValueError(f"unknown constellation kind {kind!r}")

    if normalization is Normalization.UNIT_AVERAGE_ENERGY:
        # E|x|^2 of an n1 x n2 grid with half-spacing d is d^2 (n1^2 + n2^2 - 2) / 3.
        d = math.sqrt(3.0 / (n1 * n1 + n2 * n2 - 2))
    else:
        d = 1.0

    grid_i = _pam_levels(n1, d)
    grid_q = _pam_levels(n2, d)
    points = tuple(
        complex(li, lq) for li in grid_i.levels for lq in grid_q.levels
    )
    return Constellation(kind=kind, points=points, d=d, theta=0.0,
                         pam_i=grid_i, pam_q=grid_q)


_NAMED = {
    "bpsk": (Kind.BPSK, 2),
    "qam4": (Kind.SQUARE_QAM, 4),
    "qam16": (Kind.SQUARE_QAM, 16),
    "qam64": (Kind.SQUARE_QAM, 64),
    "qam256": (Kind.SQUARE_QAM, 256),
    "rect8": (Kind.RECT_QAM, 8),
    "rect32": (Kind.RECT_QAM, 32),
}


def constellation_from_name(
    name: str,
    normalization: Normalization = Normalization.UNIT_AVERAGE_ENERGY,
) -> Constellation:
    try:
        kind, m = _NAMED[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown modulation {name!r}; expected one of {sorted(_NAMED)}"
        ) from None
    return build_constellation(kind, m, normalization)


def rotate(c: Constellation, theta: float) -> Constellation:
    """Rotate every point counterclockwise by theta radians.

    The PAM metadata is untouched: it describes the unrotated axes, which
    the real-valued detector model rotates explicitly.
    """
    if theta == 0.0:
        return c
    w = complex(math.cos(theta), math.sin(theta))
    return replace(
        c,
        points=tuple(p * w for p in c.points),
        theta=c.theta + theta,
    )


def cpd(c: Constellation) -> float:
    """Minimum coordinate product distance over all distinct point pairs."""
    pts = c.array
    if len(pts) < 2:
        raise ValueError("need at least two points")
    di = np.abs(pts.real[:, None] - pts.real[None, :])
    dq = np.abs(pts.imag[:, None] - pts.imag[None, :])
    prod = di * dq
    iu = np.triu_indices(len(pts), k=1)
    return float(prod[iu].min())


def quantize_index(value: float, grid: PamGrid) -> int:
    """Index of the grid level nearest to ``value``, ties toward the smaller level."""
    if grid.n == 1:
        return 0
    x = (value - grid.levels[0]) / grid.spacing
    idx = math.ceil(x - 0.5)
    return min(max(idx, 0), grid.n - 1)


def hard_limit(value: float, grid: PamGrid) -> float:
    """Nearest grid level to ``value`` (saturating at the extremes)."""
    return grid.levels[quantize_index(value, grid)]
