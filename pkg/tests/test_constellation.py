"""Signal-set construction, rotation, CPD, and the PAM quantizer."""

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smdiv.constellation import (
    Constellation,
    Kind,
    Normalization,
    PamGrid,
    ROTATION_ANGLE,
    build_constellation,
    constellation_from_name,
    cpd,
    hard_limit,
    quantize_index,
    rotate,
)

UAE = Normalization.UNIT_AVERAGE_ENERGY
UHS = Normalization.UNIT_HALF_SPACING


class TestBuild:
    def test_qam4_unit_energy_points(self):
        c = build_constellation(Kind.SQUARE_QAM, 4, UAE)
        assert c.d == pytest.approx(1 / math.sqrt(2))
        expected = {(round(s1 / math.sqrt(2), 12), round(s2 / math.sqrt(2), 12))
                    for s1 in (-1, 1) for s2 in (-1, 1)}
        got = {(round(p.real, 12), round(p.imag, 12)) for p in c.points}
        assert got == expected

    def test_qam16_scaling_against_direct_mean(self):
        c = build_constellation(Kind.SQUARE_QAM, 16, UAE)
        assert c.d == pytest.approx(math.sqrt(0.1), abs=1e-12)
        # oracle: the mean over the actual points, not the closed form
        assert np.mean(np.abs(c.array) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_bpsk_points(self):
        c = build_constellation(Kind.BPSK, 2, UAE)
        assert c.points == (1 + 0j, -1 + 0j)
        assert c.d == 1.0

    def test_unit_half_spacing_gives_odd_integer_levels(self):
        c = build_constellation(Kind.SQUARE_QAM, 16, UHS)
        assert c.d == 1.0
        assert c.pam_i.levels == (-3.0, -1.0, 1.0, 3.0)

    @pytest.mark.parametrize("m", [4, 16, 64, 256])
    def test_unit_energy_invariant(self, m):
        c = build_constellation(Kind.SQUARE_QAM, m, UAE)
        assert abs(c.average_energy() - 1.0) < 1e-12

    def test_rect8_shape_and_energy(self):
        c = build_constellation(Kind.RECT_QAM, 8, UAE)
        assert (c.pam_i.n, c.pam_q.n) == (4, 2)
        assert abs(c.average_energy() - 1.0) < 1e-12

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            build_constellation(Kind.SQUARE_QAM, 8, UAE)
        with pytest.raises(ValueError):
            build_constellation(Kind.BPSK, 4, UAE)
        with pytest.raises(ValueError):
            build_constellation(Kind.RECT_QAM, 16, UAE)

    def test_from_name(self):
        assert constellation_from_name("qam16").order == 16
        with pytest.raises(ValueError):
            constellation_from_name("psk8")


class TestRotate:
    def test_identity(self):
        c = build_constellation(Kind.SQUARE_QAM, 4, UAE)
        assert rotate(c, 0.0) is c

    def test_magnitude_and_argument(self):
        c = build_constellation(Kind.SQUARE_QAM, 4, UAE)
        r = rotate(c, ROTATION_ANGLE)
        p = [q for q in r.points if q.imag > 0 and q.real > -0.5][0]
        assert abs(p) == pytest.approx(1.0, abs=1e-12)
        assert math.atan2(p.imag, p.real) == pytest.approx(
            math.pi / 4 + 0.5535744, abs=1e-6)

    def test_roundtrip(self):
        c = build_constellation(Kind.SQUARE_QAM, 16, UAE)
        back = rotate(rotate(c, ROTATION_ANGLE), -ROTATION_ANGLE)
        np.testing.assert_allclose(back.array, c.array, atol=1e-12)

    def test_rotation_is_isometry(self):
        c = build_constellation(Kind.SQUARE_QAM, 16, UAE)
        r = rotate(c, 1.234)
        d0 = np.abs(c.array[:, None] - c.array[None, :])
        d1 = np.abs(r.array[:, None] - r.array[None, :])
        np.testing.assert_allclose(d0, d1, atol=1e-12)


class TestCpd:
    @pytest.mark.parametrize("m", [4, 16, 64])
    def test_unrotated_square_qam_is_zero(self, m):
        assert cpd(build_constellation(Kind.SQUARE_QAM, m, UAE)) == 0.0

    def test_two_point_set(self):
        grid = PamGrid((-1.0, 1.0), 2.0)
        c = Constellation(kind=Kind.BPSK, points=(1 + 1j, -1 - 1j), d=1.0,
                          theta=0.0, pam_i=grid, pam_q=grid)
        assert cpd(c) == pytest.approx(4.0)

    def test_rotated_qam4_value(self):
        c = rotate(build_constellation(Kind.SQUARE_QAM, 4, UAE), ROTATION_ANGLE)
        assert cpd(c) == pytest.approx(2 / math.sqrt(5), abs=1e-9)

    @pytest.mark.parametrize("m", [4, 16, 64])
    def test_rotated_square_qam_matches_closed_form(self, m):
        c = rotate(build_constellation(Kind.SQUARE_QAM, m, UAE), ROTATION_ANGLE)
        assert cpd(c) == pytest.approx(4 * c.d ** 2 / math.sqrt(5), abs=1e-9)

    def test_affine_behavior(self):
        rng = np.random.default_rng(0)
        c = rotate(build_constellation(Kind.SQUARE_QAM, 16, UAE), ROTATION_ANGLE)
        base = cpd(c)
        for _ in range(10):
            shift = complex(*rng.normal(size=2))
            scale = float(rng.uniform(0.2, 3.0))
            shifted = replace(c, points=tuple(p + shift for p in c.points))
            scaled = replace(c, points=tuple(scale * p for p in c.points))
            assert cpd(shifted) == pytest.approx(base, rel=1e-9)
            assert cpd(scaled) == pytest.approx(scale ** 2 * base, rel=1e-9)


class TestHardLimit:
    grid = PamGrid((-3.0, -1.0, 1.0, 3.0), 2.0)

    def test_nearest(self):
        assert hard_limit(0.9, self.grid) == 1.0

    def test_saturates(self):
        assert hard_limit(1000.0, self.grid) == 3.0
        assert hard_limit(-1000.0, self.grid) == -3.0

    def test_tie_goes_to_smaller_level(self):
        assert hard_limit(-2.0, self.grid) == -3.0
        assert hard_limit(0.0, self.grid) == -1.0

    def test_single_level_grid(self):
        assert hard_limit(5.0, PamGrid((0.0,), 2.0)) == 0.0

    @settings(max_examples=300, deadline=None)
    @given(st.floats(min_value=-50, max_value=50),
           st.integers(min_value=2, max_value=9))
    def test_matches_linear_scan(self, value, n):
        grid = PamGrid(tuple(float(2 * k + 1 - n) for k in range(n)), 2.0)
        got = hard_limit(value, grid)
        dists = [abs(value - lv) for lv in grid.levels]
        best = min(dists)
        # nearest level; within an ulp of an exact midpoint either side is fine
        candidates = [lv for lv, d in zip(grid.levels, dists)
                      if d - best <= 1e-12 * max(1.0, abs(value))]
        assert got in candidates

    def test_quantize_index_matches_levels(self):
        for v in np.linspace(-5, 5, 101):
            assert self.grid.levels[quantize_index(v, self.grid)] == hard_limit(v, self.grid)
