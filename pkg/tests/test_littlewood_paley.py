import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from micropolar.grid import WaveGrid, forward_transform, random_field
from micropolar.littlewood_paley import (
    CHI_INNER,
    CHI_OUTER,
    BesovSpec,
    DyadicPartition,
    bernstein_ratio,
    besov_from_blocks,
    besov_norm,
    block_norms,
    bony_decompose,
    lowpass,
    lp_block,
    make_partition,
    phi,
    radial_cutoff,
    smoothstep,
)

from conftest import SEED


def mean_abs_cos_power(p):
    """Average of |cos|^p over a period, from the Beta-function closed form."""
    return math.gamma((p + 1) / 2) / (math.sqrt(math.pi) * math.gamma(p / 2 + 1))


class TestProfiles:
    def test_cutoff_plateau_and_support(self):
        assert np.all(radial_cutoff(np.linspace(0, CHI_INNER, 50)) == 1.0)
        assert np.all(radial_cutoff(np.linspace(CHI_OUTER, 5, 50)) == 0.0)

    def test_cutoff_monotone(self):
        r = np.linspace(0, 2, 2001)
        assert np.all(np.diff(radial_cutoff(r)) <= 0)

    def test_smoothstep_symmetry(self):
        t = np.linspace(-0.5, 1.5, 401)
        assert np.allclose(smoothstep(t) + smoothstep(1 - t), 1.0, atol=1e-15)

    def test_phi_support(self):
        assert np.all(phi(np.linspace(0, CHI_INNER, 20)) == 0.0)
        assert np.all(phi(np.linspace(2 * CHI_OUTER, 10, 20)) == 0.0)
        # plateau where chi(r) = 0 and chi(r / 2) = 1
        assert np.all(phi(np.linspace(CHI_OUTER, 2 * CHI_INNER, 20)) == 1.0)

    @settings(max_examples=50, deadline=None)
    @given(r=st.floats(min_value=1e-3, max_value=1e3))
    def test_telescoping_at_any_radius(self, r):
        j = np.arange(-20, 21)
        assert np.sum(phi(r * 2.0**-j)) == pytest.approx(1.0, abs=1e-14)


class TestPartition:
    def test_needs_four_octaves(self, cube16):
        with pytest.raises(ValueError):
            DyadicPartition(cube16, 0, 2)

    def test_blocks_cover_every_grid_mode(self, aniso):
        part = make_partition(aniso)
        total = part.tables.sum(axis=0)
        nonzero = aniso.kmag > 0
        assert np.max(np.abs(total[nonzero] - 1.0)) < 1e-14
        assert total[0, 0, 0] == 0.0

    def test_almost_orthogonal(self, cube32):
        tabs = make_partition(cube32).tables
        for i in range(len(tabs)):
            for j in range(i + 2, len(tabs)):
                assert np.max(tabs[i] * tabs[j]) == 0.0

    def test_blocks_sum_to_field(self, aniso):
        f = random_field(aniso, SEED, "sum")
        part = make_partition(aniso)
        acc = sum(lp_block(f, j, part).coeffs for j in part.indices)
        assert np.max(np.abs(acc - f.coeffs)) < 1e-14 * f.max_abs()

    def test_lowpass_plus_tail(self, cube32):
        f = random_field(cube32, SEED, "low")
        part = make_partition(cube32)
        j = part.j_min + 3
        tail = sum(lp_block(f, k, part).coeffs for k in range(j, part.j_max + 1))
        assert np.max(np.abs(lowpass(f, j, part).coeffs + tail - f.coeffs)) < 1e-14 * f.max_abs()
        with pytest.raises(ValueError):
            lowpass(f, part.j_max + 2, part)

    def test_foreign_partition_rejected(self, cube16, cube32):
        with pytest.raises(ValueError):
            lp_block(random_field(cube16, SEED, "x"), 0, make_partition(cube32))


class TestNorms:
    def test_plane_wave_block_norms(self):
        # cos(3 x1) on a 2 pi cube: block j carries phi(3 / 2^j) cos(3 x1)
        g = WaveGrid((16, 16, 16))
        x1, x2, x3 = g.coordinates()
        f = forward_transform(g, np.cos(3 * x1) + 0 * x2 + 0 * x3)
        part = make_partition(g)
        # cos^4(3 x1) tops out at mode 12 < 16, so the grid sum is the exact mean
        p = 4.0
        cos_norm = (g.volume * mean_abs_cos_power(p)) ** (1 / p)
        expected = phi(3.0 * 2.0 ** -np.arange(part.j_min, part.j_max + 1)) * cos_norm
        assert np.allclose(block_norms(f, p, part), expected, rtol=1e-12, atol=1e-14)

    def test_besov_of_plane_wave(self):
        g = WaveGrid((16, 16, 16))
        x1, x2, x3 = g.coordinates()
        f = forward_transform(g, np.cos(3 * x1) + 0 * x2 + 0 * x3)
        p, s = 4.0, -1 + 3 / 4.0
        j = np.arange(-20, 21)
        weights = 2.0 ** (s * j) * phi(3.0 * 2.0**-j)
        cos_norm = (g.volume * mean_abs_cos_power(p)) ** (1 / p)
        assert besov_norm(f, BesovSpec(s, p, 1)) == pytest.approx(weights.sum() * cos_norm, rel=1e-12)
        assert besov_norm(f, BesovSpec(s, p, math.inf)) == pytest.approx(weights.max() * cos_norm, rel=1e-12)

    def test_besov_from_blocks_sequence(self):
        norms = np.array([1.0, 2.0, 0.5])
        assert besov_from_blocks(norms, [0, 1, 2], 1.0, 1.0) == pytest.approx(1 + 4 + 2)
        assert besov_from_blocks(norms, [0, 1, 2], 1.0, 2.0) == pytest.approx(math.sqrt(1 + 16 + 4))
        assert besov_from_blocks(norms, [0, 1, 2], 0.0, math.inf) == 2.0

    def test_spec_parse_round_trip(self):
        spec = BesovSpec(-0.4, 5.0, math.inf)
        assert str(spec) == "B[-0.4,5,inf]"
        assert BesovSpec.parse(str(spec)) == spec
        with pytest.raises(ValueError):
            BesovSpec.parse("H[1,2,3]")
        with pytest.raises(ValueError):
            BesovSpec(0.0, 0.5, 1.0)

    def test_vector_norm_is_euclidean(self, cube16):
        x1, x2, x3 = cube16.coordinates()
        zero = 0 * x1 + 0 * x2 + 0 * x3
        u = forward_transform(cube16, np.stack([np.cos(2 * x2) + zero, np.sin(2 * x2) + zero, zero]))
        part = make_partition(cube16)
        # |u| = 1 pointwise, and only modes of radius 2 are present
        expected = phi(2.0 * 2.0 ** -np.arange(part.j_min, part.j_max + 1)) * cube16.volume ** 0.25
        assert np.allclose(block_norms(u, 4.0, part), expected, rtol=1e-12)


class TestBernstein:
    @pytest.mark.parametrize("p", [2.0, 5.0])
    def test_gradient_ratio_within_annulus(self, cube32, p):
        f = random_field(cube32, SEED, "bern")
        part = make_partition(cube32)
        for j in part.indices:
            b = lp_block(f, j, part)
            if b.max_abs() == 0:
                continue
            assert 0.75 <= bernstein_ratio(b, j, p) <= 8.0 / 3.0


class TestBony:
    def test_decomposition_is_exact(self, cube32):
        band = (4, 4, 4)
        u = random_field(cube32, SEED, "bu", band=band)
        v = random_field(cube32, SEED, "bv", band=band)
        tuv, tvu, rem = bony_decompose(u, v)
        exact = forward_transform(cube32, u.to_physical() * v.to_physical()).coeffs
        total = tuv.coeffs + tvu.coeffs + rem.coeffs
        assert np.max(np.abs(total - exact)) < 1e-12 * np.max(np.abs(exact))

    def test_wide_band_rejected(self, cube16):
        u = random_field(cube16, SEED, "wu")
        with pytest.raises(ValueError):
            bony_decompose(u, u)

    def test_vector_rejected(self, cube16):
        u = random_field(cube16, SEED, "vu", vector=True, band=(2, 2, 2))
        with pytest.raises(TypeError):
            bony_decompose(u, u)
