import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from micropolar.grid import SpectralField, WaveGrid, curl, div, hermitian_defect, lq_norm_fourier
from micropolar.initial_data import (
    IdentityViolation,
    ProfileParams,
    assemble_U0_W0,
    build_a0,
    build_bump_1d,
    condition_lhs,
    condition_terms,
    default_box,
    largeness_metrics,
    loglog,
    profile_norms_grid,
    profile_norms_quadrature,
    resolving_dims,
    support_report,
)

EPS_SWEEP = [2.0**-k for k in range(3, 8)]


def loglog_slope(eps_values, values):
    x = np.log(eps_values)
    return float(np.polyfit(x, np.log(values), 1)[0])


class TestBump:
    def test_plateau_and_outside(self):
        b = build_bump_1d(1.0, 2.0, 1.25, 1.75)
        assert b(1.5) == 1.0
        assert np.all(b(np.array([0.0, 1.0, 2.0, 3.0])) == 0.0)

    def test_mirror_symmetry(self):
        b = build_bump_1d(-1.0, 1.0, -0.5, 0.5)
        x = np.linspace(0, 1.2, 101)
        assert np.array_equal(b(x), b(-x))

    def test_monotone_transitions(self):
        b = build_bump_1d(0.0, 1.0, 0.25, 0.75)
        rise = b(np.linspace(0, 0.25, 501))
        fall = b(np.linspace(0.75, 1.0, 501))
        assert np.all(np.diff(rise) >= 0) and np.all(np.diff(fall) <= 0)

    @settings(max_examples=50, deadline=None)
    @given(x=st.floats(min_value=-10, max_value=10))
    def test_values_in_unit_interval(self, x):
        b = build_bump_1d(-1.0, 2.0, 0.0, 1.0)
        assert 0.0 <= float(b(x)) <= 1.0

    def test_ordering_error(self):
        with pytest.raises(ValueError):
            build_bump_1d(1.0, 2.0, 1.8, 1.6)


class TestProfileParams:
    @pytest.mark.parametrize("eps", [0.0, 0.3, -0.1])
    def test_eps_range(self, eps):
        with pytest.raises(ValueError):
            ProfileParams(eps)

    @pytest.mark.parametrize("p", [4.0, 6.0, 3.0])
    def test_p_range(self, p):
        with pytest.raises(ValueError):
            ProfileParams(0.25, p=p)

    def test_amplitude_modes(self):
        assert ProfileParams(0.125, amp="unit").amplitude == 1.0
        assert ProfileParams(0.125, amp=3.5).amplitude == 3.5
        assert ProfileParams(0.125).amplitude == pytest.approx(64 * math.sqrt(math.log(math.log(8))))
        with pytest.raises(ValueError):
            ProfileParams(0.125, amp="huge")

    def test_metadata_records_smoothstep(self):
        meta = ProfileParams(0.25).metadata()
        assert "exp(-1/t)" in meta["smoothstep"]
        assert meta["strip"] == 0.25


class TestBuildA0:
    def test_support_inside_C(self, large_a0):
        rep = support_report(large_a0, 0.25)
        assert rep["inside_C"]
        assert rep["max_abs_xi1_plus_xi2"] <= 0.25
        assert 1.0 <= rep["min_xi_h"] and rep["max_xi_h"] <= 2.0
        assert 0.25 <= rep["min_abs_xi3"] and rep["max_abs_xi3"] <= 0.5

    def test_nonnegative_real_spectrum(self, large_a0):
        assert np.all(large_a0.coeffs.imag == 0.0)
        assert np.all(large_a0.coeffs.real >= 0.0)
        assert hermitian_defect(large_a0) == 0.0

    def test_even_in_physical_space(self, large_a0):
        x = large_a0.to_physical()
        mirrored = np.roll(x[::-1, ::-1, ::-1], 1, axis=(0, 1, 2))
        assert np.max(np.abs(x - mirrored)) < 1e-12 * np.max(np.abs(x))

    def test_unit_amplitude_plateau(self, datum_grid):
        a0 = build_a0(ProfileParams(0.25, amp="unit"), datum_grid)
        assert lq_norm_fourier(a0, math.inf) == pytest.approx(1.0, abs=1e-14)

    def test_unresolved_band_rejected(self):
        with pytest.raises(ValueError, match="band"):
            build_a0(ProfileParams(0.25), WaveGrid((64, 64, 16), default_box(0.25)[:2] + (20.0,)))

    def test_unresolved_strip_rejected(self):
        with pytest.raises(ValueError, match="strip"):
            build_a0(ProfileParams(0.25), WaveGrid((16, 16, 32), (10.0, 10.0, default_box(0.25)[2])))

    def test_resolving_dims(self):
        assert resolving_dims(0.25) == (40, 40, 40)
        assert resolving_dims(0.25, dealias=True) == (56, 56, 56)


class TestAssemble:
    def test_zero_datum(self, cube16):
        U0, W0 = assemble_U0_W0(SpectralField.zeros(cube16))
        assert U0.max_abs() == 0.0 and W0.max_abs() == 0.0

    def test_divergence_free_and_real(self, large_a0):
        U0, W0 = assemble_U0_W0(large_a0)
        assert div(U0).max_abs() < 1e-12
        assert hermitian_defect(U0) < 1e-12 * U0.max_abs()
        assert np.all(W0.coeffs[:2] == 0.0)

    def test_vorticity_is_minus_horizontal_laplacian(self, large_a0):
        g = large_a0.grid
        U0, _ = assemble_U0_W0(large_a0)
        k1, k2, _ = g.k
        # omega0 = d2 U0^1 - d1 U0^2, the negative of the third curl component
        omega = -curl(U0).coeffs[2]
        expected = -(k1 * k1 + k2 * k2) * large_a0.coeffs
        assert np.max(np.abs(omega - expected)) < 1e-12 * np.max(np.abs(expected))


class TestCondition:
    def test_all_zero(self):
        assert condition_lhs(None, None, None, ProfileParams(0.25)) == 0.0

    def test_homogeneity(self, large_a0):
        params = ProfileParams(0.25)
        one = condition_terms(None, None, large_a0, params)
        two = condition_terms(None, None, 2.0 * large_a0, params)
        l1 = profile_norms_grid(large_a0, params.p).l1
        assert two.eps_sq_term == pytest.approx(4.0 * one.eps_sq_term, rel=1e-12)
        assert two.eps_lin_term == pytest.approx(2.0 * one.eps_lin_term, rel=1e-12)
        assert two.exp_argument - one.exp_argument == pytest.approx(3.0 * l1**2 + l1, rel=1e-12)

    def test_perturbation_term_adds(self, large_a0):
        params = ProfileParams(0.25)
        U0, W0 = assemble_U0_W0(large_a0)
        base = condition_terms(None, None, large_a0, params)
        with_pert = condition_terms(1e-3 * U0, 1e-3 * W0, large_a0, params)
        assert with_pert.perturbation > 0
        assert with_pert.pre_exponential == pytest.approx(base.pre_exponential + with_pert.perturbation)

    def test_value_overflow_reported_as_inf(self):
        from micropolar.initial_data import ConditionTerms

        terms = ConditionTerms(1.0, 0.0, 0.0, 1e4)
        assert terms.value == math.inf
        assert terms.log_value == pytest.approx(1e4)

    def test_quadrature_matches_grid(self):
        # the xi1 + xi2 strip needs horizontal spacing eps/8 before the lattice sum settles
        params = ProfileParams(0.25)
        grid = WaveGrid((224, 224, 56), default_box(0.25, 8.0))
        g = profile_norms_grid(build_a0(params, grid), params.p)
        q = profile_norms_quadrature(params)
        assert g.l1 == pytest.approx(q.l1, rel=1e-2)
        assert g.lp_dual == pytest.approx(q.lp_dual, rel=1e-2)
        assert g.omega_l1 == pytest.approx(q.omega_l1, rel=1e-2)
        assert g.linf == pytest.approx(q.linf, rel=1e-12)


class TestScaling:
    def test_lp_dual_exponent(self):
        vals = [profile_norms_quadrature(ProfileParams(e)).lp_dual / math.sqrt(loglog(e)) for e in EPS_SWEEP]
        slope = loglog_slope(EPS_SWEEP, vals)
        assert abs(slope - (-2 / 5)) <= 0.1 * 2 / 5

    def test_leading_condition_term_exponent(self):
        vals = [
            condition_terms(None, None, "quadrature", ProfileParams(e)).eps_sq_term / loglog(e) for e in EPS_SWEEP
        ]
        assert abs(loglog_slope(EPS_SWEEP, vals) - 0.2) <= 0.15 * 0.2

    def test_l1_carries_half_power_of_loglog(self):
        # |a0_hat|_L1 is eps^0 times (log log 1/eps)^(1/2); dividing leaves a flat sequence
        vals = [profile_norms_quadrature(ProfileParams(e)).l1 for e in EPS_SWEEP]
        ll = [loglog(e) for e in EPS_SWEEP]
        exponent = float(np.polyfit(np.log(ll), np.log(vals), 1)[0])
        assert abs(exponent - 0.5) <= 0.1


class TestLargeness:
    def test_zero_datum(self, cube32):
        out = largeness_metrics(SpectralField.zeros(cube32))
        assert all(v == 0.0 for v in out.values())

    def test_single_sign_identity(self, cube16):
        rng = np.random.default_rng(1)
        c = np.zeros(cube16.half_shape, dtype=complex)
        c[1:4, 1:4, 1:4] = rng.random((3, 3, 3))
        c[-3:, 1:4, 1:4] = rng.random((3, 3, 3))
        out = largeness_metrics(SpectralField(cube16, c))
        assert out["omega_identity_defect"] < 1e-10

    def test_mixed_sign_spectrum_skips_identity(self, cube16):
        c = np.zeros(cube16.half_shape, dtype=complex)
        c[1, 2, 1] = 1.0
        c[2, 1, 1] = -1.0
        out = largeness_metrics(SpectralField(cube16, c))
        assert "omega_identity_defect" not in out

    def test_identity_violation_raised(self, cube16, monkeypatch):
        from micropolar import initial_data

        c = np.zeros(cube16.half_shape, dtype=complex)
        c[1, 2, 1] = 1.0
        monkeypatch.setattr(initial_data, "lp_norm_physical", lambda f, p: 0.5)
        with pytest.raises(IdentityViolation):
            largeness_metrics(SpectralField(cube16, c))

    def test_large_datum_metrics(self, large_a0):
        out = largeness_metrics(large_a0)
        assert out["omega_identity_defect"] < 1e-8
        assert out["u_Linf"] > 0 and out["u_B-1_inf_inf"] > 0

    def test_omega_band_over_eps_sweep(self):
        eps = [1 / 8, 1 / 16, 1 / 32]
        om = [profile_norms_quadrature(ProfileParams(e)).omega_l1 for e in eps]
        assert om[0] < om[1] < om[2]
        ratios = [o / math.sqrt(loglog(e)) for o, e in zip(om, eps)]
        assert max(ratios) / min(ratios) <= 2.0
