import math

import numpy as np
import pytest

from qrho.errors import DomainError, TailMassError
from qrho.model import ModelParams
from qrho.stationary import (StationaryGridSpec, build_stationary,
                             flux_constant_airy, flux_constant_integral,
                             qs_unnormalized, qs_unnormalized_many,
                             shape_summary)

from .oracles import qs_inner_integral

INV_PI = 1.0 / math.pi

# 3^(-2/3) * Gamma(1/3), frozen from mpmath (also checked against the
# package's own adaptive quadrature below).
U_AT_00 = 1.2878993168540687


def params_for(lam_gamma, omega_out=1.0):
    """ModelParams with the requested lam_gamma at unit omega ratios."""
    eps = (omega_out / math.sqrt(lam_gamma)) ** 3 if lam_gamma > 0 else 1.0
    return ModelParams(epsilon=eps, omega_in=omega_out, omega_out=omega_out,
                       omega_as=omega_out)


class TestQsUnnormalized:
    def test_gamma_identity_value(self):
        assert qs_unnormalized(0.0, 0.0) == pytest.approx(U_AT_00, rel=1e-12)

    @pytest.mark.parametrize("tb,lg", [(0, 0), (0, 1), (2.5, 4), (-3, 1),
                                       (10, 0), (-20, 25), (50, 1)])
    def test_against_mpmath_oracle(self, tb, lg):
        assert qs_unnormalized(tb, lg) == pytest.approx(qs_inner_integral(tb, lg), rel=1e-12)

    def test_positive_and_finite(self):
        tb = np.linspace(-80, 80, 401)
        for lg in (0.0, 2.0, 50.0):
            u = qs_unnormalized_many(tb, lg)
            assert np.all(u > 0) and np.all(np.isfinite(u))

    @pytest.mark.parametrize("lg", [0.0, 3.0])
    def test_large_theta_asymptote(self, lg):
        # u * (tb^2 + lg) -> 1 with O(tb^-3) corrections
        for tb in (50.0, 200.0):
            assert qs_unnormalized(tb, lg) * (tb * tb + lg) == pytest.approx(1.0, abs=1e-4)

    def test_exact_solution_of_flux_ode(self):
        # residual of (tb^2+lg) u + u' - 1 via central differences
        lg = 2.0
        tb = np.linspace(-15, 15, 301)
        d = 1e-3
        du = (qs_unnormalized_many(tb + d, lg) - qs_unnormalized_many(tb - d, lg)) / (2 * d)
        resid = (tb * tb + lg) * qs_unnormalized_many(tb, lg) + du - 1.0
        assert np.max(np.abs(resid)) < 1e-6

    def test_domain(self):
        with pytest.raises(DomainError):
            qs_unnormalized(0.0, -1.0)
        with pytest.raises(DomainError):
            qs_unnormalized(float("inf"), 1.0)


class TestFluxConstants:
    def test_integral_form_frozen_value(self):
        # adaptive quadrature of the z = u^2 substituted form
        assert flux_constant_integral(0.0, 1.0) == pytest.approx(0.20096245133899196, rel=1e-10)

    def test_watson_asymptote(self):
        assert flux_constant_integral(400.0, 1.0) == pytest.approx(20.0 / math.pi, rel=0.01)

    def test_epsilon_scaling_exact(self):
        for lg in (0.0, 2.0, 30.0):
            j1 = flux_constant_integral(lg, 1.0)
            for eps in (0.125, 1.0, 8.0):
                assert flux_constant_integral(lg, eps) == pytest.approx(
                    eps ** (1 / 3) * j1, rel=1e-12)

    def test_airy_form_frozen_value(self):
        assert flux_constant_airy(0.0, 1.0) == pytest.approx(0.6313421607739734, rel=1e-10)

    def test_airy_form_envelope_asymptote(self):
        assert flux_constant_airy(400.0, 1.0) == pytest.approx(20.0, rel=1e-4)

    def test_ratio_is_one_over_pi_for_all_lam_gamma(self):
        # The two representations disagree by a constant factor of exactly pi.
        ratios = [flux_constant_integral(lg, 1.0) / flux_constant_airy(lg, 1.0)
                  for lg in (0.0, 1.0, 4.0, 25.0)]
        for r in ratios:
            assert r == pytest.approx(INV_PI, rel=1e-6)
        assert max(ratios) - min(ratios) < 1e-6 * INV_PI


class TestBuildStationary:
    def test_mass_is_one(self):
        d = build_stationary(params_for(1.0))
        assert d.mass() == pytest.approx(1.0, abs=1e-6)

    def test_density_nonnegative(self):
        d = build_stationary(params_for(4.0))
        assert np.all(d.density >= 0)

    def test_normalization_matches_integral_flux(self):
        # direct quadrature normalization vs the closed-form constant
        for lg in (0.5, 1.0, 4.0, 25.0):
            d = build_stationary(params_for(lg))
            assert d.norm_constant == pytest.approx(
                flux_constant_integral(lg, 1.0) / d.epsilon ** (1 / 3) * d.epsilon ** (1 / 3),
                rel=1e-6)
            assert d.norm_constant == pytest.approx(flux_constant_integral(lg, 1.0), rel=1e-6)

    def test_flux_ode_residual_on_grid(self):
        d = build_stationary(params_for(4.0))
        g = d.grid[1:-1][::17]
        delta = 1e-3
        dq = (d.density_at(g + delta) - d.density_at(g - delta)) / (2 * delta)
        resid = (g * g + d.lam_gamma) * d.density_at(g) + dq - d.norm_constant
        assert np.max(np.abs(resid)) <= 1e-6 * d.norm_constant

    def test_tail_law_flat(self):
        d = build_stationary(params_for(4.0))
        tb0 = 10 + 2 * math.sqrt(d.lam_gamma)
        tb = np.linspace(tb0, 3 * tb0, 40)
        ratio = d.density_at(tb) * (tb * tb + d.lam_gamma) / d.norm_constant
        assert np.max(np.abs(ratio - 1.0)) < 0.01

    def test_lorentzian_limit(self):
        # lam_gamma = 100; physical density close to (w/pi)/(th^2+w^2)
        d = build_stationary(params_for(100.0))
        th = np.linspace(-3.0, 3.0, 241)
        lor = (1.0 / math.pi) / (th * th + 1.0)
        rel = np.abs(d.density_physical(th) - lor) / lor
        assert np.max(rel) < 0.02

    def test_grid_too_narrow_raises(self):
        with pytest.raises(TailMassError):
            build_stationary(params_for(1.0),
                             StationaryGridSpec(theta_max=30.0))

    def test_explicit_grid_spec_roundtrip(self):
        spec = StationaryGridSpec(core_half=15.0, core_points=2001, tail_mass=5e-3)
        d = build_stationary(params_for(1.0), spec)
        assert d.mass() == pytest.approx(1.0, abs=1e-6)
        assert d.grid[0] == -d.grid[-1]

    def test_epsilon_scaling_of_physical_density(self):
        # Q(theta) = eps^{-1/3} Qtilde(theta/eps^{1/3}) at fixed lam_gamma
        d1 = build_stationary(params_for(4.0, omega_out=1.0))
        d2 = build_stationary(ModelParams(epsilon=8.0 * d1.epsilon,
                                          omega_in=2.0, omega_out=2.0, omega_as=2.0))
        assert d2.lam_gamma == pytest.approx(d1.lam_gamma, rel=1e-12)
        th = np.linspace(-2, 2, 41)
        assert np.allclose(d2.density_physical(2.0 * th) * 2.0,
                           d1.density_physical(th), rtol=1e-9)


class TestShapeSummary:
    def test_width_grows_like_sqrt_lam_gamma(self):
        # tb-width ~ sqrt(lam_gamma): no concentration in theta_bar at large
        # lam_gamma (diagnostic for the proposed delta limits).
        s_small = shape_summary(0.25)
        s_big = shape_summary(100.0)
        assert s_big["hwhm_theta_bar"] > 5 * s_small["hwhm_theta_bar"]
        assert s_big["hwhm_over_sqrt_lg"] == pytest.approx(1.0, rel=0.1)

    def test_peak_falls_with_lam_gamma(self):
        assert shape_summary(100.0)["peak_density"] < shape_summary(1.0)["peak_density"]
