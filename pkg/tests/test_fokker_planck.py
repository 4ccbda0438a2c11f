import math

import numpy as np
import pytest

from qrho.errors import DomainSizeError, FitError, StabilityError
from qrho.fokker_planck import (DensityOnGrid, Grid1D, evolve_fp,
                                feynman_kac_b0, gaussian_on_grid,
                                relaxation_rate)
from qrho.langevin import sweep_time_correction
from qrho.model import BarrierProfile, ModelParams
from qrho.stationary import build_stationary

OM = 1.0
PROF = BarrierProfile("constant", OM, OM)
PARAMS = ModelParams(epsilon=1.0, omega_in=OM, omega_out=OM, omega_as=OM)


class TestGrid:
    def test_spacing(self):
        g = Grid1D(-1.0, 1.0, 101)
        assert g.spacing == pytest.approx(0.02)
        assert len(g.points()) == 101

    def test_validation(self):
        with pytest.raises(StabilityError):
            Grid1D(-1.0, 1.0, 32)
        with pytest.raises(StabilityError):
            Grid1D(1.0, -1.0, 128)


class TestEvolve:
    def test_mass_conserved_closed_no_drift(self):
        g = Grid1D(-10.0, 10.0, 256)
        q0 = gaussian_on_grid(g, width=0.5)
        out = evolve_fp(q0, PROF, 1.0, 1e-3, 10.0, boundary="closed",
                        include_drift=False)
        assert abs(out.mass() - q0.mass()) < 1e-12

    def test_pure_diffusion_variance(self):
        g = Grid1D(-30.0, 30.0, 1024)
        q0 = gaussian_on_grid(g, width=1.0)
        out = evolve_fp(q0, PROF, 1.0, 1e-3, 5.0, boundary="closed",
                        include_drift=False)
        x = g.points()
        var = np.sum(x * x * out.values) * g.spacing / out.mass()
        assert var == pytest.approx(1.0 + 2.0 * 1.0 * 5.0, rel=0.005)

    @pytest.mark.slow
    def test_delta_spike_relaxes_to_stationary(self):
        d = build_stationary(PARAMS)
        g = Grid1D(-25.0, 25.0, 2048)
        out = evolve_fp(gaussian_on_grid(g), PROF, 1.0, 5e-4, 20.0)
        linf = np.max(np.abs(out.values - d.density_physical(g.points())))
        assert linf < 1e-3

    @pytest.mark.slow
    def test_analytic_stationary_is_fixed_point(self):
        d = build_stationary(PARAMS)
        g = Grid1D(-25.0, 25.0, 2048)
        delay = sweep_time_correction(OM, 25.0)
        q0 = DensityOnGrid(grid=g, values=d.density_physical(g.points()),
                           time=0.0, buffer_mass=d.flux * delay)
        out = evolve_fp(q0, PROF, 1.0, 5e-4, math.pi / OM)
        assert np.max(np.abs(out.values - q0.values)) <= 1e-4

    def test_total_mass_conserved_with_transit_buffer(self):
        g = Grid1D(-15.0, 15.0, 512)
        q0 = gaussian_on_grid(g)
        out = evolve_fp(q0, PROF, 1.0, 1e-3, 5.0)
        assert out.mass() + out.buffer_mass == pytest.approx(q0.mass(), abs=1e-8)

    def test_spatial_order_near_two(self):
        def run(n):
            g = Grid1D(-8.0, 8.0, n)
            q = gaussian_on_grid(g, width=1.0)
            return evolve_fp(q, PROF, 1.0, 1e-5, 0.3, boundary="closed").values

        u1, u2, u3 = run(129), run(257), run(513)
        order = math.log2(np.max(np.abs(u1 - u2[::2])) / np.max(np.abs(u2 - u3[::2])))
        assert 1.8 <= order <= 2.2

    def test_explicit_scheme_stability_guard(self):
        g = Grid1D(-20.0, 20.0, 512)
        with pytest.raises(StabilityError):
            evolve_fp(gaussian_on_grid(g), PROF, 1.0, 1e-2, 1.0, scheme="explicit")

    def test_explicit_matches_cn_when_stable(self):
        g = Grid1D(-8.0, 8.0, 256)
        q0 = gaussian_on_grid(g, width=1.0)
        dt = 0.4 * g.spacing**2 / 2.0
        a = evolve_fp(q0, PROF, 1.0, dt, 0.2, scheme="explicit", boundary="closed")
        b = evolve_fp(q0, PROF, 1.0, dt, 0.2, scheme="cn", boundary="closed")
        assert np.max(np.abs(a.values - b.values)) < 1e-4


class TestRelaxationRate:
    @pytest.fixture(scope="class")
    def snapshots(self):
        d = build_stationary(PARAMS)
        out = {}
        for n in (1024, 2048):
            g = Grid1D(-25.0, 25.0, n)
            ref = d.density_physical(g.points())
            _, snaps = evolve_fp(gaussian_on_grid(g), PROF, 1.0, 5e-4, 10.0,
                                 snapshot_times=[4, 5, 6, 7, 8, 9, 10])
            out[n] = (snaps, ref)
        return out

    def test_rate_positive(self, snapshots):
        snaps, ref = snapshots[2048]
        assert relaxation_rate(snaps, ref) > 0

    def test_rate_stable_under_refinement(self, snapshots):
        r1 = relaxation_rate(*snapshots[1024])
        r2 = relaxation_rate(*snapshots[2048])
        assert abs(r1 - r2) <= 0.05 * r2

    def test_residual_decays_after_burn_in(self, snapshots):
        snaps, ref = snapshots[2048]
        norms = [np.max(np.abs(s.values - ref)) for s in snaps]
        assert all(b < a for a, b in zip(norms, norms[1:]))

    def test_fit_errors(self, snapshots):
        snaps, ref = snapshots[2048]
        with pytest.raises(FitError):
            relaxation_rate(snaps[:2], ref)
        with pytest.raises(FitError):
            relaxation_rate(list(reversed(snaps)), ref)


class TestFeynmanKac:
    def test_potential_disabled_conserves_unity(self):
        g = Grid1D(-18.0, 10.0, 1024)
        r = feynman_kac_b0(g, 1e-3, 2.0, include_potential=False)
        assert np.max(np.abs(r.b0 - 1.0)) < 1e-10

    def test_growth_matches_exact_gaussian_functional(self):
        # for an initial Gaussian of width w the exact answer is
        # exp(t^3/6 + w^2 t^2 / 2); the delta-approximant has w = 3h
        g = Grid1D(-18.0, 10.0, 1024)
        w = 3.0 * g.spacing
        r = feynman_kac_b0(g, 1e-3, 2.5)
        exact = np.exp(r.times**3 / 6.0 + 0.5 * w * w * r.times**2)
        assert np.max(np.abs(r.b0 / exact - 1.0)) < 5e-3

    def test_divergence_is_flagged(self):
        g = Grid1D(-18.0, 10.0, 1024)
        r = feynman_kac_b0(g, 1e-3, 2.5)
        assert r.diverged and r.trend == "grows"
        assert abs(r.limit_estimate - 2.0 ** (-1.0 / 3.0)) > 0.05  # recorded miss

    def test_second_order_self_convergence(self):
        t_end = 1.5

        def b0_at(n, dt):
            g = Grid1D(-16.0, 8.0, n)
            w = 3.0 * g.spacing
            r = feynman_kac_b0(g, dt, t_end)
            exact = math.exp(t_end**3 / 6.0 + 0.5 * w * w * t_end**2)
            return abs(r.b0[-1] - exact) / exact

        e1 = b0_at(512, 2e-3)
        e2 = b0_at(1024, 1e-3)
        order = math.log2(e1 / e2)
        assert 1.7 <= order <= 2.4

    def test_drift_variant_recorded(self):
        # the drift-including weight decays instead of reaching 2^(-1/3);
        # recorded behavior, see KNOWN_DISCREPANCIES.md
        g = Grid1D(-25.0, 25.0, 512)
        r = feynman_kac_b0(g, 2e-3, 20.0, drift_variant=True,
                           profile=PROF, epsilon=1.0)
        assert not r.diverged
        assert r.trend == "decays"
        assert r.b0[-1] < r.b0[len(r.b0) // 2]

    def test_domain_size_guard(self):
        g = Grid1D(-4.0, 4.0, 128)
        with pytest.raises(DomainSizeError):
            feynman_kac_b0(g, 1e-3, 2.5)
