"""Stationary distribution of the log-derivative process and its flux constant.

The stationary density solves

    J = (theta^2 + omega_out^2) Q_s + epsilon dQ_s/dtheta

with equal nonvanishing boundary fluxes at theta -> +-inf.  In the scaled
variable tb = theta/epsilon^(1/3) the solution is

    Qs(tb) ~ exp(-tb^3/3 - lg*tb) * int_{-inf}^{tb} exp(z^3/3 + lg*z) dz,
    lg = lambda*gamma,

always evaluated here in the substituted form (z = tb - s)

    u(tb) = int_0^inf exp(-s^3/3 + tb s^2 - (tb^2 + lg) s) ds,

whose integrand is bounded by 1 for any tb, so |tb| up to hundreds is safe.

Two closed forms exist for the flux constant.  They disagree by a constant
factor of exactly pi (the identity Ai^2(-y) + Bi^2(-y) =
pi^(-3/2) int_0^inf z^(-1/2) exp(-z^3/12 - yz) dz makes the ratio exact);
unit normalization of the density is what this module treats as
authoritative, and it coincides with the integral form.  See
KNOWN_DISCREPANCIES.md.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, TailMassError
from .model import ModelParams
from .numerics import airy, integrate

__all__ = [
    "StationaryDistribution",
    "StationaryGridSpec",
    "qs_unnormalized",
    "qs_unnormalized_many",
    "flux_constant_integral",
    "flux_constant_airy",
    "build_stationary",
    "shape_summary",
]

_DECAY_DECADES = 45.0  # exponent depth at which the integrand tail is cut


def _s_cutoff(theta_bar, lam_gamma):
    """Upper s-limit: the exponent is below -45 past this point."""
    rate = 0.25 * theta_bar**2 + lam_gamma
    s_rate = np.where(rate > 0, _DECAY_DECADES / np.maximum(rate, 1e-300), np.inf)
    s_cubic = 5.2 + 1.5 * np.maximum(theta_bar, 0.0)
    return np.minimum(s_rate, s_cubic)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_N_PANELS = 14


def qs_unnormalized_many(theta_bar, lam_gamma: float) -> np.ndarray:
    """Vectorized u(tb) on an array of scaled points.

    Fixed-rule composite Gauss-Legendre with panels refined geometrically
    toward s = 0; relative accuracy ~1e-12 (cross-checked against the
    adaptive route in the tests).
    """
    tb = np.atleast_1d(np.asarray(theta_bar, dtype=float))
    if lam_gamma < 0:
        raise DomainError("qs_unnormalized: lam_gamma must be >= 0")
    s_max = _s_cutoff(tb, lam_gamma)

    # panel edges s_max * 2^-k, k = N..0, plus 0
    edges = np.concatenate([[0.0], 0.5 ** np.arange(_N_PANELS - 1, -1, -1, dtype=float)])
    lo = s_max[:, None] * edges[None, :-1]
    hi = s_max[:, None] * edges[None, 1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    s = mid[:, :, None] + half[:, :, None] * _GL_NODES[None, None, :]
    g = -s**3 / 3.0 + tb[:, None, None] * s**2 - (tb[:, None, None] ** 2 + lam_gamma) * s
    vals = np.exp(g)
    out = np.einsum("pqn,n,pq->p", vals, _GL_WEIGHTS, half)
    return out


def qs_unnormalized(theta_bar: float, lam_gamma: float) -> float:
    """u(tb): positive, finite for any finite tb; see the module docstring."""
    if not math.isfinite(theta_bar):
        raise DomainError("qs_unnormalized: theta_bar must be finite")
    return float(qs_unnormalized_many(np.array([theta_bar]), lam_gamma)[0])


def flux_constant_integral(lam_gamma: float, epsilon: float) -> float:
    """Flux constant from the normalization integral.

    1/J = pi^(1/2) eps^(-1/3) int_0^inf z^(-1/2) exp(-z^3/12 - lg z) dz,
    computed after the z = u^2 substitution (smooth, rapidly decaying).
    """
    if lam_gamma < 0 or epsilon <= 0:
        raise DomainError("flux_constant_integral: need lam_gamma >= 0, epsilon > 0")
    val, _ = integrate(lambda z: np.exp(-z**3 / 12.0 - lam_gamma * z) / np.sqrt(z),
                       0.0, math.inf, 1e-12, sqrt_singularity_at_a=True)
    return epsilon ** (1.0 / 3.0) / (math.sqrt(math.pi) * val)


def flux_constant_airy(lam_gamma: float, epsilon: float) -> float:
    """Flux constant from the Airy-modulus form.

    1/J = pi eps^(-1/3) [Ai^2(-lg) + Bi^2(-lg)].  Exceeds
    :func:`flux_constant_integral` by a constant factor of exactly pi.
    """
    if lam_gamma < 0 or epsilon <= 0:
        raise DomainError("flux_constant_airy: need lam_gamma >= 0, epsilon > 0")
    v = airy(-lam_gamma)
    return epsilon ** (1.0 / 3.0) / (math.pi * (v.ai**2 + v.bi**2))


@dataclass(frozen=True)
class StationaryGridSpec:
    """Grid construction knobs for :func:`build_stationary`.

    The default grid is a uniform core wide enough to contain the central
    structure, extended by geometrically spaced tail nodes out to the point
    where the analytic 1/tb^2 tail holds less than ``tail_mass``.
    """

    core_half: float | None = None
    core_points: int = 8001
    theta_max: float | None = None
    tail_mass: float = 1e-4
    tail_ratio: float = 1.0025


@dataclass(frozen=True)
class StationaryDistribution:
    """Unit-normalized stationary density on a theta_bar grid.

    density integrates to 1 (trapezoid on the grid plus the analytic tail
    beyond it); flux is the integral-form constant J0f in physical units.
    """

    lam_gamma: float
    epsilon: float
    grid: np.ndarray
    density: np.ndarray
    flux: float
    norm_constant: float  # J-tilde: density = norm_constant * u(tb)
    tail_mass_beyond_grid: float

    def density_at(self, theta_bar) -> np.ndarray:
        """Normalized density at arbitrary scaled points."""
        return self.norm_constant * qs_unnormalized_many(theta_bar, self.lam_gamma)

    def density_physical(self, theta) -> np.ndarray:
        """Density of the unscaled variable theta = eps^(1/3) * theta_bar."""
        scale = self.epsilon ** (1.0 / 3.0)
        return self.density_at(np.asarray(theta) / scale) / scale

    def mass(self) -> float:
        """Trapezoid over the grid plus the analytic beyond-grid tail."""
        return float(np.trapezoid(self.density, self.grid)) + self.tail_mass_beyond_grid

    def mean(self) -> float:
        """First moment; grid part plus the even 4*J*t^2/r^3 tail remainder.

        The 1/tb^2 tail makes the two log-divergent half-line pieces cancel
        in principal value; the surviving remainder converges.  Higher
        moments diverge and are deliberately not provided.
        """
        core = float(np.trapezoid(self.grid * self.density, self.grid))
        theta_max = float(self.grid[-1])
        lg = self.lam_gamma
        tail, _ = integrate(lambda t: 4.0 * t * t / (t * t + lg) ** 3,
                            theta_max, math.inf, 1e-10)
        return core + self.norm_constant * tail


def _tail_radius(lam_gamma, flux_tilde, tail_mass):
    """Radius beyond which the analytic 1/tb^2 tail mass is below tail_mass."""
    if lam_gamma > 0:
        delta = tail_mass * math.sqrt(lam_gamma) / (2.0 * flux_tilde)
        if delta >= 0.5 * math.pi:
            return math.sqrt(lam_gamma)
        return math.sqrt(lam_gamma) / math.tan(delta)
    return 2.0 * flux_tilde / tail_mass


def _beyond_grid_mass(lam_gamma, flux_tilde, theta_max):
    """Mass of the two analytic tails past +-theta_max.

    Leading 1/(tb^2+lg) pieces from both sides; the first odd correction
    cancels between the sides, leaving an O(theta_max^-5) error.
    """
    if lam_gamma > 0:
        half = (0.5 * math.pi - math.atan(theta_max / math.sqrt(lam_gamma))) / math.sqrt(lam_gamma)
    else:
        half = 1.0 / theta_max
    return 2.0 * flux_tilde * half


def build_stationary(params: ModelParams,
                     grid_spec: StationaryGridSpec | None = None) -> StationaryDistribution:
    """Construct the unit-normalized stationary distribution for ``params``.

    Normalization is direct quadrature of u(tb) to unit mass (authoritative);
    the flux field carries the integral-form constant, which agrees with the
    direct normalization to quadrature accuracy.
    """
    spec = grid_spec or StationaryGridSpec()
    lg = params.lam_gamma()
    flux_tilde = flux_constant_integral(lg, 1.0)

    core_half = spec.core_half or max(12.0, 8.0 + 3.0 * math.sqrt(lg))
    theta_max = spec.theta_max or _tail_radius(lg, flux_tilde, spec.tail_mass)
    if theta_max < core_half:
        theta_max = core_half
    actual_tail = _beyond_grid_mass(lg, flux_tilde, theta_max)
    if actual_tail > 1.5 * spec.tail_mass:
        raise TailMassError(
            f"theta_max = {theta_max:g} leaves tail mass {actual_tail:.3g} "
            f"> {spec.tail_mass:g}; widen the grid")

    core = np.linspace(-core_half, core_half, spec.core_points)
    if theta_max > core_half:
        n_tail = max(2, int(math.ceil(math.log(theta_max / core_half)
                                      / math.log(spec.tail_ratio))))
        tail = core_half * spec.tail_ratio ** np.arange(1, n_tail + 1)
        tail[-1] = theta_max
        grid = np.concatenate([-tail[::-1], core, tail])
    else:
        grid = core

    raw = qs_unnormalized_many(grid, lg)
    total = np.trapezoid(raw, grid) + _beyond_grid_mass(lg, 1.0, theta_max)
    norm = 1.0 / total
    density = norm * raw

    return StationaryDistribution(
        lam_gamma=lg,
        epsilon=params.epsilon,
        grid=grid,
        density=density,
        flux=flux_constant_integral(lg, params.epsilon),
        norm_constant=norm,
        tail_mass_beyond_grid=norm * _beyond_grid_mass(lg, 1.0, theta_max),
    )


def shape_summary(lam_gamma: float) -> dict:
    """Peak height and half width of the scaled density, both in theta_bar
    and relative to sqrt(lam_gamma).

    Diagnostic for the two proposed concentration limits: in theta_bar the
    width grows like sqrt(lam_gamma) (no delta limit as lam_gamma -> inf);
    in units of omega_out the shape approaches a fixed Lorentzian.
    """
    width_scale = max(1.0, math.sqrt(lam_gamma))
    grid = np.linspace(-30.0 * width_scale, 30.0 * width_scale, 6001)
    u = qs_unnormalized_many(grid, lam_gamma)
    norm = 1.0 / (np.trapezoid(u, grid) + _beyond_grid_mass(lam_gamma, 1.0, grid[-1]))
    dens = norm * u
    ipk = int(np.argmax(dens))
    peak = float(dens[ipk])
    above = dens >= 0.5 * peak
    lo = grid[above][0]
    hi = grid[above][-1]
    return {
        "lam_gamma": lam_gamma,
        "peak_density": peak,
        "peak_location": float(grid[ipk]),
        "hwhm_theta_bar": float(0.5 * (hi - lo)),
        "hwhm_over_sqrt_lg": float(0.5 * (hi - lo) / math.sqrt(lam_gamma)) if lam_gamma > 0 else math.inf,
    }
