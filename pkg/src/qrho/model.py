"""Physical parameters, dimensionless groups and frequency profiles.

Units: hbar = 1, mass = 1.  The fluctuation constant ``epsilon`` has units
of inverse time cubed, so theta_bar = theta / epsilon**(1/3) is the only
internal nondimensionalization; lam = (omega_in/epsilon^(1/3))**2 and
gamma = (omega_out/omega_in)**2 are the two dimensionless groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularConfigurationError

__all__ = [
    "ModelParams",
    "BarrierProfile",
    "gamma_from_rho",
    "rho_from_frequencies",
    "omega0",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of one model instance.

    epsilon : noise correlation constant (> 0), <F(t)F(t')> = 2 epsilon delta.
    omega_in, omega_out : asymptotic frequencies of the profile (> 0).
    omega_as : frequency of the asymptotic (late-time) region (> 0).
    """

    epsilon: float
    omega_in: float
    omega_out: float
    omega_as: float

    def __post_init__(self):
        for name in ("epsilon", "omega_in", "omega_out", "omega_as"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"ModelParams.{name} must be finite and > 0")

    def lam(self) -> float:
        """Inverse noise strength lambda = (omega_in / epsilon^(1/3))^2."""
        return (self.omega_in / self.epsilon ** (1.0 / 3.0)) ** 2

    def gamma(self) -> float:
        """Frequency ratio squared gamma = (omega_out / omega_in)^2."""
        return (self.omega_out / self.omega_in) ** 2

    def lam_gamma(self) -> float:
        """The product lambda*gamma = (omega_out / epsilon^(1/3))^2."""
        return (self.omega_out / self.epsilon ** (1.0 / 3.0)) ** 2

    def lam_as(self) -> float:
        """Late-time group (omega_as / epsilon^(1/3))^2."""
        return (self.omega_as / self.epsilon ** (1.0 / 3.0)) ** 2

    def theta_scale(self) -> float:
        """epsilon^(1/3); theta_bar = theta / theta_scale."""
        return self.epsilon ** (1.0 / 3.0)


@dataclass(frozen=True)
class BarrierProfile:
    """Deterministic frequency profile Omega_0(t).

    kind:
        "constant"    Omega_0 = omega_in everywhere.
        "step"        sudden jump omega_in -> omega_out at transition_time.
        "smooth-step" tanh ramp of the given width.
    """

    kind: str
    omega_in: float
    omega_out: float
    transition_time: float = 0.0
    width: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "step", "smooth-step"):
            raise DomainError(f"BarrierProfile.kind unknown: {self.kind!r}")
        if self.omega_in <= 0 or self.omega_out <= 0:
            raise DomainError("BarrierProfile frequencies must be > 0")
        if self.kind == "smooth-step" and self.width <= 0:
            raise SingularConfigurationError(
                "smooth-step profile with width = 0 is degenerate; use kind='step'")


def gamma_from_rho(rho: float) -> float:
    """Frequency ratio gamma for a sudden-step profile with reflection rho.

    gamma = ((1 + sqrt(rho)) / (1 - sqrt(rho)))**2, defined for 0 <= rho < 1.
    """
    if not (0.0 <= rho < 1.0):
        raise DomainError(f"gamma_from_rho: need 0 <= rho < 1, got {rho}")
    s = math.sqrt(rho)
    return ((1.0 + s) / (1.0 - s)) ** 2


def rho_from_frequencies(omega_in: float, omega_out: float) -> float:
    """Reflection coefficient of the sudden step between two frequencies.

    rho = ((omega_out - omega_in) / (omega_out + omega_in))**2; inverse of
    :func:`gamma_from_rho` in the sense gamma(rho(w1, w2)) = (max/min)^2.
    """
    if omega_in <= 0 or omega_out <= 0:
        raise DomainError("rho_from_frequencies: frequencies must be > 0")
    return ((omega_out - omega_in) / (omega_out + omega_in)) ** 2


def omega0(profile: BarrierProfile, t):
    """Profile frequency Omega_0(t); accepts scalars or arrays."""
    t = np.asarray(t, dtype=float)
    if profile.kind == "constant":
        out = np.full_like(t, profile.omega_in)
    elif profile.kind == "step":
        out = np.where(t < profile.transition_time, profile.omega_in, profile.omega_out)
    else:
        ramp = 0.5 * (1.0 + np.tanh((t - profile.transition_time) / profile.width))
        out = profile.omega_in + (profile.omega_out - profile.omega_in) * ramp
    return out if out.ndim else float(out)
