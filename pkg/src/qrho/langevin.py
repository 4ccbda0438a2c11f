"""Seeded simulation of the nonlinear log-derivative Langevin process.

The process obeys  d theta = -(theta^2 + Omega_0^2(t)) dt + sqrt(2 eps) dW.
The quadratic drift drives every realization to -infinity in finite time
(the deterministic flow is a tangent sweep with period pi/Omega); paths are
re-entered at +theta_cut, which realizes the constant-probability-flux
stationary state.  The excised excursion beyond the cut is deterministic to
high accuracy, and its sweep time 2*atan(Omega/theta_cut)/Omega is recorded
per event so occupation-time bookkeeping stays unbiased.

Accumulated path functionals:

    int_theta = int theta dt'           (trapezoid; the log-divergent pieces
                                         of a blow-up cancel in principal
                                         value, so the reinjection step
                                         contributes its clipped trapezoid)
    int_exp   = int exp(-2 int_theta) dt'

Ensembles advance one Philox stream per path (stream_id = path index), so
any path can be replayed in isolation and batches are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, SamplingError, StabilityError
from .model import BarrierProfile, omega0
from .numerics import RandomStream, normal_deviates

__all__ = [
    "SdeConfig",
    "ThetaPath",
    "EnsembleResult",
    "step",
    "simulate",
    "run_ensemble",
    "ensemble_histogram",
    "default_theta_cut",
    "sweep_time_correction",
]

_MAX_STEPS = 10**9
_CHUNK = 4096


def default_theta_cut(lam_gamma: float, epsilon: float) -> float:
    """Reinjection cut max(20, 10 sqrt(lam_gamma)) * eps^(1/3)."""
    return max(20.0, 10.0 * math.sqrt(lam_gamma)) * epsilon ** (1.0 / 3.0)


def sweep_time_correction(omega: float, theta_cut: float) -> float:
    """Deterministic traversal time of the excised |theta| > cut excursion.

    The drift-only flow runs from -cut to -inf and re-enters from +inf to
    +cut in 2*atan(omega/cut)/omega total (~ 2/cut for cut >> omega).
    """
    return 2.0 * math.atan(omega / theta_cut) / omega


@dataclass
class SdeConfig:
    """Time step, cut, ensemble size and noise configuration.

    dt * theta_cut^2 <= 0.1 is enforced: the Euler step must stay small
    against the stiffest drift the path can see before reinjection.
    """

    dt: float
    theta_cut: float
    n_paths: int
    stream: RandomStream
    profile: BarrierProfile
    epsilon: float

    def __post_init__(self):
        if self.dt <= 0 or self.theta_cut <= 0:
            raise StabilityError("SdeConfig: dt and theta_cut must be > 0")
        if self.n_paths < 1:
            raise StabilityError("SdeConfig: n_paths must be >= 1")
        if self.epsilon < 0:
            raise StabilityError("SdeConfig: epsilon must be >= 0")
        if self.dt * self.theta_cut**2 > 0.1 + 1e-12:
            raise StabilityError(
                f"SdeConfig: dt*theta_cut^2 = {self.dt * self.theta_cut**2:.3g} "
                "exceeds the stability bound 0.1")


@dataclass
class ThetaPath:
    """One stored realization with running functionals at every sample."""

    times: np.ndarray
    values: np.ndarray
    reinjections: np.ndarray       # event times
    int_theta: np.ndarray          # running trapezoid of values
    int_exp: np.ndarray            # running trapezoid of exp(-2 int_theta)
    time_correction: float         # total excised sweep time

    def reinjection_period(self, omega: float, theta_cut: float) -> float:
        """Mean spacing of reinjection events plus the excised sweep time."""
        if len(self.reinjections) < 2:
            raise SamplingError("need at least two reinjections to estimate a period")
        gaps = np.diff(self.reinjections)
        return float(np.mean(gaps)) + sweep_time_correction(omega, theta_cut)


def step(theta: float, t: float, cfg: SdeConfig, deviate: float) -> float:
    """One Euler-Maruyama step; returns +theta_cut on blow-through.

    theta' = theta - (theta^2 + Omega_0^2(t)) dt + sqrt(2 eps dt) * deviate.
    A return of exactly +theta_cut marks a reinjection event.
    """
    om = omega0(cfg.profile, t)
    theta_new = theta - (theta * theta + om * om) * cfg.dt \
        + math.sqrt(2.0 * cfg.epsilon * cfg.dt) * deviate
    if theta_new < -cfg.theta_cut:
        return cfg.theta_cut
    return min(theta_new, cfg.theta_cut)


def simulate(cfg: SdeConfig, t0: float, t1: float, theta0: float = 0.0) -> ThetaPath:
    """Single stored path on [t0, t1]; deterministic given cfg.stream."""
    if t1 <= t0:
        raise StabilityError("simulate: t1 must exceed t0")
    n_steps = int(round((t1 - t0) / cfg.dt))
    if n_steps > _MAX_STEPS:
        raise BudgetError(f"simulate: {n_steps} steps exceeds the 1e9 budget")

    times = t0 + cfg.dt * np.arange(n_steps + 1)
    om = np.asarray(omega0(cfg.profile, times[:-1]), dtype=float)
    om = np.broadcast_to(om, (n_steps,))
    amp = math.sqrt(2.0 * cfg.epsilon * cfg.dt)

    values = np.empty(n_steps + 1)
    int_theta = np.empty(n_steps + 1)
    int_exp = np.empty(n_steps + 1)
    values[0] = theta0
    int_theta[0] = 0.0
    int_exp[0] = 0.0
    events = []
    t_corr = 0.0

    theta = theta0
    acc = 0.0
    w_prev = 1.0
    acc_exp = 0.0
    pos = 0
    while pos < n_steps:
        n = min(_CHUNK, n_steps - pos)
        dev = normal_deviates(cfg.stream, n)
        for i in range(n):
            k = pos + i
            theta_new = theta - (theta * theta + om[k] * om[k]) * cfg.dt + amp * dev[i]
            if theta_new < -cfg.theta_cut:
                theta_new = cfg.theta_cut
                events.append(times[k + 1])
                t_corr += sweep_time_correction(om[k], cfg.theta_cut)
            elif theta_new > cfg.theta_cut:
                theta_new = cfg.theta_cut
            acc += 0.5 * (theta + theta_new) * cfg.dt
            w = math.exp(-2.0 * acc)
            acc_exp += 0.5 * (w_prev + w) * cfg.dt
            values[k + 1] = theta_new
            int_theta[k + 1] = acc
            int_exp[k + 1] = acc_exp
            theta = theta_new
            w_prev = w
        pos += n

    return ThetaPath(times=times, values=values,
                     reinjections=np.asarray(events, dtype=float),
                     int_theta=int_theta, int_exp=int_exp,
                     time_correction=t_corr)


@dataclass
class EnsembleResult:
    """Final state and running functionals of a vectorized ensemble."""

    t_final: float
    theta: np.ndarray
    int_theta: np.ndarray
    int_exp: np.ndarray
    n_reinjections: np.ndarray
    time_correction: np.ndarray
    tau: np.ndarray | None = None
    xi: np.ndarray | None = None
    xi_dot: np.ndarray | None = None
    hist_counts: np.ndarray | None = None
    hist_edges: np.ndarray | None = None
    hist_time: float = 0.0
    excised_time_in_window: float = 0.0


def _xi_propagate(xi, xi_dot, om_sq, dt):
    """Exact one-step propagator of xi'' = -om_sq * xi, om_sq const per step."""
    pos = om_sq > 0
    w = np.sqrt(np.abs(om_sq))
    wdt = w * dt
    c = np.where(pos, np.cos(wdt), np.cosh(wdt))
    s_over_w = np.where(
        w > 1e-300,
        np.where(pos, np.sin(wdt), np.sinh(wdt)) / np.where(w > 1e-300, w, 1.0),
        dt)
    minus_w_s = np.where(pos, -w * np.sin(wdt), w * np.sinh(wdt))
    xi_new = c * xi + s_over_w * xi_dot
    xi_dot_new = minus_w_s * xi + c * xi_dot
    return xi_new, xi_dot_new


def run_ensemble(cfg: SdeConfig, t0: float, t1: float, theta0=0.0, *,
                 with_xi: bool = False, xi0=None, xi_dot0=None,
                 hist_edges=None, hist_start: float | None = None,
                 hist_thin: int = 8) -> EnsembleResult:
    """Advance cfg.n_paths independent paths from t0 to t1 in lockstep.

    with_xi additionally carries the complex oscillator solution driven by
    the same noise (the per-step noise F = -sqrt(2 eps/dt) Z is recovered
    from the theta increment and held constant across the step, for which
    the xi propagator is exact and Wronskian-conserving).  Note |xi| grows
    exponentially under parametric noise, so Im(conj(xi) xi_dot) is only
    meaningful while |xi| |xi_dot| * eps_machine stays small; keep windows
    to a few tens of periods.  hist_edges enables an occupation-time
    histogram accumulated from hist_start onward, sampled every hist_thin
    steps.
    """
    if t1 <= t0:
        raise StabilityError("run_ensemble: t1 must exceed t0")
    n_steps = int(round((t1 - t0) / cfg.dt))
    if n_steps * cfg.n_paths > _MAX_STEPS:
        raise BudgetError("run_ensemble: step budget exceeded")

    n_p = cfg.n_paths
    theta = np.full(n_p, theta0, dtype=float) if np.isscalar(theta0) \
        else np.array(theta0, dtype=float)
    int_theta = np.zeros(n_p)
    int_exp = np.zeros(n_p)
    w_prev = np.exp(-2.0 * int_theta)
    n_rei = np.zeros(n_p, dtype=np.int64)
    t_corr = np.zeros(n_p)
    tau = np.zeros(n_p) if with_xi else None
    if with_xi:
        xi = np.full(n_p, 1.0 + 0.0j) if xi0 is None else np.array(xi0, dtype=complex)
        xi_dot = (np.full(n_p, 1.0j * omega0(cfg.profile, t0) * xi)
                  if xi_dot0 is None else np.array(xi_dot0, dtype=complex))
    else:
        xi = xi_dot = None

    counts = None
    hist_time = 0.0
    excised_window = 0.0
    if hist_edges is not None:
        hist_edges = np.asarray(hist_edges, dtype=float)
        counts = np.zeros(len(hist_edges) - 1)
        if hist_start is None:
            hist_start = t0

    streams = [cfg.stream.spawn(i) for i in range(n_p)]
    amp = math.sqrt(2.0 * cfg.epsilon * cfg.dt)
    f_amp = math.sqrt(2.0 * cfg.epsilon / cfg.dt)

    pos = 0
    while pos < n_steps:
        n = min(_CHUNK, n_steps - pos)
        dev = np.empty((n_p, n))
        for i, s in enumerate(streams):
            dev[i] = normal_deviates(s, n)
        for i in range(n):
            k = pos + i
            t = t0 + k * cfg.dt
            om = float(omega0(cfg.profile, t))
            drift = theta * theta + om * om
            theta_new = theta - drift * cfg.dt + amp * dev[:, i]
            blow = theta_new < -cfg.theta_cut
            n_blow = int(np.count_nonzero(blow))
            if n_blow:
                theta_new[blow] = cfg.theta_cut
                n_rei[blow] += 1
                corr = sweep_time_correction(om, cfg.theta_cut)
                t_corr[blow] += corr
                if counts is not None and t >= hist_start:
                    excised_window += n_blow * corr
            np.minimum(theta_new, cfg.theta_cut, out=theta_new)

            int_theta += 0.5 * (theta + theta_new) * cfg.dt
            w = np.exp(-2.0 * int_theta)
            int_exp += 0.5 * (w_prev + w) * cfg.dt
            w_prev = w

            if with_xi:
                om_sq_eff = om * om - f_amp * dev[:, i]
                sig_sq = xi.real**2 + xi.imag**2
                xi, xi_dot = _xi_propagate(xi, xi_dot, om_sq_eff, cfg.dt)
                tau += 0.5 * cfg.dt * (1.0 / sig_sq + 1.0 / (xi.real**2 + xi.imag**2))

            theta = theta_new
            if counts is not None and t >= hist_start and (k % hist_thin) == 0:
                idx = np.searchsorted(hist_edges, theta, side="right") - 1
                ok = (idx >= 0) & (idx < len(counts))
                np.add.at(counts, idx[ok], 1.0)
                hist_time += n_p * hist_thin * cfg.dt
        pos += n

    return EnsembleResult(
        t_final=t0 + n_steps * cfg.dt, theta=theta, int_theta=int_theta,
        int_exp=int_exp, n_reinjections=n_rei, time_correction=t_corr,
        tau=tau, xi=xi, xi_dot=xi_dot,
        hist_counts=counts, hist_edges=hist_edges, hist_time=hist_time,
        excised_time_in_window=excised_window)


def ensemble_histogram(cfg: SdeConfig, burn_in: float, sample_window: float,
                       bins, *, hist_thin: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Occupation-time density over [burn_in, burn_in + sample_window].

    Returns (edges, density).  Each retained sample credits hist_thin*dt of
    occupation; the denominator additionally carries the excised traversal
    corrections, so mass beyond the binned range is honestly missing rather
    than being renormalized into the bins.
    """
    relax = math.pi / cfg.profile.omega_out
    if burn_in < 5 * relax:
        raise StabilityError(
            f"ensemble_histogram: burn_in {burn_in:g} below 5 relaxation times {5 * relax:g}")
    if np.isscalar(bins):
        edges = np.linspace(-cfg.theta_cut / 2, cfg.theta_cut / 2, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)

    res = run_ensemble(cfg, 0.0, burn_in + sample_window,
                       hist_edges=edges, hist_start=burn_in, hist_thin=hist_thin)
    if res.hist_counts is None or res.hist_counts.sum() == 0:
        raise SamplingError("ensemble_histogram: no retained samples")

    widths = np.diff(edges)
    t_total = res.hist_time + res.excised_time_in_window
    density = res.hist_counts * hist_thin * cfg.dt / (t_total * widths)
    return edges, density
