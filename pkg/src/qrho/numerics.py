"""Self-contained special functions, quadrature and random-number services.

Airy functions are evaluated from scratch: a Maclaurin series summed in
double-double arithmetic on [-9, 9] (the series loses one digit per
~0.58*|x|**1.5 of cancellation, so plain float64 would fail well before the
seam), and asymptotic expansions beyond.  The seam location is where both
branches agree to better than 1e-11.

Quadrature is adaptive bisection with a paired Gauss rule error estimate.
Random numbers come from counter-based Philox streams with a Box-Muller
transform, so replay is exact and streams are independent by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, DomainError, UnsupportedOrderError

__all__ = [
    "AiryValues",
    "airy",
    "airy_many",
    "hermite",
    "integrate",
    "RandomStream",
    "normal_deviate",
    "normal_deviates",
]


# ---------------------------------------------------------------------------
# double-double helpers (vectorized; error-free transformations)

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ahi, alo = _split(a)
    bhi, blo = _split(b)
    return p, ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo


def _dd_add(ahi, alo, bhi, blo):
    shi, slo = _two_sum(ahi, bhi)
    thi, tlo = _two_sum(alo, blo)
    slo = slo + thi
    shi, slo = _quick_two_sum(shi, slo)
    return _quick_two_sum(shi, slo + tlo)


def _dd_mul(ahi, alo, bhi, blo):
    phi, plo = _two_prod(ahi, bhi)
    return _quick_two_sum(phi, plo + (ahi * blo + alo * bhi))


def _dd_div_int(ahi, alo, n):
    q1 = ahi / n
    phi, plo = _two_prod(q1, n)
    rhi, rlo = _two_sum(ahi, -phi)
    return _quick_two_sum(q1, (rhi + (rlo + alo - plo)) / n)


# Ai(0) and -Ai'(0) as (hi, lo) pairs; Ai = C1*f - C2*g, Bi = sqrt(3)(C1*f + C2*g).
_C1 = (0.3550280538878172, 2.05233632436212e-17)
_C2 = (0.2588194037928068, -2.522243111610832e-17)
_SQRT3 = (1.7320508075688772, 1.0035084221806903e-16)

_SERIES_EDGE = 9.0
_SERIES_TERMS = 80


@dataclass(frozen=True)
class AiryValues:
    """Ai, Bi and their derivatives at a single point."""

    ai: float
    bi: float
    ai_prime: float
    bi_prime: float


def _airy_series(x):
    """Maclaurin evaluation on |x| <= 9, double-double accumulation.

    The four ascending series share the recurrences

        f:  t_k = t_{k-1} x^3 / ((3k-1)(3k))      t_0 = 1
        g:  v_k = v_{k-1} x^3 / ((3k)(3k+1))      v_0 = x
        f': u_k = u_{k-1} x^3 / ((3k)(3k+2))      u_1 = x^2/2
        g': w_k = w_{k-1} x^3 / ((3k-2)(3k))      w_0 = 1

    with exactly representable integer denominators.
    """
    x = np.asarray(x, dtype=float)
    x3 = _dd_mul(*_two_prod(x, x), x, np.zeros_like(x))

    zero = np.zeros_like(x)
    t = (np.ones_like(x), zero.copy())
    v = (x.copy(), zero.copy())
    u = _dd_mul(*_two_prod(x, x), np.full_like(x, 0.5), zero.copy())
    w = (np.ones_like(x), zero.copy())

    f, g, fp, gp = t, v, u, w
    for k in range(1, _SERIES_TERMS + 1):
        t = _dd_div_int(*_dd_mul(*t, *x3), (3 * k - 1) * (3 * k))
        v = _dd_div_int(*_dd_mul(*v, *x3), (3 * k) * (3 * k + 1))
        u = _dd_div_int(*_dd_mul(*u, *x3), (3 * k) * (3 * k + 2))
        w = _dd_div_int(*_dd_mul(*w, *x3), (3 * k - 2) * (3 * k))
        f = _dd_add(*f, *t)
        g = _dd_add(*g, *v)
        fp = _dd_add(*fp, *u)
        gp = _dd_add(*gp, *w)

    c1f = _dd_mul(np.full_like(x, _C1[0]), np.full_like(x, _C1[1]), *f)
    c2g = _dd_mul(np.full_like(x, _C2[0]), np.full_like(x, _C2[1]), *g)
    c1fp = _dd_mul(np.full_like(x, _C1[0]), np.full_like(x, _C1[1]), *fp)
    c2gp = _dd_mul(np.full_like(x, _C2[0]), np.full_like(x, _C2[1]), *gp)

    ai = _dd_add(*c1f, -c2g[0], -c2g[1])
    aip = _dd_add(*c1fp, -c2gp[0], -c2gp[1])
    bi = _dd_mul(np.full_like(x, _SQRT3[0]), np.full_like(x, _SQRT3[1]),
                 *_dd_add(*c1f, *c2g))
    bip = _dd_mul(np.full_like(x, _SQRT3[0]), np.full_like(x, _SQRT3[1]),
                  *_dd_add(*c1fp, *c2gp))
    return ai[0] + ai[1], bi[0] + bi[1], aip[0] + aip[1], bip[0] + bip[1]


def _asym_coefficients(nmax=25):
    u = [1.0]
    v = [1.0]
    for k in range(1, nmax + 1):
        uk = u[-1] * (6 * k - 1) * (6 * k - 3) * (6 * k - 5) / (216.0 * k * (2 * k - 1))
        u.append(uk)
        v.append(uk * (6 * k + 1) / (1.0 - 6 * k))
    return np.array(u), np.array(v)


_U_ASYM, _V_ASYM = _asym_coefficients()


def _asym_sum(coeffs, zinv, alternating):
    """Sum coeffs[k] * zinv^(2k) column-wise, truncating at the smallest term.

    zinv is an array; the divergent tail is cut independently per point.
    """
    zinv = np.asarray(zinv, dtype=float)
    total = np.zeros_like(zinv)
    term = np.ones_like(zinv)
    prev = np.full_like(zinv, np.inf)
    alive = np.ones(zinv.shape, dtype=bool)
    for k, c in enumerate(coeffs):
        t = c * term
        grew = np.abs(t) > prev
        alive &= ~grew
        contrib = np.where(alive, t, 0.0)
        total += -contrib if (alternating and k % 2) else contrib
        prev = np.where(alive, np.abs(t), prev)
        term = term * zinv
    return total


def _airy_asym_pos(x):
    """x >= 9.  Bi overflows past x ~ 104; numpy yields inf which we keep."""
    zeta = 2.0 / 3.0 * x**1.5
    zi = 1.0 / zeta
    x4 = x**0.25
    sp = math.sqrt(math.pi)
    sa = _asym_sum(_U_ASYM * (-1.0) ** np.arange(len(_U_ASYM)), zi, False)
    sb = _asym_sum(_U_ASYM, zi, False)
    sap = _asym_sum(_V_ASYM * (-1.0) ** np.arange(len(_V_ASYM)), zi, False)
    sbp = _asym_sum(_V_ASYM, zi, False)
    with np.errstate(over="ignore"):
        ai = np.exp(-zeta) / (2.0 * sp * x4) * sa
        bi = np.exp(zeta) / (sp * x4) * sb
        aip = -x4 * np.exp(-zeta) / (2.0 * sp) * sap
        bip = x4 * np.exp(zeta) / sp * sbp
    return ai, bi, aip, bip


def _airy_asym_neg(x):
    """x <= -9, oscillatory region; t = -x."""
    t = -x
    zeta = 2.0 / 3.0 * t**1.5
    zi2 = 1.0 / (zeta * zeta)
    t4 = t**0.25
    sp = math.sqrt(math.pi)
    c = np.cos(zeta - 0.25 * math.pi)
    s = np.sin(zeta - 0.25 * math.pi)
    pu = _asym_sum(_U_ASYM[0::2], zi2, True)
    qu = _asym_sum(_U_ASYM[1::2], zi2, True) / zeta
    pv = _asym_sum(_V_ASYM[0::2], zi2, True)
    qv = _asym_sum(_V_ASYM[1::2], zi2, True) / zeta
    ai = (c * pu + s * qu) / (sp * t4)
    bi = (-s * pu + c * qu) / (sp * t4)
    aip = t4 / sp * (s * pv - c * qv)
    bip = t4 / sp * (c * pv + s * qv)
    return ai, bi, aip, bip


def airy_many(x):
    """Evaluate Ai, Bi, Ai', Bi' on an array of points.

    Grid-evaluation building block behind :func:`airy`; not part of the
    public batch API surface.  Returns four float64 arrays.

    Accuracy: relative error below 1e-12 for |x| <= 30.  For larger |x| the
    oscillatory values are phase-limited (absolute error ~ |zeta|*eps with
    zeta = 2|x|^1.5/3) and Bi overflows to inf past x ~ 104.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise DomainError("airy: input must be finite")
    if np.any(np.abs(x) > 1e4):
        raise DomainError("airy: |x| <= 1e4 required")

    ai = np.empty_like(x)
    bi = np.empty_like(x)
    aip = np.empty_like(x)
    bip = np.empty_like(x)

    mid = np.abs(x) <= _SERIES_EDGE
    pos = x > _SERIES_EDGE
    neg = x < -_SERIES_EDGE
    if np.any(mid):
        ai[mid], bi[mid], aip[mid], bip[mid] = _airy_series(x[mid])
    if np.any(pos):
        ai[pos], bi[pos], aip[pos], bip[pos] = _airy_asym_pos(x[pos])
    if np.any(neg):
        ai[neg], bi[neg], aip[neg], bip[neg] = _airy_asym_neg(x[neg])
    return ai, bi, aip, bip


def airy(x: float) -> AiryValues:
    """Airy functions Ai(x), Bi(x) and derivatives at a real point.

    Raises DomainError for non-finite input or |x| > 1e4.
    """
    a, b, ap, bp = airy_many(np.array([float(x)]))
    return AiryValues(float(a[0]), float(b[0]), float(ap[0]), float(bp[0]))


# ---------------------------------------------------------------------------
# Hermite polynomials

_HERMITE_MAX = 64


def hermite(n: int, x: float):
    """Physicists' Hermite polynomial H_n(x) by the three-term recurrence.

    Supports scalars and arrays; n <= 64 (no scaling machinery, so higher
    orders would overflow for moderate x).
    """
    if n < 0 or n != int(n):
        raise DomainError("hermite: n must be a non-negative integer")
    if n > _HERMITE_MAX:
        raise UnsupportedOrderError(f"hermite: n = {n} exceeds the supported cap {_HERMITE_MAX}")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if x.ndim else float(h_prev)
    h = 2.0 * x
    for k in range(1, n):
        h, h_prev = 2.0 * x * h - 2.0 * k * h_prev, h
    return h if x.ndim else float(h)


# ---------------------------------------------------------------------------
# adaptive quadrature

_GL_LO_N = 7
_GL_HI_N = 15
_gl_lo = np.polynomial.legendre.leggauss(_GL_LO_N)
_gl_hi = np.polynomial.legendre.leggauss(_GL_HI_N)


def _panel(f, a, b):
    """Return (high-order estimate, error estimate) on [a, b]."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    xs = np.concatenate([mid + half * _gl_hi[0], mid + half * _gl_lo[0]])
    ys = np.asarray(f(xs), dtype=float)
    if not np.all(np.isfinite(ys)):
        raise DomainError("integrate: integrand returned a non-finite value")
    hi = half * np.dot(_gl_hi[1], ys[:_GL_HI_N])
    lo = half * np.dot(_gl_lo[1], ys[_GL_HI_N:])
    return hi, abs(hi - lo)


def integrate(f, a, b, tol: float = 1e-10, *, max_panels: int = 4096,
              sqrt_singularity_at_a: bool = False):
    """Adaptive quadrature of ``f`` over (a, b) with an error estimate.

    Parameters
    ----------
    f : callable
        Must accept an ndarray of abscissae and return the integrand values.
    a, b : float
        Endpoints; either may be infinite.  Semi-infinite ranges are mapped
        to (0, 1) via x = a + t/(1-t); a doubly infinite range is split at 0.
    tol : float
        Target: |err_est| <= tol * max(1, |value|).
    sqrt_singularity_at_a : bool
        Remove an integrable z**(-1/2) endpoint singularity at the (finite)
        lower endpoint through the substitution z = a + u**2.

    Returns
    -------
    (value, err_est)

    Raises
    ------
    AccuracyError
        If the subdivision budget is exhausted before the target is met;
        the best estimate is attached to the exception.
    """
    if tol <= 0:
        raise DomainError("integrate: tol must be positive")
    if a == b:
        return 0.0, 0.0
    if a > b:
        val, err = integrate(f, b, a, tol, max_panels=max_panels,
                             sqrt_singularity_at_a=sqrt_singularity_at_a)
        return -val, err

    if sqrt_singularity_at_a:
        if not math.isfinite(a):
            raise DomainError("integrate: sqrt singularity removal needs a finite lower endpoint")
        g = lambda u: 2.0 * u * f(a + u * u)
        ub = math.sqrt(b - a) if math.isfinite(b) else math.inf
        return integrate(g, 0.0, ub, tol, max_panels=max_panels)

    if math.isinf(a) and math.isinf(b):
        v1, e1 = integrate(f, a, 0.0, 0.5 * tol, max_panels=max_panels)
        v2, e2 = integrate(f, 0.0, b, 0.5 * tol, max_panels=max_panels)
        return v1 + v2, e1 + e2
    if math.isinf(b):
        g = lambda t: f(a + t / (1.0 - t)) / (1.0 - t) ** 2
        return _adaptive(g, 0.0, 1.0, tol, max_panels)
    if math.isinf(a):
        g = lambda t: f(b - t / (1.0 - t)) / (1.0 - t) ** 2
        return _adaptive(g, 0.0, 1.0, tol, max_panels)
    return _adaptive(f, a, b, tol, max_panels)


def _adaptive(f, a, b, tol, max_panels):
    import heapq

    val, err = _panel(f, a, b)
    heap = [(-err, a, b, val, err)]
    total_val, total_err = val, err
    n_panels = 1
    while total_err > tol * max(1.0, abs(total_val)) and heap:
        if n_panels >= max_panels:
            raise AccuracyError(
                f"integrate: no convergence within {max_panels} panels "
                f"(value ~ {total_val:.6g}, err ~ {total_err:.3g})",
                value=total_val, err_est=total_err)
        _, pa, pb, pval, perr = heapq.heappop(heap)
        mid = 0.5 * (pa + pb)
        lval, lerr = _panel(f, pa, mid)
        rval, rerr = _panel(f, mid, pb)
        total_val += lval + rval - pval
        total_err += lerr + rerr - perr
        heapq.heappush(heap, (-lerr, pa, mid, lval, lerr))
        heapq.heappush(heap, (-rerr, mid, pb, rval, rerr))
        n_panels += 1
    return total_val, total_err


# ---------------------------------------------------------------------------
# random number streams

@dataclass
class RandomStream:
    """Counter-based Philox stream keyed by (seed, stream_id).

    Identical keys replay identical deviate sequences on any platform;
    distinct stream ids give statistically independent sequences.  The
    stream is single-owner mutable state: hand it to one worker at a time.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        key = np.array([self.seed % (1 << 64), self.stream_id % (1 << 64)],
                       dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, stream_id: int) -> "RandomStream":
        """Fresh independent stream under the same seed."""
        return RandomStream(self.seed, stream_id)


def normal_deviates(stream: RandomStream, n: int) -> np.ndarray:
    """n standard normal deviates from the stream.

    Box-Muller with a fixed two-uniforms-per-deviate consumption, so a batch
    of n equals n successive scalar draws and parallel replay is exact (the
    ziggurat's data-dependent rejection loop would break that contract).
    """
    u = stream._gen.random(2 * n)
    r = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))
    return r * np.cos(2.0 * math.pi * u[1::2])


def normal_deviate(stream: RandomStream) -> float:
    """One standard normal deviate; advances the stream state."""
    return float(normal_deviates(stream, 1)[0])
