"""Complementary error function and the OU fundamental/particular solutions.

The homogeneous equation ``-delta u - delta x u' + sigma**2/2 u'' = 0`` has the
positive solutions

    phi_f(x) = erfcx( k x),    psi_f(x) = erfcx(-k x),    k = sqrt(delta)/|sigma|,

where ``erfcx(z) = exp(z**2) erfc(z)``.  Written with ``alpha = 2 delta/sigma**2``
this is ``exp(alpha x**2/2) erfc(sqrt(alpha/2) x)``.  ``phi_f`` is decreasing,
``psi_f`` increasing, and ``phi_f(-x) == psi_f(x)``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

from .errors import RangeError

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)
# largest z**2 for which exp(z**2) is finite
_MAX_EXP = 709.0
_SERIES_CUTOFF = 1.5


def _erf_series_scaled(z):
    """sum_n (2z^2)^n / (1*3*...*(2n+1)) for z >= 0; all terms positive."""
    t = 2.0 * z * z
    term = 1.0
    total = 1.0
    n = 0
    while term > 1e-17 * total:
        n += 1
        term *= t / (2 * n + 1)
        total += term
    return total


def _erfcx_cf(z):
    # even contraction of the Laplace continued fraction, evaluated backwards
    if z < 2.0:
        nterms = 40
    elif z < 2.5:
        nterms = 30
    elif z < 4.0:
        nterms = 20
    else:
        nterms = 12
    z2 = z * z
    t = 0.0
    for n in range(nterms, 0, -1):
        t = (n * (2 * n - 1) / 2.0) / (z2 + 0.5 + 2 * n - t)
    return z * _INV_SQRT_PI / (z2 + 0.5 - t)


def erfcx(z):
    """Scaled complementary error function ``exp(z**2) * erfc(z)``.

    Raises RangeError for ``z < -sqrt(709)`` where the result overflows.
    """
    z = float(z)
    if z < 0.0:
        if z * z > _MAX_EXP:
            raise RangeError(f"erfcx({z}) overflows")
        return 2.0 * math.exp(z * z) - erfcx(-z)
    if z < _SERIES_CUTOFF:
        return math.exp(z * z) - _TWO_OVER_SQRT_PI * z * _erf_series_scaled(z)
    return _erfcx_cf(z)


def erfc(z):
    """Complementary error function, ``2/sqrt(pi) * int_z^inf exp(-t^2) dt``."""
    z = float(z)
    if math.isnan(z):
        return z
    if z < 0.0:
        return 2.0 - erfc(-z)
    if z < _SERIES_CUTOFF:
        return 1.0 - _TWO_OVER_SQRT_PI * z * math.exp(-z * z) * _erf_series_scaled(z)
    if z > 27.3:
        return 0.0
    return math.exp(-z * z) * _erfcx_cf(z)


def erf(z):
    z = float(z)
    if z < 0.0:
        return -erf(-z)
    if z < _SERIES_CUTOFF:
        return _TWO_OVER_SQRT_PI * z * math.exp(-z * z) * _erf_series_scaled(z)
    return 1.0 - erfc(z)


class OdeBasis(NamedTuple):
    phi_f: float
    psi_f: float
    dphi_f: float
    dpsi_f: float


def fundamental_pair(x, alpha):
    """Values and x-derivatives of the two fundamental solutions at ``x``.

    ``alpha = 2 delta / sigma**2``.  Uses ``erfcx'(z) = 2 z erfcx(z) - 2/sqrt(pi)``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    k = math.sqrt(0.5 * alpha)
    z = k * x
    if z * z > _MAX_EXP:
        raise RangeError(f"fundamental solutions overflow at x={x} (alpha={alpha})")
    f = erfcx(z)
    g = erfcx(-z)
    df = k * (2.0 * z * f - _TWO_OVER_SQRT_PI)
    dg = k * (2.0 * z * g + _TWO_OVER_SQRT_PI)
    return OdeBasis(f, g, df, dg)


class ScaledBasis(NamedTuple):
    """Fundamental solutions as ``mantissa * exp(log_scale)``.

    Derivatives share the scale of their function, so ratios such as
    ``dphi / phi`` need no exponentials at all.
    """

    phi: float
    psi: float
    dphi: float
    dpsi: float
    log_phi: float
    log_psi: float


def scaled_pair(x, alpha):
    """Overflow-free version of :func:`fundamental_pair`, valid for any finite ``x``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    k = math.sqrt(0.5 * alpha)
    z = k * x
    tail = _TWO_OVER_SQRT_PI * math.exp(-z * z)
    if z >= 0.0:
        f = erfcx(z)
        g = 1.0 + erf(z)
        return ScaledBasis(f, g, k * (2.0 * z * f - _TWO_OVER_SQRT_PI), k * (2.0 * z * g + tail), 0.0, z * z)
    f = erfc(z)
    g = erfcx(-z)
    return ScaledBasis(f, g, k * (2.0 * z * f - tail), k * (2.0 * z * g + _TWO_OVER_SQRT_PI), z * z, 0.0)


def basis_ratios(x, anchor_phi, anchor_psi):
    """``phi_f(x)/phi_f(a)`` and ``psi_f(x)/psi_f(b)`` from ScaledBasis values.

    Exponents are capped so far-field ratios saturate instead of overflowing.
    """
    rf = x.phi / anchor_phi.phi * math.exp(min(x.log_phi - anchor_phi.log_phi, _MAX_EXP))
    rg = x.psi / anchor_psi.psi * math.exp(min(x.log_psi - anchor_psi.log_psi, _MAX_EXP))
    return rf, rg


def particular_solution(x, theta, lam, p):
    """Affine solution of ``-delta U + L U + l_x(x, theta) - lam = 0``.

    Returns ``(u_bar, du_bar)``.
    """
    s = p.rho + p.phi
    slope = s / (2.0 * p.delta)
    return slope * x - (p.rho * p.x_bar + p.phi * theta + lam) / p.delta, slope
