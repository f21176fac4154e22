"""Invariant law of the OU process reflected at a_plus and a_minus.

The law is the speed density ``(2/sigma^2) exp(-delta x^2/sigma^2)`` truncated to
``[a_plus, a_minus]`` and normalised.  Every integral below is closed form
(erfc/erfcx and the Gaussian antiderivative).  When the interval sits in one
Gaussian tail, the common factor ``exp(-beta s^2)`` (``s`` the endpoint nearest
zero) is carried separately so ratios neither underflow nor cancel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import erf, erfcx

_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class StationaryStats:
    norm: float
    mean: float
    a_plus: float
    a_minus: float


def _beta(p):
    return p.delta / p.sigma**2


def _gauss_moments(a, b, beta):
    """Scaled ``int_a^b exp(-beta x^2) dx`` and ``int_a^b x exp(-beta x^2) dx``.

    Returns ``(i0, i1, expo)``; the true integrals are ``i0*exp(expo)`` and
    ``i1*exp(expo)``.
    """
    r = math.sqrt(beta)
    if a >= 0.0:
        shift = math.exp(-beta * (b - a) * (b + a))
        i0 = 0.5 * _SQRT_PI / r * (erfcx(r * a) - shift * erfcx(r * b))
        i1 = -math.expm1(-beta * (b - a) * (b + a)) / (2.0 * beta)
        return i0, i1, -beta * a * a
    if b <= 0.0:
        i0, i1, expo = _gauss_moments(-b, -a, beta)
        return i0, -i1, expo
    i0 = 0.5 * _SQRT_PI / r * (erf(r * b) + erf(-r * a))
    if -a <= b:
        i1 = -math.exp(-beta * a * a) * math.expm1(-beta * (b - a) * (b + a)) / (2.0 * beta)
    else:
        i1 = math.exp(-beta * b * b) * math.expm1(-beta * (a - b) * (a + b)) / (2.0 * beta)
    return i0, i1, 0.0


def speed_density(x, p):
    """Speed-measure density of the uncontrolled OU process."""
    return 2.0 / p.sigma**2 * np.exp(-_beta(p) * np.square(x))


def interval_mean(a, b, p):
    """Mean of the speed density restricted to ``[a, b]``."""
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    i0, i1, _ = _gauss_moments(a, b, _beta(p))
    return min(max(i1 / i0, a), b)


def stationary_mean(b, p):
    return interval_mean(b.a_plus, b.a_minus, p)


def stationary_stats(b, p):
    i0, i1, expo = _gauss_moments(b.a_plus, b.a_minus, _beta(p))
    return StationaryStats(
        norm=2.0 / p.sigma**2 * i0 * math.exp(expo),
        mean=min(max(i1 / i0, b.a_plus), b.a_minus),
        a_plus=b.a_plus,
        a_minus=b.a_minus,
    )


def _pdf_cdf_scalar(x, a, b, beta):
    if x < a:
        return 0.0, 0.0
    i0, _, expo = _gauss_moments(a, b, beta)
    if x > b:
        return 0.0, 1.0
    pdf = math.exp(-beta * x * x - expo) / i0
    if x == a:
        return pdf, 0.0
    if x == b:
        return pdf, 1.0
    j0, _, jexpo = _gauss_moments(a, x, beta)
    return pdf, min(1.0, j0 / i0 * math.exp(jexpo - expo))


def stationary_pdf_cdf(x, b, p):
    """Density and distribution function of the reflected process's invariant law."""
    beta = _beta(p)
    if np.ndim(x) == 0:
        return _pdf_cdf_scalar(float(x), b.a_plus, b.a_minus, beta)
    pairs = [_pdf_cdf_scalar(float(xi), b.a_plus, b.a_minus, beta) for xi in np.ravel(x)]
    arr = np.array(pairs).reshape(np.shape(x) + (2,))
    return arr[..., 0], arr[..., 1]


def consistency_residuals(theta, lam, b, p):
    """Residuals of the two equilibrium consistency conditions.

    ``r_theta = mean - theta`` and ``r_lambda = -E[l_theta(X, theta)] - lam``
    under the invariant law of ``b``.
    """
    mean = stationary_mean(b, p)
    r_theta = mean - theta
    r_lambda = -(p.phi * (theta - mean) + p.psi * (theta - p.theta_bar)) - lam
    return r_theta, r_lambda
