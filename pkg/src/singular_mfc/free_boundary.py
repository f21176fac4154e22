"""Reflection boundaries a_plus < a_minus from the smooth-fit system.

On the inaction interval the Dynkin value is ``U = A phi_f + B psi_f + U_bar``.
For a trial pair ``(a_plus, a_minus)`` the coefficients come from the two
value-matching conditions ``U(a_plus) = -k_plus`` and ``U(a_minus) = k_minus``
(a linear 2x2 solve); the smooth-fit conditions ``U'(a_plus) = U'(a_minus) = 0``
are the residual driven to zero by damped Newton iteration.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentBoundaries, NonConvergence
from .model import cost_l, cost_lx, target_points
from .special import basis_ratios, particular_solution, scaled_pair

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
MAX_ITER = 100
_FD_STEP = 1e-7
_DEGENERATE_DET = 1e-14


@dataclass(frozen=True)
class Boundaries:
    a_plus: float
    a_minus: float
    # coefficients of phi_f/phi_f(a_plus) and psi_f/psi_f(a_minus)
    coeff_a: float
    coeff_b: float
    theta: float
    lam: float
    residual: float
    iterations: int = 0
    method: str = "newton"

    @property
    def width(self):
        return self.a_minus - self.a_plus

    @property
    def midpoint(self):
        return 0.5 * (self.a_plus + self.a_minus)


def _system(ap, am, theta, lam, p):
    """Scaled coefficients and smooth-fit residuals for a trial interval.

    The basis is rescaled as ``phi_f / phi_f(ap)`` and ``psi_f / psi_f(am)`` so
    both are bounded by one on ``[ap, am]`` and the 2x2 solve stays well
    conditioned.  The returned coefficients are in this scaled basis.
    """
    bp = scaled_pair(ap, p.alpha)
    bm = scaled_pair(am, p.alpha)
    ubp, dub = particular_solution(ap, theta, lam, p)
    ubm, _ = particular_solution(am, theta, lam, p)
    f_m, _ = basis_ratios(bm, bp, bm)
    _, g_p = basis_ratios(bp, bp, bm)
    det = 1.0 - g_p * f_m
    rhs_p = -p.k_plus - ubp
    rhs_m = p.k_minus - ubm
    a_s = (rhs_p - g_p * rhs_m) / det
    b_s = (rhs_m - f_m * rhs_p) / det
    r_p = a_s * bp.dphi / bp.phi + b_s * g_p * bp.dpsi / bp.psi + dub
    r_m = a_s * f_m * bm.dphi / bm.phi + b_s * bm.dpsi / bm.psi + dub
    return det, a_s, b_s, np.array([r_p, r_m])


def _residual(ap, am, theta, lam, p):
    det, a, b, r = _system(ap, am, theta, lam, p)
    # coincident boundaries are the only way the value-matching solve degenerates
    widen = 1e-6
    while abs(det) < _DEGENERATE_DET:
        ap, am = ap - widen, am + widen
        det, a, b, r = _system(ap, am, theta, lam, p)
        widen *= 2.0
    return a, b, r


def _newton(theta, lam, p, tol, max_iter, guess):
    xp, xm = target_points(theta, lam, p)
    gap = xm - xp
    x = np.array([xp - gap, xm + gap])
    _, _, r = _residual(x[0], x[1], theta, lam, p)
    norm = np.max(np.abs(r))
    if guess is not None:
        # a warm start is only taken when it beats the widened target points
        xg = np.array([min(guess[0], xp), max(guess[1], xm)], dtype=float)
        _, _, rg = _residual(xg[0], xg[1], theta, lam, p)
        if np.max(np.abs(rg)) < norm:
            x, r, norm = xg, rg, np.max(np.abs(rg))
    for it in range(1, max_iter + 1):
        if norm < tol:
            return x, it - 1, norm
        jac = np.empty((2, 2))
        for j in range(2):
            h = _FD_STEP * max(1.0, abs(x[j]))
            xh = x.copy()
            xh[j] += h
            _, _, rh = _residual(xh[0], xh[1], theta, lam, p)
            jac[:, j] = (rh - r) / h
        try:
            step = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            raise NonConvergence("singular smooth-fit Jacobian", norm, it) from None
        t = 1.0
        while True:
            trial = x - t * step
            # keep the separation a_plus <= x_plus < x_minus <= a_minus
            trial[0] = min(trial[0], xp)
            trial[1] = max(trial[1], xm)
            _, _, rt = _residual(trial[0], trial[1], theta, lam, p)
            nt = np.max(np.abs(rt))
            if not math.isfinite(nt):
                nt = math.inf
            if nt < (1.0 - 1e-4 * t) * norm or nt < tol:
                break
            t *= 0.5
            if t < 1e-6:
                raise NonConvergence("smooth-fit line search stalled", norm, it)
        x, r, norm = trial, rt, nt
    if norm < tol:
        return x, max_iter, norm
    raise NonConvergence("smooth-fit Newton iteration budget exhausted", norm, max_iter)


def _left_shot(ap, theta, lam, p, span):
    """March the solution pinned at ``ap`` (U=-k_plus, U'=0) to the right.

    Returns ``(overshoots, x_mark)``: whether U reaches k_minus before its
    first local maximum, and where it crosses k_minus (overshoot) or peaks.
    """
    b0 = scaled_pair(ap, p.alpha)
    ub0, dub = particular_solution(ap, theta, lam, p)
    # U = a r_phi + b r_psi + u_bar with ratios anchored at ap; U(ap) = -k_plus, U'(ap) = 0
    lf, lg = b0.dphi / b0.phi, b0.dpsi / b0.psi
    rhs_v, rhs_d = -p.k_plus - ub0, -dub
    a = (rhs_v * lg - rhs_d) / (lg - lf)
    b = rhs_v - a

    def u_and_du(x):
        bx = scaled_pair(x, p.alpha)
        rf, rg = basis_ratios(bx, b0, b0)
        ub, _ = particular_solution(x, theta, lam, p)
        return (a * rf + b * rg + ub,
                a * rf * bx.dphi / bx.phi + b * rg * bx.dpsi / bx.psi + dub)

    n = 400
    h = span / n
    x_prev = ap
    for i in range(1, 4 * n + 1):
        x = ap + i * h
        u, du = u_and_du(x)
        if u >= p.k_minus:
            lo, hi = x_prev, x
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if u_and_du(mid)[0] < p.k_minus:
                    lo = mid
                else:
                    hi = mid
            return True, 0.5 * (lo + hi)
        if du <= 0.0:
            lo, hi = x_prev, x
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if u_and_du(mid)[1] > 0.0:
                    lo = mid
                else:
                    hi = mid
            return u_and_du(0.5 * (lo + hi))[0] >= p.k_minus, 0.5 * (lo + hi)
        x_prev = x
    return True, None


def _bracketing(theta, lam, p):
    """Shooting bisection on a_plus; slow but robust Newton fallback."""
    xp, xm = target_points(theta, lam, p)
    gap = xm - xp
    span = 4.0 * gap + 4.0 * p.vol / math.sqrt(p.delta)
    hi = xp
    width = gap
    for _ in range(60):
        lo = xp - width
        if _left_shot(lo, theta, lam, p, span + width)[0]:
            break
        hi = lo
        width *= 2.0
    else:
        raise NonConvergence("could not bracket a_plus", math.nan, 60)
    # near the critical a_plus the overshooting shot touches k_minus close to a_minus
    hit = None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        over, mark = _left_shot(mid, theta, lam, p, span + (xp - lo))
        if over:
            lo = mid
            hit = mark if mark is not None else hit
        else:
            hi = mid
        if hi - lo < 1e-13 * max(1.0, abs(lo)):
            break
    if hit is None:
        raise NonConvergence("shooting bisection never reached k_minus", math.nan, 200)
    return np.array([lo, max(hit, xm)])


def solve_boundaries(theta, lam, p, tol=DEFAULT_TOL, max_iter=MAX_ITER, guess=None, method="newton"):
    """Solve the smooth-fit system for the reflection boundaries at ``(theta, lam)``.

    ``guess`` optionally warm-starts Newton from a nearby solution.  With
    ``method="bracketing"`` the shooting bisection is used to find a starting
    point before the Newton polish (this is also the automatic fallback).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    used = method
    x = None
    if method == "newton":
        try:
            x, iters, norm = _newton(theta, lam, p, tol, max_iter, guess)
        except NonConvergence as exc:
            log.debug("Newton failed at theta=%g lam=%g: %s; falling back to bracketing", theta, lam, exc)
    elif method != "bracketing":
        raise ValueError(f"unknown method {method!r}")
    if x is None:
        used = "bracketing"
        start = _bracketing(theta, lam, p)
        x, iters, norm = _newton(theta, lam, p, tol, max_iter, start)
    a, b, r = _residual(x[0], x[1], theta, lam, p)
    return Boundaries(
        a_plus=float(x[0]),
        a_minus=float(x[1]),
        coeff_a=float(a),
        coeff_b=float(b),
        theta=float(theta),
        lam=float(lam),
        residual=float(np.max(np.abs(r))),
        iterations=int(iters),
        method=used,
    )


def _dynkin_scalar(x, bd, p):
    if x <= bd.a_plus:
        return -p.k_plus
    if x >= bd.a_minus:
        return p.k_minus
    return _dynkin_inner(x, bd, p)[0]


def _dynkin_inner(x, bd, p):
    bx = scaled_pair(x, p.alpha)
    rf, _ = basis_ratios(bx, scaled_pair(bd.a_plus, p.alpha), bx)
    _, rg = basis_ratios(bx, bx, scaled_pair(bd.a_minus, p.alpha))
    ub, dub = particular_solution(x, bd.theta, bd.lam, p)
    u = bd.coeff_a * rf + bd.coeff_b * rg + ub
    du = bd.coeff_a * rf * bx.dphi / bx.phi + bd.coeff_b * rg * bx.dpsi / bx.psi + dub
    return u, du


def dynkin_value(x, b, p):
    """Dynkin game value U(x); clamped to -k_plus / k_minus outside the interval."""
    if np.ndim(x) == 0:
        return _dynkin_scalar(float(x), b, p)
    return np.array([_dynkin_scalar(float(xi), b, p) for xi in np.ravel(x)]).reshape(np.shape(x))


def dynkin_derivatives(x, b, p):
    """(U', U'') at a point; both vanish outside the inaction interval."""
    if x <= b.a_plus or x >= b.a_minus:
        return 0.0, 0.0
    u, du = _dynkin_inner(x, b, p)
    # the ODE itself gives U'' without differencing
    d2u = 2.0 * (p.delta * u + p.delta * x * du - cost_lx(x, b.theta, p) + b.lam) / p.sigma**2
    return du, d2u


def ergodic_value_pair(b, p, theta=None, lam=None):
    """The ergodic value read off at a_plus and at a_minus."""
    theta = b.theta if theta is None else theta
    lam = b.lam if lam is None else lam
    k_lo = p.k_plus * p.delta * b.a_plus + cost_l(b.a_plus, theta, p) + lam * (theta - b.a_plus)
    k_hi = -p.k_minus * p.delta * b.a_minus + cost_l(b.a_minus, theta, p) + lam * (theta - b.a_minus)
    return k_lo, k_hi


def ergodic_value(b, theta, lam, p, tol=DEFAULT_TOL):
    """Optimal long-run average cost kappa(theta, lam) of the reflected policy.

    Raises InconsistentBoundaries when the a_plus and a_minus expressions
    disagree by more than ``10*tol`` (relative to the problem scale).
    """
    k_lo, k_hi = ergodic_value_pair(b, p, theta, lam)
    scale = max(1.0, p.sigma**2, abs(k_lo))
    if abs(k_lo - k_hi) > 10.0 * tol * scale:
        raise InconsistentBoundaries(
            f"ergodic value mismatch: {k_lo!r} (a_plus) vs {k_hi!r} (a_minus)"
        )
    return k_lo
