"""Fixed-point solvers for the mean-field equilibrium.

Three scalar root problems, all solved by bracketing bisection:

* ``theta*(lam)``: the mean fixed point ``G_lam(theta) = theta`` at a frozen multiplier;
* ``lam(theta)``: the multiplier that makes the reflected policy's mean equal
  ``theta`` (constrained problem, value ``V(theta)``);
* ``theta*``: the fixed point of ``theta -> G(theta, psi*(theta_bar - theta))``,
  which with ``lam* = psi*(theta_bar - theta*)`` is a potential-game equilibrium
  and hence an optimum of the mean-field control problem.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoBracket, NonConvergence
from .free_boundary import DEFAULT_TOL, Boundaries, ergodic_value, solve_boundaries
from .stationary import consistency_residuals, stationary_mean

log = logging.getLogger(__name__)

BISECT_BUDGET = 200
MAX_DOUBLINGS = 60
SCAN_POINTS = 41


@dataclass(frozen=True)
class ConstrainedSolution:
    theta: float
    lambda_of_theta: float
    boundaries: Boundaries
    value_v: float
    v_prime: float
    iterations: int = 0


@dataclass(frozen=True)
class Equilibrium:
    theta_star: float
    lambda_star: float
    boundaries: Boundaries
    kappa_star: float
    r_theta: float
    r_lambda: float
    v_prime: float
    iterations: int = 0
    bracket: tuple = (math.nan, math.nan)
    extra_sign_changes: tuple = field(default_factory=tuple)

    @property
    def a_plus(self):
        return self.boundaries.a_plus

    @property
    def a_minus(self):
        return self.boundaries.a_minus

    def report(self):
        return {
            "theta_star": self.theta_star,
            "lambda_star": self.lambda_star,
            "a_plus": self.a_plus,
            "a_minus": self.a_minus,
            "kappa_star": self.kappa_star,
            "r_theta": self.r_theta,
            "r_lambda": self.r_lambda,
            "v_prime": self.v_prime,
            "smooth_fit_residual": self.boundaries.residual,
            "iterations": self.iterations,
            "bracket": list(self.bracket),
            "extra_sign_changes": [list(iv) for iv in self.extra_sign_changes],
        }


class _MeanMap:
    """theta-or-lambda -> (stationary mean - target), warm-starting each boundary solve."""

    def __init__(self, p, tol, to_theta_lam, target):
        self.p = p
        self.tol = min(tol, DEFAULT_TOL)
        self.to_theta_lam = to_theta_lam
        self.target = target
        self.last = None
        self.evals = 0

    def boundaries(self, s):
        theta, lam = self.to_theta_lam(s)
        guess = None if self.last is None else (self.last.a_plus, self.last.a_minus)
        b = solve_boundaries(theta, lam, self.p, tol=self.tol, guess=guess)
        self.last = b
        self.evals += 1
        return b

    def __call__(self, s):
        b = self.boundaries(s)
        return stationary_mean(b, self.p) - self.target(s)


def _expand(f, lo, hi, increasing):
    """Widen [lo, hi] until f changes sign across it; f must be monotone-ish."""
    flo, fhi = f(lo), f(hi)
    width = max(hi - lo, 1e-3)
    for _ in range(MAX_DOUBLINGS):
        lo_ok = flo <= 0 if increasing else flo >= 0
        hi_ok = fhi >= 0 if increasing else fhi <= 0
        if lo_ok and hi_ok:
            return lo, hi, flo, fhi
        if not lo_ok:
            lo -= width
            flo = f(lo)
        if not hi_ok:
            hi += width
            fhi = f(hi)
        width *= 2.0
    raise NoBracket(f"no sign change found after {MAX_DOUBLINGS} doublings (last bracket [{lo:g}, {hi:g}])")


def _bisect(f, lo, hi, flo, fhi, tol):
    if flo == 0.0:
        return lo, flo, 0
    if fhi == 0.0:
        return hi, fhi, 0
    if (flo > 0) == (fhi > 0):
        raise NoBracket(f"[{lo:g}, {hi:g}] does not bracket a root")
    fmid = math.nan
    mid = 0.5 * (lo + hi)
    for it in range(1, BISECT_BUDGET + 1):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0 or abs(fmid) < 0.01 * tol:
            return mid, fmid, it
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
        if hi - lo <= 4.0 * math.ulp(max(abs(lo), abs(hi), 1e-300)):
            break
    # interval exhausted at machine precision: accept the better endpoint
    best, fbest = (lo, flo) if abs(flo) <= abs(fhi) else (hi, fhi)
    if abs(fbest) < tol:
        return best, fbest, it
    raise NonConvergence("bisection did not reach tolerance", abs(fbest), it)


def solve_theta_given_lambda(lam, p, tol=DEFAULT_TOL):
    """Mean fixed point at a frozen multiplier; returns ``(theta, Boundaries)``."""
    g = _MeanMap(p, tol, lambda th: (th, lam), lambda th: th)
    b0 = g.boundaries(0.0)
    shrink = 1.0 - 2.0 * p.m
    lo = min(b0.a_plus / shrink, 0.0)
    hi = max(b0.a_minus / shrink, 0.0)
    lo, hi, flo, fhi = _expand(g, lo, hi, increasing=False)
    theta, _, _ = _bisect(g, lo, hi, flo, fhi, tol)
    b = solve_boundaries(theta, lam, p, tol=g.tol, guess=(g.last.a_plus, g.last.a_minus))
    return theta, b


def _constrained_value(theta, lam, b, p):
    mean = stationary_mean(b, p)
    v_prime = p.phi * (theta - mean) + p.psi * (theta - p.theta_bar) + lam
    return ergodic_value(b, theta, lam, p), v_prime


def solve_lambda_given_theta(theta, p, tol=DEFAULT_TOL, bracket=None):
    """Unique multiplier ``lam(theta)`` whose reflected policy has mean ``theta``.

    ``bracket`` optionally gives the starting interval; it is widened until the
    strictly increasing map ``lam -> G_lam(theta)`` crosses ``theta``.
    """
    f = _MeanMap(p, tol, lambda la: (theta, la), lambda la: theta)
    if bracket is None:
        # multiplier that centres the target points on theta
        lam0 = p.rho * (theta - p.x_bar) - 0.5 * (p.k_minus - p.k_plus) * p.delta
        w = (p.k_plus + p.k_minus) * p.delta
        bracket = (lam0 - w, lam0 + w)
    lo, hi, flo, fhi = _expand(f, bracket[0], bracket[1], increasing=True)
    lam, _, iters = _bisect(f, lo, hi, flo, fhi, tol)
    b = solve_boundaries(theta, lam, p, tol=f.tol, guess=(f.last.a_plus, f.last.a_minus))
    value, v_prime = _constrained_value(theta, lam, b, p)
    return ConstrainedSolution(theta, lam, b, value, v_prime, iters)


def value_derivative(sol, p):
    """V'(theta) = E[l_theta(X, theta)] + lam(theta) under the constrained policy."""
    mean = stationary_mean(sol.boundaries, p)
    return p.phi * (sol.theta - mean) + p.psi * (sol.theta - p.theta_bar) + sol.lambda_of_theta


def multiplier_of_mean(theta, p):
    return p.psi * (p.theta_bar - theta)


def solve_potential_mfg(p, tol=DEFAULT_TOL, scan=True):
    """Equilibrium ``(theta*, lam*)`` of the potential stationary game.

    The search bracket is ``[a_plus(0)/(1-2m+c psi) ^ 0, a_minus(0)/(1-2m+c psi) v 0]``
    at ``lam = psi*theta_bar``, widened on demand.  With ``scan=True`` the map
    is also sampled on a coarse grid and any further sign changes are
    reported in ``extra_sign_changes`` (not treated as errors).
    """
    h = _MeanMap(p, tol, lambda th: (th, multiplier_of_mean(th, p)), lambda th: th)
    b0 = h.boundaries(0.0)
    shrink = 1.0 - 2.0 * p.m + p.c * p.psi
    lo = min(b0.a_plus / shrink, 0.0)
    hi = max(b0.a_minus / shrink, 0.0)
    lo, hi, flo, fhi = _expand(h, lo, hi, increasing=False)
    bracket = (lo, hi)
    theta_star, _, iters = _bisect(h, lo, hi, flo, fhi, tol)
    lambda_star = multiplier_of_mean(theta_star, p)
    b = solve_boundaries(theta_star, lambda_star, p, tol=h.tol, guess=(h.last.a_plus, h.last.a_minus))
    kappa = ergodic_value(b, theta_star, lambda_star, p)
    r_theta, r_lambda = consistency_residuals(theta_star, lambda_star, b, p)
    constrained = solve_lambda_given_theta(theta_star, p, tol=tol, bracket=(lambda_star - 0.5, lambda_star + 0.5))
    extra = _scan_sign_changes(p, h.tol, bracket, theta_star) if scan else ()
    if extra:
        log.warning("additional sign changes of the equilibrium map in %s", extra)
    return Equilibrium(
        theta_star=theta_star,
        lambda_star=lambda_star,
        boundaries=b,
        kappa_star=kappa,
        r_theta=r_theta,
        r_lambda=r_lambda,
        v_prime=constrained.v_prime,
        iterations=iters,
        bracket=bracket,
        extra_sign_changes=extra,
    )


def _scan_sign_changes(p, tol, bracket, theta_star):
    h = _MeanMap(p, tol, lambda th: (th, multiplier_of_mean(th, p)), lambda th: th)
    grid = np.linspace(bracket[0], bracket[1], SCAN_POINTS)
    vals = [h(th) for th in grid]
    # theta_star may sit a few ulps past a grid node
    slack = 10.0 * tol * max(1.0, abs(theta_star))
    out = []
    for left, right, fl, fr in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if (fl > 0) != (fr > 0) and not left - slack <= theta_star <= right + slack:
            out.append((float(left), float(right)))
    return tuple(out)
