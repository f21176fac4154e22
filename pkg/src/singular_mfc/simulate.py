"""Monte Carlo checks of the closed-form quantities.

Two engines share one RNG layout.  Path ``i`` draws its normals from a Philox
stream keyed by ``SeedSequence(seed, spawn_key=(i,))`` in fixed-size chunks,
so a path's trajectory depends only on ``(seed, i)``.  Per-path statistics are
reduced in path-index order, which makes the output independent of how paths
are split across worker processes.

* ``simulate_reflected``: Euler scheme for the OU process kept in
  ``[a_plus, a_minus]`` by projection; the clamp overshoot is the local-time
  increment.
* ``simulate_dynkin``: the unreflected process stopped at the first grid time
  outside ``(a_plus, a_minus)``, with the discounted game payoff.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError
from .model import cost_lx
from .stationary import stationary_mean

CHUNK = 4096


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    horizon: float = 200.0
    burn_in: float = 20.0
    n_paths: int = 64
    seed: int = 0
    n_bins: int = 50

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ParameterError("dt > 0")
        if not (0 <= self.burn_in < self.horizon) or not math.isfinite(self.horizon):
            raise ParameterError("0 <= burn_in < horizon")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ParameterError("n_paths >= 1")
        if int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise ParameterError("n_bins >= 1")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ParameterError("seed is a 64-bit unsigned integer")
        object.__setattr__(self, "n_paths", int(self.n_paths))
        object.__setattr__(self, "n_bins", int(self.n_bins))
        object.__setattr__(self, "seed", int(self.seed))

    def check(self, p):
        """Model-dependent guard on the explicit scheme."""
        if not self.dt * p.delta < 0.5:
            raise ParameterError("dt * delta < 0.5", f"dt * delta = {self.dt * p.delta:g} must be below 0.5")

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class SimStats:
    cost_mfc: float
    cost_potential: float
    mean: float
    rate_plus: float
    rate_minus: float
    histogram: np.ndarray
    se_cost: float
    se_mean: float
    se_cost_mfc: float = math.nan
    se_rate_plus: float = math.nan
    se_rate_minus: float = math.nan
    # per-path long-run averages, kept for paired comparisons
    path_cost_mfc: np.ndarray = None
    path_cost_potential: np.ndarray = None
    path_mean: np.ndarray = None

    def report(self):
        return {
            "cost_mfc": self.cost_mfc,
            "cost_potential": self.cost_potential,
            "mean": self.mean,
            "rate_plus": self.rate_plus,
            "rate_minus": self.rate_minus,
            "se_cost": self.se_cost,
            "se_cost_mfc": self.se_cost_mfc,
            "se_mean": self.se_mean,
            "se_rate_plus": self.se_rate_plus,
            "se_rate_minus": self.se_rate_minus,
            "histogram": [float(h) for h in self.histogram],
        }


def path_stream(seed, index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _normals(gens, n, pairs):
    """(n, n_paths) standard normals; with ``pairs`` each is a scaled sum of two draws."""
    if pairs:
        z = np.stack([g.standard_normal(2 * n) for g in gens], axis=1)
        return (z[0::2] + z[1::2]) / math.sqrt(2.0)
    return np.stack([g.standard_normal(n) for g in gens], axis=1)


def _reflected_block(args):
    """Time averages for paths ``lo..hi-1``; returns per-path arrays and bin counts."""
    lo, hi, ap, am, x0, delta, sigma, dt, n_burn, n_meas, seed, n_bins, pairs = args
    gens = [path_stream(seed, i) for i in range(lo, hi)]
    width = hi - lo
    x = np.full(width, float(x0))
    decay = 1.0 - delta * dt
    vol = sigma * math.sqrt(dt)
    s1 = np.zeros(width)
    s2 = np.zeros(width)
    push_up = np.zeros(width)
    push_down = np.zeros(width)
    counts = np.zeros((width, n_bins), dtype=np.int64)
    edges = np.linspace(ap, am, n_bins + 1)
    done = 0
    total = n_burn + n_meas
    while done < total:
        n = min(CHUNK, total - done)
        noise = vol * _normals(gens, n, pairs)
        prop = np.empty((n, width))
        states = np.empty((n, width))
        for k in range(n):
            # left-point state enters the running cost; the proposal drives the push
            states[k] = x
            y = x * decay + noise[k]
            prop[k] = y
            x = np.clip(y, ap, am)
        first = max(0, n_burn - done)
        if first < n:
            st = np.ascontiguousarray(states[first:].T)
            pr = np.ascontiguousarray(prop[first:].T)
            s1 += st.sum(axis=1)
            s2 += (st * st).sum(axis=1)
            push_up += np.maximum(ap - pr, 0.0).sum(axis=1)
            push_down += np.maximum(pr - am, 0.0).sum(axis=1)
            idx = np.clip(np.searchsorted(edges, st, side="right") - 1, 0, n_bins - 1)
            for j in range(width):
                counts[j] += np.bincount(idx[j], minlength=n_bins)
        done += n
    return s1, s2, push_up, push_down, counts


def _blocks(n_paths, workers):
    workers = max(1, min(int(workers), n_paths))
    cuts = np.linspace(0, n_paths, workers + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) == 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _se(values):
    n = len(values)
    if n < 2:
        return math.inf
    return float(np.std(values, ddof=1) / math.sqrt(n))


def simulate_reflected(b, theta, lam, p, cfg, x0=None, workers=1, _pairs=False):
    """Long-run averages of the reflected policy ``b`` at the frozen ``(theta, lam)``.

    ``cost_potential`` averages ``l(x, theta) + lam*(theta - x)`` plus the
    proportional control costs.  ``cost_mfc`` uses the same paths with
    ``theta`` replaced by the closed-form stationary mean of ``b`` (the MFC
    criterion of the policy); the empirical mean is reported separately.
    """
    cfg.check(p)
    ap, am = float(b.a_plus), float(b.a_minus)
    x0 = 0.5 * (ap + am) if x0 is None else float(x0)
    if not ap <= x0 <= am:
        raise ParameterError("a_plus <= x0 <= a_minus")
    n_total = int(round(cfg.horizon / cfg.dt))
    n_burn = int(round(cfg.burn_in / cfg.dt))
    n_meas = n_total - n_burn
    jobs = [
        (lo, hi, ap, am, x0, p.delta, p.vol, cfg.dt, n_burn, n_meas, cfg.seed, cfg.n_bins, _pairs)
        for lo, hi in _blocks(cfg.n_paths, workers)
    ]
    parts = _map(_reflected_block, jobs, workers)
    s1, s2, up, down, counts = (np.concatenate([part[i] for part in parts]) for i in range(5))

    t_meas = n_meas * cfg.dt
    m1 = s1 / n_meas
    m2 = s2 / n_meas
    rate_up = up / t_meas
    rate_down = down / t_meas
    control = p.k_plus * rate_up + p.k_minus * rate_down

    def avg_cost(th):
        # l is quadratic in x, so its time average needs only the first two moments
        return (
            0.5 * p.rho * (m2 - 2.0 * p.x_bar * m1 + p.x_bar**2)
            + 0.5 * p.phi * (m2 - 2.0 * th * m1 + th**2)
            + 0.5 * p.psi * (th - p.theta_bar) ** 2
        )

    path_pot = avg_cost(theta) + lam * (theta - m1) + control
    path_mfc = avg_cost(stationary_mean(b, p)) + control
    hist = counts.sum(axis=0).astype(float)
    return SimStats(
        cost_mfc=float(path_mfc.mean()),
        cost_potential=float(path_pot.mean()),
        mean=float(m1.mean()),
        rate_plus=float(rate_up.mean()),
        rate_minus=float(rate_down.mean()),
        histogram=hist / hist.sum(),
        se_cost=_se(path_pot),
        se_mean=_se(m1),
        se_cost_mfc=_se(path_mfc),
        se_rate_plus=_se(rate_up),
        se_rate_minus=_se(rate_down),
        path_cost_mfc=path_mfc,
        path_cost_potential=path_pot,
        path_mean=m1,
    )


@dataclass(frozen=True)
class DtBias:
    """Discretisation-bias estimates from one dt-halving with common noise."""

    cost_potential: float
    cost_mfc: float
    mean: float
    coarse: SimStats
    fine: SimStats


# the projection scheme's error is O(sqrt(dt)); extrapolating that order from
# one halving gives bias(dt) = diff / (1 - 1/sqrt(2)).  At coarse dt the decay is
# slower than the asymptotic order, hence the safety factor of 2.
_HALVING_FACTOR = 2.0 / (1.0 - 1.0 / math.sqrt(2.0))


def calibrate_dt_bias(b, theta, lam, p, cfg, x0=None, workers=1):
    """Estimate the dt bias of ``simulate_reflected`` by halving dt once.

    The coarse run uses pairwise sums of the fine run's normals, so the two
    runs see the same Brownian path and their difference is mostly bias.
    """
    coarse = simulate_reflected(b, theta, lam, p, cfg, x0=x0, workers=workers, _pairs=True)
    fine = simulate_reflected(b, theta, lam, p, cfg.replace(dt=0.5 * cfg.dt), x0=x0, workers=workers)
    return DtBias(
        cost_potential=_HALVING_FACTOR * abs(coarse.cost_potential - fine.cost_potential),
        cost_mfc=_HALVING_FACTOR * abs(coarse.cost_mfc - fine.cost_mfc),
        mean=_HALVING_FACTOR * abs(coarse.mean - fine.mean),
        coarse=coarse,
        fine=fine,
    )


def _dynkin_block(args):
    lo, hi, ap, am, x0, delta, sigma, dt, n_max, seed, theta, lam, p, pairs = args
    gens = [path_stream(seed, i) for i in range(lo, hi)]
    width = hi - lo
    x = np.full(width, float(x0))
    alive = np.ones(width, dtype=bool)
    payoff = np.zeros(width)
    decay = 1.0 - delta * dt
    vol = sigma * math.sqrt(dt)
    done = 0
    while done < n_max and alive.any():
        n = min(CHUNK, n_max - done)
        noise = vol * _normals(gens, n, pairs)
        for k in range(n):
            disc = math.exp(-delta * (done + k) * dt)
            payoff += np.where(alive, disc * (cost_lx(x, theta, p) - lam) * dt, 0.0)
            x = np.where(alive, x * decay + noise[k], x)
            t_next = math.exp(-delta * (done + k + 1) * dt)
            up = alive & (x >= am)
            down = alive & (x <= ap)
            payoff += np.where(up, p.k_minus * t_next, 0.0) - np.where(down, p.k_plus * t_next, 0.0)
            alive &= ~(up | down)
            if not alive.any():
                break
        done += n
    return payoff


def _dynkin_payoffs(x0, b, theta, lam, p, cfg, workers, pairs):
    n_max = int(round(cfg.horizon / cfg.dt))
    jobs = [
        (lo, hi, b.a_plus, b.a_minus, x0, p.delta, p.vol, cfg.dt, n_max, cfg.seed, theta, lam, p, pairs)
        for lo, hi in _blocks(cfg.n_paths, workers)
    ]
    return np.concatenate(_map(_dynkin_block, jobs, workers))


def truncation_bound(b, theta, lam, p, horizon):
    """Bound on the payoff lost by stopping unexited paths at ``horizon``."""
    sup = max(abs(cost_lx(b.a_plus, theta, p) - lam), abs(cost_lx(b.a_minus, theta, p) - lam))
    return math.exp(-p.delta * horizon) * (p.k_plus + p.k_minus + sup / p.delta)


def simulate_dynkin(x0, b, theta, lam, p, cfg, workers=1, _pairs=False):
    """Monte Carlo value of the Dynkin game at ``x0`` under the threshold stopping rules.

    Returns ``(estimate, error)`` with ``error`` the standard error plus the
    horizon-truncation bound.  burn_in and n_bins are not used.
    """
    cfg.check(p)
    if not b.a_plus < x0 < b.a_minus:
        raise ParameterError("a_plus < x0 < a_minus")
    pay = _dynkin_payoffs(x0, b, theta, lam, p, cfg, workers, _pairs)
    return float(pay.mean()), _se(pay) + truncation_bound(b, theta, lam, p, cfg.horizon)


def dynkin_dt_bias(x0, b, theta, lam, p, cfg, workers=1):
    """dt-halving bias estimate for ``simulate_dynkin`` (common noise, sqrt(dt) order)."""
    coarse = _dynkin_payoffs(x0, b, theta, lam, p, cfg, workers, True)
    fine = _dynkin_payoffs(x0, b, theta, lam, p, cfg.replace(dt=0.5 * cfg.dt), workers, False)
    return _HALVING_FACTOR * abs(float(coarse.mean() - fine.mean()))
