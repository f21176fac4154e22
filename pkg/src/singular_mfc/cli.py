"""Command-line entry point: ``singular-mfc {solve,sweep,simulate,profile}``.

Configuration is a JSON file with a ``model`` object (the nine parameter
fields) and optional ``solver`` ({"tol", "scan"}) and ``sim`` (SimConfig
fields) objects.  Precedence, lowest first: built-in defaults, the JSON file,
the ``MFC_SEED`` environment variable (seed only), command-line flags.

Exit codes: 0 success, 2 configuration or validation error, 3 numerical failure.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields

import click
import numpy as np

from . import __version__
from .equilibrium import solve_lambda_given_theta, solve_potential_mfg
from .errors import InconsistentBoundaries, NoBracket, NonConvergence, ParameterError, RangeError
from .free_boundary import DEFAULT_TOL, dynkin_value
from .model import validate_params
from .simulate import SimConfig, calibrate_dt_bias, simulate_reflected
from .stationary import stationary_pdf_cdf

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
NUMERIC_ERRORS = (NonConvergence, NoBracket, RangeError, InconsistentBoundaries)
SWEEP_PARAMS = ("delta", "sigma", "phi")
SWEEP_HEADER = ["param", "value", "a_plus", "a_minus", "theta_star", "lambda_star", "kappa_star"]
SOLVER_KEYS = {"tol", "scan"}
SIM_KEYS = {f.name for f in fields(SimConfig)}
PROFILE_POINTS = {"U": 201, "V": 41, "pdf": 2001}


class ConfigError(click.ClickException):
    exit_code = EXIT_CONFIG


class NumericalFailure(click.ClickException):
    exit_code = EXIT_NUMERIC


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict) or "model" not in raw:
        raise ConfigError("config must be a JSON object with a 'model' entry")
    unknown = sorted(set(raw) - {"model", "solver", "sim"})
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    for section, allowed in (("solver", SOLVER_KEYS), ("sim", SIM_KEYS)):
        extra = sorted(set(raw.get(section, {})) - allowed)
        if extra:
            raise ConfigError(f"unknown {section} field(s): {', '.join(extra)}")
    try:
        params = validate_params(raw["model"])
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from None
    return params, dict(raw.get("solver", {})), dict(raw.get("sim", {}))


def solver_tol(solver, override=None):
    tol = solver.get("tol", DEFAULT_TOL) if override is None else override
    if not isinstance(tol, (int, float)) or not tol > 0:
        raise ConfigError("solver tol must be a positive number")
    return float(tol)


def build_sim_config(sim, **flags):
    values = dict(sim)
    env_seed = os.environ.get("MFC_SEED")
    if env_seed is not None:
        try:
            values["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"MFC_SEED must be an integer, got {env_seed!r}") from None
    values.update({k: v for k, v in flags.items() if v is not None})
    try:
        return SimConfig(**values)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"invalid simulation config: {exc}") from None


def emit(text, output):
    if output is None:
        click.echo(text, nl=False)
    else:
        with open(output, "w", newline="") as fh:
            fh.write(text)


def to_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def to_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def equilibrium_report(eq, p, tol):
    report = eq.report()
    report["checks"] = {
        "r_theta": abs(eq.r_theta) < max(tol, 1e-8),
        "r_lambda": abs(eq.r_lambda) < max(tol, 1e-8),
        "lambda_identity": eq.lambda_star == p.psi * (p.theta_bar - eq.theta_star),
        "v_prime": abs(eq.v_prime) < max(10.0 * tol, 1e-6),
        "smooth_fit": eq.boundaries.residual < tol,
    }
    return report


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(version=__version__)
def main():
    """Stationary singular mean-field control: equilibria, sweeps, simulation checks."""


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--tol", type=float, default=None, help="Solver tolerance (default 1e-10 or solver.tol).")
@click.option("--no-scan", is_flag=True, help="Skip the coarse scan for extra equilibria.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Write JSON here instead of stdout.")
def solve(config, tol, no_scan, output):
    """Solve the potential-game equilibrium and print a JSON report."""
    p, solver, _ = load_config(config)
    tol = solver_tol(solver, tol)
    scan = bool(solver.get("scan", True)) and not no_scan
    try:
        eq = solve_potential_mfg(p, tol=tol, scan=scan)
    except NUMERIC_ERRORS as exc:
        raise NumericalFailure(f"equilibrium solve failed: {exc}") from None
    emit(to_json(equilibrium_report(eq, p, tol)), output)


def _sweep_row(args):
    name, value, base, tol = args
    try:
        p = validate_params({**base, name: value})
        eq = solve_potential_mfg(p, tol=tol, scan=False)
    except (ParameterError, *NUMERIC_ERRORS) as exc:
        return [name, value] + [math.nan] * 5, f"{type(exc).__name__}: {exc}"
    ok = max(abs(eq.r_theta), abs(eq.r_lambda)) < max(tol, 1e-8)
    row = [name, value, eq.a_plus, eq.a_minus, eq.theta_star, eq.lambda_star, eq.kappa_star]
    return row, None if ok else "residual above tolerance"


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--param", "param_name", type=click.Choice(SWEEP_PARAMS), required=True, help="Parameter to vary.")
@click.option("--from", "start", type=float, required=True, help="First grid value.")
@click.option("--to", "stop", type=float, required=True, help="Last grid value.")
@click.option("--steps", type=int, default=50, show_default=True, help="Grid size (>= 2).")
@click.option("--tol", type=float, default=None, help="Solver tolerance.")
@click.option("--workers", type=int, default=1, show_default=True, help="Worker processes.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Write CSV here instead of stdout.")
def sweep(config, param_name, start, stop, steps, tol, workers, output):
    """Equilibrium along a one-parameter grid, one CSV row per grid point.

    Rows are in ascending parameter order.  A trailing 'status' column
    appears when any row failed; the exit code is 0 when at least 90% of the
    rows converged and 3 otherwise.
    """
    p, solver, _ = load_config(config)
    tol = solver_tol(solver, tol)
    if steps < 2:
        raise ConfigError("--steps must be at least 2")
    if not start < stop:
        raise ConfigError("--from must be below --to")
    if param_name == "phi" and not stop < p.rho:
        raise ConfigError(f"phi sweep must end below rho = {p.rho!r} (phi < rho)")
    if workers < 1:
        raise ConfigError("--workers must be at least 1")
    base = p.to_dict()
    jobs = [(param_name, float(v), base, tol) for v in np.linspace(start, stop, steps)]
    if workers == 1:
        results = [_sweep_row(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_row, jobs))
    failures = sum(status is not None for _, status in results)
    if failures:
        rows = [row + [status or "ok"] for row, status in results]
        text = to_csv(SWEEP_HEADER + ["status"], rows)
    else:
        text = to_csv(SWEEP_HEADER, [row for row, _ in results])
    emit(text, output)
    if failures > 0.1 * steps:
        raise NumericalFailure(f"{failures} of {steps} grid points did not converge")


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--dt", type=float, default=None, help="Time step [1e-3].")
@click.option("--horizon", type=float, default=None, help="Simulated time per path [200].")
@click.option("--burn-in", type=float, default=None, help="Discarded initial time [20].")
@click.option("--n-paths", type=int, default=None, help="Number of paths [64].")
@click.option("--seed", type=int, default=None, help="RNG seed [0]; MFC_SEED overrides the config value.")
@click.option("--n-bins", type=int, default=None, help="Histogram bins [50].")
@click.option("--workers", type=int, default=1, show_default=True, help="Worker processes.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Write JSON here instead of stdout.")
def simulate(config, dt, horizon, burn_in, n_paths, seed, n_bins, workers, output):
    """Compare closed-form equilibrium quantities with Monte Carlo estimates.

    Hard checks (exit 3 on failure): cost and mean within 3 standard errors
    plus a dt-bias allowance calibrated by halving dt once.  The histogram
    check is reported but not enforced.
    """
    p, solver, sim = load_config(config)
    cfg = build_sim_config(sim, dt=dt, horizon=horizon, burn_in=burn_in, n_paths=n_paths, seed=seed, n_bins=n_bins)
    try:
        cfg.check(p)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    tol = solver_tol(solver)
    try:
        eq = solve_potential_mfg(p, tol=tol, scan=False)
    except NUMERIC_ERRORS as exc:
        raise NumericalFailure(f"equilibrium solve failed: {exc}") from None
    b, theta, lam = eq.boundaries, eq.theta_star, eq.lambda_star
    stats = simulate_reflected(b, theta, lam, p, cfg, workers=workers)
    bias = calibrate_dt_bias(b, theta, lam, p, cfg, workers=workers)

    edges = np.linspace(b.a_plus, b.a_minus, cfg.n_bins + 1)
    _, cdf = stationary_pdf_cdf(edges, b, p)
    # one effective sample per two correlation times 1/delta
    n_eff = cfg.n_paths * (cfg.horizon - cfg.burn_in) * p.delta / 2.0
    hist_err = float(np.max(np.abs(stats.histogram - np.diff(cdf))))

    def check(estimate, target, se, allowance, hard=True):
        bound = 3.0 * se + allowance
        return {
            "closed_form": target,
            "monte_carlo": estimate,
            "standard_error": se,
            "dt_allowance": allowance,
            "bound": bound,
            "pass": abs(estimate - target) <= bound,
            "hard": hard,
        }

    checks = {
        "cost_potential": check(stats.cost_potential, eq.kappa_star, stats.se_cost, bias.cost_potential),
        "mean": check(stats.mean, theta, stats.se_mean, bias.mean),
        "histogram_sup": {
            "value": hist_err,
            "bound": 3.0 / math.sqrt(n_eff),
            "pass": hist_err <= 3.0 / math.sqrt(n_eff),
            "hard": False,
        },
    }
    report = {
        "equilibrium": eq.report(),
        "sim_config": {f.name: getattr(cfg, f.name) for f in fields(SimConfig)},
        "monte_carlo": stats.report(),
        "checks": checks,
        "dt_allowance_enlarged": cfg.dt > 1e-3,
    }
    emit(to_json(report), output)
    failed = [name for name, c in checks.items() if c["hard"] and not c["pass"]]
    if failed:
        raise NumericalFailure(f"Monte Carlo check(s) failed: {', '.join(failed)}")


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--quantity", type=click.Choice(["U", "V", "pdf"]), required=True, help="Profile to tabulate.")
@click.option("--points", type=int, default=None, help="Grid size [U: 201, V: 41, pdf: 2001].")
@click.option("--lo", type=float, default=None, help="Grid start [a_plus for U/pdf, theta* - 1 for V].")
@click.option("--hi", type=float, default=None, help="Grid end [a_minus for U/pdf, theta* + 1 for V].")
@click.option("--tol", type=float, default=None, help="Solver tolerance.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Write CSV here instead of stdout.")
def profile(config, quantity, points, lo, hi, tol, output):
    """Tabulate U(x) or the stationary pdf at equilibrium, or the constrained value V(theta)."""
    p, solver, _ = load_config(config)
    tol = solver_tol(solver, tol)
    points = PROFILE_POINTS[quantity] if points is None else points
    if points < 2:
        raise ConfigError("--points must be at least 2")
    try:
        eq = solve_potential_mfg(p, tol=tol, scan=False)
        b = eq.boundaries
        if quantity == "V":
            lo = eq.theta_star - 1.0 if lo is None else lo
            hi = eq.theta_star + 1.0 if hi is None else hi
        else:
            lo = b.a_plus if lo is None else lo
            hi = b.a_minus if hi is None else hi
        if not lo < hi:
            raise ConfigError("--lo must be below --hi")
        grid = np.linspace(lo, hi, points)
        # pin the endpoints so U and the pdf see the boundaries exactly
        grid[0], grid[-1] = lo, hi
        if quantity == "U":
            rows = [[float(x), float(dynkin_value(x, b, p))] for x in grid]
            header = ["x", "U"]
        elif quantity == "pdf":
            pdf, cdf = stationary_pdf_cdf(grid, b, p)
            rows = [[float(x), float(f), float(F)] for x, f, F in zip(grid, pdf, cdf)]
            header = ["x", "pdf", "cdf"]
        else:
            rows = []
            for th in grid:
                sol = solve_lambda_given_theta(float(th), p, tol=tol)
                rows.append([float(th), float(sol.value_v), float(sol.lambda_of_theta), float(sol.v_prime)])
            header = ["theta", "V", "lambda", "v_prime"]
    except NUMERIC_ERRORS as exc:
        raise NumericalFailure(f"profile failed: {exc}") from None
    emit(to_csv(header, rows), output)


if __name__ == "__main__":
    sys.exit(main())
