"""Model parameters, quadratic running cost and the target points x_plus/x_minus."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .errors import ParameterError

PARAM_NAMES = (
    "delta",
    "sigma",
    "rho",
    "phi",
    "psi",
    "x_bar",
    "theta_bar",
    "k_plus",
    "k_minus",
)


@dataclass(frozen=True)
class DerivedConstants:
    m: float
    c: float
    alpha: float


@dataclass(frozen=True)
class ModelParams:
    """Dynamics and cost parameters of the singularly controlled OU model.

    The state follows ``dX = -delta X dt + sigma dW + dxi_plus - dxi_minus``
    and pays ``l(x, theta)`` per unit time plus ``k_plus``/``k_minus`` per unit
    of upward/downward control.  Construction validates the admissible regime
    (including ``phi < rho``), so downstream code may assume it.
    """

    delta: float
    sigma: float
    rho: float
    phi: float
    psi: float
    x_bar: float
    theta_bar: float
    k_plus: float
    k_minus: float
    derived: DerivedConstants = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParameterError(f"{name} is a number", f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ParameterError(f"{name} is finite", f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        checks = (
            (self.delta > 0, "delta > 0"),
            (self.sigma != 0, "sigma != 0"),
            (self.rho > 0, "rho > 0"),
            (self.phi > 0, "phi > 0"),
            (self.psi >= 0, "psi >= 0"),
            (self.k_plus > 0, "k_plus > 0"),
            (self.k_minus > 0, "k_minus > 0"),
            (self.phi < self.rho, "phi < rho"),
        )
        for ok, constraint in checks:
            if not ok:
                raise ParameterError(constraint)
        s = self.rho + self.phi
        derived = DerivedConstants(m=self.phi / s, c=1.0 / s, alpha=2.0 * self.delta / self.sigma**2)
        object.__setattr__(self, "derived", derived)

    @property
    def m(self):
        return self.derived.m

    @property
    def c(self):
        return self.derived.c

    @property
    def alpha(self):
        return self.derived.alpha

    @property
    def vol(self):
        """|sigma|; only sigma**2 enters the law of the state."""
        return abs(self.sigma)

    def to_dict(self):
        d = asdict(self)
        d.pop("derived", None)
        return d

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return ModelParams(**d)


def validate_params(raw):
    """Build a ModelParams from a mapping with exactly the nine field names.

    Unknown or missing keys raise ParameterError, as does any value outside
    its admissible range.
    """
    if isinstance(raw, ModelParams):
        return raw
    if not isinstance(raw, dict):
        raise ParameterError("parameter record is a mapping", f"expected a mapping of parameters, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(PARAM_NAMES))
    if unknown:
        raise ParameterError("no unknown fields", f"unknown parameter field(s): {', '.join(unknown)}")
    missing = [name for name in PARAM_NAMES if name not in raw]
    if missing:
        raise ParameterError("all fields present", f"missing parameter field(s): {', '.join(missing)}")
    return ModelParams(**{name: raw[name] for name in PARAM_NAMES})


def load_params(path):
    with open(path) as fh:
        return validate_params(json.load(fh))


def cost_l(x, theta, p):
    """Running cost l(x, theta); works elementwise on numpy arrays."""
    return 0.5 * p.rho * (x - p.x_bar) ** 2 + 0.5 * p.phi * (x - theta) ** 2 + 0.5 * p.psi * (theta - p.theta_bar) ** 2


def cost_lx(x, theta, p):
    return (p.phi + p.rho) * x - p.phi * theta - p.rho * p.x_bar


def cost_ltheta(x, theta, p):
    return p.phi * (theta - x) + p.psi * (theta - p.theta_bar)


def target_points(theta, lam, p):
    """Zeros of ``l_x - lam + k_plus*delta`` and ``l_x - lam - k_minus*delta``.

    Returns ``(x_plus, x_minus)`` with ``x_plus < x_minus``; the reflection
    boundaries always straddle this interval.
    """
    s = p.phi + p.rho
    base = p.phi * theta + lam + p.rho * p.x_bar
    return (base - p.k_plus * p.delta) / s, (base + p.k_minus * p.delta) / s
