"""Problem configuration files and the built-in example presets.

A config is a YAML (or JSON) mapping::

    x0: 0
    boundaries:
      lower: "-4 + t^2"
      upper: "4 - t^2"
    drift: "0"              # in t and x
    potential: "-i*x^2"     # in x; "k*step(x, r)" selects the sojourn correction
    payoff: "1"             # in x
    scheme: {n: 30, gamma: 2, delta: 0}
    quad_order: 16

A ``hull_white: {alpha, sigma, forward_curve}`` block replaces ``x0``,
``drift``, ``potential`` and ``payoff``; its boundaries are in rate units.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import yaml

from .engine import hull_white_problem
from .expr import ExprError, Function, parse
from .kernel import DEFAULT_QUAD_ORDER
from .model import (
    BoundaryPair,
    DiffusionModel,
    Payoff,
    Problem,
    SchemeParams,
    StepPotential,
    potential_from_expression,
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class HullWhite:
    alpha: float
    sigma: float
    forward_curve: str


@dataclass(frozen=True)
class ProblemConfig:
    lower: str
    upper: str
    x0: float = 0.0
    drift: str = "0"
    potential: str = "0"
    payoff: str = "1"
    n: int = 30
    gamma: float = 2.0
    delta: float = 0.0
    quad_order: int = DEFAULT_QUAD_ORDER
    hull_white: Optional[HullWhite] = None
    kappa: Optional[float] = field(default=None, compare=False)

    @classmethod
    def from_mapping(cls, data) -> "ProblemConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = {"x0", "boundaries", "drift", "potential", "payoff", "scheme", "quad_order", "hull_white"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        bounds = data.get("boundaries")
        if not isinstance(bounds, dict) or "lower" not in bounds or "upper" not in bounds:
            raise ConfigError("boundaries.lower and boundaries.upper are required")
        scheme = data.get("scheme", {}) or {}
        if not isinstance(scheme, dict):
            raise ConfigError("scheme must be a mapping")

        hw = None
        if data.get("hull_white") is not None:
            clash = {"x0", "drift", "potential", "payoff"} & set(data)
            if clash:
                raise ConfigError(f"hull_white excludes {sorted(clash)}")
            block = data["hull_white"]
            try:
                hw = HullWhite(float(block["alpha"]), float(block["sigma"]),
                               str(block.get("forward_curve", "0")))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad hull_white block: {exc}") from None

        try:
            cfg = cls(
                lower=_text(bounds["lower"]),
                upper=_text(bounds["upper"]),
                x0=float(data.get("x0", 0.0)),
                drift=_text(data.get("drift", "0")),
                potential=_text(data.get("potential", "0")),
                payoff=_text(data.get("payoff", "1")),
                n=int(scheme.get("n", 30)),
                gamma=float(scheme.get("gamma", 2.0)),
                delta=float(scheme.get("delta", 0.0)),
                quad_order=int(data.get("quad_order", DEFAULT_QUAD_ORDER)),
                hull_white=hw,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        cfg.check_expressions()
        return cfg

    def check_expressions(self) -> None:
        """Parse every expression once so syntax errors surface at load time."""
        fields = {"boundaries.lower": (self.lower, ("t",)), "boundaries.upper": (self.upper, ("t",))}
        if self.hull_white is None:
            fields.update(drift=(self.drift, ("t", "x")), potential=(self.potential, ("x",)),
                          payoff=(self.payoff, ("x",)))
        else:
            fields["hull_white.forward_curve"] = (self.hull_white.forward_curve, ("t",))
        for name, (src, args) in fields.items():
            try:
                Function(src, args, real=name != "potential")
            except ExprError as exc:
                raise ConfigError(f"{name}: {exc}") from None

    def with_overrides(self, n=None, quad_order=None, kappa=None) -> "ProblemConfig":
        cfg = self
        if n is not None:
            cfg = replace(cfg, n=int(n))
        if quad_order is not None:
            cfg = replace(cfg, quad_order=int(quad_order))
        if kappa is not None:
            cfg = replace(cfg, kappa=float(kappa))
        return cfg

    def params(self) -> SchemeParams:
        return SchemeParams(self.n, self.gamma, self.delta)

    def problem(self) -> Problem:
        bounds = BoundaryPair(Function(self.lower, ("t",)), Function(self.upper, ("t",)))
        if self.hull_white is not None:
            if self.kappa is not None:
                raise ConfigError("--kappa applies only to step potentials")
            hw = self.hull_white
            problem = hull_white_problem(hw.alpha, hw.sigma, hw.forward_curve, bounds,
                                         gamma=self.gamma, delta=self.delta)
            return replace(problem, quad_order=self.quad_order)

        potential = potential_from_expression(self.potential)
        if self.kappa is not None:
            if not isinstance(potential, StepPotential):
                raise ConfigError("--kappa applies only to step potentials")
            potential = StepPotential(self.kappa, potential.level)
        model = DiffusionModel.from_expression(self.x0, parse(self.drift))
        return Problem(model, bounds, potential, Payoff(Function(self.payoff, ("x",))),
                       self.gamma, self.delta, self.quad_order)


def _text(value) -> str:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return repr(value)
    if not isinstance(value, str):
        raise ConfigError(f"expected an expression string, got {value!r}")
    return value


def load_config(path) -> ProblemConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    return ProblemConfig.from_mapping(data)


_QUARTIC = {"lower": "-4 + t^2", "upper": "4 - t^2"}
_SCHEME = {"n": 30, "gamma": 2, "delta": 0}

PRESETS = {
    # complex potential, Kac-type characteristic function under barriers
    "example1": {"x0": 0, "boundaries": _QUARTIC, "drift": "0", "potential": "-i*x^2",
                 "payoff": "1", "scheme": _SCHEME},
    # Hull-White zero-coupon bond with knock-out rate barriers
    "example2": {"boundaries": {"lower": "-0.04*(1 + 0.5*sin(3*t))",
                                "upper": "0.04*(1 - 0.5*sin(3*t))"},
                 "hull_white": {"alpha": 0.01, "sigma": 0.01, "forward_curve": "0.03"},
                 "scheme": _SCHEME},
    # hybrid step-barrier option
    "example3": {"x0": 0, "boundaries": _QUARTIC, "drift": "0", "potential": "2*step(x, 1/19)",
                 "payoff": "1", "scheme": _SCHEME},
    # plain non-crossing probability on the example 1/3 strip
    "bcp": {"x0": 0, "boundaries": _QUARTIC, "drift": "0", "potential": "0", "payoff": "1",
            "scheme": _SCHEME},
    # barriers wide enough that the Kac closed form applies
    "kac": {"x0": 0, "boundaries": {"lower": "-8", "upper": "8"}, "drift": "0",
            "potential": "-i*x^2", "payoff": "1", "scheme": {"n": 128, "gamma": 2, "delta": 0}},
}


def preset(name: str) -> ProblemConfig:
    try:
        return ProblemConfig.from_mapping(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
