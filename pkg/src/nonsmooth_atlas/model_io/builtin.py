"""Built-in Filippov systems.

Evaluators are small callable classes so models pickle cleanly for
process-based parallel sweeps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UnknownModel, UnknownParameter
from ..filippov import FilippovModel

# ---------------------------------------------------------------- toy system


@dataclass(frozen=True)
class ToyRight:
    """Van der Pol core in (X1, X2) plus a decaying third coordinate."""

    def __call__(self, x, mu):
        eta = mu[1]
        return np.array([x[1], -x[0] + eta * x[1] - x[1] ** 3, -x[2] / 5.0])


@dataclass(frozen=True)
class ToyRightJacobian:
    def __call__(self, x, mu):
        eta = mu[1]
        return np.array([[0.0, 1.0, 0.0],
                         [-1.0, eta - 3.0 * x[1] ** 2, 0.0],
                         [0.0, 0.0, -0.2]])


@dataclass(frozen=True)
class ToyLeft:
    def __call__(self, x, mu):
        return np.array([0.0, -2.0, 1.0])


@dataclass(frozen=True)
class ToySwitch:
    def __call__(self, x, mu):
        return float(mu[0] - x[0] - 2.0 * x[1] - 3.0 * x[2])


@dataclass(frozen=True)
class ToySwitchGradient:
    def __call__(self, x, mu):
        return np.array([-1.0, -2.0, -3.0])


# ---------------------------------------------------------------- food chain

HP_DEFAULTS = {"a1": 5.0, "a2": 0.1, "b2": 2.0, "d1": 0.4, "d2": 0.01}
PEST_RATES = {"q1": 0.0, "q2": 0.05, "q3": -0.01}
HARVEST_RATES = {"q1": 0.09, "q2": 0.01, "q3": 0.001}


@dataclass(frozen=True)
class FoodChainRight:
    """Three-species food chain with saturating (Holling type II) responses.

    ``mu = (threshold, b1)``; ``b1`` is the half-saturation constant of the
    first predator.
    """

    a1: float
    a2: float
    b2: float
    d1: float
    d2: float

    def __call__(self, x, mu):
        b1 = mu[1]
        f1 = self.a1 * x[0] / (1.0 + b1 * x[0])
        f2 = self.a2 * x[1] / (1.0 + self.b2 * x[1])
        return np.array([x[0] * (1.0 - x[0]) - f1 * x[1],
                         f1 * x[1] - f2 * x[2] - self.d1 * x[1],
                         f2 * x[2] - self.d2 * x[2]])


@dataclass(frozen=True)
class FoodChainJacobian:
    a1: float
    a2: float
    b2: float
    d1: float
    d2: float

    def __call__(self, x, mu):
        b1 = mu[1]
        f1 = self.a1 * x[0] / (1.0 + b1 * x[0])
        f2 = self.a2 * x[1] / (1.0 + self.b2 * x[1])
        df1 = self.a1 / (1.0 + b1 * x[0]) ** 2
        df2 = self.a2 / (1.0 + self.b2 * x[1]) ** 2
        return np.array([[1.0 - 2.0 * x[0] - df1 * x[1], -f1, 0.0],
                         [df1 * x[1], f1 - df2 * x[2] - self.d1, -f2],
                         [0.0, df2 * x[2], f2 - self.d2]])


@dataclass(frozen=True)
class FoodChainLeft:
    """Right field minus per-capita removal ``(q1 X1, q2 X2, q3 X3)``."""

    right: FoodChainRight
    q1: float
    q2: float
    q3: float

    def __call__(self, x, mu):
        return self.right(x, mu) - np.array([self.q1 * x[0], self.q2 * x[1], self.q3 * x[2]])


@dataclass(frozen=True)
class ThresholdSwitch:
    """``h = sign * (X_k - threshold)`` with the threshold taken from ``mu[0]``."""

    index: int
    sign: float

    def __call__(self, x, mu):
        return float(self.sign * (x[self.index] - mu[0]))


@dataclass(frozen=True)
class ThresholdGradient:
    index: int
    sign: float

    def __call__(self, x, mu):
        g = np.zeros(3)
        g[self.index] = self.sign
        return g


# ---------------------------------------------------------------- registry

BUILTIN_NAMES = ("toy", "hastings_powell_pest", "hastings_powell_harvest")

#: bifurcation-parameter names and their default values
BIFURCATION_PARAMS = {
    "toy": (("nu", 0.0), ("eta", 0.0)),
    "hastings_powell_pest": (("xi", 12.9), ("b1", 2.1138)),
    "hastings_powell_harvest": (("xi", 0.78), ("b1", 2.0)),
}


def builtin_constants(name: str) -> dict:
    if name == "toy":
        return {}
    if name == "hastings_powell_pest":
        return {**HP_DEFAULTS, **PEST_RATES}
    if name == "hastings_powell_harvest":
        return {**HP_DEFAULTS, **HARVEST_RATES}
    raise UnknownModel(f"unknown model {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


def builtin_model(name: str, overrides: dict | None = None) -> FilippovModel:
    """Construct a registered model; ``overrides`` replaces fixed constants."""
    consts = builtin_constants(name)
    overrides = dict(overrides or {})
    for key in overrides:
        if key not in consts:
            raise UnknownParameter(f"model {name!r} has no constant {key!r}; known: {sorted(consts)}")
    consts.update({k: float(v) for k, v in overrides.items()})
    pnames = tuple(p for p, _ in BIFURCATION_PARAMS[name])
    if name == "toy":
        return FilippovModel(name="toy", f_left=ToyLeft(), f_right=ToyRight(), h=ToySwitch(),
                             grad_h=ToySwitchGradient(), jac_right=ToyRightJacobian(),
                             param_names=pnames, constants=consts)
    hp = {k: consts[k] for k in HP_DEFAULTS}
    right = FoodChainRight(**hp)
    left = FoodChainLeft(right, consts["q1"], consts["q2"], consts["q3"])
    if name == "hastings_powell_pest":
        # control acts while the top predator is below the threshold
        index, sign = 2, 1.0
    else:
        # harvesting acts while the prey is above the threshold
        index, sign = 0, -1.0
    return FilippovModel(name=name, f_left=left, f_right=right, h=ThresholdSwitch(index, sign),
                         grad_h=ThresholdGradient(index, sign), jac_right=FoodChainJacobian(**hp),
                         param_names=pnames, constants=consts)


def default_params(name: str) -> np.ndarray:
    if name not in BIFURCATION_PARAMS:
        raise UnknownModel(f"unknown model {name!r}")
    return np.array([v for _, v in BIFURCATION_PARAMS[name]], dtype=float)
