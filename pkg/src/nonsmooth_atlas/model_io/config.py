"""JSON model configuration.

Schema::

    {
      "model": "toy" | {"f_left": [s, s, s], "f_right": [s, s, s], "h": s,
                        "bifurcation_params": [name, name]},   # optional
      "params": {name: number, ...},
      "overrides": {name: number, ...}                          # optional
    }

For built-in models ``params`` may hold the two bifurcation parameters and
any model constant; ``overrides`` holds constants only.  For inline models
every identifier in the expressions must be bound by ``params`` or
``overrides``; the bifurcation pair defaults to ``nu, eta`` when both are
present and otherwise to the first two entries of ``params``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..errors import ExprSyntaxError, SchemaError, UnknownIdentifier, UnknownParameter
from ..filippov import FilippovModel
from .builtin import BIFURCATION_PARAMS, BUILTIN_NAMES, builtin_constants, builtin_model
from .expr import Node, evaluate, free_parameters, parse_expression


@dataclass(frozen=True)
class ExprField:
    components: tuple
    param_names: tuple
    constants: tuple  # sorted (name, value) pairs

    def __call__(self, x, mu):
        env = _env(x, mu, self.param_names, self.constants)
        return np.array([evaluate(c, env) for c in self.components])


@dataclass(frozen=True)
class ExprScalar:
    expr: Node
    param_names: tuple
    constants: tuple

    def __call__(self, x, mu):
        return float(evaluate(self.expr, _env(x, mu, self.param_names, self.constants)))


def _env(x, mu, names, constants):
    env = dict(constants)
    env["X1"], env["X2"], env["X3"] = float(x[0]), float(x[1]), float(x[2])
    env[names[0]] = float(mu[0])
    env[names[1]] = float(mu[1])
    return env


@dataclass(frozen=True)
class InlineModel:
    f_left: tuple
    f_right: tuple
    h: str
    bifurcation_params: Optional[tuple] = None

    def to_dict(self) -> dict:
        out = {"f_left": list(self.f_left), "f_right": list(self.f_right), "h": self.h}
        if self.bifurcation_params is not None:
            out["bifurcation_params"] = list(self.bifurcation_params)
        return out


@dataclass(frozen=True)
class ModelConfig:
    model: Union[str, InlineModel]
    params: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        model = self.model if isinstance(self.model, str) else self.model.to_dict()
        out = {"model": model, "params": dict(self.params)}
        if self.overrides:
            out["overrides"] = dict(self.overrides)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def bifurcation_names(self) -> tuple:
        if isinstance(self.model, str):
            if self.model not in BIFURCATION_PARAMS:
                builtin_constants(self.model)  # raises UnknownModel
            return tuple(p for p, _ in BIFURCATION_PARAMS[self.model])
        if self.model.bifurcation_params is not None:
            return tuple(self.model.bifurcation_params)
        if "nu" in self.params and "eta" in self.params:
            return ("nu", "eta")
        keys = list(self.params)
        if len(keys) < 2:
            raise SchemaError("inline models need two bifurcation parameters")
        return (keys[0], keys[1])

    def build(self) -> tuple:
        """Return ``(FilippovModel, mu)``."""
        names = self.bifurcation_names()
        if isinstance(self.model, str):
            mu = np.array([v for _, v in BIFURCATION_PARAMS[self.model]], dtype=float)
            consts = dict(self.overrides)
            for k, v in self.params.items():
                if k in names:
                    mu[names.index(k)] = float(v)
                else:
                    consts[k] = v
            return builtin_model(self.model, consts), mu
        bound = {**self.params, **self.overrides}
        for n in names:
            if n not in bound:
                raise SchemaError(f"bifurcation parameter {n!r} has no value in params")
        mu = np.array([float(bound[n]) for n in names])
        constants = tuple(sorted((k, float(v)) for k, v in bound.items() if k not in names))
        allowed = set(bound)
        asts = {}
        for label, srcs in (("f_left", self.model.f_left), ("f_right", self.model.f_right)):
            asts[label] = tuple(_parse_checked(s, allowed, f"model.{label}[{i}]") for i, s in enumerate(srcs))
        h_ast = _parse_checked(self.model.h, allowed, "model.h")
        model = FilippovModel(
            name="inline",
            f_left=ExprField(asts["f_left"], names, constants),
            f_right=ExprField(asts["f_right"], names, constants),
            h=ExprScalar(h_ast, names, constants),
            param_names=names,
            constants=dict(constants),
        )
        return model, mu


def _parse_checked(src: str, allowed: set, where: str, line: Optional[int] = None) -> Node:
    ctx = where if line is None else f"{where} (line {line})"
    try:
        node = parse_expression(src, allowed)
    except ExprSyntaxError as exc:
        raise ExprSyntaxError(f"{ctx}: {exc}", exc.position, exc.expected) from None
    except UnknownIdentifier as exc:
        raise UnknownIdentifier(f"{ctx}: {exc}") from None
    missing = free_parameters(node) - allowed
    if missing:
        raise UnknownIdentifier(f"{ctx}: unbound parameters {sorted(missing)}")
    return node


def _line_of(text: str, needle: str) -> Optional[int]:
    k = text.find(json.dumps(needle))
    return None if k < 0 else text.count("\n", 0, k) + 1


def _numbers(obj, where: str) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise SchemaError(f"{where} must be an object of name -> number")
    out = {}
    for k, v in obj.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(f"{where}.{k} must be a number")
        out[str(k)] = float(v)
    return out


def _three_strings(obj, where: str) -> tuple:
    if not isinstance(obj, list) or len(obj) != 3 or not all(isinstance(s, str) for s in obj):
        raise SchemaError(f"{where} must be a list of three expression strings")
    return tuple(obj)


def load_config(text: str) -> ModelConfig:
    """Parse and validate a JSON configuration document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise SchemaError("configuration must be a JSON object")
    unknown = set(doc) - {"model", "params", "overrides"}
    if unknown:
        raise SchemaError(f"unknown top-level keys {sorted(unknown)}")
    if "model" not in doc:
        raise SchemaError("missing required key 'model'")
    params = _numbers(doc.get("params"), "params")
    overrides = _numbers(doc.get("overrides"), "overrides")
    model_doc = doc["model"]
    if isinstance(model_doc, str):
        if model_doc not in BUILTIN_NAMES:
            builtin_constants(model_doc)  # raises UnknownModel
        known = set(builtin_constants(model_doc)) | {p for p, _ in BIFURCATION_PARAMS[model_doc]}
        for k in params:
            if k not in known:
                raise UnknownParameter(f"model {model_doc!r} has no parameter {k!r}")
        for k in overrides:
            if k not in builtin_constants(model_doc):
                raise UnknownParameter(f"model {model_doc!r} has no constant {k!r}")
        return ModelConfig(model_doc, params, overrides)
    if not isinstance(model_doc, dict):
        raise SchemaError("'model' must be a built-in name or an inline definition")
    extra = set(model_doc) - {"f_left", "f_right", "h", "bifurcation_params"}
    if extra:
        raise SchemaError(f"unknown model keys {sorted(extra)}")
    for key in ("f_left", "f_right", "h"):
        if key not in model_doc:
            raise SchemaError(f"inline model is missing {key!r}")
    if not isinstance(model_doc["h"], str):
        raise SchemaError("model.h must be an expression string")
    bp = model_doc.get("bifurcation_params")
    if bp is not None:
        if not isinstance(bp, list) or len(bp) != 2 or not all(isinstance(s, str) for s in bp):
            raise SchemaError("bifurcation_params must list two parameter names")
        bp = tuple(bp)
    inline = InlineModel(_three_strings(model_doc["f_left"], "model.f_left"),
                         _three_strings(model_doc["f_right"], "model.f_right"), model_doc["h"], bp)
    cfg = ModelConfig(inline, params, overrides)
    # validate every expression now so errors carry file positions
    allowed = set(params) | set(overrides)
    for label in ("f_left", "f_right"):
        for i, s in enumerate(getattr(inline, label)):
            _parse_checked(s, allowed, f"model.{label}[{i}]", _line_of(text, s))
    _parse_checked(inline.h, allowed, "model.h", _line_of(text, inline.h))
    cfg.bifurcation_names()
    return cfg


def load_config_file(path: str) -> ModelConfig:
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read())
