"""Model registry, expression grammar and JSON configuration."""
from .builtin import BIFURCATION_PARAMS, BUILTIN_NAMES, builtin_model, default_params
from .config import InlineModel, ModelConfig, load_config, load_config_file
from .expr import (
    BinOp,
    Call,
    Const,
    Neg,
    Param,
    Var,
    evaluate,
    free_parameters,
    parse_expression,
    to_source,
)

__all__ = [
    "BIFURCATION_PARAMS", "BUILTIN_NAMES", "builtin_model", "default_params",
    "InlineModel", "ModelConfig", "load_config", "load_config_file",
    "BinOp", "Call", "Const", "Neg", "Param", "Var",
    "evaluate", "free_parameters", "parse_expression", "to_source",
]
