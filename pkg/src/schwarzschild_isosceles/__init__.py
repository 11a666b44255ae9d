"""Numerics for the isosceles three-body problem with Schwarzschild-type interactions."""

from .model import (
    REFERENCE_PARAMS,
    DerivedConstants,
    ModelParams,
    ParameterError,
    RegimeError,
    derive,
    eval_angular,
    eval_effective,
)

__all__ = [
    "REFERENCE_PARAMS",
    "DerivedConstants",
    "ModelParams",
    "ParameterError",
    "RegimeError",
    "derive",
    "eval_angular",
    "eval_effective",
]
