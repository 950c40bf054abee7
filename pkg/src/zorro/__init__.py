"""Zorro activation family: evaluation, verification, and sweep experiments."""

from zorro.activations import (
    ActivationSpec,
    AsymParams,
    DomainError,
    SlopedParams,
    SpecError,
    ZorroParams,
    derivative,
    evaluate,
    make_spec,
    parse_spec,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationSpec",
    "AsymParams",
    "DomainError",
    "SlopedParams",
    "SpecError",
    "ZorroParams",
    "derivative",
    "evaluate",
    "make_spec",
    "parse_spec",
    "__version__",
]
