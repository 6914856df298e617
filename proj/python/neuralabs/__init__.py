"""Neural abstractions of nonlinear dynamical systems."""

from ._core import (
    Abstraction,
    Automaton,
    DimensionMismatch,
    DomainError,
    Error,
    Flowpipe,
    Model,
    PreconditionError,
    SyntaxError,
    ValidationError,
    asm_bound,
    build_automaton,
    load_model,
    parse_model,
    reach,
    run_pipeline,
    simulate,
    synthesize,
)

__all__ = [
    "Abstraction",
    "Automaton",
    "DimensionMismatch",
    "DomainError",
    "Error",
    "Flowpipe",
    "Model",
    "PreconditionError",
    "SyntaxError",
    "ValidationError",
    "asm_bound",
    "build_automaton",
    "load_model",
    "parse_model",
    "reach",
    "run_pipeline",
    "simulate",
    "synthesize",
]
