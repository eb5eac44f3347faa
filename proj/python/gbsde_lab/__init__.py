"""Python bindings for the g-bsde-lab C++ core."""

from ._core import (  # noqa: F401
    ConfigError,
    Error,
    EvalError,
    Expr,
    GParams,
    InvalidArgument,
    Modulus,
    ParseError,
    SolverError,
    envelope_gap_bound,
    experiment_names,
    g_value,
    g_value_matrix,
    gap_constant,
    lower_envelope,
    parse,
    run,
    search_radius,
    simulate_terminal,
    solve_config,
    upper_envelope,
    upper_expectation_pde,
    worst_case_q,
)

__all__ = [name for name in dir() if not name.startswith("_")]
