"""SpAMM products, Newton-Schulz inverse square roots and regularized
preconditioner ladders over numpy arrays."""

from ._core import (
    DivergenceError,
    Representation,
    alpha_schedule,
    elementwise_error_bound,
    epsilon_schedule,
    error_bound,
    error_flow,
    exact_shifted_condition,
    gen_decay,
    inv_sqrt,
    multiply,
    read_matrix_market,
    set_worker_count,
    shifted_condition,
    worker_count,
    write_matrix_market,
)

__all__ = [
    "DivergenceError",
    "Representation",
    "alpha_schedule",
    "elementwise_error_bound",
    "epsilon_schedule",
    "error_bound",
    "error_flow",
    "exact_shifted_condition",
    "gen_decay",
    "inv_sqrt",
    "multiply",
    "read_matrix_market",
    "set_worker_count",
    "shifted_condition",
    "worker_count",
    "write_matrix_market",
]
