from ponmpc.opt.ilp import SearchSpaceTooLargeError, brute_force_ilp
from ponmpc.opt.maxflow import FlowNetwork, NegativeBudgetError, max_flow, min_cut, solve_myopic_maxflow
from ponmpc.opt.program import (
    AllocationMatrix,
    DimensionMismatchError,
    LpInstance,
    NegativeArrivalError,
    build_mpc_program,
    forced_allocations,
)
from ponmpc.opt.simplex import IterationLimitError, NonIntegralSolutionError, solve_lp
from ponmpc.opt.tu import (
    MatrixTooLargeError,
    NonTernaryEntryError,
    check_totally_unimodular_ghouila_houri,
    ghouila_houri_witness,
    reduce_by_unit_rows,
)

__all__ = [
    "AllocationMatrix", "DimensionMismatchError", "FlowNetwork", "IterationLimitError",
    "LpInstance", "MatrixTooLargeError", "NegativeArrivalError", "NegativeBudgetError",
    "NonIntegralSolutionError", "NonTernaryEntryError", "SearchSpaceTooLargeError",
    "brute_force_ilp", "build_mpc_program", "check_totally_unimodular_ghouila_houri",
    "forced_allocations", "ghouila_houri_witness", "max_flow", "min_cut",
    "reduce_by_unit_rows", "solve_lp", "solve_myopic_maxflow",
]
