"""Sparse recovery for dictionaries built from concatenated orthogonal blocks."""
from .core import (
    BlockDictionary,
    DimensionError,
    SupportTooWideError,
    dictionary_adjoint,
    dictionary_apply,
    hard_threshold,
    make_orthogonal_block,
    mutual_coherence,
    random_dictionary,
    restricted_least_squares,
    top_k_indices,
)
from .solvers import (
    KINDS,
    SolveResult,
    SolverConfig,
    SolverState,
    WrongSolverError,
    baseline_solve,
    iterates,
    msaa_solve,
    msaa_step,
    solve,
    tsaa_solve,
    tsaa_step,
)
from .synthetic import Instance, InstanceSpec, gen_instance, gen_sparse_vector, recovery_success

__version__ = "0.1.0"
