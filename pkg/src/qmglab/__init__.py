"""qmglab: multigrid runs emulated as block-operator histories.

The package assembles 1D and 2D Poisson benchmark systems, solves them
with a recording V-cycle solver, replays the identical arithmetic as a
sequence of block-shift operations on one long history vector, simulates
the unitary-dilation layer of that sequence at tiny scale, and accounts
for success probabilities and qubit resources.
"""

from .analysis import (
    ResourceReport,
    SuccessReport,
    convergence_series,
    index_probability,
    p_versus_cycles,
    qubit_multiple_series,
    qubit_report,
    z_factor,
    z_factor_log2,
)
from .blockenc import (
    BlockEncoding,
    EncodingProduct,
    apply_encoded,
    dilate,
    product_encoding,
    tiny_end_to_end,
)
from .cases import REDUCED_CASES, REFERENCE_CASES, assemble_case, history_length, tables_report
from .fem import (
    AssembledSystem,
    ProblemCase,
    assemble_1d,
    assemble_2d,
    exact_solution_1d,
)
from .multigrid import (
    CycleTrace,
    DivergenceError,
    GridHierarchy,
    MgConfig,
    build_hierarchy,
    smooth_step,
    solve,
    v_cycle,
)
from .qmg import (
    BlockIndexer,
    BlockOperation,
    HistoryVector,
    apply_operation,
    build_initial_state,
    build_schedule,
    run_qmg,
)

__version__ = "0.1.0"
