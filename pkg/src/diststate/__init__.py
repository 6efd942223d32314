"""Distributed minimum-variance state estimation and false data detection."""

from .errors import (
    AlgorithmFailure,
    ConfigError,
    ContractError,
    DistStateError,
    InconsistentSystemError,
    InsufficientDataError,
    ModelError,
    NotPositiveDefiniteError,
    NumericalError,
)
from .linalg import (
    SubspaceBasis,
    SvdResult,
    kernel_basis,
    noise_factor,
    pinv_kernel_check,
    pseudoinverse,
    subspace_intersection,
    svd,
)
from .network import (
    MeasurementSystem,
    MonitorGraph,
    PowerGrid,
    RegionPartition,
    dc_measurement_matrix,
    generate_measurements,
    inject_false_data,
    lattice_grid,
    monitor_graph_from_blocks,
    random_consistent_system,
)
from .incremental import (
    approximation_error_exact,
    block_pinv_formula,
    epsilon_for_accuracy,
    incremental_min_norm,
    residual_bound,
    wls_incremental,
    wls_oracle,
)
from .diffusive import (
    MonitorNode,
    Schedule,
    fuse,
    local_init,
    run_asynchronous,
    run_synchronous,
)
from .detection import detect_step, detect_stream, regional_hint, threshold_gamma
from .finite_memory import (
    decay_fit,
    local_error,
    run_truncated,
    support_decay_sets,
    verify_pinv_decay,
)

__version__ = "0.1.0"
