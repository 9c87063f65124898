"""Stochastic block model graphs, their spectra, and random-walk hitting times.

Sampling, derived model parameters and admissibility conditions, rescaled
adjacency spectra with concentration envelopes, exact/spectral/Monte-Carlo
hitting times, and replicate experiment drivers.  See the README for the
command-line interface.
"""

from .experiments import (
    CltSummary,
    ExperimentPlan,
    run_bounds,
    run_clt_edges,
    run_clt_target,
    run_lln,
)
from .graph import (
    Graph,
    GraphConnectivityError,
    degree_concentration,
    is_connected,
    read_edge_list,
    replicate_seed,
    sample,
    write_edge_list,
)
from .hitting import (
    HittingResult,
    WalkEstimate,
    eigensum_decomposition,
    exact_hitting,
    exact_hitting_column,
    exact_target_average,
    mc_hitting,
    spectral_start_hitting,
    spectral_target_hitting,
    stationary_distribution,
)
from .model import (
    BlockModelConfig,
    ConditionReport,
    DerivedParams,
    check_conditions,
    clt_standardize,
    derive,
    lln_prediction,
    load_config,
    save_config,
)
from .spectral import (
    BoundReport,
    NumericalError,
    SpectralDecomposition,
    block_matrix_spectrum,
    build_rescaled,
    cheeger_bound,
    decompose,
    expected_adjacency_spectrum,
    norm_bounds,
)

__version__ = "0.1.0"
