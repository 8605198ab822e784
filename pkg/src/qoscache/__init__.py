"""Cache-aided coded delivery with per-user quality targets.

Library surface: problem instances (:mod:`qoscache.model`), delivery-rate
lower bounds (:mod:`qoscache.bounds`), exact small-case centralized
schemes (:mod:`qoscache.centralized_small`), the general layered
centralized scheme with cache allocators (:mod:`qoscache.centralized_layered`),
decentralized random-placement schemes (:mod:`qoscache.decentralized`),
a bit-level verification oracle (:mod:`qoscache.bitsim`) and an
experiment-sweep CLI (:mod:`qoscache.cli`).
"""

from .bounds import (
    best_lower_bound,
    cutset_bound,
    lower_bound_2user_nfile,
    lower_bound_2x2,
    two_user_bound,
)
from .centralized_layered import (
    LayerAllocation,
    PiecewiseLinearRate,
    best_centralized,
    oca_allocation,
    optimize_layer_split,
    pca_allocation,
    rate_cfl,
    rate_gbc,
    rate_man,
    sublayer_decompose,
    sublayer_rate_function,
    total_rate_centralized,
)
from .centralized_small import (
    Case2x2,
    PlacementSpec,
    classify_2x2,
    gap_2user_nfile,
    placement_2user_nfile,
    placement_2x2,
    rate_2user_nfile,
    rate_2x2,
)
from .decentralized import (
    decentralized_rate_alg3,
    delivery2_rate,
    lcd1_rate,
    lcd2_rate,
    placement_probabilities,
    rate_2x2_decentralized,
    segment_size,
    uncoded_rate,
)
from .model import (
    RateReport,
    Scenario,
    gaussian_rate_distortion,
    layer_increments,
    load_scenario,
    make_scenario,
)

__all__ = [
    "Case2x2",
    "LayerAllocation",
    "PiecewiseLinearRate",
    "PlacementSpec",
    "RateReport",
    "Scenario",
    "best_centralized",
    "best_lower_bound",
    "classify_2x2",
    "cutset_bound",
    "decentralized_rate_alg3",
    "delivery2_rate",
    "gap_2user_nfile",
    "gaussian_rate_distortion",
    "layer_increments",
    "lcd1_rate",
    "lcd2_rate",
    "load_scenario",
    "lower_bound_2user_nfile",
    "lower_bound_2x2",
    "make_scenario",
    "oca_allocation",
    "optimize_layer_split",
    "pca_allocation",
    "placement_2user_nfile",
    "placement_2x2",
    "placement_probabilities",
    "rate_2user_nfile",
    "rate_2x2",
    "rate_2x2_decentralized",
    "rate_cfl",
    "rate_gbc",
    "rate_man",
    "segment_size",
    "sublayer_decompose",
    "sublayer_rate_function",
    "total_rate_centralized",
    "two_user_bound",
    "uncoded_rate",
]

__version__ = "0.1.0"
