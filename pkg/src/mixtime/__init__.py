"""Distributed mixing-time estimation on a simulated CONGEST network."""
from .graphcore import (
    BipartiteGraph,
    DistVector,
    Graph,
    GraphFamily,
    MaxLengthExceeded,
    build_graph,
    generate,
    parse_family,
    stationary_distribution,
    validate_for_walk,
)
from .congest import BfsTree, CongestLedger, build_bfs_tree, run_round, upcast_sum
from .mixing import (
    MixingEstimate,
    WalkConfig,
    deviation_sum,
    estimate_mixing_time,
    forward_tokens,
    oracle_agreement,
    paper_token_count,
    run_walk_phase,
)
from .oracle import (
    TransitionOperator,
    check_monotonicity,
    exact_distribution,
    exact_mixing_time,
    spectral_report,
)

__version__ = "0.1.0"
