"""Causal discovery and SEM path analysis for tabular data.

Discovers causal graphs with PC, FCI, FGES and DirectLiNGAM under
domain-knowledge constraints, fits linear path models to each graph by
unweighted least squares on a correlation matrix, scores them with the
standard fit-index suite, and selects the best-fitting model.
"""

from .graph import (
    ARROW,
    CIRCLE,
    TAIL,
    BackgroundKnowledge,
    GraphError,
    MixedGraph,
    NoExtensionError,
    apply_meek_rules,
    consistent_extension,
    cpdag_of,
    d_separated,
    is_dag,
    knowledge_violations,
    simplify_by_weight,
    structural_hamming_distance,
    to_dot,
)

__version__ = "0.1.0"

__all__ = [
    "ARROW",
    "CIRCLE",
    "TAIL",
    "BackgroundKnowledge",
    "GraphError",
    "MixedGraph",
    "NoExtensionError",
    "apply_meek_rules",
    "consistent_extension",
    "cpdag_of",
    "d_separated",
    "is_dag",
    "knowledge_violations",
    "simplify_by_weight",
    "structural_hamming_distance",
    "to_dot",
    "__version__",
]
