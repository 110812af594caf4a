from .generators import random_dynamic_graph, random_graph_pair, triangle_graph
from .metrics import MetricsReport, average_precision, metrics_report, roc_auc
from .suite import PropertyResult, SuiteConfig, SuiteReport, expressiveness_suite, graph_from_payload, graph_payload
from .splits import SplitSpec, chronological_split, eval_negatives, inductive_mask, sample_negatives

__all__ = [
    "MetricsReport",
    "PropertyResult",
    "SuiteConfig",
    "SuiteReport",
    "SplitSpec",
    "average_precision",
    "chronological_split",
    "eval_negatives",
    "expressiveness_suite",
    "graph_from_payload",
    "graph_payload",
    "inductive_mask",
    "metrics_report",
    "random_dynamic_graph",
    "random_graph_pair",
    "roc_auc",
    "sample_negatives",
    "triangle_graph",
]
