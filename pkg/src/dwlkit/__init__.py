"""Dynamic Weisfeiler-Lehman tests, interval encodings and a small HopeDGN-style link predictor."""
from .dwl import Verdict, dwl_distinguish, dwl_refine, dygnn_sim, hopedgn_symbolic, twin_paths_graph
from .encodings import TimeEncoding, build_encoding_bundle, mite_raw, ncoe
from .neural import ModelConfig, TrainConfig, evaluate, init_params, load_params, save_params, train
from .temporal_graph import DAT, DynamicGraph, Event, brute_force_isomorphic_until, build_dat, load_events

__version__ = "0.1.0"

__all__ = [
    "DAT",
    "DynamicGraph",
    "Event",
    "ModelConfig",
    "TimeEncoding",
    "TrainConfig",
    "Verdict",
    "brute_force_isomorphic_until",
    "build_dat",
    "build_encoding_bundle",
    "dwl_distinguish",
    "dwl_refine",
    "dygnn_sim",
    "evaluate",
    "hopedgn_symbolic",
    "init_params",
    "load_events",
    "load_params",
    "mite_raw",
    "ncoe",
    "save_params",
    "train",
    "twin_paths_graph",
]
