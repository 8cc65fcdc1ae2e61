"""Join discovery across tabular datasets: similarity graphs + relational GCN."""

from joinscope.repo import Repository, Table, Column, load_repository
from joinscope.similarity import SignalType, SimilarityRecord, compute_all_pairs
from joinscope.graph import SimilarityGraph, build_graph
from joinscope.estimator import JoinDiscovery

__all__ = [
    "Repository",
    "Table",
    "Column",
    "load_repository",
    "SignalType",
    "SimilarityRecord",
    "compute_all_pairs",
    "SimilarityGraph",
    "build_graph",
    "JoinDiscovery",
]
