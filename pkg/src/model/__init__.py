"""
AU detection network: backbone, MSFL, SACL, head
"""

from .backbone import Backbone, FeaturePyramid, LandmarksPredictor
from .fixed_graphs import facs_adjacency, fixed_adjacency, rank_adjacency, statistics_adjacency
from .head import DetectionHead, fuse_tokens
from .msfl import flatten_tokens, fuse
from .network import AUNet, NetworkOutput, complexity_report
from .sacl import (
    SACL,
    AUGraph,
    FFNBlock,
    GraphBlock,
    GraphTrace,
    MaxRelativeConv,
    SACLStage,
    knn_graph,
    knn_indices,
    max_relative_aggregate,
)

__all__ = [
    'Backbone',
    'FeaturePyramid',
    'LandmarksPredictor',
    'DetectionHead',
    'fuse_tokens',
    'flatten_tokens',
    'fuse',
    'AUNet',
    'NetworkOutput',
    'complexity_report',
    'facs_adjacency',
    'fixed_adjacency',
    'rank_adjacency',
    'statistics_adjacency',
    'SACL',
    'AUGraph',
    'FFNBlock',
    'GraphBlock',
    'GraphTrace',
    'MaxRelativeConv',
    'SACLStage',
    'knn_graph',
    'knn_indices',
    'max_relative_aggregate',
]
