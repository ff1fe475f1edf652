"""
Graph trace export
"""

from .graph_export import (
    adjacency_edges,
    export_graph,
    focus_neighbourhoods,
    node_au_ids,
    plot_snapshot,
    to_dot,
    trace_to_dict,
)

__all__ = [
    'adjacency_edges',
    'export_graph',
    'focus_neighbourhoods',
    'node_au_ids',
    'plot_snapshot',
    'to_dot',
    'trace_to_dict',
]
