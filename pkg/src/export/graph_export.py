"""
AU correlation graph export
Експорт трасування графа SACL: JSON зі знімками, DOT останнього знімка,
необов'язковий PNG (вузли на колі)
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from geometry.au_centers import node_owners
from model.sacl import GraphTrace

logger = logging.getLogger(__name__)


def adjacency_edges(adjacency: np.ndarray) -> List[List[int]]:
    """Ребра [src, dst]: вузол src вказує на кожного зі своїх K сусідів"""
    adjacency = np.asarray(adjacency)
    if adjacency.ndim == 3:
        adjacency = adjacency[0]
    return [[int(i), int(j)] for i, row in enumerate(adjacency) for j in row]


def node_au_ids(au_ids: Sequence[int]) -> List[List[int]]:
    """AU, до яких належить кожен вузол (два вузли на визначення центру)"""
    return [list(aus) for aus in node_owners(au_ids)]


def focus_neighbourhoods(trace: GraphTrace, au_ids: Sequence[int],
                         focus: Sequence[int]) -> Dict[str, List[Dict]]:
    """
    Вхідні та вихідні сусіди вузлів обраних AU для кожного знімка

    Returns:
    --------
    focus : dict
        'AU<id>' -> [{stage, block, phase, nodes: {node: {out: [...], in: [...]}}}]
    """
    owners = node_au_ids(au_ids)
    result = {}
    for au in focus:
        nodes = [n for n, aus in enumerate(owners) if int(au) in aus]
        if not nodes:
            raise ValueError(f"AU{au} is not among the graph's AUs {list(au_ids)}")
        views = []
        for snap in trace.snapshots:
            adj = np.asarray(snap['adjacency'])
            if adj.ndim == 3:
                adj = adj[0]
            view = {}
            for n in nodes:
                view[str(n)] = {
                    'out': [int(j) for j in adj[n]],
                    'in': [int(i) for i in range(adj.shape[0]) if n in adj[i]],
                }
            views.append({'stage': snap['stage'], 'block': snap['block'],
                          'phase': snap['phase'], 'nodes': view})
        result[f"AU{int(au)}"] = views
    return result


def trace_to_dict(trace: GraphTrace, node_labels: Sequence[str], config: Dict,
                  au_ids: Optional[Sequence[int]] = None,
                  focus: Optional[Sequence[int]] = None) -> Dict:
    """Документ {config, snapshots, node_labels[, focus]}"""
    document = {
        'config': config,
        'snapshots': [
            {
                'stage': int(s['stage']),
                'block': int(s['block']),
                'phase': s['phase'],
                'edges': adjacency_edges(s['adjacency']),
            }
            for s in trace.snapshots
        ],
        'node_labels': list(node_labels),
    }
    if focus:
        if au_ids is None:
            raise ValueError("Focus views need the AU list")
        document['focus'] = focus_neighbourhoods(trace, au_ids, focus)
    return document


def to_dot(edges: Sequence[Sequence[int]], node_labels: Sequence[str],
           name: str = "AUGraph") -> str:
    """DOT орграф одного знімка"""
    lines = [f"digraph {name} {{", "rankdir=LR;", 'node [shape=ellipse, fontsize=10];']
    for i, label in enumerate(node_labels):
        lines.append(f'n{i} [label="{label}"];')
    for src, dst in edges:
        lines.append(f"n{src} -> n{dst};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def plot_snapshot(edges: Sequence[Sequence[int]], node_labels: Sequence[str], path) -> Path:
    """PNG знімка: вузли рівномірно на колі, стрілки до сусідів"""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    n = len(node_labels)
    angles = np.linspace(0, 2 * np.pi, n, endpoint=False)
    xy = np.stack([np.cos(angles), np.sin(angles)], axis=1)

    fig, ax = plt.subplots(figsize=(8, 8))
    for src, dst in edges:
        ax.annotate("", xy=xy[dst], xytext=xy[src],
                    arrowprops=dict(arrowstyle='->', color='steelblue', alpha=0.5, lw=0.8))
    ax.scatter(xy[:, 0], xy[:, 1], s=300, c='orange', zorder=3)
    for (x, y), label in zip(xy, node_labels):
        ax.text(1.15 * x, 1.15 * y, label, ha='center', va='center', fontsize=8)
    ax.set_xlim(-1.5, 1.5)
    ax.set_ylim(-1.5, 1.5)
    ax.set_aspect('equal')
    ax.axis('off')
    ax.set_title("AU correlation graph (final snapshot)")

    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches='tight')
    plt.close(fig)
    return path


def export_graph(trace: GraphTrace, node_labels: Sequence[str], config: Dict, out_dir,
                 au_ids: Optional[Sequence[int]] = None, focus: Optional[Sequence[int]] = None,
                 png: bool = False, stem: str = "graph_trace") -> Dict[str, Path]:
    """
    Записати <stem>.json, <stem>.dot (останній знімок) та, за бажанням, <stem>.png

    Returns:
    --------
    paths : dict
        'json', 'dot' (та 'png')
    """
    if not trace.snapshots:
        raise ValueError("Graph trace has no snapshots")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    document = trace_to_dict(trace, node_labels, config, au_ids=au_ids, focus=focus)
    paths = {'json': out_dir / f"{stem}.json", 'dot': out_dir / f"{stem}.dot"}
    with open(paths['json'], 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2)

    final_edges = document['snapshots'][-1]['edges']
    with open(paths['dot'], 'w', encoding='utf-8') as f:
        f.write(to_dot(final_edges, node_labels))

    if png:
        paths['png'] = plot_snapshot(final_edges, node_labels, out_dir / f"{stem}.png")

    logger.info(f"Graph trace exported: {len(trace)} snapshots, {len(node_labels)} nodes -> {out_dir}")
    return paths
