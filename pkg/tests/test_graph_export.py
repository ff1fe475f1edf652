"""
Tests for AU correlation graph export
"""

import json

import numpy as np
import pytest

from autodiff import Tensor, no_grad
from export import export_graph
from export.graph_export import adjacency_edges, node_au_ids, to_dot, trace_to_dict
from model.sacl import GraphTrace
from training.trainer import build_model


@pytest.fixture
def traced(toy_model_cfg, rng):
    model = build_model(toy_model_cfg, seed=0)
    model.eval()
    images = Tensor(rng.uniform(-1, 1, size=(1, 3, 32, 32)).astype(np.float32))
    with no_grad():
        out = model(images)
    return model, out.trace


def test_adjacency_edges():
    adjacency = np.array([[1, 2], [0, 2], [1, 0]])
    assert adjacency_edges(adjacency) == [[0, 1], [0, 2], [1, 0], [1, 2], [2, 1], [2, 0]]
    assert adjacency_edges(adjacency[None]) == adjacency_edges(adjacency)


def test_node_owners_follow_center_definitions():
    owners = node_au_ids([1, 12, 25])
    assert len(owners) == 6
    assert owners[0] == owners[1]
    assert sum(1 for aus in owners if 1 in aus) == 2


def test_to_dot():
    dot = to_dot([[0, 1], [1, 0]], ['AU1@a', 'AU1@b'])
    assert dot.startswith("digraph AUGraph {")
    assert 'n0 [label="AU1@a"];' in dot
    assert "n0 -> n1;" in dot and "n1 -> n0;" in dot
    assert dot.rstrip().endswith("}")


def test_document_layout(traced, toy_model_cfg):
    model, trace = traced
    doc = trace_to_dict(trace, model.node_labels, {'K': 3})
    sacl = toy_model_cfg.sacl
    assert len(doc['snapshots']) == sum(sacl.L) + sacl.S + 1
    n_nodes = len(model.node_labels)
    for snap in doc['snapshots']:
        assert len(snap['edges']) == n_nodes * sacl.K
        assert all(src != dst for src, dst in snap['edges'])
    assert [(s['stage'], s['block'], s['phase']) for s in doc['snapshots']][0] == (0, 0, 'init')
    assert 'focus' not in doc


def test_export_writes_json_and_dot(tmp_path, traced, toy_model_cfg):
    model, trace = traced
    paths = export_graph(trace, model.node_labels, {'seed': 0}, tmp_path,
                         au_ids=toy_model_cfg.au_ids, focus=[1])
    assert set(paths) == {'json', 'dot'}

    with open(paths['json'], encoding='utf-8') as f:
        doc = json.load(f)
    assert doc['config'] == {'seed': 0}
    assert doc['node_labels'] == list(model.node_labels)

    views = doc['focus']['AU1']
    assert len(views) == len(trace)
    owners = node_au_ids(toy_model_cfg.au_ids)
    au1_nodes = {str(n) for n, aus in enumerate(owners) if 1 in aus}
    for view in views:
        assert set(view['nodes']) == au1_nodes
        for node in view['nodes'].values():
            assert len(node['out']) == toy_model_cfg.sacl.K

    dot = paths['dot'].read_text(encoding='utf-8')
    assert "digraph" in dot
    assert dot.count("->") == len(model.node_labels) * toy_model_cfg.sacl.K


def test_in_and_out_neighbours_are_consistent(traced, toy_model_cfg):
    _, trace = traced
    doc = trace_to_dict(trace, ['n'] * 6, {}, au_ids=toy_model_cfg.au_ids, focus=[25])
    for snap, view in zip(doc['snapshots'], doc['focus']['AU25']):
        edges = {tuple(e) for e in snap['edges']}
        for node, nb in view['nodes'].items():
            n = int(node)
            assert all((n, j) in edges for j in nb['out'])
            assert all((i, n) in edges for i in nb['in'])


def test_unknown_focus_au(tmp_path, traced, toy_model_cfg):
    model, trace = traced
    with pytest.raises(ValueError, match="AU2"):
        export_graph(trace, model.node_labels, {}, tmp_path, au_ids=toy_model_cfg.au_ids, focus=[2])


def test_focus_requires_au_ids(traced):
    model, trace = traced
    with pytest.raises(ValueError):
        trace_to_dict(trace, model.node_labels, {}, focus=[1])


def test_empty_trace(tmp_path):
    with pytest.raises(ValueError, match="no snapshots"):
        export_graph(GraphTrace(), [], {}, tmp_path)


def test_png(tmp_path, traced):
    pytest.importorskip("matplotlib")
    model, trace = traced
    paths = export_graph(trace, model.node_labels, {}, tmp_path, png=True, stem="final")
    assert paths['png'].name == "final.png"
    assert paths['png'].stat().st_size > 0
