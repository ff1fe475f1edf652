"""
Tests for the fixed FACS and statistics graphs
"""

from dataclasses import replace

import numpy as np
import pytest

from autodiff import Tensor, no_grad
from model import SACL, facs_adjacency, rank_adjacency, statistics_adjacency
from model.fixed_graphs import cooccurrence_affinity, facs_affinity, fixed_adjacency
from training.trainer import build_model
from utils.config_loader import SaclConfig
from utils.errors import ConfigError, DimensionError

# AU1 -> вузли 0, 1; AU12 -> 2, 3; AU25 -> 4, 5
AU_IDS = [1, 12, 25]

LABELS = np.array([
    [1, 0, 1],
    [1, 0, 0],
    [0, 1, 1],
    [0, 1, 1],
    [0, 0, 0],
])


def fixed_sacl(mode, rng, adjacency=None):
    cfg = SaclConfig(S=2, L=[1, 1], K=3, D=8, ffn_ratio=1, graph_mode=mode)
    if adjacency is None:
        adjacency = fixed_adjacency(mode, AU_IDS, 3)
    return SACL(5, cfg, rng, fixed_adjacency=adjacency)


class TestRanking:
    def test_descending_affinity_lower_index_on_ties(self):
        affinity = np.array([
            [9.0, 1.0, 3.0, 3.0],
            [0.0, 9.0, 0.0, 0.0],
            [2.0, 2.0, 0.0, 5.0],
            [1.0, 1.0, 1.0, 1.0],
        ])
        np.testing.assert_array_equal(rank_adjacency(affinity, 2), [[2, 3], [0, 2], [3, 0], [0, 1]])

    def test_self_never_chosen(self):
        adjacency = rank_adjacency(np.eye(5) * 100.0, 4)
        for i, row in enumerate(adjacency):
            assert i not in row

    @pytest.mark.parametrize("K", [0, 4])
    def test_invalid_k(self, K):
        with pytest.raises(ValueError):
            rank_adjacency(np.zeros((4, 4)), K)

    def test_non_square(self):
        with pytest.raises(ValueError):
            rank_adjacency(np.zeros((3, 4)), 1)


class TestFacsGraph:
    def test_prototype_counts(self):
        affinity = facs_affinity(AU_IDS)
        # 1 & 25: здивування, страх; 12 & 25: радість; 1 & 12: жодного
        assert affinity[0, 2] == 2
        assert affinity[1, 2] == 1
        assert affinity[0, 1] == 0
        assert affinity[0, 0] > affinity.max(initial=0, where=~np.eye(3, dtype=bool))

    def test_node_adjacency(self):
        np.testing.assert_array_equal(facs_adjacency(AU_IDS, 3), [
            [1, 4, 5], [0, 4, 5],
            [3, 4, 5], [2, 4, 5],
            [5, 0, 1], [4, 0, 1],
        ])

    def test_shared_center_nodes_are_closest(self):
        # 12/14/15 ділять одне визначення центру
        adjacency = facs_adjacency([12, 14, 15, 17], 1)
        np.testing.assert_array_equal(adjacency[:, 0], [1, 0, 3, 2])


class TestStatisticsGraph:
    def test_conditional_cooccurrence(self):
        affinity = cooccurrence_affinity(LABELS)
        np.testing.assert_allclose(affinity, [
            [1.0, 0.0, 0.5],
            [0.0, 1.0, 1.0],
            [1 / 3, 2 / 3, 1.0],
        ])

    def test_absent_au_row_is_zero(self):
        affinity = cooccurrence_affinity(np.array([[0, 1, 1], [0, 1, 0]]))
        np.testing.assert_array_equal(affinity, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.5], [0.0, 1.0, 1.0]])

    def test_node_adjacency(self):
        np.testing.assert_array_equal(statistics_adjacency(LABELS, AU_IDS, 3), [
            [1, 4, 5], [0, 4, 5],
            [3, 4, 5], [2, 4, 5],
            [5, 2, 3], [4, 2, 3],
        ])

    def test_no_labels_falls_back_to_index_order(self):
        adjacency = fixed_adjacency('statistics', AU_IDS, 3)
        np.testing.assert_array_equal(adjacency[0], [1, 2, 3])
        np.testing.assert_array_equal(adjacency[4], [5, 0, 1])

    def test_labels_must_be_two_dimensional(self):
        with pytest.raises(ValueError):
            cooccurrence_affinity(np.zeros(3))

    def test_dynamic_mode_has_no_fixed_graph(self):
        with pytest.raises(ValueError):
            fixed_adjacency('dynamic', AU_IDS, 3)


class TestFixedSacl:
    @pytest.mark.parametrize("mode", ['facs', 'statistics'])
    def test_every_snapshot_is_the_fixed_graph(self, rng, mode):
        sacl = fixed_sacl(mode, rng)
        _, trace = sacl(Tensor(rng.standard_normal((2, 6, 5))))
        expected = np.broadcast_to(sacl.fixed_adjacency, (2, 6, 3))
        assert len(trace) == 5
        for snap in trace.snapshots:
            np.testing.assert_array_equal(snap['adjacency'], expected)

    def test_missing_adjacency_raises(self, rng):
        cfg = SaclConfig(S=2, L=[1, 1], K=3, D=8, ffn_ratio=1, graph_mode='facs')
        with pytest.raises(ConfigError):
            SACL(5, cfg, rng)

    def test_unknown_mode_raises(self, rng):
        cfg = SaclConfig(S=2, L=[1, 1], K=3, D=8, ffn_ratio=1, graph_mode='full')
        with pytest.raises(ConfigError):
            SACL(5, cfg, rng)

    def test_self_loop_rejected(self, rng):
        bad = facs_adjacency(AU_IDS, 3)
        bad[2, 0] = 2
        with pytest.raises(ValueError):
            fixed_sacl('facs', rng, adjacency=bad)

    def test_wrong_k_rejected(self, rng):
        with pytest.raises(DimensionError):
            fixed_sacl('facs', rng, adjacency=facs_adjacency(AU_IDS, 2))

    def test_node_count_must_match_features(self, rng):
        sacl = fixed_sacl('facs', rng)
        with pytest.raises(DimensionError):
            sacl(Tensor(rng.standard_normal((1, 8, 5))))

    def test_set_fixed_adjacency_in_place(self, rng):
        sacl = fixed_sacl('statistics', rng)
        buffer = sacl.fixed_adjacency
        sacl.set_fixed_adjacency(statistics_adjacency(LABELS, AU_IDS, 3))
        assert sacl.fixed_adjacency is buffer
        np.testing.assert_array_equal(sacl.state_dict()['fixed_adjacency'],
                                      statistics_adjacency(LABELS, AU_IDS, 3))

    def test_dynamic_sacl_cannot_take_fixed_graph(self, rng):
        sacl = SACL(5, SaclConfig(S=2, L=[1, 1], K=3, D=8, ffn_ratio=1), rng)
        assert 'fixed_adjacency' not in sacl.state_dict()
        with pytest.raises(ConfigError):
            sacl.set_fixed_adjacency(facs_adjacency(AU_IDS, 3))


def test_facs_network_uses_fixed_graph(toy_model_cfg, rng):
    cfg = replace(toy_model_cfg, sacl=replace(toy_model_cfg.sacl, graph_mode='facs'))
    model = build_model(cfg, seed=0)
    images = Tensor(rng.uniform(-1, 1, size=(1, 3, 32, 32)).astype(np.float32))
    with no_grad():
        out = model(images)
    expected = facs_adjacency(cfg.au_ids, cfg.sacl.K)
    for snap in out.trace.snapshots:
        np.testing.assert_array_equal(snap['adjacency'][0], expected)
