"""
Self-adjusting AU-correlation learning
Граф AU з динамічним KNN, Max-Relative GCN блоки, FFN з перерахунком
сусідів після кожного FFN та повторна ініціалізація графа між стадіями
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.spatial.distance import cdist

from autodiff import Linear, Module, ModuleList, Tensor, ops
from utils.config_loader import SaclConfig
from utils.errors import ConfigError, DimensionError

logger = logging.getLogger(__name__)

# Назви метрик -> scipy cdist
METRICS = {
    'euclidean': 'euclidean',
    'manhattan': 'cityblock',
    'cosine': 'cosine',
}

# Відносна точність, до якої відстані вважаються рівними
TIE_DECIMALS = 9

GRAPH_MODES = ('dynamic', 'facs', 'statistics')


@dataclass
class AUGraph:
    """
    Граф AU: ознаки вузлів та спрямовані K-сусідні ребра i -> adjacency[b, i, :]

    Attributes:
    -----------
    features : Tensor (B, N, d)
    adjacency : np.ndarray (B, N, K) int64
    metric : str
    """
    features: Tensor
    adjacency: np.ndarray
    metric: str = 'euclidean'


@dataclass
class GraphTrace:
    """Впорядковані знімки суміжності в кожній точці перерахунку"""
    snapshots: List[Dict] = field(default_factory=list)

    def record(self, stage: int, block: int, phase: str, adjacency: np.ndarray):
        self.snapshots.append({
            'stage': stage,
            'block': block,
            'phase': phase,
            'adjacency': adjacency.copy(),
        })

    def __len__(self):
        return len(self.snapshots)


def pairwise_distances(nodes: np.ndarray, metric: str = 'euclidean') -> np.ndarray:
    """Матриця відстаней (N, N) у float64; cosine = 1 - косинусна подібність"""
    if metric not in METRICS:
        raise ValueError(f"Unknown metric '{metric}', expected one of {sorted(METRICS)}")
    nodes = np.asarray(nodes, dtype=np.float64)
    dist = cdist(nodes, nodes, metric=METRICS[metric])
    if metric == 'cosine':
        # нульовий вектор: подібність 0
        dist = np.nan_to_num(dist, nan=1.0)
    return dist


def knn_indices(nodes: np.ndarray, K: int, metric: str = 'euclidean') -> np.ndarray:
    """
    K найближчих сусідів кожного вузла (без самого вузла)

    Рівні відстані (до TIE_DECIMALS знаків відносно найбільшої) розв'язуються
    на користь меншого індексу (stable argsort).

    Parameters:
    -----------
    nodes : np.ndarray (N, d) або (B, N, d)

    Returns:
    --------
    adjacency : np.ndarray (N, K) або (B, N, K)
    """
    nodes = np.asarray(nodes)
    if nodes.ndim == 3:
        return np.stack([knn_indices(x, K, metric) for x in nodes])
    if nodes.ndim != 2:
        raise DimensionError(f"knn expects (N, d) or (B, N, d) nodes, got {nodes.shape}")
    N = nodes.shape[0]
    if K < 1 or K >= N:
        raise ValueError(f"K must satisfy 1 <= K < N, got K={K}, N={N}")

    dist = pairwise_distances(nodes, metric)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(tie_keys(dist), axis=1, kind='stable')
    return order[:, :K].astype(np.int64)


def tie_keys(dist: np.ndarray, decimals: int = TIE_DECIMALS) -> np.ndarray:
    """
    Ключі сортування, в яких майже рівні відстані збігаються

    Відстані діляться на найбільшу скінченну відстань матриці та округлюються,
    тож розбіжність в 1 ulp після масштабування чи зсуву не змінює порядок.
    """
    finite = np.isfinite(dist)
    scale = float(dist[finite].max()) if finite.any() else 0.0
    if scale <= 0.0:
        scale = 1.0
    keys = np.full_like(dist, np.inf)
    keys[finite] = np.round(dist[finite] / scale, decimals)
    return keys


def knn_graph(nodes: Tensor, K: int, metric: str = 'euclidean') -> AUGraph:
    """Побудувати AUGraph; сусіди рахуються на від'єднаних значеннях"""
    return AUGraph(features=nodes, adjacency=knn_indices(nodes.data, K, metric), metric=metric)


def _batched(x: Tensor) -> Tensor:
    return ops.reshape(x, (1,) + x.shape) if x.ndim == 2 else x


def max_relative_aggregate(x: Tensor, adjacency: np.ndarray) -> Tensor:
    """
    m_i = max_j (x_j - x_i) по сусідах j, поелементно

    Returns:
    --------
    Tensor (B, N, 2d): [x_i || m_i]
    """
    squeezed = x.ndim == 2
    x = _batched(x)
    adjacency = adjacency[None] if adjacency.ndim == 2 else adjacency
    B, N, d = x.shape
    neighbours = ops.gather_rows(x, adjacency)                  # (B, N, K, d)
    relative = ops.sub(neighbours, ops.reshape(x, (B, N, 1, d)))
    m = ops.max(relative, axis=2)                               # (B, N, d)
    out = ops.concat([x, m], axis=-1)
    return ops.reshape(out, (N, 2 * d)) if squeezed else out


class MaxRelativeConv(Module):
    """Max-Relative графова згортка: linear([x_i || max_j(x_j - x_i)])"""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        super().__init__()
        self.linear = Linear(2 * in_dim, out_dim, rng)

    def forward(self, graph: AUGraph) -> Tensor:
        return self.linear(max_relative_aggregate(graph.features, graph.adjacency))


class GraphBlock(Module):
    """G' = gelu(GCN(G W_before)) W_after + G"""

    def __init__(self, dim: int, rng: np.random.Generator):
        super().__init__()
        self.dim = dim
        self.fc_before = Linear(dim, dim, rng)
        self.gcn = MaxRelativeConv(dim, dim, rng)
        self.fc_after = Linear(dim, dim, rng)

    def forward(self, graph: AUGraph) -> Tensor:
        G = graph.features
        if G.shape[-1] != self.dim:
            raise ConfigError(f"Graph block expects dim {self.dim}, got {G.shape[-1]}")
        h = self.fc_before(G)
        h = self.gcn(AUGraph(h, graph.adjacency, graph.metric))
        h = self.fc_after(ops.gelu(h))
        return ops.add(h, G)


class FFNBlock(Module):
    """G'' = gelu(G' W_1) W_2 + G', прихований розмір ffn_ratio * d"""

    def __init__(self, dim: int, ratio: int, rng: np.random.Generator):
        super().__init__()
        self.fc1 = Linear(dim, ratio * dim, rng)
        self.fc2 = Linear(ratio * dim, dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        return ops.add(self.fc2(ops.gelu(self.fc1(x))), x)


class SACLStage(Module):
    """
    Стадія SACL: L x (graph block, FFN + перерахунок KNN),
    потім FC до наступної розмірності та повторна ініціалізація графа
    """

    def __init__(self, dim: int, next_dim: int, n_blocks: int, K: int, metric: str,
                 ffn_ratio: int, rng: np.random.Generator, graph_mode: str = 'dynamic'):
        super().__init__()
        self.K = K
        self.metric = metric
        self.graph_mode = graph_mode
        self.graph_blocks = ModuleList([GraphBlock(dim, rng) for _ in range(n_blocks)])
        self.ffn_blocks = ModuleList([FFNBlock(dim, ffn_ratio, rng) for _ in range(n_blocks)])
        self.transition = Linear(dim, next_dim, rng)
        self.blocks_executed = 0

    def regraph(self, features: Tensor, graph: AUGraph) -> AUGraph:
        """KNN на нових ознаках; у фіксованих режимах суміжність не змінюється"""
        if self.graph_mode == 'dynamic':
            return knn_graph(features, self.K, self.metric)
        return AUGraph(features, graph.adjacency, graph.metric)

    def ffn_block_and_adjust(self, ffn: FFNBlock, features: Tensor,
                             graph: Optional[AUGraph] = None) -> AUGraph:
        """FFN із залишком, потім KNN на нових ознаках"""
        out = ffn(features)
        if graph is None:
            return knn_graph(out, self.K, self.metric)
        return self.regraph(out, graph)

    def forward(self, graph: AUGraph, stage_index: int,
                trace: Optional[GraphTrace] = None) -> AUGraph:
        self.blocks_executed = 0
        for j, (block, ffn) in enumerate(zip(self.graph_blocks, self.ffn_blocks), start=1):
            features = block(graph)
            graph = self.ffn_block_and_adjust(ffn, features, graph)
            self.blocks_executed += 1
            if trace is not None:
                trace.record(stage_index, j, 'post_ffn', graph.adjacency)
        graph = self.regraph(self.transition(graph.features), graph)
        if trace is not None:
            trace.record(stage_index, len(self.graph_blocks), 'init', graph.adjacency)
        return graph


class SACL(Module):
    """
    Вбудовування ROI (d1 -> перша розмірність стадії), S стадій, вихід B (N_ROI x D)

    Трасування: 1 початковий знімок + sum(L_i) після FFN + S після переініціалізацій.
    У режимах graph_mode 'facs' та 'statistics' всі знімки дорівнюють
    фіксованій суміжності (буфер fixed_adjacency, зберігається в чекпойнті).
    """

    def __init__(self, d1: int, cfg: SaclConfig, rng: np.random.Generator,
                 fixed_adjacency: Optional[np.ndarray] = None):
        super().__init__()
        dims = cfg.resolved_stage_dims()
        if len(cfg.L) != cfg.S or len(dims) != cfg.S:
            raise ConfigError(f"S={cfg.S} but L={cfg.L}, stage dims={dims}")
        if cfg.graph_mode not in GRAPH_MODES:
            raise ConfigError(f"Unknown graph_mode '{cfg.graph_mode}', expected one of {GRAPH_MODES}")
        if cfg.graph_mode != 'dynamic':
            if fixed_adjacency is None:
                raise ConfigError(f"graph_mode '{cfg.graph_mode}' needs a fixed adjacency")
            self.register_buffer('fixed_adjacency', self._checked(fixed_adjacency, cfg.K))
        self.cfg = cfg
        self.dims = dims
        self.embed = Linear(d1, dims[0], rng)
        self.stages = ModuleList()
        for s in range(cfg.S):
            next_dim = dims[s + 1] if s + 1 < cfg.S else cfg.D
            self.stages.append(
                SACLStage(dims[s], next_dim, cfg.L[s], cfg.K, cfg.metric, cfg.ffn_ratio, rng,
                          graph_mode=cfg.graph_mode)
            )
        logger.debug(f"SACL stage dims {dims}, L={cfg.L}, K={cfg.K}, metric={cfg.metric}, "
                     f"graph_mode={cfg.graph_mode}")

    @staticmethod
    def _checked(adjacency: np.ndarray, K: int) -> np.ndarray:
        adjacency = np.array(adjacency, dtype=np.int64)
        if adjacency.ndim != 2 or adjacency.shape[1] != K:
            raise DimensionError(f"Fixed adjacency must be (N_ROI, {K}), got {adjacency.shape}")
        N = adjacency.shape[0]
        if adjacency.min() < 0 or adjacency.max() >= N:
            raise ValueError(f"Fixed adjacency indices must lie in [0, {N})")
        if np.any(adjacency == np.arange(N)[:, None]):
            raise ValueError("Fixed adjacency must not contain self loops")
        return adjacency

    def set_fixed_adjacency(self, adjacency: np.ndarray):
        """Замінити фіксований граф на місці (напр. статистичний граф з міток)"""
        if self.cfg.graph_mode == 'dynamic':
            raise ConfigError("Dynamic graph_mode has no fixed adjacency")
        adjacency = self._checked(adjacency, self.cfg.K)
        if adjacency.shape != self.fixed_adjacency.shape:
            raise DimensionError(
                f"Expected {self.fixed_adjacency.shape} adjacency, got {adjacency.shape}"
            )
        self.fixed_adjacency[...] = adjacency

    def initial_graph(self, nodes: Tensor) -> AUGraph:
        if self.cfg.graph_mode == 'dynamic':
            return knn_graph(nodes, self.cfg.K, self.cfg.metric)
        B, N = nodes.shape[:2]
        if N != self.fixed_adjacency.shape[0]:
            raise DimensionError(
                f"Fixed graph has {self.fixed_adjacency.shape[0]} nodes, features have {N}"
            )
        adjacency = np.broadcast_to(self.fixed_adjacency, (B,) + self.fixed_adjacency.shape).copy()
        return AUGraph(features=nodes, adjacency=adjacency, metric=self.cfg.metric)

    def forward(self, roi_features: Tensor):
        """
        Parameters:
        -----------
        roi_features : Tensor (B, N_ROI, d1) або (N_ROI, d1)

        Returns:
        --------
        B : Tensor (B, N_ROI, D) (або (N_ROI, D))
        trace : GraphTrace
        """
        squeezed = roi_features.ndim == 2
        x = _batched(roi_features)
        trace = GraphTrace()
        graph = self.initial_graph(self.embed(x))
        trace.record(0, 0, 'init', graph.adjacency)
        for s, stage in enumerate(self.stages, start=1):
            graph = stage(graph, s, trace)
        out = graph.features
        if squeezed:
            out = ops.reshape(out, out.shape[1:])
        return out, trace
