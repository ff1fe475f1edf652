"""
Fixed AU correlation graphs
Фіксовані графи для абляцій: FACS-граф (прототипи емоцій) та статистичний
граф (умовна частота спільної появи AU у тренувальних мітках)
"""

import logging
from typing import Sequence, Tuple

import numpy as np

from geometry.au_centers import node_owners

logger = logging.getLogger(__name__)

# Набори AU, що з'являються разом у прототипах базових емоцій
FACS_PROTOTYPES: Tuple[Tuple[int, ...], ...] = (
    (6, 12, 25),            # радість
    (1, 4, 15, 17),         # сум
    (1, 2, 25, 26),         # здивування
    (1, 2, 4, 7, 25, 26),   # страх
    (4, 7, 23, 24),         # гнів
    (9, 10, 15, 17),        # відраза
    (12, 14),               # зневага
)


def rank_adjacency(affinity: np.ndarray, K: int) -> np.ndarray:
    """
    K сусідів кожного вузла за спаданням спорідненості

    Рівна спорідненість розв'язується на користь меншого індексу; діагональ
    ігнорується.

    Parameters:
    -----------
    affinity : np.ndarray (N, N)
    K : int

    Returns:
    --------
    adjacency : np.ndarray (N, K) int64
    """
    affinity = np.asarray(affinity, dtype=np.float64)
    N = affinity.shape[0]
    if affinity.shape != (N, N):
        raise ValueError(f"Affinity must be square, got {affinity.shape}")
    if K < 1 or K >= N:
        raise ValueError(f"K must satisfy 1 <= K < N, got K={K}, N={N}")
    cost = -affinity
    np.fill_diagonal(cost, np.inf)
    index = np.arange(N)
    rows = [np.lexsort((index, cost[i]))[:K] for i in range(N)]
    return np.stack(rows).astype(np.int64)


def _node_affinity(au_affinity, au_ids: Sequence[int]) -> np.ndarray:
    """Спорідненість вузлів: максимум по парах AU-власників"""
    owners = node_owners(au_ids)
    position = {int(au): k for k, au in enumerate(au_ids)}
    N = len(owners)
    affinity = np.zeros((N, N))
    for i, own_i in enumerate(owners):
        for j, own_j in enumerate(owners):
            affinity[i, j] = max(au_affinity[position[a], position[b]]
                                 for a in own_i for b in own_j)
    return affinity


def facs_affinity(au_ids: Sequence[int]) -> np.ndarray:
    """
    Спорідненість AU (N_AU, N_AU): кількість спільних прототипів емоцій

    Однакові AU отримують значення, більше за будь-яку пару.
    """
    au_ids = [int(a) for a in au_ids]
    n = len(au_ids)
    affinity = np.zeros((n, n))
    for i, a in enumerate(au_ids):
        for j, b in enumerate(au_ids):
            if a == b:
                affinity[i, j] = len(FACS_PROTOTYPES) + 1
            else:
                affinity[i, j] = sum(1 for group in FACS_PROTOTYPES if a in group and b in group)
    return affinity


def cooccurrence_affinity(labels: np.ndarray) -> np.ndarray:
    """
    P(AU_b = 1 | AU_a = 1) за бінарними мітками (M, N_AU)

    AU без жодної позитивної мітки має нульовий рядок; діагональ завжди 1.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if labels.ndim != 2:
        raise ValueError(f"Labels must be (M, N_AU), got {labels.shape}")
    present = (labels > 0.5).astype(np.float64)
    joint = present.T @ present
    counts = present.sum(axis=0)
    affinity = np.divide(joint, counts[:, None], out=np.zeros_like(joint),
                         where=counts[:, None] > 0)
    np.fill_diagonal(affinity, 1.0)
    return affinity


def facs_adjacency(au_ids: Sequence[int], K: int) -> np.ndarray:
    """Фіксований граф вузлів (N_ROI, K) за прототипами FACS"""
    return rank_adjacency(_node_affinity(facs_affinity(au_ids), au_ids), K)


def statistics_adjacency(labels: np.ndarray, au_ids: Sequence[int], K: int) -> np.ndarray:
    """
    Фіксований граф вузлів (N_ROI, K) за спільною появою AU в мітках

    Parameters:
    -----------
    labels : np.ndarray (M, N_AU)
        Мітки в порядку au_ids; порожній масив дає граф за індексами
    """
    labels = np.asarray(labels, dtype=np.float64).reshape(-1, len(au_ids))
    adjacency = rank_adjacency(_node_affinity(cooccurrence_affinity(labels), au_ids), K)
    logger.debug(f"Statistics graph from {labels.shape[0]} label rows")
    return adjacency


def fixed_adjacency(mode: str, au_ids: Sequence[int], K: int,
                    labels=None) -> np.ndarray:
    """Фіксований граф для graph_mode 'facs' або 'statistics'"""
    if mode == 'facs':
        return facs_adjacency(au_ids, K)
    if mode == 'statistics':
        if labels is None:
            labels = np.zeros((0, len(au_ids)))
        return statistics_adjacency(labels, au_ids, K)
    raise ValueError(f"No fixed graph for graph_mode '{mode}'")
