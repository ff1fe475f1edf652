"""
Batch loader
Формування батчів з аугментацією та необов'язковою попередньою вибіркою
у фонових потоках (обмежена черга)
"""

import logging
import queue
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np

from utils.config_loader import AugmentConfig

from .augment import augment_sample, center_crop, resolve_permutation
from .dataset import FaceDataset

logger = logging.getLogger(__name__)

_SENTINEL = object()


@dataclass
class Batch:
    """
    Attributes:
    -----------
    images : np.ndarray (B, 3, H, W), нормалізовані у [-1, 1]
    landmarks : np.ndarray (B, N_land, 2) у пікселях кадру
    labels : np.ndarray (B, N_AU)
    image_ids : list of str
    indices : np.ndarray (B,) індекси у датасеті
    """
    images: np.ndarray
    landmarks: np.ndarray
    labels: np.ndarray
    image_ids: List[str]
    indices: np.ndarray

    def __len__(self) -> int:
        return len(self.image_ids)


def to_input(images: np.ndarray, dtype=np.float32) -> np.ndarray:
    """(B, H, W, 3) у [0, 1] -> (B, 3, H, W), (x - 0.5) / 0.5"""
    images = np.asarray(images, dtype=dtype)
    return np.ascontiguousarray(((images - 0.5) / 0.5).transpose(0, 3, 1, 2))


class BatchLoader:
    """
    Ітератор батчів

    Випадковість зразка виводиться з (seed, epoch, index), а порядок
    перемішування з (seed, epoch), тому кількість потоків не впливає на
    результат. У детермінованому режимі завантаження синхронне.

    Parameters:
    -----------
    dataset : FaceDataset
    batch_size : int
    input_size : int
        Сторона кадру
    augment : AugmentConfig, optional
        None -> тільки центральне кадрування (оцінка)
    shuffle : bool
    seed : int
    num_workers : int
        Потоки для підготовки зразків (0 = синхронно)
    prefetch : int
        Розмір черги готових батчів
    deterministic : bool
    drop_last : bool
    """

    def __init__(self, dataset: FaceDataset, batch_size: int, input_size: int,
                 augment: Optional[AugmentConfig] = None, shuffle: bool = False, seed: int = 0,
                 num_workers: int = 0, prefetch: int = 4, deterministic: bool = True,
                 drop_last: bool = False):
        if batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {batch_size}")
        self.dataset = dataset
        self.batch_size = batch_size
        self.input_size = input_size
        self.augment = augment
        self.shuffle = shuffle
        self.seed = seed
        self.num_workers = 0 if deterministic else max(0, num_workers)
        self.prefetch = max(1, prefetch)
        self.drop_last = drop_last
        self.epoch = 0
        self.permutation = (resolve_permutation(augment, dataset.landmarks.shape[1])
                            if augment is not None else None)

        if deterministic and num_workers > 0:
            logger.info("Deterministic mode: loading on the main thread")

    def set_epoch(self, epoch: int):
        self.epoch = int(epoch)

    def __len__(self) -> int:
        n = len(self.dataset)
        if self.drop_last:
            return n // self.batch_size
        return (n + self.batch_size - 1) // self.batch_size

    def order(self) -> np.ndarray:
        n = len(self.dataset)
        if not self.shuffle:
            return np.arange(n)
        return np.random.default_rng([self.seed, self.epoch]).permutation(n)

    def _sample(self, index: int):
        image = self.dataset.images[index]
        landmarks = self.dataset.landmarks[index]
        if self.augment is None:
            return center_crop(image, landmarks, self.input_size)
        rng = np.random.default_rng([self.seed, self.epoch, int(index)])
        return augment_sample(image, landmarks, rng, self.augment, self.input_size,
                              self.permutation)

    def _collate(self, indices: np.ndarray, samples) -> Batch:
        images = np.stack([s[0] for s in samples])
        landmarks = np.stack([s[1] for s in samples])
        return Batch(
            images=to_input(images),
            landmarks=landmarks,
            labels=self.dataset.labels[indices],
            image_ids=[self.dataset.image_ids[i] for i in indices],
            indices=indices,
        )

    def _batches_of_indices(self) -> List[np.ndarray]:
        order = self.order()
        chunks = [order[i:i + self.batch_size] for i in range(0, len(order), self.batch_size)]
        if self.drop_last and chunks and len(chunks[-1]) < self.batch_size:
            chunks = chunks[:-1]
        return chunks

    def __iter__(self) -> Iterator[Batch]:
        chunks = self._batches_of_indices()
        if self.num_workers == 0:
            for idx in chunks:
                yield self._collate(idx, [self._sample(i) for i in idx])
            return
        yield from self._prefetched(chunks)

    def _prefetched(self, chunks: List[np.ndarray]) -> Iterator[Batch]:
        """Фоновий виробник заповнює обмежену чергу; порядок батчів зберігається"""
        ready: queue.Queue = queue.Queue(maxsize=self.prefetch)
        stop = threading.Event()

        def produce():
            try:
                with ThreadPoolExecutor(max_workers=self.num_workers) as pool:
                    for idx in chunks:
                        if stop.is_set():
                            break
                        samples = list(pool.map(self._sample, idx))
                        ready.put(self._collate(idx, samples))
            except Exception as e:  # передати у головний потік
                ready.put(e)
            finally:
                ready.put(_SENTINEL)

        worker = threading.Thread(target=produce, daemon=True)
        worker.start()
        try:
            while True:
                item = ready.get()
                if item is _SENTINEL:
                    break
                if isinstance(item, Exception):
                    raise item
                yield item
        finally:
            stop.set()
            # Звільнити місце, щоб виробник не блокувався на put
            while worker.is_alive():
                try:
                    ready.get_nowait()
                except queue.Empty:
                    worker.join(timeout=0.05)
