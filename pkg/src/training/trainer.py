"""
Training and evaluation loops
Цикл тренування по фолду, оцінка, передбачення та перевірка градієнтів
повної мережі
"""

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from autodiff import Tensor, default_dtype, no_grad
from autodiff.gradcheck import GradCheckResult, check_gradients
from data.dataset import FaceDataset
from data.loader import BatchLoader
from geometry.au_centers import interocular_scale
from losses.losses import class_weights, compute_losses, occurrence_rates
from losses.metrics import MetricsReport, binarize, f1_and_accuracy, write_metrics_csv
from model.fixed_graphs import statistics_adjacency
from model.network import AUNet
from utils.config_loader import (
    AugmentConfig,
    LossConfig,
    ModelConfig,
    TrainConfig,
)

from .checkpoint import load_checkpoint, save_checkpoint
from .optimizer import SGD, clip_grad_norm, cosine_warmup_lr

logger = logging.getLogger(__name__)


def build_model(cfg: ModelConfig, seed: int = 0) -> AUNet:
    """Мережа з вагами, ініціалізованими генератором default_rng(seed)"""
    with default_dtype(cfg.dtype):
        return AUNet(cfg, np.random.default_rng(seed))


@dataclass
class EvaluationResult:
    report: MetricsReport
    probs: np.ndarray
    image_ids: List[str]
    loss: float


class Trainer:
    """
    Тренування мережі детекції AU на одному фолді

    Parameters:
    -----------
    model_cfg, loss_cfg, train_cfg, augment_cfg : конфігурації
    output_dir : Path
        Кореневий вихід; артефакти фолду пишуться у output_dir / fold<k>
    """

    def __init__(self, model_cfg: ModelConfig, loss_cfg: LossConfig, train_cfg: TrainConfig,
                 augment_cfg: Optional[AugmentConfig] = None, output_dir=None):
        self.model_cfg = model_cfg
        self.loss_cfg = loss_cfg
        self.train_cfg = train_cfg
        self.augment_cfg = augment_cfg or AugmentConfig()
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.model = build_model(model_cfg, train_cfg.seed)
        self.optimizer = SGD(list(self.model.named_parameters()), momentum=train_cfg.momentum,
                             nesterov=train_cfg.nesterov, weight_decay=train_cfg.weight_decay)
        self.omega = np.ones(model_cfg.N_AU)
        self.step = 0
        self.best_metric = -math.inf

    # --- helpers ---
    def _scale(self, landmarks: np.ndarray) -> np.ndarray:
        geo = self.model_cfg.geometry
        return interocular_scale(landmarks, geo.inner_eye_corners, geo.index_base)

    def _loader(self, dataset: FaceDataset, train: bool, shuffle: bool = False,
                batch_size: Optional[int] = None) -> BatchLoader:
        cfg = self.train_cfg
        return BatchLoader(
            dataset,
            batch_size=batch_size or cfg.batch_size,
            input_size=self.model_cfg.backbone.H,
            augment=self.augment_cfg if train else None,
            shuffle=shuffle,
            seed=cfg.seed,
            num_workers=cfg.num_workers,
            prefetch=cfg.prefetch,
            deterministic=cfg.deterministic,
        )

    def _fold_dir(self, fold: int) -> Optional[Path]:
        if self.output_dir is None:
            return None
        path = self.output_dir / f"fold{fold}"
        path.mkdir(parents=True, exist_ok=True)
        return path

    def train_step(self, batch, lr: float) -> Dict[str, float]:
        """Прямий прохід, втрати, backward, обрізання та крок SGD"""
        self.model.train()
        images = Tensor(batch.images, dtype=np.dtype(self.model_cfg.dtype))
        out = self.model(images, gt_landmarks=batch.landmarks)
        losses = compute_losses(batch.labels, out.probs, self.omega, batch.landmarks,
                                out.landmarks, self._scale(batch.landmarks), self.loss_cfg)
        self.optimizer.zero_grad()
        losses.total.backward()
        norm = clip_grad_norm(self.optimizer.params, self.train_cfg.clip_norm)
        self.optimizer.step(lr)
        self.step += 1
        return {
            'loss': losses.total.item(),
            'wa': losses.wa,
            'dice': losses.dice,
            'land': losses.land,
            'grad_norm': norm,
            'probs': out.probs.data,
        }

    # --- main loop ---
    def fit(self, train_set: FaceDataset, test_set: Optional[FaceDataset] = None,
            fold: int = 1) -> pd.DataFrame:
        """
        Тренувати на train_set; після кожної епохи оцінити на test_set
        (або на train_set, якщо тестового немає)

        Returns:
        --------
        history : pd.DataFrame
            epoch, step, lr, loss, wa, dice, land, train_f1, eval_f1, eval_accuracy
        """
        cfg = self.train_cfg
        if len(train_set) == 0:
            raise ValueError("Training set is empty")

        self.omega = class_weights(occurrence_rates(train_set.labels))
        logger.info(f"Class weights: {np.round(self.omega, 4).tolist()}")
        sacl = self.model_cfg.sacl
        if sacl.graph_mode == 'statistics':
            self.model.sacl.set_fixed_adjacency(
                statistics_adjacency(train_set.labels, self.model_cfg.au_ids, sacl.K)
            )
            logger.info(f"Statistics graph built from {len(train_set)} training labels")

        loader = self._loader(train_set, train=True, shuffle=True)
        steps_per_epoch = len(loader)
        total_steps = cfg.epochs * steps_per_epoch
        if cfg.max_steps is not None:
            total_steps = min(total_steps, cfg.max_steps) if cfg.epochs else cfg.max_steps
        n_epochs = math.ceil(total_steps / steps_per_epoch)
        warmup_steps = cfg.warmup_epochs * steps_per_epoch
        fold_dir = self._fold_dir(fold)

        logger.info(f"Training fold {fold}: {len(train_set)} samples, {steps_per_epoch} steps/epoch, "
                    f"{total_steps} steps, warm-up {warmup_steps}")

        history = []
        with default_dtype(self.model_cfg.dtype):
            for epoch in range(1, n_epochs + 1):
                loader.set_epoch(epoch)
                sums = {'loss': 0.0, 'wa': 0.0, 'dice': 0.0, 'land': 0.0}
                n_batches = 0
                train_probs, train_labels = [], []
                lr = 0.0

                progress = tqdm(loader, desc=f"fold {fold} epoch {epoch}/{n_epochs}",
                                leave=False, disable=not logger.isEnabledFor(logging.INFO))
                for batch in progress:
                    if self.step >= total_steps:
                        break
                    lr = cosine_warmup_lr(self.step, total_steps, warmup_steps, cfg.lr_max)
                    result = self.train_step(batch, lr)
                    for key in sums:
                        sums[key] += result[key]
                    n_batches += 1
                    train_probs.append(result['probs'])
                    train_labels.append(batch.labels)
                    progress.set_postfix(loss=f"{result['loss']:.4f}", lr=f"{lr:.2e}")
                progress.close()

                if n_batches == 0:
                    break
                means = {k: v / n_batches for k, v in sums.items()}
                train_report = f1_and_accuracy(binarize(np.concatenate(train_probs), cfg.threshold),
                                               np.concatenate(train_labels), self.model_cfg.au_ids)
                evaluation = self.evaluate(test_set if test_set is not None else train_set)

                row = {'epoch': epoch, 'step': self.step, 'lr': lr, **means,
                       'train_f1': train_report.mean_f1,
                       'eval_f1': evaluation.report.mean_f1,
                       'eval_accuracy': evaluation.report.mean_accuracy}
                history.append(row)
                logger.info(f"Epoch {epoch}: loss {means['loss']:.4f} (wa {means['wa']:.4f}, "
                            f"dice {means['dice']:.4f}, land {means['land']:.4f}), "
                            f"train F1 {train_report.mean_f1:.4f}, "
                            f"eval F1 {evaluation.report.mean_f1:.4f}, lr {lr:.2e}")

                if fold_dir is not None:
                    write_metrics_csv(evaluation.report, fold_dir / f"epoch{epoch}_metrics.csv")
                    meta = self._meta(epoch, fold)
                    save_checkpoint(fold_dir / "checkpoint_last.npz", self.model, self.optimizer, meta)
                    if evaluation.report.mean_f1 > self.best_metric:
                        self.best_metric = evaluation.report.mean_f1
                        meta['best_metric'] = self.best_metric
                        save_checkpoint(fold_dir / "checkpoint_best.npz", self.model,
                                        self.optimizer, meta)
                else:
                    self.best_metric = max(self.best_metric, evaluation.report.mean_f1)

        frame = pd.DataFrame(history)
        if fold_dir is not None:
            frame.to_csv(fold_dir / "history.csv", index=False, float_format='%.6f')
        return frame

    def _meta(self, epoch: int, fold: int) -> Dict:
        return {
            'step': self.step,
            'epoch': epoch,
            'fold': fold,
            'best_metric': self.best_metric if math.isfinite(self.best_metric) else None,
            'seed': self.train_cfg.seed,
            'omega': [float(w) for w in self.omega],
            'au_ids': list(self.model_cfg.au_ids),
        }

    def resume(self, path) -> Dict:
        """Відновити модель, момент, крок та ваги класів з чекпойнта"""
        meta = load_checkpoint(path, self.model, self.optimizer)
        self.step = int(meta.get('step', 0))
        if meta.get('best_metric') is not None:
            self.best_metric = float(meta['best_metric'])
        if meta.get('omega'):
            self.omega = np.asarray(meta['omega'], dtype=np.float64)
        return meta

    # --- inference ---
    def infer(self, dataset: FaceDataset, batch_size: Optional[int] = None):
        """Ймовірності (M, N_AU) у режимі eval"""
        self.model.eval()
        loader = self._loader(dataset, train=False, batch_size=batch_size)
        probs, total_loss, n = [], 0.0, 0
        with no_grad(), default_dtype(self.model_cfg.dtype):
            for batch in loader:
                images = Tensor(batch.images, dtype=np.dtype(self.model_cfg.dtype))
                out = self.model(images, gt_landmarks=batch.landmarks)
                losses = compute_losses(batch.labels, out.probs, self.omega, batch.landmarks,
                                        out.landmarks, self._scale(batch.landmarks), self.loss_cfg)
                total_loss += losses.total.item() * len(batch)
                n += len(batch)
                probs.append(out.probs.data.astype(np.float64))
        self.model.train()
        stacked = np.concatenate(probs) if probs else np.zeros((0, self.model_cfg.N_AU))
        return stacked, total_loss / max(n, 1)

    def evaluate(self, dataset: FaceDataset, batch_size: Optional[int] = None) -> EvaluationResult:
        probs, loss = self.infer(dataset, batch_size)
        report = f1_and_accuracy(binarize(probs, self.train_cfg.threshold), dataset.labels,
                                 self.model_cfg.au_ids)
        return EvaluationResult(report=report, probs=probs, image_ids=list(dataset.image_ids),
                                loss=loss)

    def predict(self, dataset: FaceDataset, path=None) -> pd.DataFrame:
        """
        Таблиця image_id,p_au<ID>...,pred_au<ID>...

        Якщо вказано path, таблиця записується у CSV.
        """
        probs, _ = self.infer(dataset)
        preds = binarize(probs, self.train_cfg.threshold)
        frame = pd.DataFrame({'image_id': dataset.image_ids})
        for j, au in enumerate(self.model_cfg.au_ids):
            frame[f"p_au{au}"] = probs[:, j]
        for j, au in enumerate(self.model_cfg.au_ids):
            frame[f"pred_au{au}"] = preds[:, j]
        if path is not None:
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(path, index=False, float_format='%.6f')
            logger.info(f"Predictions saved: {path} ({len(frame)} rows)")
        return frame


def gradcheck_network(model_cfg: ModelConfig, loss_cfg: LossConfig, dataset: FaceDataset,
                      seed: int = 0, batch_size: int = 2, max_entries: int = 20,
                      n_param_tensors: int = 6, tol: float = 1e-4,
                      atol: float = 1e-3) -> List[GradCheckResult]:
    """
    Перевірка градієнтів повного шляху: втрати -> голова -> SACL -> MSFL -> бекбон

    float64, центри ROI з ground truth (вікна фіксовані під збуренням),
    BatchNorm у режимі eval. Перевіряються вхідне зображення та кілька
    тензорів параметрів, по max_entries елементів кожен. atol - нижня межа
    знаменника відносної похибки (градієнти глибоких шарів ~1e-5).
    """
    cfg = replace(model_cfg, dtype='float64',
                  geometry=replace(model_cfg.geometry, roi_source='ground_truth'))
    rng = np.random.default_rng(seed)

    with default_dtype(np.float64):
        model = AUNet(cfg, np.random.default_rng(seed))
        model.eval()
        loader = BatchLoader(dataset, batch_size=batch_size, input_size=cfg.backbone.H)
        batch = next(iter(loader))
        images = Tensor(batch.images.astype(np.float64), requires_grad=True, dtype=np.float64)
        omega = class_weights(occurrence_rates(dataset.labels))
        d_o = interocular_scale(batch.landmarks, cfg.geometry.inner_eye_corners,
                                cfg.geometry.index_base)

        def loss_fn() -> Tensor:
            out = model(images, gt_landmarks=batch.landmarks)
            return compute_losses(batch.labels, out.probs, omega, batch.landmarks,
                                  out.landmarks, d_o, loss_cfg).total

        named = list(model.named_parameters())
        picks = np.linspace(0, len(named) - 1, num=min(n_param_tensors, len(named))).astype(int)
        results = [check_gradients("network/input", loss_fn, [images], max_entries=max_entries,
                                   rng=rng, tol=tol, atol=atol)]
        for i in sorted(set(picks.tolist())):
            name, param = named[i]
            results.append(check_gradients(f"network/{name}", loss_fn, [param],
                                           max_entries=max_entries, rng=rng, tol=tol,
                                           atol=atol))

    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"Network gradient check failed for {failed}")
    else:
        logger.info(f"Network gradient check passed ({len(results)} tensors)")
    return results
