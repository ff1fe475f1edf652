"""
AU Graph Net - Main Orchestration Script
Головний скрипт для тренування, оцінки та експорту графа кореляцій AU

Usage:
    python main.py synth --config config/toy.yaml --out data/synthetic
    python main.py train --config config/toy.yaml --dataset data/synthetic --fold 1 --out runs/toy
    python main.py eval --config config/toy.yaml --dataset data/synthetic --fold 1 --out runs/toy
    python main.py predict --config config/toy.yaml --dataset data/synthetic --out runs/toy
    python main.py export-graph --config config/toy.yaml --dataset data/synthetic --focus 1 12
    python main.py gradcheck --config config/toy.yaml
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

# Додати src до Python path
sys.path.insert(0, str(Path(__file__).parent / 'src'))

from autodiff import Tensor, default_dtype, no_grad
from autodiff.gradcheck import run_kernel_suite
from data.dataset import FaceDataset, assign_folds, load_dataset, split_fold
from data.loader import BatchLoader
from data.synthetic import SyntheticFaceGenerator
from export.graph_export import export_graph
from losses.metrics import write_metrics_csv
from model.network import complexity_report
from training.trainer import Trainer, gradcheck_network
from utils.config_loader import (
    create_output_paths,
    get_augment_config,
    get_data_config,
    get_loss_config,
    get_model_config,
    get_synth_config,
    get_train_config,
    load_config,
    validate_config,
)
from utils.errors import ConfigError
from utils.logging_setup import log_banner, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_GRADCHECK_FAILED = 2


class AUDetectionPipeline:
    """Головний pipeline детекції AU"""

    def __init__(self, config_path: str = "config/config.yaml", seed: Optional[int] = None,
                 deterministic: bool = False, fold: Optional[int] = None,
                 dataset: Optional[str] = None, out_dir: Optional[str] = None):
        """
        Parameters:
        -----------
        config_path : str
            Шлях до конфігураційного файлу
        seed, deterministic, fold, dataset, out_dir
            Перевизначення значень конфігурації з командного рядка
        """
        log_banner(logger, "AU GRAPH NET - Facial Action Unit Detection Pipeline")

        # Завантажити та перевірити конфігурацію
        self.config = load_config(config_path)
        validate_config(self.config)
        logger.info(f"Configuration loaded from {config_path}")

        self.model_cfg = get_model_config(self.config)
        self.loss_cfg = get_loss_config(self.config)
        self.train_cfg = get_train_config(self.config)
        self.augment_cfg = get_augment_config(self.config)
        self.data_cfg = get_data_config(self.config)
        self.synth_cfg = get_synth_config(self.config)

        # Перевизначення з CLI
        if seed is not None:
            self.train_cfg.seed = seed
        if deterministic:
            self.train_cfg.deterministic = True
        if fold is not None:
            self.train_cfg.fold = fold
        self.dataset_dir = dataset or self.config.get('paths', {}).get('dataset')

        self.paths = create_output_paths(self.config, out_dir)
        setup_logging(log_dir=str(self.paths['output']))

        logger.info(f"AUs: {self.model_cfg.au_ids}")
        logger.info(f"Input: {self.model_cfg.backbone.H}x{self.model_cfg.backbone.W}, "
                    f"d0={self.model_cfg.backbone.d0}, D={self.model_cfg.sacl.D}")
        logger.info(f"Seed: {self.train_cfg.seed}, deterministic: {self.train_cfg.deterministic}, "
                    f"fold: {self.train_cfg.fold}")

    # --- data ---
    def _synthesize(self, n: Optional[int] = None) -> FaceDataset:
        if self.synth_cfg.image_size != self.data_cfg.aligned_size:
            raise ConfigError(f"synth.image_size={self.synth_cfg.image_size} must equal "
                              f"data.aligned_size={self.data_cfg.aligned_size} for in-memory data")
        generator = SyntheticFaceGenerator(self.synth_cfg, self.model_cfg.au_ids,
                                           seed=self.train_cfg.seed)
        return generator.generate(n)

    def load_data(self) -> FaceDataset:
        """Датасет з --dataset або синтетичний у пам'яті"""
        if self.dataset_dir is None:
            logger.warning("No dataset directory given, generating a synthetic dataset in memory")
            dataset = self._synthesize()
        else:
            dataset = load_dataset(self.dataset_dir, self.model_cfg.au_ids, self.data_cfg)
        assign_folds(dataset, self.data_cfg)
        return dataset

    def _split(self, dataset: FaceDataset):
        return split_fold(dataset, self.train_cfg.fold)

    def _trainer(self) -> Trainer:
        return Trainer(self.model_cfg, self.loss_cfg, self.train_cfg, self.augment_cfg,
                       output_dir=self.paths['output'])

    def _checkpoint(self, path: Optional[str]) -> Path:
        if path is not None:
            return Path(path)
        return self.paths['output'] / f"fold{self.train_cfg.fold}" / "checkpoint_best.npz"

    # --- commands ---
    def synth(self, n: Optional[int] = None) -> Path:
        """Згенерувати синтетичний датасет на диск"""
        log_banner(logger, "SYNTHETIC DATASET")
        generator = SyntheticFaceGenerator(self.synth_cfg, self.model_cfg.au_ids,
                                           seed=self.train_cfg.seed)
        dataset = generator.generate(n)
        root = Path(self.dataset_dir) if self.dataset_dir is not None else self.paths['output']
        return generator.save(dataset, root)

    def train(self):
        """Тренування на обраному фолді"""
        log_banner(logger, f"TRAINING (fold {self.train_cfg.fold})")
        train_set, test_set = self._split(self.load_data())
        trainer = self._trainer()
        history = trainer.fit(train_set, test_set, fold=self.train_cfg.fold)
        if not history.empty:
            logger.info(f"Best eval mean F1: {history['eval_f1'].max():.4f}")
        return history

    def evaluate(self, checkpoint: Optional[str] = None):
        """Оцінити чекпойнт на тестовому фолді"""
        log_banner(logger, f"EVALUATION (fold {self.train_cfg.fold})")
        _, test_set = self._split(self.load_data())
        trainer = self._trainer()
        trainer.resume(self._checkpoint(checkpoint))

        with default_dtype(self.model_cfg.dtype):
            complexity = complexity_report(trainer.model)
        logger.info(f"Parameters: {complexity['parameters']:,}, "
                    f"MACs: {complexity['macs']:,}, FLOPs: {complexity['flops']:,}")

        result = trainer.evaluate(test_set)
        for au, f1, acc in zip(result.report.au_ids, result.report.f1, result.report.accuracy):
            logger.info(f"  AU{au:<3d} F1 {f1:.4f}  accuracy {acc:.4f}")
        write_metrics_csv(result.report,
                          self.paths['output'] / f"fold{self.train_cfg.fold}" / "eval_metrics.csv")
        return result

    def predict(self, checkpoint: Optional[str] = None, split: str = "test"):
        """Передбачення AU у CSV"""
        log_banner(logger, "PREDICTION")
        dataset = self.load_data()
        if split != "all":
            train_set, test_set = self._split(dataset)
            dataset = test_set if split == "test" else train_set
        trainer = self._trainer()
        trainer.resume(self._checkpoint(checkpoint))
        return trainer.predict(dataset, self.paths['output'] / "predictions.csv")

    def export_graph(self, checkpoint: Optional[str] = None, focus: Optional[List[int]] = None,
                     png: bool = False):
        """Один прямий прохід та експорт трасування графа"""
        log_banner(logger, "GRAPH EXPORT")
        _, test_set = self._split(self.load_data())
        trainer = self._trainer()
        ckpt = self._checkpoint(checkpoint)
        if ckpt.exists():
            trainer.resume(ckpt)
        else:
            logger.warning(f"Checkpoint {ckpt} not found, exporting the graph of an untrained model")

        model = trainer.model
        model.eval()
        batch = next(iter(BatchLoader(test_set, batch_size=1, input_size=self.model_cfg.backbone.H)))
        with no_grad(), default_dtype(self.model_cfg.dtype):
            out = model(Tensor(batch.images, dtype=np.dtype(self.model_cfg.dtype)),
                        gt_landmarks=batch.landmarks)
            complexity = complexity_report(model)

        sacl = self.model_cfg.sacl
        config = {
            'K': sacl.K, 'S': sacl.S, 'L': list(sacl.L), 'metric': sacl.metric,
            'graph_mode': sacl.graph_mode,
            'image_id': batch.image_ids[0],
            **complexity,
        }
        return export_graph(out.trace, model.node_labels, config, self.paths['output'],
                            au_ids=self.model_cfg.au_ids, focus=focus, png=png)

    def gradcheck(self, repeats: int = 20) -> bool:
        """Перевірка градієнтів усіх ядер та повної мережі"""
        log_banner(logger, "GRADIENT CHECK")
        results = run_kernel_suite(seed=self.train_cfg.seed, repeats=repeats)
        dataset = self._synthesize(n=max(4, self.synth_cfg.n_subjects))
        results += gradcheck_network(self.model_cfg, self.loss_cfg, dataset,
                                     seed=self.train_cfg.seed)
        failed = [r for r in results if not r.passed]
        worst = max(results, key=lambda r: r.rel_error)
        logger.info(f"{len(results) - len(failed)}/{len(results)} checks passed, "
                    f"worst {worst.name} rel_err={worst.rel_error:.2e}")
        for r in failed:
            logger.error(f"FAILED {r.name}: rel_err={r.rel_error:.2e}")
        return not failed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="AU Graph Net - Facial Action Unit Detection Pipeline"
    )
    parser.add_argument(
        'command',
        choices=['train', 'eval', 'predict', 'export-graph', 'synth', 'gradcheck'],
        help='Pipeline command to run'
    )
    parser.add_argument('--config', type=str, default='config/config.yaml',
                        help='Path to configuration file')
    parser.add_argument('--dataset', type=str, default=None,
                        help='Dataset directory (manifest layout); synth writes here')
    parser.add_argument('--fold', type=int, choices=[1, 2, 3], default=None,
                        help='Test fold')
    parser.add_argument('--seed', type=int, default=None, help='Random seed')
    parser.add_argument('--deterministic', action='store_true',
                        help='Single-lane loading and fixed reduction order')
    parser.add_argument('--out', type=str, default=None, help='Output directory')
    parser.add_argument('--checkpoint', type=str, default=None,
                        help='Checkpoint for eval/predict/export-graph')
    parser.add_argument('--focus', type=int, nargs='+', default=None,
                        help='AU ids whose neighbourhoods are added to the graph export')
    parser.add_argument('--png', action='store_true', help='Also render the final graph as PNG')
    parser.add_argument('--split', choices=['test', 'train', 'all'], default='test',
                        help='Samples to predict')
    parser.add_argument('--n', type=int, default=None, help='Number of synthetic samples')
    parser.add_argument('--repeats', type=int, default=20,
                        help='Random shapes per kernel in gradcheck')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    setup_logging()

    try:
        pipeline = AUDetectionPipeline(config_path=args.config, seed=args.seed,
                                       deterministic=args.deterministic, fold=args.fold,
                                       dataset=args.dataset, out_dir=args.out)

        if args.command == 'synth':
            pipeline.synth(args.n)
        elif args.command == 'train':
            pipeline.train()
        elif args.command == 'eval':
            pipeline.evaluate(args.checkpoint)
        elif args.command == 'predict':
            pipeline.predict(args.checkpoint, args.split)
        elif args.command == 'export-graph':
            pipeline.export_graph(args.checkpoint, args.focus, args.png)
        elif args.command == 'gradcheck':
            if not pipeline.gradcheck(args.repeats):
                return EXIT_GRADCHECK_FAILED
    except (ValueError, FloatingPointError, FileNotFoundError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_ERROR

    log_banner(logger, f"{args.command.upper()} COMPLETED SUCCESSFULLY!")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
