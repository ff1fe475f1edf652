"""
Тести циклу тренування, прогнозу та перевірки градієнтів мережі
"""

from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from autodiff import Tensor, no_grad
from data.loader import BatchLoader
from data.synthetic import SyntheticFaceGenerator
from export import export_graph
from model.fixed_graphs import statistics_adjacency
from training import Trainer, gradcheck_network
from utils.config_loader import AugmentConfig


def _trainer(model_cfg, loss_cfg, train_cfg, out=None, augment=None):
    return Trainer(model_cfg, loss_cfg, train_cfg, augment or AugmentConfig(enabled=False),
                   output_dir=out)


def _export_trace(trainer, dataset, out_dir):
    """Трасування графа першого обличчя після тренування"""
    model = trainer.model
    model.eval()
    batch = next(iter(BatchLoader(dataset, batch_size=1, input_size=32)))
    with no_grad():
        out = model(Tensor(batch.images, dtype=np.float32), gt_landmarks=batch.landmarks)
    paths = export_graph(out.trace, model.node_labels, {'image_id': batch.image_ids[0]}, out_dir,
                         au_ids=trainer.model_cfg.au_ids, focus=[1, 25])
    return paths['json']


def test_fit_writes_fold_artifacts(tmp_path, toy_model_cfg, toy_loss_cfg, toy_train_cfg,
                                   tiny_dataset):
    cfg = replace(toy_train_cfg, epochs=2, batch_size=4)
    trainer = _trainer(toy_model_cfg, toy_loss_cfg, cfg, out=tmp_path)
    history = trainer.fit(tiny_dataset, fold=2)

    assert list(history['epoch']) == [1, 2]
    assert list(history['step']) == [3, 6]
    assert trainer.step == 6
    assert np.all(np.isfinite(history['loss']))

    fold_dir = tmp_path / "fold2"
    for name in ["epoch1_metrics.csv", "epoch2_metrics.csv", "checkpoint_last.npz",
                 "checkpoint_best.npz", "history.csv"]:
        assert (fold_dir / name).exists(), name
    metrics = pd.read_csv(fold_dir / "epoch1_metrics.csv", dtype={'au_id': str})
    assert list(metrics['au_id']) == ['1', '12', '25', 'mean']


def test_class_weights_from_training_labels(toy_model_cfg, toy_loss_cfg, toy_train_cfg,
                                            tiny_dataset):
    trainer = _trainer(toy_model_cfg, toy_loss_cfg, replace(toy_train_cfg, max_steps=1))
    trainer.fit(tiny_dataset)
    assert trainer.omega.sum() == pytest.approx(toy_model_cfg.N_AU)


def test_max_steps_stops_early(toy_model_cfg, toy_loss_cfg, toy_train_cfg, tiny_dataset):
    cfg = replace(toy_train_cfg, batch_size=4, max_steps=4)
    history = _trainer(toy_model_cfg, toy_loss_cfg, cfg).fit(tiny_dataset)
    assert list(history['step']) == [3, 4]


def test_empty_training_set(toy_model_cfg, toy_loss_cfg, toy_train_cfg, tiny_dataset):
    empty = tiny_dataset.subset([])
    with pytest.raises(ValueError, match="empty"):
        _trainer(toy_model_cfg, toy_loss_cfg, toy_train_cfg).fit(empty)


def test_resume_continues_step_count(tmp_path, toy_model_cfg, toy_loss_cfg, toy_train_cfg,
                                     tiny_dataset):
    cfg = replace(toy_train_cfg, epochs=1, batch_size=4)
    first = _trainer(toy_model_cfg, toy_loss_cfg, cfg, out=tmp_path)
    first.fit(tiny_dataset)

    second = _trainer(toy_model_cfg, toy_loss_cfg, cfg)
    meta = second.resume(tmp_path / "fold1" / "checkpoint_last.npz")
    assert meta['step'] == 3
    assert second.step == 3
    assert second.optimizer.step_count == 3
    np.testing.assert_allclose(second.omega, first.omega)


def test_statistics_graph_built_from_training_labels(tmp_path, toy_model_cfg, toy_loss_cfg,
                                                     toy_train_cfg, tiny_dataset):
    model_cfg = replace(toy_model_cfg, sacl=replace(toy_model_cfg.sacl, graph_mode='statistics'))
    cfg = replace(toy_train_cfg, epochs=1, batch_size=4)
    trainer = _trainer(model_cfg, toy_loss_cfg, cfg, out=tmp_path)
    trainer.fit(tiny_dataset)

    expected = statistics_adjacency(tiny_dataset.labels, model_cfg.au_ids, model_cfg.sacl.K)
    np.testing.assert_array_equal(trainer.model.sacl.fixed_adjacency, expected)

    restored = _trainer(model_cfg, toy_loss_cfg, cfg)
    restored.resume(tmp_path / "fold1" / "checkpoint_last.npz")
    np.testing.assert_array_equal(restored.model.sacl.fixed_adjacency, expected)


def test_predict_table(tmp_path, toy_model_cfg, toy_loss_cfg, toy_train_cfg, tiny_dataset):
    trainer = _trainer(toy_model_cfg, toy_loss_cfg, toy_train_cfg)
    frame = trainer.predict(tiny_dataset, tmp_path / "predictions.csv")

    assert list(frame.columns) == ['image_id', 'p_au1', 'p_au12', 'p_au25',
                                   'pred_au1', 'pred_au12', 'pred_au25']
    assert len(frame) == len(tiny_dataset)
    assert frame['image_id'].tolist() == list(tiny_dataset.image_ids)
    probs = frame[['p_au1', 'p_au12', 'p_au25']].to_numpy()
    assert np.all((probs > 0) & (probs < 1))
    np.testing.assert_array_equal(frame[['pred_au1', 'pred_au12', 'pred_au25']].to_numpy(),
                                  (probs >= 0.5).astype(int))
    assert (tmp_path / "predictions.csv").exists()


def test_evaluate_shapes(toy_model_cfg, toy_loss_cfg, toy_train_cfg, tiny_dataset):
    result = _trainer(toy_model_cfg, toy_loss_cfg, toy_train_cfg).evaluate(tiny_dataset,
                                                                         batch_size=5)
    assert result.probs.shape == (12, 3)
    assert result.image_ids == list(tiny_dataset.image_ids)
    assert np.isfinite(result.loss)
    assert 0.0 <= result.report.mean_f1 <= 1.0


@pytest.mark.slow
def test_overfits_small_synthetic_set(toy_model_cfg, toy_loss_cfg, toy_train_cfg,
                                      toy_synth_cfg):
    dataset = SyntheticFaceGenerator(toy_synth_cfg, toy_model_cfg.au_ids, seed=0).generate(32)
    cfg = replace(toy_train_cfg, batch_size=8, epochs=50)
    history = _trainer(toy_model_cfg, toy_loss_cfg, cfg).fit(dataset)

    assert int(history['step'].iloc[-1]) == 200
    assert history['loss'].iloc[-1] < history['loss'].iloc[0]
    assert history['train_f1'].iloc[-1] >= 0.99


@pytest.mark.slow
def test_deterministic_runs_write_identical_artifacts(tmp_path, toy_model_cfg, toy_loss_cfg,
                                                 toy_train_cfg, toy_augment_cfg, tiny_dataset):
    cfg = replace(toy_train_cfg, batch_size=4, epochs=2, deterministic=True)
    for run in ("a", "b"):
        trainer = Trainer(toy_model_cfg, toy_loss_cfg, cfg, toy_augment_cfg,
                          output_dir=tmp_path / run)
        trainer.fit(tiny_dataset)
        graph = _export_trace(trainer, tiny_dataset, tmp_path / run / "graph")
        assert graph.exists()

    for name in ["epoch1_metrics.csv", "epoch2_metrics.csv", "history.csv"]:
        a = (tmp_path / "a" / "fold1" / name).read_bytes()
        b = (tmp_path / "b" / "fold1" / name).read_bytes()
        assert a == b, name
    a = (tmp_path / "a" / "graph" / "graph_trace.json").read_bytes()
    b = (tmp_path / "b" / "graph" / "graph_trace.json").read_bytes()
    assert a == b


@pytest.mark.slow
def test_network_gradients(toy_model_cfg, toy_loss_cfg, tiny_dataset):
    results = gradcheck_network(toy_model_cfg, toy_loss_cfg, tiny_dataset, seed=0)
    assert len(results) >= 2
    failed = [(r.name, r.rel_error) for r in results if not r.passed]
    assert not failed
