"""
Full AU detection network
Повна мережа: стем -> (MSFL, LP -> центри AU -> ROI -> SACL) -> голова
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from autodiff import Module, Tensor, count_macs, count_parameters, no_grad
from geometry.au_centers import center_labels, compute_au_centers, num_rois
from geometry.roi import crop_rois, roi_size
from utils.config_loader import ModelConfig
from utils.errors import ConfigError

from .backbone import Backbone
from .head import DetectionHead
from .msfl import flatten_tokens, fuse
from .fixed_graphs import fixed_adjacency
from .sacl import SACL, GraphTrace

logger = logging.getLogger(__name__)


@dataclass
class NetworkOutput:
    """
    Attributes:
    -----------
    probs : Tensor (B, N_AU)
    landmarks : Tensor (B, N_land, 2) передбачені, пікселі входу
    centers : np.ndarray (B, N_ROI, 2)
    trace : GraphTrace
    """
    probs: Tensor
    landmarks: Tensor
    centers: np.ndarray
    trace: GraphTrace


class AUNet(Module):
    """
    Мережа детекції AU

    Parameters:
    -----------
    cfg : ModelConfig
    rng : np.random.Generator
        Генератор для ініціалізації ваг (детермінований для фіксованого seed)
    """

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        bb = cfg.backbone
        sacl = cfg.sacl
        if sacl.D != 15 * bb.d0:
            raise ConfigError(f"D must equal 15*d0 = {15 * bb.d0}, got {sacl.D}")

        self.cfg = cfg
        self.n_roi = num_rois(cfg.au_ids)
        self.s_roi = roi_size(cfg.geometry.xi, bb.H)
        self.d1 = self.s_roi * self.s_roi * bb.d0
        self.node_labels = center_labels(cfg.au_ids)

        self.backbone = Backbone(bb, rng)
        fixed = None
        if sacl.graph_mode != 'dynamic':
            fixed = fixed_adjacency(sacl.graph_mode, cfg.au_ids, sacl.K)
        self.sacl = SACL(self.d1, sacl, rng, fixed_adjacency=fixed)
        self.head = DetectionHead(sacl.D, cfg.N_AU, rng, hidden=cfg.head.hidden)

        logger.info(f"AUNet: {cfg.N_AU} AUs, N_ROI={self.n_roi}, s_roi={self.s_roi}, "
                    f"d1={self.d1}, D={sacl.D}, params={count_parameters(self):,}")

    def roi_centers(self, landmarks: np.ndarray) -> np.ndarray:
        geo = self.cfg.geometry
        return compute_au_centers(landmarks, self.cfg.au_ids,
                                  inner_eye_corners=geo.inner_eye_corners,
                                  index_base=geo.index_base)

    def forward(self, images: Tensor, gt_landmarks: Optional[np.ndarray] = None) -> NetworkOutput:
        """
        Parameters:
        -----------
        images : Tensor (B, 3, H, W)
        gt_landmarks : np.ndarray (B, N_land, 2), optional
            Потрібні, коли geometry.roi_source == 'ground_truth'
        """
        geo = self.cfg.geometry
        F = self.backbone.stem_forward(images)
        pyramid = self.backbone.stages_forward(F)
        A = fuse(pyramid, self.cfg.msfl.interpolation, self.cfg.msfl.drop_stages)
        aprime = flatten_tokens(A)

        pred_landmarks = self.backbone.lp_forward(F)
        if geo.roi_source == 'ground_truth':
            if gt_landmarks is None:
                raise ValueError("roi_source is 'ground_truth' but no landmarks were given")
            source = np.asarray(gt_landmarks)
        else:
            source = pred_landmarks.data
        centers = self.roi_centers(source)

        rois = crop_rois(F, centers, geo.eta, geo.xi, self.cfg.backbone.H)
        b, trace = self.sacl(rois)
        probs = self.head(aprime, b)
        return NetworkOutput(probs=probs, landmarks=pred_landmarks, centers=centers, trace=trace)


def complexity_report(model: AUNet) -> Dict[str, int]:
    """Кількість параметрів та MAC/FLOP одного прямого проходу (batch = 1)"""
    bb = model.cfg.backbone
    image = Tensor(np.zeros((1, 3, bb.H, bb.W)), dtype=model.backbone.stem.conv1.conv.weight.dtype)
    geo = model.cfg.geometry
    was_training, source = model.training, geo.roi_source
    model.eval()
    geo.roi_source = 'ground_truth'
    try:
        with no_grad(), count_macs() as counter:
            model(image, gt_landmarks=_placeholder_landmarks(model))
    finally:
        geo.roi_source = source
        model.train(was_training)
    return {
        'parameters': count_parameters(model),
        'macs': counter.total,
        'flops': counter.flops,
    }


def _placeholder_landmarks(model: AUNet) -> np.ndarray:
    """Рівномірна решітка точок, щоб міжочна відстань була ненульовою"""
    n = model.cfg.backbone.N_land
    size = model.cfg.backbone.H
    xs = np.linspace(0.2, 0.8, n) * size
    return np.stack([xs, np.full(n, size / 2.0)], axis=-1)[None]
