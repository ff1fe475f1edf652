"""
Landmark geometry: AU centers and ROI windows
"""

from .au_centers import (
    AU_CENTER_SPECS,
    DATASET_AU_IDS,
    DEFAULT_INNER_EYE_CORNERS,
    N_LANDMARKS,
    AUCenterSpec,
    CenterDefinition,
    center_labels,
    compute_au_centers,
    interocular_scale,
    node_owners,
    num_rois,
    unique_center_specs,
)
from .roi import crop_rois, roi_size, window_origins

__all__ = [
    'AU_CENTER_SPECS',
    'DATASET_AU_IDS',
    'DEFAULT_INNER_EYE_CORNERS',
    'N_LANDMARKS',
    'AUCenterSpec',
    'CenterDefinition',
    'center_labels',
    'compute_au_centers',
    'interocular_scale',
    'node_owners',
    'num_rois',
    'unique_center_specs',
    'crop_rois',
    'roi_size',
    'window_origins',
]
