"""
Convolutional pyramid backbone and landmarks predictor
Згорткова піраміда (стем + 4 стадії) та Landmarks Predictor (LP)

Контракт піраміди:
- F  : (B, d0, H/4, W/4)  базові ознаки стему
- F1 : (B, d0, H/4, W/4)
- F2 : (B, 2d0, H/8, W/8)
- F3 : (B, 4d0, H/16, W/16)
- F4 : (B, 8d0, H/32, W/32)
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from autodiff import BatchNorm2d, Conv2d, Linear, Module, ModuleList, Tensor, ops
from utils.config_loader import BackboneConfig
from utils.errors import ConfigError, DimensionError

logger = logging.getLogger(__name__)


@dataclass
class FeaturePyramid:
    F1: Tensor
    F2: Tensor
    F3: Tensor
    F4: Tensor

    def stages(self) -> List[Tensor]:
        return [self.F1, self.F2, self.F3, self.F4]


class ConvBNReLU(Module):
    """conv3x3 -> BatchNorm -> ReLU"""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator,
                 stride: int = 1):
        super().__init__()
        self.conv = Conv2d(in_channels, out_channels, 3, rng, stride=stride, padding=1)
        self.bn = BatchNorm2d(out_channels)

    def forward(self, x: Tensor) -> Tensor:
        return ops.relu(self.bn(self.conv(x)))


class Stem(Module):
    """Два перекривні stride-2 conv блоки: (3, H, W) -> (d0, H/4, W/4)"""

    def __init__(self, d0: int, rng: np.random.Generator):
        super().__init__()
        mid = max(1, d0 // 2)
        self.conv1 = ConvBNReLU(3, mid, rng, stride=2)
        self.conv2 = ConvBNReLU(mid, d0, rng, stride=2)

    def forward(self, image: Tensor) -> Tensor:
        return self.conv2(self.conv1(image))


class Stage(Module):
    """Стадія піраміди; перший блок стадій 2-4 зменшує простір і подвоює канали"""

    def __init__(self, in_channels: int, out_channels: int, n_blocks: int,
                 rng: np.random.Generator, downsample: bool):
        super().__init__()
        self.blocks = ModuleList()
        stride = 2 if downsample else 1
        self.blocks.append(ConvBNReLU(in_channels, out_channels, rng, stride=stride))
        for _ in range(max(n_blocks, 1) - 1):
            self.blocks.append(ConvBNReLU(out_channels, out_channels, rng))

    def forward(self, x: Tensor) -> Tensor:
        for block in self.blocks:
            x = block(x)
        return x


class LandmarksPredictor(Module):
    """
    Три блоки [conv-BN-ReLU x2, maxpool 2] -> flatten -> FC до 2*N_land

    Виходи інтерпретуються як (x, y) у пікселях входу:
    pixel = (raw + 0.5) * input_size.
    """

    def __init__(self, d0: int, input_size: int, n_land: int, channels: List[int],
                 rng: np.random.Generator):
        super().__init__()
        self.input_size = input_size
        self.n_land = n_land
        self.blocks = ModuleList()
        c_in = d0
        for c_out in channels:
            block = ModuleList([ConvBNReLU(c_in, c_out, rng), ConvBNReLU(c_out, c_out, rng)])
            self.blocks.append(block)
            c_in = c_out
        grid = input_size // 4 // (2 ** len(channels))
        if grid < 1:
            raise ConfigError(f"LP pools input {input_size} below one cell")
        self.fc = Linear(c_in * grid * grid, 2 * n_land, rng)

    def forward(self, F: Tensor) -> Tensor:
        x = F
        for block in self.blocks:
            for layer in block:
                x = layer(x)
            x = ops.maxpool2d(x, 2, 2)
        raw = self.fc(ops.flatten(x, 1))                       # (B, 2N)
        coords = ops.reshape(raw, (raw.shape[0], self.n_land, 2))
        return ops.mul(ops.add(coords, 0.5), float(self.input_size))


class Backbone(Module):
    """Стем + чотири стадії + LP"""

    def __init__(self, cfg: BackboneConfig, rng: np.random.Generator):
        super().__init__()
        if cfg.H % 32 or cfg.W % 32:
            raise ConfigError(f"H and W must be divisible by 32, got {cfg.H}x{cfg.W}")
        self.cfg = cfg
        d0 = cfg.d0
        self.stem = Stem(d0, rng)
        self.stages = ModuleList()
        channels = [d0, 2 * d0, 4 * d0, 8 * d0]
        c_in = d0
        for i, c_out in enumerate(channels):
            self.stages.append(Stage(c_in, c_out, cfg.blocks_per_stage[i], rng, downsample=i > 0))
            c_in = c_out
        self.lp = LandmarksPredictor(d0, cfg.H, cfg.N_land, cfg.lp_channels, rng)

    def _check_image(self, image: Tensor) -> Tensor:
        if image.ndim == 3:
            image = ops.reshape(image, (1,) + image.shape)
        if image.ndim != 4 or image.shape[1] != 3:
            raise DimensionError(f"Expected (B, 3, H, W) images, got {image.shape}")
        if image.shape[2] % 32 or image.shape[3] % 32:
            raise ConfigError(f"Image extents must be divisible by 32, got {image.shape[2:]}")
        return image

    def stem_forward(self, image: Tensor) -> Tensor:
        """(B, 3, H, W) -> базові ознаки F (B, d0, H/4, W/4)"""
        return self.stem(self._check_image(image))

    def stages_forward(self, F: Tensor) -> FeaturePyramid:
        outputs = []
        x = F
        for stage in self.stages:
            x = stage(x)
            outputs.append(x)
        return FeaturePyramid(*outputs)

    def lp_forward(self, F: Tensor) -> Tensor:
        """Передбачені лендмарки (B, N_land, 2) у пікселях входу"""
        return self.lp(F)
