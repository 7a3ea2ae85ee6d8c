"""Model configuration and the prediction container."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

ARCHITECTURES = ("unet", "resnet")


@dataclass
class ModelConfig:
    in_channels: int = 3
    num_keypoints: int = 6
    input_size: int = 80
    dropout: float = 0.3
    base_width: int = 64  # desk-scale preset: 8
    arch: str = "unet"
    loss_mode: str = "smooth_l1"

    def __post_init__(self):
        if self.input_size % 8 != 0:
            raise ValueError(
                f"input_size must be divisible by 8 (three stride-2 stages), "
                f"got {self.input_size}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"arch must be one of {ARCHITECTURES}, got '{self.arch}'")
        if self.loss_mode not in ("l1", "smooth_l1"):
            raise ValueError(f"loss_mode must be 'l1' or 'smooth_l1', got '{self.loss_mode}'")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(doc: dict) -> "ModelConfig":
        return ModelConfig(**doc)


@dataclass
class KeypointPrediction:
    """Per-crop model output.

    heatmaps: (K, H, W), each channel sums to 1 (empty for heatmap-free
    architectures); keypoints: (K, 2) pixel coordinates inside the image;
    confidences: (K,) in [0, 1], the normalized heatmap's peakedness relative
    to uniform (peak * H * W clamped to 1) or fixed 1.0 without heatmaps.
    """

    keypoints: np.ndarray
    confidences: np.ndarray
    heatmaps: np.ndarray = field(default_factory=lambda: np.zeros((0, 0, 0), dtype=np.float32))


def heatmap_confidence(heatmaps: np.ndarray) -> np.ndarray:
    """Peakedness relative to uniform, clamped to [0, 1]."""
    if heatmaps.size == 0:
        return np.zeros(0, dtype=np.float64)
    h, w = heatmaps.shape[-2:]
    peak = heatmaps.reshape(*heatmaps.shape[:-2], h * w).max(axis=-1)
    return np.clip(peak * h * w, 0.0, 1.0)
