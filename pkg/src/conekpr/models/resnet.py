"""Residual-network baseline: stacked residual blocks, global pooling, and a
linear regression head emitting one (x, y) pair per keypoint. No heatmaps;
confidences are fixed at 1.0.
"""

from __future__ import annotations

import numpy as np

from ..nn import functional as F
from ..nn.layers import BatchNorm2d, Conv2d, Linear, Module, ReLU
from ..nn.tensor import ShapeError
from .blocks import ResidualBlock
from .config import KeypointPrediction, ModelConfig


class ResNetKeypointNet(Module):
    def __init__(self, config: ModelConfig, seed: int = 0, dtype=np.float32):
        if config.arch != "resnet":
            raise ValueError(f"ResNetKeypointNet requires arch 'resnet', got '{config.arch}'")
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng((seed, 0xBA5E))
        w = config.base_width
        k = config.num_keypoints
        lay = "nhwc"
        self.stem_conv = Conv2d(config.in_channels, 2 * w, 3, stride=1, padding=1,
                                rng=rng, dtype=dtype, layout=lay)
        self.stem_bn = BatchNorm2d(2 * w, dtype=dtype, layout=lay)
        self.stem_relu = ReLU()
        self.block1 = ResidualBlock(2 * w, 2 * w, stride=2, rng=rng, dtype=dtype, layout=lay)
        self.block2 = ResidualBlock(2 * w, 4 * w, stride=2, rng=rng, dtype=dtype, layout=lay)
        self.block3 = ResidualBlock(4 * w, 8 * w, stride=2, rng=rng, dtype=dtype, layout=lay)
        self.block4 = ResidualBlock(8 * w, 8 * w, stride=1, rng=rng, dtype=dtype, layout=lay)
        self.fc = Linear(8 * w, 2 * k, rng=rng, dtype=dtype)
        # start the head at the image center so early training stays in-frame
        self.fc.weight.data *= 0.1
        self.fc.bias.data[:] = (config.input_size - 1) / 2.0
        self._pool_ctx = None

    def submodules(self):
        return [("stem_conv", self.stem_conv), ("stem_bn", self.stem_bn),
                ("block1", self.block1), ("block2", self.block2),
                ("block3", self.block3), ("block4", self.block4), ("fc", self.fc)]

    def parameters(self):
        for name, mod in self.submodules():
            for pname, p in mod.parameters():
                yield f"{name}.{pname}", p

    def buffers(self):
        for name, mod in self.submodules():
            for bname, b in mod.buffers():
                yield f"{name}.{bname}", b

    def forward(self, x, train: bool = False, rng=None):
        """Returns raw coordinate predictions (B, K, 2)."""
        x = np.asarray(x, dtype=self.dtype)
        single = x.ndim == 3
        if single:
            x = x[None]
        s = self.config.input_size
        if x.shape[1:] != (self.config.in_channels, s, s):
            raise ShapeError(
                f"expected input (N,{self.config.in_channels},{s},{s}), got {x.shape}"
            )
        n = x.shape[0]
        k = self.config.num_keypoints
        xh = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
        out = self.stem_relu.forward(self.stem_bn.forward(self.stem_conv.forward(xh), train))
        out = self.block1.forward(out, train=train)
        out = self.block2.forward(out, train=train)
        out = self.block3.forward(out, train=train)
        out = self.block4.forward(out, train=train)
        pooled, self._pool_ctx = F.global_avg_pool_forward(out, channel_axis=3)
        coords = self.fc.forward(pooled).reshape(n, k, 2)
        return coords

    def backward(self, d_coords):
        n = np.asarray(d_coords).shape[0]
        k = self.config.num_keypoints
        d_pooled = self.fc.backward(np.asarray(d_coords).reshape(n, 2 * k))
        grad = F.global_avg_pool_backward(self._pool_ctx, d_pooled)
        grad = self.block4.backward(grad)
        grad = self.block3.backward(grad)
        grad = self.block2.backward(grad)
        grad = self.block1.backward(grad)
        grad = self.stem_conv.backward(self.stem_bn.backward(self.stem_relu.backward(grad)))
        self._pool_ctx = None
        return np.ascontiguousarray(grad.transpose(0, 3, 1, 2))

    def predict(self, images):
        imgs = np.asarray(images, dtype=self.dtype)
        single = imgs.ndim == 3
        coords = self.forward(imgs[None] if single else imgs, train=False)
        s = self.config.input_size
        coords = np.clip(coords, 0.0, s - 1)
        k = self.config.num_keypoints
        preds = [
            KeypointPrediction(keypoints=coords[i], confidences=np.ones(k))
            for i in range(coords.shape[0])
        ]
        return preds[0] if single else preds
