"""UNet keypoint regressor.

Encoder widths run base_width -> 2x -> 4x -> 8x with stride-2 downsampling
between levels; the decoder mirrors them with skip connections at matching
spatial sizes. A 1x1 head emits one logit map per keypoint, normalized by a
per-channel spatial softmax into heatmaps. Soft-argmax coordinates
concatenated with the globally pooled bottleneck features feed a linear
refinement head whose output is the final coordinate prediction; the head is
initialized to the identity on the coordinate slice so refinement starts as a
no-op.

The public interface is channels-first (images (N,3,S,S), heatmaps
(N,K,S,S)); compute runs channels-last internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import functional as F
from ..nn.layers import Conv2d, Linear, Module, SpatialSoftmax
from ..nn.tensor import ShapeError
from .blocks import ConvBlock, DecoderStage
from .config import KeypointPrediction, ModelConfig, heatmap_confidence


@dataclass
class UNetOutput:
    heatmaps: np.ndarray  # (B, K, S, S), softmax-normalized
    coords: np.ndarray  # (B, K, 2), refined
    coords_soft: np.ndarray  # (B, K, 2), raw soft-argmax
    pooled: np.ndarray  # (B, 8W)


class UNetKeypointNet(Module):
    def __init__(self, config: ModelConfig, seed: int = 0, dtype=np.float32,
                 upsample: str = "nearest"):
        if config.arch != "unet":
            raise ValueError(f"UNetKeypointNet requires arch 'unet', got '{config.arch}'")
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng((seed, 0xC0DE))
        w = config.base_width
        k = config.num_keypoints
        drop = config.dropout or None
        lay = "nhwc"
        self.e1 = ConvBlock(config.in_channels, w, stride=1, dropout=drop, rng=rng,
                            dtype=dtype, layout=lay)
        self.e2 = ConvBlock(w, 2 * w, stride=2, dropout=drop, rng=rng, dtype=dtype, layout=lay)
        self.e3 = ConvBlock(2 * w, 4 * w, stride=2, dropout=drop, rng=rng, dtype=dtype,
                            layout=lay)
        self.bottleneck = ConvBlock(4 * w, 8 * w, stride=2, rng=rng, dtype=dtype, layout=lay)
        self.d3 = DecoderStage(8 * w, 4 * w, 4 * w, upsample=upsample, rng=rng, dtype=dtype,
                               layout=lay)
        self.d2 = DecoderStage(4 * w, 2 * w, 2 * w, upsample=upsample, rng=rng, dtype=dtype,
                               layout=lay)
        self.d1 = DecoderStage(2 * w, w, w, upsample=upsample, rng=rng, dtype=dtype, layout=lay)
        self.head = Conv2d(w, k, 1, stride=1, padding=0, rng=rng, dtype=dtype, layout=lay)
        self.softmax = SpatialSoftmax(layout=lay)
        self.refine = Linear(2 * k + 8 * w, 2 * k, rng=rng, dtype=dtype)
        # identity on the soft-argmax slice, zero elsewhere: refinement starts
        # as a pass-through of the heatmap coordinates
        self.refine.weight.data[:] = 0.0
        self.refine.weight.data[:, :2 * k] = np.eye(2 * k, dtype=dtype)
        self.refine.bias.data[:] = 0.0
        self._ctx = None

    def submodules(self):
        return [("e1", self.e1), ("e2", self.e2), ("e3", self.e3),
                ("bottleneck", self.bottleneck), ("d3", self.d3), ("d2", self.d2),
                ("d1", self.d1), ("head", self.head), ("refine", self.refine)]

    def parameters(self):
        for name, mod in self.submodules():
            for pname, p in mod.parameters():
                yield f"{name}.{pname}", p

    def buffers(self):
        for name, mod in self.submodules():
            for bname, b in mod.buffers():
                yield f"{name}.{bname}", b

    def forward(self, x, train: bool = False, rng=None) -> UNetOutput:
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

        f1 = self.e1.forward(xh, train=train, rng=rng)
        f2 = self.e2.forward(f1, train=train, rng=rng)
        f3 = self.e3.forward(f2, train=train, rng=rng)
        b = self.bottleneck.forward(f3, train=train)
        u3 = self.d3.forward(b, f3, train=train)
        u2 = self.d2.forward(u3, f2, train=train)
        u1 = self.d1.forward(u2, f1, train=train)
        logits = self.head.forward(u1)
        p = self.softmax.forward(logits)  # (N, S, S, K)
        coords_soft = F.soft_argmax_nhwc(p).astype(self.dtype)
        pooled, pool_ctx = F.global_avg_pool_forward(b, channel_axis=3)
        feats = np.concatenate([coords_soft.reshape(n, 2 * k), pooled], axis=1)
        coords = self.refine.forward(feats).reshape(n, k, 2)
        self._ctx = (p.shape, pool_ctx, n, k)
        heatmaps = np.ascontiguousarray(p.transpose(0, 3, 1, 2))
        return UNetOutput(heatmaps=heatmaps, coords=coords, coords_soft=coords_soft,
                          pooled=pooled)

    def backward(self, d_coords, d_heatmaps=None):
        """Backpropagate loss gradients w.r.t. refined coords and (N,K,S,S) heatmaps."""
        if self._ctx is None:
            raise ValueError("backward requires a preceding forward call")
        p_shape, pool_ctx, n, k = self._ctx
        d_feats = self.refine.backward(np.asarray(d_coords).reshape(n, 2 * k))
        d_coords_soft = d_feats[:, :2 * k].reshape(n, k, 2)
        d_pooled = d_feats[:, 2 * k:]
        dp = F.soft_argmax_nhwc_backward(p_shape, d_coords_soft, dtype=self.dtype)
        if d_heatmaps is not None:
            dp += np.asarray(d_heatmaps).transpose(0, 2, 3, 1)
        dlogits = self.softmax.backward(dp)
        du1 = self.head.backward(dlogits)
        du2, df1 = self.d1.backward(du1)
        du3, df2 = self.d2.backward(du2)
        db, df3 = self.d3.backward(du3)
        db = db + F.global_avg_pool_backward(pool_ctx, d_pooled)
        df3 = df3 + self.bottleneck.backward(db)
        df2 = df2 + self.e3.backward(df3)
        df1 = df1 + self.e2.backward(df2)
        dx = self.e1.backward(df1)
        self._ctx = None
        return np.ascontiguousarray(dx.transpose(0, 3, 1, 2))

    def predict(self, images):
        """Eval-mode predictions as KeypointPrediction per image."""
        imgs = np.asarray(images, dtype=self.dtype)
        single = imgs.ndim == 3
        out = self.forward(imgs[None] if single else imgs, train=False)
        s = self.config.input_size
        coords = np.clip(out.coords, 0.0, s - 1)
        preds = [
            KeypointPrediction(
                keypoints=coords[i],
                confidences=heatmap_confidence(out.heatmaps[i]),
                heatmaps=out.heatmaps[i],
            )
            for i in range(out.coords.shape[0])
        ]
        return preds[0] if single else preds
