"""Combined heatmap + position training loss and Gaussian heatmap targets.

The loss is ``heatmap_term + position_weight * position_term`` where both
terms apply the same elementwise penalty (L1 or smooth L1) and sum over their
elements, so a single displaced coordinate contributes exactly its penalty
value. Batched calls average over the batch.
"""

from __future__ import annotations

import numpy as np

LOSS_MODES = ("l1", "smooth_l1")


def _penalty(diff, mode: str, beta: float):
    """Elementwise penalty and its derivative."""
    if mode == "l1":
        return np.abs(diff), np.sign(diff)
    if mode == "smooth_l1":
        a = np.abs(diff)
        quad = a < beta
        val = np.where(quad, 0.5 * diff * diff / beta, a - 0.5 * beta)
        grad = np.where(quad, diff / beta, np.sign(diff))
        return val, grad
    raise ValueError(f"unknown loss mode '{mode}', expected one of {LOSS_MODES}")


def heatmap_target(keypoints, height: int, width: int, sigma: float = 2.0,
                   dtype=np.float32):
    """Per-keypoint isotropic Gaussians centered on (x, y), normalized to sum 1.

    keypoints: (K, 2) array of (x, y); batched (N, K, 2) input yields
    (N, K, H, W).
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    kps = np.asarray(keypoints, dtype=np.float64)
    batched = kps.ndim == 3
    if not batched:
        kps = kps[None]
    if kps.shape[-1] != 2:
        raise ValueError(f"keypoints must be (..., 2), got {kps.shape}")
    x = kps[..., 0]
    y = kps[..., 1]
    if np.any(x < 0) or np.any(x > width - 1) or np.any(y < 0) or np.any(y > height - 1):
        bad = np.argwhere((x < 0) | (x > width - 1) | (y < 0) | (y > height - 1))[0]
        raise ValueError(
            f"keypoint {tuple(bad)} lies outside the {width}x{height} image"
        )
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    dx2 = (xs[None, None, None, :] - x[..., None, None]) ** 2
    dy2 = (ys[None, None, :, None] - y[..., None, None]) ** 2
    g = np.exp(-(dx2 + dy2) / (2.0 * sigma * sigma))
    g /= g.sum(axis=(-2, -1), keepdims=True)
    g = g.astype(dtype)
    return g if batched else g[0]


def custom_loss(pred_heatmaps, pred_keypoints, target_heatmaps, target_keypoints,
                mode: str = "smooth_l1", position_weight: float = 1.0,
                beta: float = 1.0) -> float:
    """Scalar heatmap + position loss for one prediction/target pair."""
    loss, _, _ = custom_loss_with_grads(pred_heatmaps, pred_keypoints,
                                        target_heatmaps, target_keypoints,
                                        mode, position_weight, beta)
    return loss


def custom_loss_with_grads(pred_heatmaps, pred_keypoints, target_heatmaps,
                           target_keypoints, mode: str = "smooth_l1",
                           position_weight: float = 1.0, beta: float = 1.0):
    """Loss plus gradients w.r.t. predicted heatmaps and keypoints.

    Accepts single samples (K,H,W)/(K,2) or batches with a leading N axis;
    batches average the loss (and gradients) over N.
    """
    ph = np.asarray(pred_heatmaps)
    pk = np.asarray(pred_keypoints)
    th = np.asarray(target_heatmaps)
    tk = np.asarray(target_keypoints)
    if pk.shape != tk.shape:
        raise ValueError(f"keypoint count mismatch: predicted {pk.shape} vs target {tk.shape}")
    if ph.shape != th.shape:
        raise ValueError(f"heatmap shape mismatch: predicted {ph.shape} vs target {th.shape}")
    batch = ph.shape[0] if ph.ndim == 4 else 1

    hval, hgrad = _penalty(ph - th, mode, beta)
    pval, pgrad = _penalty(pk - tk, mode, beta)
    loss = (float(hval.sum()) + position_weight * float(pval.sum())) / batch
    d_heatmaps = hgrad / batch
    d_keypoints = (position_weight / batch) * pgrad
    return loss, d_heatmaps.astype(ph.dtype), d_keypoints.astype(pk.dtype)


def position_term(pred_keypoints, target_keypoints, mode: str = "smooth_l1",
                  beta: float = 1.0) -> float:
    """Sum of elementwise penalties over the coordinate residuals."""
    val, _ = _penalty(np.asarray(pred_keypoints) - np.asarray(target_keypoints), mode, beta)
    return float(val.sum())
