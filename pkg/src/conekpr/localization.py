"""Disparity-based cone localization and keypoint-mask color estimation.

Localization composes three steps: the disparity is the difference of the
mean keypoint x positions of the two frames, the depth Z = f*T/D uses the
horizontal focal length fx, and the back-projection maps the mean left-frame
pixel plus Z into the camera frame (x' = Z forward, y' left, z' up).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from matplotlib.colors import rgb_to_hsv

from .camera import CameraIntrinsics, StereoRig

VERTICAL_MISMATCH_PX = 3.0

# HSV gates (hue in [0,1]) for the body color and the stripe brightness split.
BLUE_HUE = (0.50, 0.75)
YELLOW_HUE = (0.08, 0.22)
MIN_BODY_SATURATION = 0.25
STRIPE_BRIGHTNESS_MARGIN = 0.15


class NonPositiveDisparityError(ValueError):
    """Left/right keypoints imply zero or negative disparity."""


@dataclass
class LocalizedCone:
    position: tuple  # (x', y', z') meters, camera frame
    color: str
    left_keypoints: np.ndarray
    right_keypoints: np.ndarray
    disparity: float
    depth: float
    vertical_mismatch: bool = False


def mean_disparity(left_keypoints, right_keypoints) -> float:
    """Difference of the mean keypoint x positions: mean(left x) - mean(right x)."""
    lk = np.asarray(left_keypoints, dtype=np.float64)
    rk = np.asarray(right_keypoints, dtype=np.float64)
    if lk.shape != rk.shape or lk.ndim != 2 or lk.shape[1] != 2:
        raise ValueError(f"expected matching (K,2) keypoint arrays, got {lk.shape}/{rk.shape}")
    d = float(lk[:, 0].mean() - rk[:, 0].mean())
    if d <= 0:
        raise NonPositiveDisparityError(
            f"disparity {d:.6f} px is not positive; cone at infinity or frames swapped"
        )
    return d


def depth(focal_px: float, baseline_m: float, disparity_px: float) -> float:
    """Depth from disparity: Z = f * T / D."""
    if focal_px <= 0 or baseline_m <= 0:
        raise ValueError("focal length and baseline must be positive")
    if disparity_px <= 0:
        raise NonPositiveDisparityError(f"disparity {disparity_px} px is not positive")
    return focal_px * baseline_m / disparity_px


def backproject(x_px: float, y_px: float, z_depth: float, intrinsics: CameraIntrinsics):
    """Pixel plus depth to camera-frame point: x' = Z, y' = -(x-cx)Z/fx, z' = -(y-cy)Z/fy."""
    if z_depth <= 0:
        raise ValueError(f"depth must be positive, got {z_depth}")
    x_fwd = z_depth
    y_left = -(x_px - intrinsics.cx) * z_depth / intrinsics.fx
    z_up = -(y_px - intrinsics.cy) * z_depth / intrinsics.fy
    return (x_fwd, y_left, z_up)


def localize_cone(left_keypoints, right_keypoints, rig: StereoRig,
                  color: str = "unknown") -> LocalizedCone:
    """Mean-disparity depth plus back-projection at the mean left keypoint."""
    lk = np.asarray(left_keypoints, dtype=np.float64)
    rk = np.asarray(right_keypoints, dtype=np.float64)
    d = mean_disparity(lk, rk)
    z = depth(rig.intrinsics.fx, rig.baseline_m, d)
    mean_x = float(lk[:, 0].mean())
    mean_y = float(lk[:, 1].mean())
    position = backproject(mean_x, mean_y, z, rig.intrinsics)
    mismatch = abs(mean_y - float(rk[:, 1].mean())) > VERTICAL_MISMATCH_PX
    return LocalizedCone(
        position=position,
        color=color,
        left_keypoints=lk,
        right_keypoints=rk,
        disparity=d,
        depth=z,
        vertical_mismatch=mismatch,
    )


def _bilinear_quad_samples(image, corners, n: int = 8, inset: float = 0.2):
    """Mean RGB over an interior grid of the quad (tl, tr, bl, br corners)."""
    tl, tr, bl, br = (np.asarray(c, dtype=np.float64) for c in corners)

    def cross2(a, b):
        return a[0] * b[1] - a[1] * b[0]

    area2 = abs(cross2(tr - tl, bl - tl)) + abs(cross2(br - tr, bl - br))
    if area2 < 1e-9:
        return None
    ss = np.linspace(inset, 1.0 - inset, n)
    ts = np.linspace(inset, 1.0 - inset, n)
    h, w = image.shape[:2]
    samples = []
    for t in ts:
        left = tl + (bl - tl) * t
        right = tr + (br - tr) * t
        for s in ss:
            p = left + (right - left) * s
            xi = int(round(p[0]))
            yi = int(round(p[1]))
            if 0 <= xi < w and 0 <= yi < h:
                samples.append(image[yi, xi])
    if not samples:
        return None
    return np.mean(np.asarray(samples, dtype=np.float64), axis=0)


def estimate_color(image, keypoints) -> str:
    """Classify the cone color from the stripe band and the body below it.

    The stripe region is the quadrilateral of keypoints 0-3; the body region
    sits between the stripe's bottom edge (2, 3) and the base segment (4, 5).
    A blue cone shows a saturated blue body with a stripe brighter than the
    body; a yellow cone shows a yellow body with a darker stripe. Anything
    else is unknown.
    """
    img = np.asarray(image)
    if img.dtype == np.uint8:
        img = img.astype(np.float64) / 255.0
    kps = np.asarray(keypoints, dtype=np.float64)
    if kps.shape != (6, 2):
        raise ValueError(f"expected 6 keypoints, got shape {kps.shape}")
    h, w = img.shape[:2]
    if np.any(kps[:, 0] < 0) or np.any(kps[:, 0] > w - 1) or \
            np.any(kps[:, 1] < 0) or np.any(kps[:, 1] > h - 1):
        raise ValueError("keypoints must lie inside the image")

    stripe_rgb = _bilinear_quad_samples(img, (kps[0], kps[1], kps[2], kps[3]))
    body_rgb = _bilinear_quad_samples(img, (kps[2], kps[3], kps[4], kps[5]))
    if stripe_rgb is None or body_rgb is None:
        return "unknown"

    body_h, body_s, body_v = rgb_to_hsv(body_rgb.reshape(1, 1, 3)).reshape(3)
    stripe_v = float(rgb_to_hsv(stripe_rgb.reshape(1, 1, 3)).reshape(3)[2])

    if body_s < MIN_BODY_SATURATION:
        return "unknown"
    if BLUE_HUE[0] <= body_h <= BLUE_HUE[1] and stripe_v > body_v + STRIPE_BRIGHTNESS_MARGIN:
        return "blue"
    if YELLOW_HUE[0] <= body_h <= YELLOW_HUE[1] and stripe_v < body_v - STRIPE_BRIGHTNESS_MARGIN:
        return "yellow"
    return "unknown"
