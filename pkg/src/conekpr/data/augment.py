"""Rotation and boundary-crop augmentation with exact keypoint transforms.

Rotations are counterclockwise quarter turns; a keypoint keeps its index and
moves with its physical feature. The square-image convention for the keypoint
map is ROTATE_90: (x, y) -> (y, W-1-x).
"""

from __future__ import annotations

from enum import Enum

import numpy as np
from PIL import Image


class Rotation(Enum):
    NONE = 0
    ROTATE_90 = 1
    ROTATE_180 = 2
    ROTATE_270 = 3


ROTATIONS = tuple(Rotation)


def rotate_augment(image, keypoints, rot: Rotation):
    """Rotate image and keypoints together by a quarter-turn multiple."""
    img = np.asarray(image)
    kps = np.asarray(keypoints, dtype=np.float64)
    h, w = img.shape[:2]
    if rot in (Rotation.ROTATE_90, Rotation.ROTATE_270) and h != w:
        raise ValueError(f"90/270 degree rotation requires a square image, got {w}x{h}")
    x = kps[:, 0]
    y = kps[:, 1]
    if rot is Rotation.NONE:
        return img.copy(), kps.copy()
    if rot is Rotation.ROTATE_90:
        out = np.rot90(img, 1).copy()
        new = np.stack([y, (w - 1) - x], axis=1)
    elif rot is Rotation.ROTATE_180:
        out = np.rot90(img, 2).copy()
        new = np.stack([(w - 1) - x, (h - 1) - y], axis=1)
    elif rot is Rotation.ROTATE_270:
        out = np.rot90(img, 3).copy()
        new = np.stack([(h - 1) - y, x], axis=1)
    else:
        raise ValueError(f"unknown rotation {rot}")
    return out, new


def random_boundary_crop(image, keypoints, seed, out_size: int = 80,
                         max_margin: int = 8, min_inside: float = 1.0):
    """Crop seeded random margins off each border, then rescale to out_size.

    Margins are sampled per side in [0, min(max_margin, slack)] where slack is
    the largest crop that keeps every keypoint at least `min_inside` px inside
    the new border. Keypoints map through the same crop-and-scale:
    x' = (x - left) * out_size / (W - left - right). If the keypoints already
    violate the margin, the input is returned unchanged with crop_applied
    False.
    """
    img = np.asarray(image)
    kps = np.asarray(keypoints, dtype=np.float64)
    h, w = img.shape[:2]
    rng = np.random.default_rng(seed)

    min_x, min_y = kps.min(axis=0)
    max_x, max_y = kps.max(axis=0)
    slack_left = int(np.floor(min_x - min_inside))
    slack_right = int(np.floor((w - 1) - max_x - min_inside))
    slack_top = int(np.floor(min_y - min_inside))
    slack_bottom = int(np.floor((h - 1) - max_y - min_inside))
    if min(slack_left, slack_right, slack_top, slack_bottom) < 0:
        return img.copy(), kps.copy(), False

    def sample(slack):
        hi = min(max_margin, slack)
        return int(rng.integers(0, hi + 1))

    left = sample(slack_left)
    right = sample(slack_right)
    top = sample(slack_top)
    bottom = sample(slack_bottom)

    cropped = img[top:h - bottom, left:w - right]
    ch, cw = cropped.shape[:2]
    if (ch, cw) == (out_size, out_size):
        out_img = cropped.copy()
    else:
        out_img = np.asarray(
            Image.fromarray(cropped).resize((out_size, out_size), Image.BILINEAR)
        )
    sx = out_size / cw
    sy = out_size / ch
    new_kps = np.stack([(kps[:, 0] - left) * sx, (kps[:, 1] - top) * sy], axis=1)
    return out_img, new_kps, True
