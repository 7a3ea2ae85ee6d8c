"""Stereo scene rendering with exact projected ground truth.

Each cone is a fronto-parallel billboard at its depth: its six keypoints are
3D points on the cone model projected through the rig, so every keypoint in a
pair of frames shares the exact disparity fx*T/Z of the cone. A cone's
position is the centroid of its six keypoints, which makes mean-keypoint
localization an exact inverse of the projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..camera import StereoRig, project_point
from .cones import CONE_COLORS, _body_rgb, _stripe_rgb, rasterize_cone

# cone model (meters): total height, base/tip half-widths, stripe band heights
CONE_HEIGHT = 0.325
BASE_HALF_WIDTH = 0.114
TIP_HALF_WIDTH = 0.028
STRIPE_LOW_FRAC = 0.40
STRIPE_HIGH_FRAC = 0.62
# height of the keypoint centroid above the base plane
ANCHOR_HEIGHT = (STRIPE_LOW_FRAC + STRIPE_HIGH_FRAC) / 3.0 * CONE_HEIGHT


@dataclass
class SceneSpec:
    cones: list  # of (position (x', y', z'), color)
    lighting: float = 1.0
    noise: float = 0.02
    seed: int = 0

    def __post_init__(self):
        for pos, color in self.cones:
            if pos[0] <= 0:
                raise ValueError(f"cone at {tuple(pos)} is not in front of the camera")
            if color not in CONE_COLORS:
                raise ValueError(f"unknown cone color '{color}'")


@dataclass
class SceneCone:
    position: tuple  # keypoint-centroid anchor, camera frame
    color: str
    left_keypoints: np.ndarray  # (6, 2)
    right_keypoints: np.ndarray
    left_box: tuple  # (x0, y0, x1, y1)
    right_box: tuple
    disparity: float
    occluded: bool = False


@dataclass
class StereoScene:
    left: np.ndarray
    right: np.ndarray
    cones: list
    skipped: list = field(default_factory=list)  # (position, color, reason)


def cone_keypoints_3d(anchor):
    """Billboard keypoint positions for a cone anchored at its keypoint centroid."""
    x_fwd, y_left, z_up = anchor
    z_base = z_up - ANCHOR_HEIGHT
    h1 = STRIPE_LOW_FRAC * CONE_HEIGHT
    h2 = STRIPE_HIGH_FRAC * CONE_HEIGHT

    def half_width(h):
        return BASE_HALF_WIDTH + (TIP_HALF_WIDTH - BASE_HALF_WIDTH) * (h / CONE_HEIGHT)

    return np.array([
        [x_fwd, y_left + half_width(h2), z_base + h2],
        [x_fwd, y_left - half_width(h2), z_base + h2],
        [x_fwd, y_left + half_width(h1), z_base + h1],
        [x_fwd, y_left - half_width(h1), z_base + h1],
        [x_fwd, y_left + BASE_HALF_WIDTH, z_base],
        [x_fwd, y_left - BASE_HALF_WIDTH, z_base],
    ])


def cone_silhouette_3d(anchor):
    """(tip_l, tip_r, base_l, base_r) billboard corners for drawing."""
    x_fwd, y_left, z_up = anchor
    z_base = z_up - ANCHOR_HEIGHT
    return np.array([
        [x_fwd, y_left + TIP_HALF_WIDTH, z_base + CONE_HEIGHT],
        [x_fwd, y_left - TIP_HALF_WIDTH, z_base + CONE_HEIGHT],
        [x_fwd, y_left + BASE_HALF_WIDTH, z_base],
        [x_fwd, y_left - BASE_HALF_WIDTH, z_base],
    ])


def _project_all(points, rig):
    left = np.empty((len(points), 2))
    right = np.empty((len(points), 2))
    for i, p in enumerate(points):
        (lx, ly), (rx, ry), _ = project_point(p, rig)
        left[i] = (lx, ly)
        right[i] = (rx, ry)
    return left, right


def _box_around(points, pad_frac=0.18):
    x0, y0 = points.min(axis=0)
    x1, y1 = points.max(axis=0)
    pad = pad_frac * max(x1 - x0, y1 - y0)
    return (x0 - pad, y0 - pad, x1 + pad, y1 + pad)


def render_stereo_scene(spec: SceneSpec, rig: StereoRig) -> StereoScene:
    """Render both frames and return per-cone exact ground truth.

    Cones whose keypoints leave either frame are omitted from the returned
    list and recorded under `skipped`. Farther cones are drawn first, so a
    nearer cone may occlude them (flagged via box overlap).
    """
    rng = np.random.default_rng(spec.seed)
    w, h = rig.image_size
    left = _scene_background(rng, w, h)
    right = _scene_background(rng, w, h)

    order = sorted(range(len(spec.cones)), key=lambda i: -spec.cones[i][0][0])
    cones = []
    skipped = []
    for i in order:
        pos, color = spec.cones[i]
        kp3 = cone_keypoints_3d(pos)
        lkp, rkp = _project_all(kp3, rig)
        margin = 2.0
        inside = (
            lkp[:, 0].min() >= margin and lkp[:, 0].max() <= w - 1 - margin
            and rkp[:, 0].min() >= margin and rkp[:, 0].max() <= w - 1 - margin
            and lkp[:, 1].min() >= margin and lkp[:, 1].max() <= h - 1 - margin
            and rkp[:, 1].min() >= margin and rkp[:, 1].max() <= h - 1 - margin
        )
        if not inside:
            skipped.append((tuple(pos), color, "outside frame"))
            continue
        sil3 = cone_silhouette_3d(pos)
        lsil, rsil = _project_all(sil3, rig)
        body = _body_rgb(rng, color)
        stripe = _stripe_rgb(rng, color)
        stripe_top = lkp[0, 1]
        stripe_bot = lkp[2, 1]
        for canvas, sil in ((left, lsil), (right, rsil)):
            rasterize_cone(canvas, tip_l=sil[0], tip_r=sil[1], base_l=sil[2], base_r=sil[3],
                           stripe_top_y=stripe_top, stripe_bottom_y=stripe_bot,
                           body_rgb=body * spec.lighting, stripe_rgb=stripe * spec.lighting)
        disparity = float(lkp[:, 0].mean() - rkp[:, 0].mean())
        cones.append(SceneCone(
            position=tuple(float(v) for v in pos), color=color,
            left_keypoints=lkp, right_keypoints=rkp,
            left_box=_box_around(np.vstack([lkp, lsil])),
            right_box=_box_around(np.vstack([rkp, rsil])),
            disparity=disparity,
        ))

    _flag_occlusions(cones)
    if spec.noise > 0:
        left += rng.normal(0.0, spec.noise * 255.0, size=left.shape)
        right += rng.normal(0.0, spec.noise * 255.0, size=right.shape)
    return StereoScene(
        left=np.clip(left, 0, 255).astype(np.uint8),
        right=np.clip(right, 0, 255).astype(np.uint8),
        cones=cones,
        skipped=skipped,
    )


def _scene_background(rng, w, h):
    sky = rng.uniform(120, 200, size=3)
    ground = rng.uniform(60, 130, size=3)
    horizon = int(h * rng.uniform(0.35, 0.5))
    canvas = np.empty((h, w, 3), dtype=np.float64)
    canvas[:horizon] = sky
    canvas[horizon:] = ground
    return canvas


def _flag_occlusions(cones):
    """Mark a cone occluded when a nearer cone's box overlaps its own."""
    def overlap(a, b):
        x0 = max(a[0], b[0])
        y0 = max(a[1], b[1])
        x1 = min(a[2], b[2])
        y1 = min(a[3], b[3])
        return max(0.0, x1 - x0) * max(0.0, y1 - y0)

    for i, cone in enumerate(cones):
        area = ((cone.left_box[2] - cone.left_box[0])
                * (cone.left_box[3] - cone.left_box[1]))
        for other in cones:
            if other is cone or other.position[0] >= cone.position[0]:
                continue
            if overlap(cone.left_box, other.left_box) > 0.15 * area:
                cone.occluded = True
                break
