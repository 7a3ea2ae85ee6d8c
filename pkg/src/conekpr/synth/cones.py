"""Synthetic cone crops with exact keypoint ground truth.

Cones are drawn as a trapezoidal silhouette with a horizontal stripe band:
white stripe on a blue or orange body, black stripe on a yellow body. The six
keypoints are the stripe band's four corners and the two base corners, in the
fixed index order (0 stripe top-left, 1 stripe top-right, 2 stripe
bottom-left, 3 stripe bottom-right, 4 base-left, 5 base-right).

Rasterization is pure numpy row-span filling: a row belongs to a band when
its pixel center lies within half a pixel of the band's continuous extent, so
the pixel nearest to any keypoint always carries the expected region color.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CONE_COLORS = ("blue", "yellow", "orange")
DEFAULT_NOISE = 0.03


@dataclass
class ConeCrop:
    image: np.ndarray  # (S, S, 3) uint8
    keypoints: np.ndarray  # (6, 2) float64, (x, y)
    color: str


def _body_rgb(rng, color):
    if color == "blue":
        return np.array([rng.uniform(10, 45), rng.uniform(40, 80), rng.uniform(140, 180)])
    if color == "yellow":
        r = rng.uniform(205, 240)
        return np.array([r, r - rng.uniform(15, 45), rng.uniform(25, 60)])
    if color == "orange":
        return np.array([rng.uniform(220, 245), rng.uniform(100, 140), rng.uniform(20, 50)])
    raise ValueError(f"unknown cone color '{color}', expected one of {CONE_COLORS}")


def _stripe_rgb(rng, color):
    if color == "yellow":
        v = rng.uniform(10, 35)
    else:
        v = rng.uniform(230, 252)
    return np.array([v, v, v]) + rng.uniform(-4, 4, size=3)


def rasterize_cone(canvas, tip_l, tip_r, base_l, base_r, stripe_top_y, stripe_bottom_y,
                   body_rgb, stripe_rgb):
    """Fill a trapezoid with a horizontal stripe band into an RGB float canvas.

    Corner arguments are continuous (x, y) pixel coordinates; the tip edge and
    base edge must each be horizontal (equal y), which projection preserves.
    """
    h, w = canvas.shape[:2]
    tip_y = float(tip_l[1])
    base_y = float(base_l[1])
    if base_y <= tip_y:
        return
    row0 = max(0, int(np.ceil(tip_y - 0.5)))
    row1 = min(h - 1, int(np.floor(base_y + 0.5)))
    if row1 < row0:
        return
    rows = np.arange(row0, row1 + 1)
    t = np.clip((rows - tip_y) / (base_y - tip_y), 0.0, 1.0)
    xl = tip_l[0] + (base_l[0] - tip_l[0]) * t
    xr = tip_r[0] + (base_r[0] - tip_r[0]) * t
    in_stripe = (rows >= stripe_top_y - 0.5) & (rows <= stripe_bottom_y + 0.5)
    for idx, r in enumerate(rows):
        c0 = max(0, int(np.ceil(xl[idx] - 0.5)))
        c1 = min(w - 1, int(np.floor(xr[idx] + 0.5)))
        if c1 < c0:
            continue
        canvas[r, c0:c1 + 1] = stripe_rgb if in_stripe[idx] else body_rgb


def _background(rng, size):
    base = rng.uniform(70, 190, size=3)
    canvas = np.empty((size, size, 3), dtype=np.float64)
    canvas[:] = base
    shade = np.linspace(rng.uniform(0.85, 1.0), rng.uniform(1.0, 1.15), size)
    canvas *= shade[:, None, None]
    # a couple of faint distractor rectangles so the net cannot key on blank space
    for _ in range(rng.integers(0, 3)):
        x0, y0 = rng.integers(0, size - 8, size=2)
        dw, dh = rng.integers(4, 16, size=2)
        tint = rng.uniform(-35, 35, size=3)
        canvas[y0:y0 + dh, x0:x0 + dw] += tint
    return canvas


def render_cone_crop(seed, color: str = "blue", size: int = 80,
                     noise: float = DEFAULT_NOISE, lighting: float = 1.0) -> ConeCrop:
    """Deterministic cone crop with exact keypoints, >= 2 px inside the borders."""
    if color not in CONE_COLORS:
        raise ValueError(f"unknown cone color '{color}', expected one of {CONE_COLORS}")
    rng = np.random.default_rng(seed)
    s = float(size)

    cx = rng.uniform(0.38, 0.62) * s
    tip_cx = cx + rng.uniform(-0.05, 0.05) * s
    tip_y = rng.uniform(0.08, 0.22) * s
    base_y = rng.uniform(0.80, 0.94) * s
    base_hw = rng.uniform(0.18, 0.32) * s
    tip_hw = base_hw * rng.uniform(0.10, 0.22)
    t0 = rng.uniform(0.32, 0.42)
    t1 = t0 + rng.uniform(0.20, 0.30)
    stripe_top_y = tip_y + t0 * (base_y - tip_y)
    stripe_bot_y = tip_y + t1 * (base_y - tip_y)

    def x_left(y):
        t = (y - tip_y) / (base_y - tip_y)
        return (tip_cx - tip_hw) + ((cx - base_hw) - (tip_cx - tip_hw)) * t

    def x_right(y):
        t = (y - tip_y) / (base_y - tip_y)
        return (tip_cx + tip_hw) + ((cx + base_hw) - (tip_cx + tip_hw)) * t

    keypoints = np.array([
        [x_left(stripe_top_y), stripe_top_y],
        [x_right(stripe_top_y), stripe_top_y],
        [x_left(stripe_bot_y), stripe_bot_y],
        [x_right(stripe_bot_y), stripe_bot_y],
        [x_left(base_y), base_y],
        [x_right(base_y), base_y],
    ])

    canvas = _background(rng, size)
    body = _body_rgb(rng, color)
    stripe = _stripe_rgb(rng, color)
    rasterize_cone(
        canvas,
        tip_l=(tip_cx - tip_hw, tip_y), tip_r=(tip_cx + tip_hw, tip_y),
        base_l=(cx - base_hw, base_y), base_r=(cx + base_hw, base_y),
        stripe_top_y=stripe_top_y, stripe_bottom_y=stripe_bot_y,
        body_rgb=body, stripe_rgb=stripe,
    )
    canvas *= lighting
    if noise > 0:
        canvas += rng.normal(0.0, noise * 255.0, size=canvas.shape)
    image = np.clip(canvas, 0, 255).astype(np.uint8)
    return ConeCrop(image=image, keypoints=keypoints, color=color)
