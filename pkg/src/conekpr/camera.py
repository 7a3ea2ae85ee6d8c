"""Pinhole camera model and stereo rig.

Coordinate convention: the camera frame has x' pointing forward (depth),
y' left, z' up. The image origin is top-left with y growing downward, so a
point with positive y' (left of the camera) projects left of the principal
point, and positive z' (above) projects above it. The right camera sits a
baseline T to the right of the left camera; its image of a point is the left
pixel shifted by the disparity D = fx * T / Z.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")


@dataclass(frozen=True)
class StereoRig:
    intrinsics: CameraIntrinsics
    baseline_m: float
    image_size: tuple  # (width, height) pixels

    def __post_init__(self):
        if self.baseline_m <= 0:
            raise ValueError(f"baseline must be positive, got {self.baseline_m}")
        w, h = self.image_size
        if not (0 <= self.intrinsics.cx < w and 0 <= self.intrinsics.cy < h):
            raise ValueError(
                f"principal point ({self.intrinsics.cx}, {self.intrinsics.cy}) "
                f"outside {w}x{h} image"
            )


def default_rig(width: int = 640, height: int = 360) -> StereoRig:
    """Representative stereo rig: fx = fy = 500 px, principal point at center, T = 0.12 m."""
    return StereoRig(
        intrinsics=CameraIntrinsics(fx=500.0, fy=500.0, cx=width / 2.0, cy=height / 2.0),
        baseline_m=0.12,
        image_size=(width, height),
    )


def project_point(point3d, rig: StereoRig):
    """Project a camera-frame 3D point into both stereo frames.

    Returns ((left x, left y), (right x, right y), disparity). Inverse of the
    back-projection map, so left x = cx - y'*fx/Z and left y = cy - z'*fy/Z
    with Z = x'.
    """
    x_fwd, y_left, z_up = (float(v) for v in point3d)
    if x_fwd <= 0:
        raise ValueError(f"point depth must be positive, got {x_fwd}")
    intr = rig.intrinsics
    z = x_fwd
    lx = intr.cx - y_left * intr.fx / z
    ly = intr.cy - z_up * intr.fy / z
    disparity = intr.fx * rig.baseline_m / z
    return (lx, ly), (lx - disparity, ly), disparity


def save_calibration(rig: StereoRig, path):
    doc = {
        "fx": rig.intrinsics.fx,
        "fy": rig.intrinsics.fy,
        "cx": rig.intrinsics.cx,
        "cy": rig.intrinsics.cy,
        "baseline_m": rig.baseline_m,
        "image_width": rig.image_size[0],
        "image_height": rig.image_size[1],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_calibration(path) -> StereoRig:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    missing = [k for k in ("fx", "fy", "cx", "cy", "baseline_m", "image_width", "image_height")
               if k not in doc]
    if missing:
        raise ValueError(f"calibration file missing fields: {missing}")
    return StereoRig(
        intrinsics=CameraIntrinsics(fx=doc["fx"], fy=doc["fy"], cx=doc["cx"], cy=doc["cy"]),
        baseline_m=doc["baseline_m"],
        image_size=(doc["image_width"], doc["image_height"]),
    )
