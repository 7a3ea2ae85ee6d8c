"""Synthetic cone crops and stereo scenes with exact ground truth."""

import hashlib
import io
import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..data.annotations import ConeAnnotation, serialize_annotation
from .cones import CONE_COLORS, DEFAULT_NOISE, ConeCrop, render_cone_crop
from .scenes import (
    ANCHOR_HEIGHT,
    CONE_HEIGHT,
    SceneCone,
    SceneSpec,
    StereoScene,
    cone_keypoints_3d,
    render_stereo_scene,
)

__all__ = [
    "ANCHOR_HEIGHT",
    "CONE_COLORS",
    "CONE_HEIGHT",
    "DEFAULT_NOISE",
    "ConeCrop",
    "SceneCone",
    "SceneSpec",
    "StereoScene",
    "cone_keypoints_3d",
    "encode_png",
    "render_cone_crop",
    "render_stereo_scene",
    "write_crop_dataset",
]


def encode_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return buf.getvalue()


def write_crop_dataset(out_dir, count: int, seed: int = 0, noise: float = DEFAULT_NOISE,
                       colors=("blue", "yellow"), size: int = 80):
    """Write `count` synthetic crops in the annotation-dataset layout.

    Image ids are content-addressed (sha256 prefix of the PNG bytes), so the
    same seed always produces a byte-identical directory. Returns the ids.
    """
    root = Path(out_dir)
    img_dir = root / "images"
    ann_dir = root / "annotations"
    img_dir.mkdir(parents=True, exist_ok=True)
    ann_dir.mkdir(parents=True, exist_ok=True)
    ids = []
    for i in range(count):
        color = colors[i % len(colors)]
        crop = render_cone_crop(seed=(seed, i), color=color, size=size, noise=noise)
        png = encode_png(crop.image)
        image_id = hashlib.sha256(png).hexdigest()[:16]
        (img_dir / f"{image_id}.png").write_bytes(png)
        ann = ConeAnnotation(
            image_id=image_id,
            keypoints=[(float(x), float(y)) for x, y in crop.keypoints],
            color=color,
            rejected=False,
            labeler="synthgen",
        )
        (ann_dir / f"{image_id}.json").write_text(serialize_annotation(ann), encoding="utf-8")
        ids.append(image_id)
    return ids


def write_scene_dataset(out_dir, specs, rig):
    """Render stereo scenes to PNG pairs plus a ground-truth sidecar (JSONL)."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    sidecar = root / "scenes.jsonl"
    lines = []
    for i, spec in enumerate(specs):
        scene = render_stereo_scene(spec, rig)
        left_name = f"scene_{i:04d}_left.png"
        right_name = f"scene_{i:04d}_right.png"
        (root / left_name).write_bytes(encode_png(scene.left))
        (root / right_name).write_bytes(encode_png(scene.right))
        record = {
            "left": left_name,
            "right": right_name,
            "seed": spec.seed,
            "cones": [
                {
                    "position": list(c.position),
                    "color": c.color,
                    "left_box": list(c.left_box),
                    "right_box": list(c.right_box),
                    "left_keypoints": c.left_keypoints.tolist(),
                    "right_keypoints": c.right_keypoints.tolist(),
                    "disparity": c.disparity,
                    "occluded": c.occluded,
                }
                for c in scene.cones
            ],
            "skipped": [list(map(str, s)) for s in scene.skipped],
        }
        lines.append(json.dumps(record))
    sidecar.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return sidecar
