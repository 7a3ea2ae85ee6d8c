"""Dataset manifests: splitting, augmentation expansion, and tensor loading.

A dataset directory holds ``images/<id>.png`` and ``annotations/<id>.json``.
The manifest assigns every source image to one split (70/20/10 by default,
floor-floor-remainder); augmented variants always share their source's split.
"""

from __future__ import annotations

import io
import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..losses import heatmap_target
from .annotations import ConeAnnotation, filter_dataset, parse_annotation
from .augment import Rotation, random_boundary_crop, rotate_augment

DEFAULT_FRACTIONS = (0.70, 0.20, 0.10)
SPLITS = ("train", "val", "test")
MIN_SPLIT_ITEMS = 10


@dataclass
class ManifestItem:
    annotation_path: str
    image_path: str
    split: str
    augmentation: str  # rotation name, e.g. "NONE" or "ROTATE_90"
    source_id: str


@dataclass
class DatasetManifest:
    items: list
    seed: int
    fractions: tuple = DEFAULT_FRACTIONS

    def split_items(self, split: str):
        return [it for it in self.items if it.split == split]

    def save(self, path):
        doc = {
            "seed": self.seed,
            "fractions": list(self.fractions),
            "items": [asdict(it) for it in self.items],
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    @staticmethod
    def load(path) -> "DatasetManifest":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return DatasetManifest(
            items=[ManifestItem(**it) for it in doc["items"]],
            seed=doc["seed"],
            fractions=tuple(doc["fractions"]),
        )


def split_ids(ids, seed, fractions=DEFAULT_FRACTIONS):
    """Deterministic, order-independent partition of ids into train/val/test.

    Sizes follow the floor-floor-remainder rule: floor(f_train*n),
    floor(f_val*n), and the rest is test.
    """
    ids = sorted(ids)
    n = len(ids)
    if n < MIN_SPLIT_ITEMS:
        raise ValueError(f"need at least {MIN_SPLIT_ITEMS} items to split, got {n}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {fractions}")
    random.Random(seed).shuffle(ids)
    n_train = int(np.floor(fractions[0] * n))
    n_val = int(np.floor(fractions[1] * n))
    return {
        "train": ids[:n_train],
        "val": ids[n_train:n_train + n_val],
        "test": ids[n_train + n_val:],
    }


def build_manifest(dataset_dir, seed, augment: bool = False,
                   fractions=DEFAULT_FRACTIONS, image_size=(80, 80)) -> DatasetManifest:
    """Scan a dataset directory, filter bad annotations, and assign splits."""
    root = Path(dataset_dir)
    ann_dir = root / "annotations"
    img_dir = root / "images"
    annotations = {}
    for path in sorted(ann_dir.glob("*.json")):
        try:
            ann = parse_annotation(path.read_text(encoding="utf-8"))
        except ValueError:
            ann = ConeAnnotation(image_id=path.stem, keypoints=[], rejected=True)
        annotations[path.stem] = ann
    kept, _ = filter_dataset(annotations.values(), image_size=image_size)
    ids = [a.image_id for a in kept if (img_dir / f"{a.image_id}.png").exists()]
    assignment = split_ids(ids, seed, fractions)
    items = []
    rotations = list(Rotation) if augment else [Rotation.NONE]
    for split in SPLITS:
        for image_id in assignment[split]:
            for rot in rotations:
                items.append(ManifestItem(
                    annotation_path=str(ann_dir / f"{image_id}.json"),
                    image_path=str(img_dir / f"{image_id}.png"),
                    split=split,
                    augmentation=rot.name,
                    source_id=image_id,
                ))
    return DatasetManifest(items=items, seed=seed, fractions=tuple(fractions))


def to_training_sample(annotation: ConeAnnotation, image_bytes, out_size: int = 80,
                       sigma: float = 2.0):
    """Decode, resize to out_size, scale to [0, 1]; rescale keypoints to match.

    Returns (image tensor (3, S, S) float32, keypoints (6, 2) float32,
    heatmap targets (6, S, S) float32).
    """
    try:
        img = Image.open(io.BytesIO(image_bytes)).convert("RGB")
    except (UnidentifiedImageError, OSError) as e:
        raise ValueError(f"image for '{annotation.image_id}' cannot be decoded: {e}") from e
    w, h = img.size
    if (w, h) != (out_size, out_size):
        img = img.resize((out_size, out_size), Image.BILINEAR)
    arr = np.asarray(img, dtype=np.float32) / 255.0
    tensor = np.ascontiguousarray(arr.transpose(2, 0, 1))
    kps = np.asarray(annotation.keypoints, dtype=np.float64)
    kps = np.stack([kps[:, 0] * out_size / w, kps[:, 1] * out_size / h], axis=1)
    kps = np.clip(kps, 0, out_size - 1)
    heatmaps = heatmap_target(kps, out_size, out_size, sigma=sigma)
    return tensor, kps.astype(np.float32), heatmaps


@dataclass
class SplitArrays:
    images: np.ndarray  # (N, 3, S, S) float32
    keypoints: np.ndarray  # (N, 6, 2) float32
    ids: list = field(default_factory=list)


def load_split_arrays(manifest: DatasetManifest, split: str, out_size: int = 80,
                      boundary_crop: bool = False, crop_seed: int = 0) -> SplitArrays:
    """Materialize one split as dense arrays, applying manifest augmentations."""
    items = manifest.split_items(split)
    if not items:
        raise ValueError(f"split '{split}' is empty")
    images = np.empty((len(items), 3, out_size, out_size), dtype=np.float32)
    keypoints = np.empty((len(items), 6, 2), dtype=np.float32)
    ids = []
    for i, item in enumerate(items):
        ann = parse_annotation(Path(item.annotation_path).read_text(encoding="utf-8"))
        img = np.asarray(Image.open(item.image_path).convert("RGB"))
        kps = np.asarray(ann.keypoints, dtype=np.float64)
        rot = Rotation[item.augmentation]
        if rot is not Rotation.NONE:
            img, kps = rotate_augment(img, kps, rot)
        if boundary_crop:
            img, kps, _ = random_boundary_crop(
                img, kps, seed=(crop_seed, i), out_size=out_size)
        if img.shape[:2] != (out_size, out_size):
            sy = out_size / img.shape[0]
            sx = out_size / img.shape[1]
            img = np.asarray(Image.fromarray(img).resize((out_size, out_size), Image.BILINEAR))
            kps = np.stack([kps[:, 0] * sx, kps[:, 1] * sy], axis=1)
        images[i] = img.astype(np.float32).transpose(2, 0, 1) / 255.0
        keypoints[i] = np.clip(kps, 0, out_size - 1)
        ids.append(f"{item.source_id}:{item.augmentation}")
    return SplitArrays(images=images, keypoints=keypoints, ids=ids)
