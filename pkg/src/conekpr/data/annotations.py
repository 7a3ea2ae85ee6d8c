"""Cone annotation schema: parsing, validation, serialization, and filtering.

One JSON document per image, UTF-8, with exactly these fields:
  image_id   string
  keypoints  list of [x, y] pixel pairs (6 when not rejected)
  color      "blue" | "yellow" | "orange" | "unknown"
  rejected   bool
  labeler    optional string
  timestamp  optional string
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

ANNOTATION_COLORS = ("blue", "yellow", "orange", "unknown")
NUM_KEYPOINTS = 6

# Fixed keypoint index convention. Indices name physical cone features, so
# augmentation transforms move a keypoint with its feature and never permute.
KEYPOINT_NAMES = (
    "stripe_top_left",
    "stripe_top_right",
    "stripe_bottom_left",
    "stripe_bottom_right",
    "base_left",
    "base_right",
)


class AnnotationError(ValueError):
    """Base class for annotation validation failures; carries the field name."""

    def __init__(self, message: str, fieldname: str):
        super().__init__(message)
        self.field = fieldname


class MissingFieldError(AnnotationError):
    def __init__(self, fieldname: str):
        super().__init__(f"annotation is missing required field '{fieldname}'", fieldname)


class FieldTypeError(AnnotationError):
    def __init__(self, fieldname: str, detail: str):
        super().__init__(f"annotation field '{fieldname}' is invalid: {detail}", fieldname)


class KeypointCountError(AnnotationError):
    def __init__(self, got: int):
        super().__init__(
            f"annotation has an incorrect number of points: expected {NUM_KEYPOINTS}, got {got}",
            "keypoints",
        )
        self.expected = NUM_KEYPOINTS
        self.got = got


class KeypointBoundsError(AnnotationError):
    def __init__(self, index: int, point, bounds=None):
        where = f" in a {bounds[0]}x{bounds[1]} image" if bounds else ""
        super().__init__(
            f"keypoint {index} at ({point[0]}, {point[1]}) is out of bounds{where}",
            "keypoints",
        )
        self.index = index
        self.point = tuple(point)


class ColorValueError(AnnotationError):
    def __init__(self, got):
        super().__init__(
            f"annotation color '{got}' is not one of {ANNOTATION_COLORS}", "color"
        )


@dataclass
class ConeAnnotation:
    image_id: str
    keypoints: list = field(default_factory=list)  # of (x, y) tuples
    color: str = "unknown"
    rejected: bool = False
    labeler: Optional[str] = None
    timestamp: Optional[str] = None


def validate_annotation(ann: ConeAnnotation, image_size=None) -> None:
    """Enforce the schema invariants; raises a specific AnnotationError."""
    if not isinstance(ann.image_id, str) or not ann.image_id:
        raise FieldTypeError("image_id", "must be a non-empty string")
    if ann.color not in ANNOTATION_COLORS:
        raise ColorValueError(ann.color)
    if not isinstance(ann.rejected, bool):
        raise FieldTypeError("rejected", "must be a boolean")
    if not ann.rejected and len(ann.keypoints) != NUM_KEYPOINTS:
        raise KeypointCountError(len(ann.keypoints))
    for i, pt in enumerate(ann.keypoints):
        if len(pt) != 2:
            raise FieldTypeError("keypoints", f"keypoint {i} must be an (x, y) pair")
        x, y = float(pt[0]), float(pt[1])
        if x < 0 or y < 0:
            raise KeypointBoundsError(i, (x, y), image_size)
        if image_size is not None:
            w, h = image_size
            if x > w - 1 or y > h - 1:
                raise KeypointBoundsError(i, (x, y), image_size)


def parse_annotation(document, image_size=None) -> ConeAnnotation:
    """Parse and validate one annotation document (JSON text or dict)."""
    if isinstance(document, (bytes, str)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as e:
            raise FieldTypeError("document", f"not valid JSON: {e}") from e
    else:
        doc = document
    if not isinstance(doc, dict):
        raise FieldTypeError("document", "top level must be an object")
    for fieldname in ("image_id", "keypoints", "color", "rejected"):
        if fieldname not in doc:
            raise MissingFieldError(fieldname)
    if not isinstance(doc["keypoints"], list):
        raise FieldTypeError("keypoints", "must be a list of [x, y] pairs")
    try:
        keypoints = [(float(p[0]), float(p[1])) for p in doc["keypoints"]]
    except (TypeError, ValueError, IndexError) as e:
        raise FieldTypeError("keypoints", f"entries must be [x, y] pairs: {e}") from e
    ann = ConeAnnotation(
        image_id=doc["image_id"],
        keypoints=keypoints,
        color=doc["color"],
        rejected=doc["rejected"],
        labeler=doc.get("labeler"),
        timestamp=doc.get("timestamp"),
    )
    validate_annotation(ann, image_size)
    return ann


def serialize_annotation(ann: ConeAnnotation) -> str:
    """Stable JSON rendering; parse(serialize(a)) == a."""
    doc = {
        "image_id": ann.image_id,
        "keypoints": [[float(x), float(y)] for x, y in ann.keypoints],
        "color": ann.color,
        "rejected": ann.rejected,
        "labeler": ann.labeler,
        "timestamp": ann.timestamp,
    }
    return json.dumps(doc, indent=2) + "\n"


def filter_dataset(annotations, image_size=(80, 80)):
    """Keep valid, non-rejected annotations; tally drop reasons.

    Returns (kept, tally) where tally counts {"rejected", "count", "bounds",
    "invalid"} drops. Filtering is total: nothing raises.
    """
    kept = []
    tally = {"rejected": 0, "count": 0, "bounds": 0, "invalid": 0}
    for ann in annotations:
        if ann.rejected:
            tally["rejected"] += 1
            continue
        try:
            validate_annotation(ann, image_size)
        except KeypointCountError:
            tally["count"] += 1
            continue
        except KeypointBoundsError:
            tally["bounds"] += 1
            continue
        except AnnotationError:
            tally["invalid"] += 1
            continue
        kept.append(ann)
    return kept, {k: v for k, v in tally.items() if v}
