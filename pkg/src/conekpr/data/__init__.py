from .annotations import (
    ANNOTATION_COLORS,
    NUM_KEYPOINTS,
    AnnotationError,
    ColorValueError,
    ConeAnnotation,
    FieldTypeError,
    KeypointBoundsError,
    KeypointCountError,
    MissingFieldError,
    filter_dataset,
    parse_annotation,
    serialize_annotation,
    validate_annotation,
)
from .augment import Rotation, random_boundary_crop, rotate_augment
from .dataset import (
    DatasetManifest,
    ManifestItem,
    SplitArrays,
    build_manifest,
    load_split_arrays,
    split_ids,
    to_training_sample,
)
