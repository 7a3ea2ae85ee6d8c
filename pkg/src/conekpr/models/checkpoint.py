"""Checkpoint file format.

Layout: 8 magic bytes ("KPRCKPT1"), a little-endian uint32 header length, a
UTF-8 JSON header holding the architecture config, training metadata, and the
tensor index (name, shape, byte offset, byte count), then the concatenated
little-endian float32 payload. Parameters and batch-norm running buffers are
both stored, so a loaded model is eval-ready.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ModelConfig

MAGIC = b"KPRCKPT1"


class CheckpointError(Exception):
    """Base class for checkpoint load failures."""


class CheckpointMagicError(CheckpointError):
    """File does not start with the checkpoint magic bytes."""


class CheckpointFormatError(CheckpointError):
    """Header is unreadable or structurally invalid."""


class CheckpointTruncatedError(CheckpointError):
    """Payload is shorter than the tensor index requires."""


class CheckpointShapeError(CheckpointError):
    """A stored tensor's shape conflicts with the requested architecture."""

    def __init__(self, name: str, expected, got):
        super().__init__(
            f"tensor '{name}' has shape {tuple(got)} but the architecture "
            f"expects {tuple(expected)}"
        )
        self.tensor_name = name


@dataclass
class Checkpoint:
    config: ModelConfig
    state: dict  # name -> float32 ndarray (parameters and buffers)
    metadata: dict = field(default_factory=dict)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    tensors = []
    chunks = []
    offset = 0
    for name, arr in ckpt.state.items():
        data = np.ascontiguousarray(arr, dtype="<f4")
        raw = data.tobytes()
        tensors.append({
            "name": name,
            "shape": list(data.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps({
        "config": ckpt.config.to_dict(),
        "metadata": ckpt.metadata,
        "tensors": tensors,
    }).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for raw in chunks:
            f.write(raw)


def load_checkpoint(path) -> Checkpoint:
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 4 or blob[:len(MAGIC)] != MAGIC:
        raise CheckpointMagicError(f"'{path}' is not a checkpoint file (bad magic)")
    (header_len,) = struct.unpack_from("<I", blob, len(MAGIC))
    header_start = len(MAGIC) + 4
    payload_start = header_start + header_len
    if payload_start > len(blob):
        raise CheckpointTruncatedError(f"'{path}' is truncated inside the header")
    try:
        header = json.loads(blob[header_start:payload_start].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
        tensors = header["tensors"]
        metadata = header.get("metadata", {})
    except (ValueError, KeyError, TypeError) as e:
        raise CheckpointFormatError(f"'{path}' has a corrupt header: {e}") from e
    payload = blob[payload_start:]
    state = {}
    for entry in tensors:
        start = entry["offset"]
        end = start + entry["nbytes"]
        if end > len(payload):
            raise CheckpointTruncatedError(
                f"'{path}' is truncated: tensor '{entry['name']}' needs bytes "
                f"[{start}, {end}) but payload has {len(payload)}"
            )
        arr = np.frombuffer(payload[start:end], dtype="<f4").reshape(entry["shape"])
        expected = int(np.prod(entry["shape"])) * 4
        if expected != entry["nbytes"]:
            raise CheckpointFormatError(
                f"tensor '{entry['name']}' index is inconsistent "
                f"({entry['nbytes']} bytes for shape {entry['shape']})"
            )
        state[entry["name"]] = arr.copy()
    return Checkpoint(config=config, state=state, metadata=metadata)


def model_state_dict(model) -> dict:
    """Parameters plus buffers, in declaration order."""
    state = {}
    for name, p in model.parameters():
        state[name] = p.data
    for name, b in model.buffers():
        state[name] = b
    return state


def load_model_state(model, state: dict) -> None:
    """Assign a state dict into a model, checking names and shapes."""
    for name, p in model.parameters():
        if name not in state:
            raise CheckpointFormatError(f"state is missing tensor '{name}'")
        arr = state[name]
        if tuple(arr.shape) != tuple(p.data.shape):
            raise CheckpointShapeError(name, p.data.shape, arr.shape)
        p.data = np.asarray(arr, dtype=p.data.dtype).copy()
    for name, b in model.buffers():
        if name not in state:
            raise CheckpointFormatError(f"state is missing buffer '{name}'")
        arr = state[name]
        if tuple(arr.shape) != tuple(b.shape):
            raise CheckpointShapeError(name, b.shape, arr.shape)
        b[...] = np.asarray(arr, dtype=b.dtype)


def build_model(ckpt: Checkpoint, config_override: ModelConfig | None = None,
                dtype=np.float32):
    """Instantiate the checkpoint's architecture and load its state.

    A config override must be shape-compatible; the first mismatching tensor
    raises CheckpointShapeError.
    """
    from .resnet import ResNetKeypointNet
    from .unet import UNetKeypointNet

    config = config_override or ckpt.config
    if config.arch == "unet":
        model = UNetKeypointNet(config, dtype=dtype)
    else:
        model = ResNetKeypointNet(config, dtype=dtype)
    load_model_state(model, ckpt.state)
    return model
