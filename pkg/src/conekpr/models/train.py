"""Training loop: AdamW with a per-epoch exponential LR schedule, per-step
loss logging, and best-validation-checkpoint selection.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..losses import _penalty, custom_loss_with_grads, heatmap_target
from ..nn.optim import AdamW, exp_lr
from .checkpoint import Checkpoint, load_model_state, model_state_dict
from .config import ModelConfig
from .resnet import ResNetKeypointNet
from .unet import UNetKeypointNet


class TrainingDivergedError(RuntimeError):
    def __init__(self, step: int, epoch: int, loss: float):
        super().__init__(
            f"non-finite loss {loss} at step {step} (epoch {epoch}); aborting"
        )
        self.step = step
        self.epoch = epoch


@dataclass
class StepRecord:
    step: int
    epoch: int
    lr: float
    loss: float


@dataclass
class TrainLog:
    steps: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)  # one per epoch
    train_epoch_losses: list = field(default_factory=list)

    def save(self, path):
        doc = {
            "steps": [asdict(s) for s in self.steps],
            "val_losses": self.val_losses,
            "train_epoch_losses": self.train_epoch_losses,
        }
        Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log: TrainLog
    model: object


def make_model(config: ModelConfig, seed: int = 0, dtype=np.float32):
    if config.arch == "unet":
        return UNetKeypointNet(config, seed=seed, dtype=dtype)
    return ResNetKeypointNet(config, seed=seed, dtype=dtype)


def train(config: ModelConfig, train_images, train_keypoints, val_images, val_keypoints,
          epochs: int, seed: int = 0, lr: float = 1e-3, batch_size: int = 32,
          weight_decay: float = 1e-4, sigma: float = 2.0, position_weight: float = 1.0,
          log_callback=None) -> TrainResult:
    """Train from scratch; returns the validation-best checkpoint and the log.

    Deterministic for a fixed seed: weight init, shuffling, and dropout all
    derive from it. The heatmap loss term applies only to the heatmap
    architecture; the regression baseline trains on the position term alone.
    """
    train_images = np.asarray(train_images, dtype=np.float32)
    val_images = np.asarray(val_images, dtype=np.float32)
    train_kps = np.asarray(train_keypoints, dtype=np.float32)
    val_kps = np.asarray(val_keypoints, dtype=np.float32)
    if train_images.shape[0] == 0:
        raise ValueError("training split is empty")
    if val_images.shape[0] == 0:
        raise ValueError("validation split is empty")

    model = make_model(config, seed=seed)
    opt = AdamW(list(model.parameters()), lr=lr, weight_decay=weight_decay)
    log = TrainLog()
    s = config.input_size
    mode = config.loss_mode
    is_unet = isinstance(model, UNetKeypointNet)

    def run_batch(images, kps, train_mode, rng=None, do_backward=False) -> float:
        if is_unet:
            out = model.forward(images, train=train_mode, rng=rng)
            heat = heatmap_target(kps, s, s, sigma=sigma)
            loss, d_heat, d_coords = custom_loss_with_grads(
                out.heatmaps, out.coords, heat, kps,
                mode=mode, position_weight=position_weight)
            if do_backward:
                model.backward(d_coords, d_heat)
            return loss
        coords = model.forward(images, train=train_mode)
        n = coords.shape[0]
        val, grad = _penalty(coords - kps, mode, 1.0)
        loss = position_weight * float(val.sum()) / n
        if do_backward:
            model.backward((position_weight / n) * grad.astype(coords.dtype))
        return loss

    def validation_loss() -> float:
        total = 0.0
        for i in range(0, val_images.shape[0], batch_size):
            xb = val_images[i:i + batch_size]
            total += run_batch(xb, val_kps[i:i + batch_size], train_mode=False) * xb.shape[0]
        return total / val_images.shape[0]

    best_state = copy.deepcopy(model_state_dict(model))
    best_val = float("inf")
    best_epoch = 0

    shuffle_rng = np.random.default_rng((seed, 1))
    step = 0
    for epoch in range(epochs):
        opt.lr = exp_lr(lr, epoch)
        perm = shuffle_rng.permutation(train_images.shape[0])
        epoch_loss = 0.0
        for i in range(0, perm.size, batch_size):
            idx = perm[i:i + batch_size]
            drop_rng = np.random.default_rng((seed, 2, step))
            opt.zero_grad()
            loss = run_batch(train_images[idx], train_kps[idx], train_mode=True,
                             rng=drop_rng, do_backward=True)
            if not np.isfinite(loss):
                raise TrainingDivergedError(step, epoch, loss)
            opt.step()
            log.steps.append(StepRecord(step=step, epoch=epoch, lr=opt.lr, loss=loss))
            epoch_loss += loss * idx.size
            step += 1
        log.train_epoch_losses.append(epoch_loss / perm.size)
        vloss = validation_loss()
        log.val_losses.append(vloss)
        if vloss < best_val:
            best_val = vloss
            best_epoch = epoch
            best_state = copy.deepcopy(model_state_dict(model))
        if log_callback:
            log_callback(epoch, log.train_epoch_losses[-1], vloss)

    metadata = {
        "epochs": epochs,
        "best_epoch": best_epoch,
        "best_val_loss": best_val if epochs > 0 else None,
        "seed": seed,
        "lr": lr,
        "batch_size": batch_size,
    }
    ckpt = Checkpoint(config=config,
                      state={k: np.asarray(v, dtype=np.float32) for k, v in best_state.items()},
                      metadata=metadata)
    load_model_state(model, best_state)
    return TrainResult(checkpoint=ckpt, log=log, model=model)
