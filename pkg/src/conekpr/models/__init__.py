from .checkpoint import (
    Checkpoint,
    CheckpointError,
    CheckpointFormatError,
    CheckpointMagicError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    build_model,
    load_checkpoint,
    load_model_state,
    model_state_dict,
    save_checkpoint,
)
from .config import KeypointPrediction, ModelConfig, heatmap_confidence
from .resnet import ResNetKeypointNet
from .train import StepRecord, TrainingDivergedError, TrainLog, TrainResult, make_model, train
from .unet import UNetKeypointNet
