from .artifact import ModelArtifact, PredictionResult, decide, load_artifact, predict, save_artifact
from .backends import (
    Capabilities,
    EncoderBackend,
    OfflineHashingBackend,
    TransformerBackend,
    make_backend,
    make_tiny_masked_lm,
    offline_test_backend,
)
from .config import TrainingConfig
from .training import LMResult, finetune_language_model, train_classifier

__all__ = [
    "Capabilities",
    "EncoderBackend",
    "LMResult",
    "ModelArtifact",
    "OfflineHashingBackend",
    "PredictionResult",
    "TrainingConfig",
    "TransformerBackend",
    "decide",
    "finetune_language_model",
    "load_artifact",
    "make_backend",
    "make_tiny_masked_lm",
    "offline_test_backend",
    "predict",
    "save_artifact",
    "train_classifier",
]
