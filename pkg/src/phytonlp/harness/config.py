from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping

from ..errors import ConfigError

STAGES = ("lm_finetune", "classify")


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters for both training stages.

    Defaults: batch size 8, Adam, learning rate 1e-4 for masked-LM adaptation
    over 2 epochs, 2e-5 for the classifier over 5 epochs (10 is the other
    setting in use), sequences cut at 256 tokens, decision threshold 0.5.
    """

    stage: str = "classify"
    batch_size: int = 8
    lm_learning_rate: float = 1e-4
    clf_learning_rate: float = 2e-5
    lm_epochs: int = 2
    clf_epochs: int = 5
    max_sequence_length: int = 256
    threshold: float = 0.5
    optimizer: str = "adam"
    seed: int = 0
    validation_fraction: float = 0.1
    mlm_probability: float = 0.15
    finetune_encoder: bool = True

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ConfigError("schema", f"stage must be one of {STAGES}, got {self.stage!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("schema", f"threshold must be strictly between 0 and 1, got {self.threshold}")
        if self.optimizer != "adam":
            raise ConfigError("schema", f"only the adam optimizer is supported, got {self.optimizer!r}")
        if self.batch_size < 1 or self.max_sequence_length < 1:
            raise ConfigError("schema", "batch_size and max_sequence_length must be positive")
        if self.lm_epochs < 0 or self.clf_epochs < 0:
            raise ConfigError("schema", "epoch counts must be >= 0")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("schema", "validation_fraction must be in (0, 1)")
        if not 0.0 < self.mlm_probability < 1.0:
            raise ConfigError("schema", "mlm_probability must be in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainingConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError("schema", f"unknown training options {sorted(unknown)}")
        return cls(**d)
