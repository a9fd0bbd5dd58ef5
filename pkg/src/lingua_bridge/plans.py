"""Training-plan emission for the finetuning-based adaptation methods.

Plans are machine-readable JSON documents for external training stacks, not
tied to any trainer. Two reference value sets (pretraining and finetuning)
are embedded here; validate_plan cross-checks user-edited plans against them
and reports drift as warnings, keeping hard errors for structural breakage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Optional

VISION_ENCODER = "vision_encoder"
LLM = "llm"

# Learning rate that freezes a component in practice while keeping the
# optimizer wiring intact (the stage-1 trick of the double-finetune method).
NEAR_ZERO_LR = 1e-10


class TrainingMethod(str, Enum):
    EN_PRETRAIN_FR_FINETUNE = "EnPretrainFrFinetune"
    FR_PRETRAIN_FR_FINETUNE = "FrPretrainFrFinetune"
    DOUBLE_FINETUNE = "DoubleFinetune"


class Precision(str, Enum):
    FP16 = "fp16"
    FP32 = "fp32"


# Reference hyperparameters for a projection-only pretraining stage. Frozen
# components carry lr 0.0 by convention.
PRETRAIN_REFERENCE: dict[str, Any] = {
    "vision_encoder_lr": 0.0,
    "llm_lr": 0.0,
    "projection_lr": 1e-3,
    "lora_rank": None,
    "lora_alpha": None,
    "precision": "fp16",
    "projection_type": "mlp2x_gelu",
    "weight_decay": 0.0,
    "warmup_ratio": 0.03,
    "epochs": 1,
    "batch_size": 128,
    "frozen": frozenset({VISION_ENCODER, LLM}),
}

# Reference hyperparameters for a LoRA finetuning stage.
FINETUNE_REFERENCE: dict[str, Any] = {
    "vision_encoder_lr": 5e-5,
    "llm_lr": 2e-5,
    "projection_lr": 2e-5,
    "lora_rank": 128,
    "lora_alpha": 256,
    "precision": "fp16",
    "projection_type": "mlp2x_gelu",
    "weight_decay": 0.0,
    "warmup_ratio": 0.03,
    "epochs": 1,
    "batch_size": 128,
    "frozen": frozenset(),
}


@dataclass(frozen=True)
class StageConfig:
    """One training stage. Construction is permissive so edited plans can be
    loaded and then judged by validate_plan."""

    name: str
    data_language: str
    vision_encoder_lr: float
    llm_lr: float
    projection_lr: float
    lora_rank: Optional[int] = None
    lora_alpha: Optional[int] = None
    precision: Precision = Precision.FP16
    projection_type: str = "mlp2x_gelu"
    weight_decay: float = 0.0
    warmup_ratio: float = 0.03
    epochs: int = 1
    batch_size: int = 128
    frozen: frozenset[str] = frozenset()
    # Field names whose values are assumptions, not sourced settings.
    assumed: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "data_language": self.data_language,
            "vision_encoder_lr": self.vision_encoder_lr,
            "llm_lr": self.llm_lr,
            "projection_lr": self.projection_lr,
            "lora_rank": self.lora_rank,
            "lora_alpha": self.lora_alpha,
            "precision": self.precision.value,
            "projection_type": self.projection_type,
            "weight_decay": self.weight_decay,
            "warmup_ratio": self.warmup_ratio,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "frozen": sorted(self.frozen),
            "assumed": list(self.assumed),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StageConfig":
        return cls(
            name=data["name"],
            data_language=data["data_language"],
            vision_encoder_lr=data["vision_encoder_lr"],
            llm_lr=data["llm_lr"],
            projection_lr=data["projection_lr"],
            lora_rank=data.get("lora_rank"),
            lora_alpha=data.get("lora_alpha"),
            precision=Precision(data.get("precision", "fp16")),
            projection_type=data.get("projection_type", "mlp2x_gelu"),
            weight_decay=data.get("weight_decay", 0.0),
            warmup_ratio=data.get("warmup_ratio", 0.03),
            epochs=data.get("epochs", 1),
            batch_size=data.get("batch_size", 128),
            frozen=frozenset(data.get("frozen", ())),
            assumed=tuple(data.get("assumed", ())),
        )


@dataclass(frozen=True)
class TrainingPlan:
    method: TrainingMethod
    stages: tuple[StageConfig, ...]

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "stages": [stage.to_dict() for stage in self.stages],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingPlan":
        return cls(
            method=TrainingMethod(data["method"]),
            stages=tuple(StageConfig.from_dict(s) for s in data["stages"]),
        )


def _stage(name: str, data_language: str, reference: dict[str, Any], **overrides: Any) -> StageConfig:
    values = {**reference, **overrides}
    values["precision"] = Precision(values["precision"])
    values["frozen"] = frozenset(values["frozen"])
    return StageConfig(name=name, data_language=data_language, **values)


def plan_for(method: TrainingMethod, near_zero_lr: float = NEAR_ZERO_LR) -> TrainingPlan:
    """Build the canonical plan for a method.

    The double-finetune method runs two finetuning stages: first the vision
    side adapts while the language model is pinned by a 1e-10 learning rate,
    then the language model LoRA-finetunes while the encoder learning rate
    is near-zero. The near-zero value and the stage-1 encoder rate are
    assumptions, marked as such on the stages.
    """
    method = TrainingMethod(method)
    if method is TrainingMethod.EN_PRETRAIN_FR_FINETUNE:
        stages = (
            _stage("pretrain", "en", PRETRAIN_REFERENCE),
            _stage("finetune", "fr", FINETUNE_REFERENCE),
        )
    elif method is TrainingMethod.FR_PRETRAIN_FR_FINETUNE:
        stages = (
            _stage("pretrain", "fr", PRETRAIN_REFERENCE),
            _stage("finetune", "fr", FINETUNE_REFERENCE),
        )
    else:
        stages = (
            _stage(
                "finetune-vision",
                "fr",
                FINETUNE_REFERENCE,
                llm_lr=near_zero_lr,
                lora_rank=None,
                lora_alpha=None,
                assumed=("vision_encoder_lr",),
            ),
            _stage(
                "finetune-llm",
                "fr",
                FINETUNE_REFERENCE,
                vision_encoder_lr=near_zero_lr,
                assumed=("vision_encoder_lr",),
            ),
        )
    return TrainingPlan(method=method, stages=stages)


@dataclass(frozen=True)
class Violation:
    level: str  # "error" or "warning"
    stage: Optional[str]
    message: str

    def __str__(self) -> str:
        where = f"stage {self.stage!r}: " if self.stage else ""
        return f"{self.level}: {where}{self.message}"


def validate_plan(plan: TrainingPlan) -> list[Violation]:
    """Check structural invariants (errors) and drift from the reference
    values (warnings; plans are user-editable on purpose)."""
    violations: list[Violation] = []
    if not plan.stages:
        violations.append(Violation("error", None, "plan has no stages"))

    for stage in plan.stages:
        def err(message: str) -> None:
            violations.append(Violation("error", stage.name, message))

        if (stage.lora_rank is None) != (stage.lora_alpha is None):
            err("lora_rank and lora_alpha must be set together")
        if stage.lora_rank is not None and stage.lora_rank < 1:
            err("lora_rank must be positive")
        if stage.epochs < 1:
            err("epochs must be positive")
        if stage.batch_size < 1:
            err("batch_size must be positive")
        for component, lr in ((VISION_ENCODER, stage.vision_encoder_lr), (LLM, stage.llm_lr)):
            if component in stage.frozen and lr != 0.0:
                err(f"{component} is frozen but has learning rate {lr}")
        unknown = stage.frozen - {VISION_ENCODER, LLM}
        if unknown:
            err(f"unknown frozen components: {sorted(unknown)}")
        for lr_name in ("vision_encoder_lr", "llm_lr", "projection_lr", "weight_decay", "warmup_ratio"):
            if getattr(stage, lr_name) < 0:
                err(f"{lr_name} must be non-negative")

    reference = plan_for(plan.method)
    for position, stage in enumerate(plan.stages):
        if position >= len(reference.stages):
            violations.append(
                Violation("warning", stage.name, "stage has no reference counterpart")
            )
            continue
        expected = reference.stages[position]
        for field_name in (
            "vision_encoder_lr",
            "llm_lr",
            "projection_lr",
            "lora_rank",
            "lora_alpha",
            "precision",
            "projection_type",
            "weight_decay",
            "warmup_ratio",
            "epochs",
            "batch_size",
            "frozen",
        ):
            actual_value = getattr(stage, field_name)
            expected_value = getattr(expected, field_name)
            if actual_value != expected_value:
                violations.append(
                    Violation(
                        "warning",
                        stage.name,
                        f"{field_name} is {actual_value!r}, reference value is "
                        f"{expected_value!r}",
                    )
                )
    if len(plan.stages) != len(reference.stages):
        violations.append(
            Violation(
                "warning",
                None,
                f"plan has {len(plan.stages)} stages, reference has "
                f"{len(reference.stages)}",
            )
        )
    return violations


def save_plan(plan: TrainingPlan, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(plan.to_dict(), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def load_plan(path: Path) -> TrainingPlan:
    return TrainingPlan.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
