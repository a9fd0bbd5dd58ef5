"""Training-plan emission, validation, and serialization."""

import dataclasses
import json

import pytest

from lingua_bridge.plans import (
    FINETUNE_REFERENCE,
    NEAR_ZERO_LR,
    PRETRAIN_REFERENCE,
    Precision,
    StageConfig,
    TrainingMethod,
    TrainingPlan,
    Violation,
    load_plan,
    plan_for,
    save_plan,
    validate_plan,
)

# Independent transcription of the reference training recipes, kept separate
# from the module constants on purpose: if either side drifts, a test fails.
EXPECTED_PRETRAIN = {
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
    "frozen": frozenset({"vision_encoder", "llm"}),
}

EXPECTED_FINETUNE = {
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


def stage_values(stage: StageConfig) -> dict:
    data = stage.to_dict()
    return {
        key: (
            frozenset(data[key])
            if key == "frozen"
            else data[key]
        )
        for key in EXPECTED_PRETRAIN
    }


class TestReferenceValues:
    def test_pretrain_reference(self):
        assert PRETRAIN_REFERENCE == EXPECTED_PRETRAIN

    def test_finetune_reference(self):
        assert FINETUNE_REFERENCE == EXPECTED_FINETUNE


class TestPlanFor:
    def test_pretrain_then_finetune_with_english_pretraining_data(self):
        plan = plan_for(TrainingMethod.EN_PRETRAIN_FR_FINETUNE)
        assert [s.name for s in plan.stages] == ["pretrain", "finetune"]
        assert [s.data_language for s in plan.stages] == ["en", "fr"]
        assert stage_values(plan.stages[0]) == EXPECTED_PRETRAIN
        assert stage_values(plan.stages[1]) == EXPECTED_FINETUNE

    def test_pretrain_then_finetune_all_target_language(self):
        plan = plan_for(TrainingMethod.FR_PRETRAIN_FR_FINETUNE)
        assert [s.data_language for s in plan.stages] == ["fr", "fr"]
        assert stage_values(plan.stages[0]) == EXPECTED_PRETRAIN
        assert stage_values(plan.stages[1]) == EXPECTED_FINETUNE

    def test_double_finetune_stage_shapes(self):
        plan = plan_for(TrainingMethod.DOUBLE_FINETUNE)
        vision, llm = plan.stages
        assert [s.name for s in plan.stages] == ["finetune-vision", "finetune-llm"]
        assert {s.data_language for s in plan.stages} == {"fr"}

        # Stage 1: vision side adapts; the language model is pinned by the
        # near-zero learning rate and no LoRA adapters are attached.
        assert vision.llm_lr == 1e-10
        assert vision.vision_encoder_lr == 5e-5
        assert vision.lora_rank is None and vision.lora_alpha is None
        assert vision.assumed == ("vision_encoder_lr",)

        # Stage 2: language model LoRA-finetunes; encoder pinned.
        assert llm.vision_encoder_lr == 1e-10
        assert llm.llm_lr == 2e-5
        assert (llm.lora_rank, llm.lora_alpha) == (128, 256)
        assert llm.assumed == ("vision_encoder_lr",)

    def test_double_finetune_shares_remaining_finetune_values(self):
        plan = plan_for(TrainingMethod.DOUBLE_FINETUNE)
        for stage in plan.stages:
            assert stage.precision is Precision.FP16
            assert stage.projection_type == "mlp2x_gelu"
            assert stage.weight_decay == 0.0
            assert stage.warmup_ratio == 0.03
            assert stage.epochs == 1
            assert stage.batch_size == 128
            assert stage.frozen == frozenset()

    def test_custom_pin_rate_applies_to_both_stages(self):
        plan = plan_for(TrainingMethod.DOUBLE_FINETUNE, near_zero_lr=1e-8)
        assert plan.stages[0].llm_lr == 1e-8
        assert plan.stages[1].vision_encoder_lr == 1e-8

    def test_accepts_method_as_string(self):
        plan = plan_for("DoubleFinetune")
        assert plan.method is TrainingMethod.DOUBLE_FINETUNE

    def test_near_zero_constant(self):
        assert NEAR_ZERO_LR == 1e-10


class TestValidatePlan:
    @pytest.mark.parametrize("method", list(TrainingMethod))
    def test_canonical_plans_are_clean(self, method):
        assert validate_plan(plan_for(method)) == []

    def _edited(self, method=TrainingMethod.EN_PRETRAIN_FR_FINETUNE, **overrides):
        plan = plan_for(method)
        stages = list(plan.stages)
        stages[1] = dataclasses.replace(stages[1], **overrides)
        return TrainingPlan(method=plan.method, stages=tuple(stages))

    def test_drift_is_a_warning_naming_both_values(self):
        violations = validate_plan(self._edited(llm_lr=3e-4))
        assert len(violations) == 1
        violation = violations[0]
        assert violation.level == "warning"
        assert violation.stage == "finetune"
        assert "llm_lr" in violation.message
        assert "0.0003" in violation.message and "2e-05" in violation.message

    def test_violation_renders_with_level_and_stage(self):
        text = str(validate_plan(self._edited(batch_size=64))[0])
        assert text.startswith("warning: stage 'finetune': batch_size")

    def test_lora_fields_must_be_paired(self):
        violations = validate_plan(self._edited(lora_alpha=None))
        assert any(
            v.level == "error" and "set together" in v.message for v in violations
        )

    def test_lora_rank_must_be_positive(self):
        violations = validate_plan(self._edited(lora_rank=0))
        assert any(v.level == "error" and "lora_rank" in v.message for v in violations)

    @pytest.mark.parametrize("field_name", ["epochs", "batch_size"])
    def test_counts_must_be_positive(self, field_name):
        violations = validate_plan(self._edited(**{field_name: 0}))
        assert any(
            v.level == "error" and field_name in v.message for v in violations
        )

    def test_frozen_component_must_keep_zero_lr(self):
        plan = plan_for(TrainingMethod.EN_PRETRAIN_FR_FINETUNE)
        stages = list(plan.stages)
        stages[0] = dataclasses.replace(stages[0], llm_lr=1e-5)
        violations = validate_plan(TrainingPlan(plan.method, tuple(stages)))
        assert any(
            v.level == "error" and "frozen but has learning rate" in v.message
            for v in violations
        )

    def test_unknown_frozen_component(self):
        violations = validate_plan(self._edited(frozen=frozenset({"tokenizer"})))
        assert any(
            v.level == "error" and "tokenizer" in v.message for v in violations
        )

    def test_negative_rates_are_errors(self):
        violations = validate_plan(self._edited(weight_decay=-0.1))
        assert any(
            v.level == "error" and "weight_decay" in v.message for v in violations
        )

    def test_extra_stage_warns_without_erroring(self):
        plan = plan_for(TrainingMethod.EN_PRETRAIN_FR_FINETUNE)
        extra = dataclasses.replace(plan.stages[1], name="finetune-again")
        violations = validate_plan(
            TrainingPlan(plan.method, plan.stages + (extra,))
        )
        assert all(v.level == "warning" for v in violations)
        assert any("no reference counterpart" in v.message for v in violations)
        assert any("3 stages" in v.message for v in violations)

    def test_empty_plan_is_an_error(self):
        violations = validate_plan(
            TrainingPlan(TrainingMethod.DOUBLE_FINETUNE, ())
        )
        assert any(
            v.level == "error" and "no stages" in v.message for v in violations
        )

    def test_violation_without_stage_renders_plainly(self):
        assert str(Violation("error", None, "plan has no stages")) == (
            "error: plan has no stages"
        )


class TestSerialization:
    @pytest.mark.parametrize("method", list(TrainingMethod))
    def test_dict_round_trip_is_lossless(self, method):
        plan = plan_for(method)
        assert TrainingPlan.from_dict(plan.to_dict()) == plan

    def test_save_and_load(self, tmp_path):
        plan = plan_for(TrainingMethod.DOUBLE_FINETUNE)
        path = tmp_path / "plans" / "double.json"
        save_plan(plan, path)
        assert load_plan(path) == plan

    def test_file_shape_is_plain_json(self, tmp_path):
        path = tmp_path / "plan.json"
        save_plan(plan_for(TrainingMethod.EN_PRETRAIN_FR_FINETUNE), path)
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data["method"] == "EnPretrainFrFinetune"
        assert [s["name"] for s in data["stages"]] == ["pretrain", "finetune"]
        assert data["stages"][0]["frozen"] == ["llm", "vision_encoder"]
        assert data["stages"][0]["precision"] == "fp16"
        assert data["stages"][1]["lora_rank"] == 128

    def test_loaded_plan_revalidates_clean(self, tmp_path):
        path = tmp_path / "plan.json"
        save_plan(plan_for(TrainingMethod.FR_PRETRAIN_FR_FINETUNE), path)
        assert validate_plan(load_plan(path)) == []

    def test_edited_file_loads_with_defaults(self, tmp_path):
        path = tmp_path / "plan.json"
        path.write_text(
            json.dumps(
                {
                    "method": "DoubleFinetune",
                    "stages": [
                        {
                            "name": "finetune-vision",
                            "data_language": "fr",
                            "vision_encoder_lr": 5e-5,
                            "llm_lr": 1e-10,
                            "projection_lr": 2e-5,
                        }
                    ],
                }
            ),
            encoding="utf-8",
        )
        plan = load_plan(path)
        stage = plan.stages[0]
        assert stage.precision is Precision.FP16
        assert stage.batch_size == 128
        assert stage.lora_rank is None
        assert stage.assumed == ()
