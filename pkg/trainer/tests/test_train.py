"""Training protocol: data plumbing, plateau rule, logs, checkpoints."""

import json
import math
import os

import numpy as np
import pytest
import torch

from drift_trainer import (
    DriftData,
    ModelSpec,
    TrainConfig,
    TrainingError,
    load_checkpoint,
    train,
    train_one,
)

SMALL_SPEC = ModelSpec(depth=3, base_width=8)


def quick_cfg(**overrides) -> TrainConfig:
    base = dict(max_epochs=2, seeds=(0,))
    base.update(overrides)
    return TrainConfig(**base)


class TestDriftData:
    def test_channels_and_shapes(self, small_data):
        assert small_data.n_channels == 3
        x, y, indices = small_data.split_tensors("train", 1.0)
        assert x.shape == (len(indices), 3, 24, 24)
        assert y.shape == (len(indices), 24, 24)
        assert x.dtype == torch.float32

    def test_split_indices_partition(self, small_data):
        splits = [small_data.split_sample_indices(s) for s in ("train", "val", "test")]
        merged = sorted(k for block in splits for k in block)
        assert merged == list(range(len(small_data.samples)))

    def test_velocity_scale_from_train_split(self, small_data):
        scale = small_data.velocity_scale("train")
        assert scale > 0.0
        peak = 0.0
        for k in small_data.split_sample_indices("train"):
            peak = max(peak, float(np.abs(small_data.input_stack(k)[:-1]).max()))
        assert scale == peak

    def test_scaling_leaves_density_alone(self, small_data):
        x, _, indices = small_data.split_tensors("train", 4.0)
        raw = small_data.input_stack(indices[0])
        assert np.allclose(x[0, :-1].numpy(), (raw[:-1] / 4.0).astype(np.float32))
        assert np.array_equal(x[0, -1].numpy(), raw[-1].astype(np.float32))

    def test_input_last_channel_is_density(self, small_data):
        k = small_data.split_sample_indices("train")[0]
        assert np.array_equal(small_data.input_stack(k)[-1], small_data.input_density(k))

    def test_unknown_split_rejected(self, small_data):
        with pytest.raises(ValueError, match="split"):
            small_data.split_ids("holdout")


class TestTrainConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.lr == 1e-4
        assert cfg.adam_betas == (0.9, 0.999)
        assert cfg.weight_decay == 0.0
        assert cfg.batch_size == 16
        assert cfg.plateau_patience_epochs == 3
        assert cfg.lr_decay_factor == 10.0
        assert cfg.stop_rule is True
        assert cfg.seeds == (0, 1, 2, 3)

    def test_validation(self):
        with pytest.raises(ValueError, match="loss kind"):
            TrainConfig(loss_kind="energy")
        with pytest.raises(ValueError, match="lr"):
            TrainConfig(lr=0.0)
        with pytest.raises(ValueError, match="batch_size"):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError, match="lr_decay_factor"):
            TrainConfig(lr_decay_factor=1.0)
        with pytest.raises(ValueError, match="seeds"):
            TrainConfig(seeds=())


class TestOverfit:
    def test_memorizes_eight_samples(self, overfit_dataset, tmp_path):
        # capacity sanity: 200 fixed-lr epochs on 8 samples must collapse the
        # train loss to under 1% of its first-epoch value; the diagnostic runs
        # at lr 3e-4 since the production rate is tuned for large datasets
        cfg = TrainConfig(stop_rule=False, max_epochs=200, seeds=(0,), lr=3e-4)
        result = train_one(DriftData(overfit_dataset), SMALL_SPEC, cfg, 0, tmp_path)
        assert result.epochs_run == 200
        assert result.val_losses == ()
        assert result.train_losses[-1] < 0.01 * result.train_losses[0]


class TestPlateauRule:
    def test_decay_then_halt(self, small_data, tmp_path):
        # a learning rate too small to change f32 weights freezes the val
        # loss, so plateaus fire like clockwork: decay at epoch 4, halt at 7
        cfg = TrainConfig(lr=1e-30, max_epochs=20, seeds=(0,))
        result = train_one(small_data, SMALL_SPEC, cfg, 0, tmp_path)
        assert result.epochs_run == 7
        assert result.decays_applied == 1
        lines = [json.loads(line) for line in open(result.log_path)]
        assert [ln["decays"] for ln in lines] == [0, 0, 0, 1, 1, 1, 1]
        assert lines[3]["lr"] == pytest.approx(1e-31)

    def test_applied_decays_never_exceed_one(self, small_data, tmp_path):
        cfg = TrainConfig(lr=1e-30, max_epochs=50, seeds=(0,))
        result = train_one(small_data, SMALL_SPEC, cfg, 0, tmp_path)
        assert result.decays_applied <= 1

    def test_no_stop_rule_runs_all_epochs(self, small_data, tmp_path):
        cfg = TrainConfig(lr=1e-30, max_epochs=9, stop_rule=False, seeds=(0,))
        result = train_one(small_data, SMALL_SPEC, cfg, 0, tmp_path)
        assert result.epochs_run == 9
        assert result.decays_applied == 0

    def test_stop_rule_needs_val_samples(self, overfit_dataset, tmp_path):
        with pytest.raises(TrainingError, match="val split"):
            train_one(DriftData(overfit_dataset), SMALL_SPEC, quick_cfg(), 0, tmp_path)


class TestAborts:
    def test_schema_mismatch(self, small_data, tmp_path):
        with pytest.raises(TrainingError, match="channels"):
            train_one(small_data, ModelSpec(in_channels=2, depth=3, base_width=8),
                      quick_cfg(), 0, tmp_path)

    def test_speed_dataset_needs_two_channels(self, speed_dataset, tmp_path):
        with pytest.raises(TrainingError, match="channels"):
            train(speed_dataset, SMALL_SPEC, quick_cfg(), tmp_path)

    def test_non_finite_loss(self, small_data, tmp_path):
        # an absurd learning rate blows the weights up within an epoch
        with pytest.raises(TrainingError, match="non-finite"):
            train_one(small_data, SMALL_SPEC, quick_cfg(lr=1e18, max_epochs=4), 0, tmp_path)


@pytest.fixture(scope="module")
def run(small_data, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    result = train_one(small_data, SMALL_SPEC, quick_cfg(max_epochs=3), 0, out)
    return result, out


class TestLogAndCheckpoint:
    def test_log_lines(self, run):
        result, _ = run
        lines = [json.loads(line) for line in open(result.log_path)]
        assert [ln["epoch"] for ln in lines] == [1, 2, 3]
        for ln in lines:
            assert set(ln) == {"epoch", "train_loss", "val_loss", "lr", "decays", "best_val", "seconds"}
            assert math.isfinite(ln["train_loss"])
            assert math.isfinite(ln["val_loss"])

    def test_checkpoint_payload(self, run, small_data):
        result, _ = run
        model, config = load_checkpoint(result.checkpoint_path)
        assert config["model"]["depth"] == 3
        assert config["model"]["base_width"] == 8
        assert config["model"]["density_residual"] is True
        assert config["model"]["padding"] == "reflect-pad-crop"
        assert config["train"]["loss_kind"] == "position"
        assert config["train"]["seed"] == 0
        assert config["data"]["channel_schema"] == "uv"
        assert config["data"]["velocity_scale"] == small_data.velocity_scale("train")
        assert config["run"]["epochs_run"] == 3
        assert config["run"]["selection"] == "best_val"
        assert config["run"]["best_val"] == result.best_val

    def test_checkpoint_model_is_frozen(self, run):
        result, _ = run
        model, _ = load_checkpoint(result.checkpoint_path)
        assert not model.training
        assert all(not p.requires_grad for p in model.parameters())
        out = model(torch.zeros(1, 3, 24, 24))
        assert out.shape == (1, 1, 24, 24)

    def test_no_temp_files_left(self, run):
        _, out = run
        assert not [name for name in os.listdir(out) if name.endswith(".tmp")]

    def test_drift_checkpoint_disables_residual(self, small_data, tmp_path):
        result = train_one(small_data, SMALL_SPEC, quick_cfg(loss_kind="drift"), 0, tmp_path)
        _, config = load_checkpoint(result.checkpoint_path)
        assert config["model"]["density_residual"] is False


class TestDeterminism:
    def test_same_seed_same_curves(self, small_data, tmp_path):
        cfg = quick_cfg(max_epochs=3)
        a = train_one(small_data, SMALL_SPEC, cfg, 0, tmp_path / "a")
        b = train_one(small_data, SMALL_SPEC, cfg, 0, tmp_path / "b")
        assert len(a.val_losses) == len(b.val_losses) == 3
        for va, vb in zip(a.val_losses, b.val_losses):
            assert va == pytest.approx(vb, abs=1e-4)
        for ta, tb in zip(a.train_losses, b.train_losses):
            assert ta == pytest.approx(tb, abs=1e-4)

    def test_different_seeds_checkpoint_separately(self, small_data, tmp_path):
        results = train(small_data, SMALL_SPEC, quick_cfg(max_epochs=1, seeds=(0, 1)), tmp_path)
        assert [r.seed for r in results] == [0, 1]
        assert {os.path.basename(r.checkpoint_path) for r in results} == {
            "model_s0.pt",
            "model_s1.pt",
        }


class TestDriftPositionEquivalence:
    def test_identical_batch_identical_loss(self, small_data, tmp_path):
        # the two families start from the same identity predictor, so their
        # epoch-1 losses on the same data agree to float precision
        pos = train_one(small_data, SMALL_SPEC, quick_cfg(max_epochs=1), 0, tmp_path / "p")
        dri = train_one(small_data, SMALL_SPEC, quick_cfg(max_epochs=1, loss_kind="drift"),
                        0, tmp_path / "d")
        assert dri.val_losses[0] == pytest.approx(pos.val_losses[0], abs=1e-6)
