"""Training loop: schedule, reproducibility, and failure reporting."""

import json

import numpy as np
import pytest
import torch

from qsctrainer import (
    ArgumentError,
    ConfigError,
    DecoderSpec,
    EncoderSpec,
    TrainConfig,
    TrainingError,
    build_models,
    load_train_config,
    simulate_channel_noise,
    synthetic_clouds,
    train,
)

TINY = dict(epochs=2, batch_size=2, n=6, k=4)


def _tiny_models(seed=0):
    return build_models(
        EncoderSpec(n=6, k=4, stage_widths=(8, 8, 8, 8, 8)),
        DecoderSpec(n=6, n_points=16, upsample_widths=(8, 8), refine_widths=(8, 3)),
        seed=seed,
    )


def _tiny_clouds(count=4):
    return synthetic_clouds(count, 16, seed=5)


class TestTrainConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"epochs": 0, "batch_size": 1, "n": 6},
            {"epochs": 1, "batch_size": 0, "n": 6},
            {"epochs": 1, "batch_size": 1, "n": 0},
            {"epochs": 1, "batch_size": 1, "n": 6, "k": 0},
            {"epochs": 1, "batch_size": 1, "n": 6, "lr_initial": 0.0},
            {"epochs": 1, "batch_size": 1, "n": 6, "lr_halve_epochs": 0},
            {"epochs": 1, "batch_size": 1, "n": 6, "noise_sigma": -0.1},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ArgumentError):
            TrainConfig(**kwargs)

    def test_defaults(self):
        cfg = TrainConfig(epochs=1, batch_size=1, n=6)
        assert cfg.lr_initial == 1e-3
        assert cfg.lr_halve_epochs == 20
        assert cfg.noise_sigma == 0.0


class TestLoadTrainConfig:
    def _write(self, tmp_path, payload):
        path = tmp_path / "train.json"
        path.write_text(json.dumps(payload) if isinstance(payload, dict) else payload)
        return path

    def test_roundtrip(self, tmp_path):
        path = self._write(
            tmp_path,
            {"epochs": 3, "batch_size": 2, "n": 6, "lr_initial": 0.01, "seed": 9},
        )
        cfg = load_train_config(path)
        assert cfg == TrainConfig(epochs=3, batch_size=2, n=6, lr_initial=0.01, seed=9)

    def test_missing_field_named(self, tmp_path):
        path = self._write(tmp_path, {"epochs": 3, "batch_size": 2})
        with pytest.raises(ConfigError, match="'n'"):
            load_train_config(path)

    def test_unknown_field_named(self, tmp_path):
        path = self._write(
            tmp_path, {"epochs": 3, "batch_size": 2, "n": 6, "momentum": 0.9}
        )
        with pytest.raises(ConfigError, match="'momentum'"):
            load_train_config(path)

    def test_non_numeric_value_named(self, tmp_path):
        path = self._write(tmp_path, {"epochs": "three", "batch_size": 2, "n": 6})
        with pytest.raises(ConfigError, match="epochs"):
            load_train_config(path)

    def test_non_integer_count_named(self, tmp_path):
        path = self._write(tmp_path, {"epochs": 2.5, "batch_size": 2, "n": 6})
        with pytest.raises(ConfigError, match="epochs"):
            load_train_config(path)

    def test_out_of_range_value_named(self, tmp_path):
        path = self._write(
            tmp_path, {"epochs": 2, "batch_size": 2, "n": 6, "lr_initial": 0.0}
        )
        with pytest.raises(ConfigError, match="learning rate"):
            load_train_config(path)

    def test_invalid_json(self, tmp_path):
        path = self._write(tmp_path, "{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_train_config(path)

    def test_non_object_json(self, tmp_path):
        path = self._write(tmp_path, "[1, 2]")
        with pytest.raises(ConfigError, match="JSON object"):
            load_train_config(path)


class TestChannelNoise:
    def test_sigma_zero_is_identity(self):
        code = torch.ones(8, dtype=torch.float64)
        assert simulate_channel_noise(code, 0.0) is code

    def test_negative_sigma_rejected(self):
        with pytest.raises(ArgumentError, match="sigma"):
            simulate_channel_noise(torch.ones(8), -1.0)

    def test_seeded_draw_is_reproducible(self):
        code = torch.zeros(64, dtype=torch.float64)
        draws = [
            simulate_channel_noise(code, 0.1, torch.Generator().manual_seed(3))
            for _ in range(2)
        ]
        assert (draws[0] == draws[1]).all()
        assert not (draws[0] == 0).all()

    def test_perturbation_magnitude(self):
        # sample std of 10^4 draws, bounded at 5x the estimator's own
        # standard error sigma/sqrt(2n)
        code = torch.zeros(10_000, dtype=torch.float64)
        noisy = simulate_channel_noise(code, 0.1, torch.Generator().manual_seed(4))
        assert float(noisy.std()) == pytest.approx(0.1, abs=5 * 0.1 / np.sqrt(20_000))


class TestTrainLoop:
    def test_history_lengths(self):
        result = train(_tiny_models(), _tiny_clouds(), TrainConfig(**TINY))
        assert len(result.epoch_mean_cd) == 2
        assert len(result.epoch_lr) == 2

    def test_lr_halves_on_schedule(self):
        cfg = TrainConfig(
            epochs=4, batch_size=4, n=6, k=4, lr_initial=0.008, lr_halve_epochs=1
        )
        result = train(_tiny_models(), _tiny_clouds(), cfg)
        assert result.epoch_lr == (0.008, 0.004, 0.002, 0.001)

    def test_lr_constant_before_first_halving(self):
        cfg = TrainConfig(epochs=3, batch_size=4, n=6, k=4, lr_halve_epochs=20)
        result = train(_tiny_models(), _tiny_clouds(), cfg)
        assert result.epoch_lr == (1e-3, 1e-3, 1e-3)

    def test_same_seed_same_history(self):
        histories = [
            train(_tiny_models(seed=1), _tiny_clouds(), TrainConfig(**TINY, seed=7))
            for _ in range(2)
        ]
        assert histories[0] == histories[1]

    def test_loss_decreases_on_tiny_overfit(self):
        cfg = TrainConfig(epochs=15, batch_size=2, n=6, k=4, lr_initial=0.01)
        result = train(_tiny_models(), _tiny_clouds(2), cfg)
        assert result.epoch_mean_cd[-1] < result.epoch_mean_cd[0]

    def test_noise_sigma_changes_history(self):
        clean = train(_tiny_models(seed=2), _tiny_clouds(), TrainConfig(**TINY))
        noisy = train(
            _tiny_models(seed=2),
            _tiny_clouds(),
            TrainConfig(**TINY, noise_sigma=0.5),
        )
        assert clean.epoch_mean_cd != noisy.epoch_mean_cd


class TestTrainFailures:
    def test_empty_dataset(self):
        with pytest.raises(ArgumentError, match="empty"):
            train(_tiny_models(), [], TrainConfig(**TINY))

    def test_mixed_point_counts(self):
        clouds = [np.zeros((16, 3)), np.zeros((17, 3))]
        with pytest.raises(ArgumentError, match="one point count"):
            train(_tiny_models(), clouds, TrainConfig(**TINY))

    def test_wrong_column_count(self):
        with pytest.raises(ArgumentError, match=r"\(n_points, 3\)"):
            train(_tiny_models(), [np.zeros((16, 4))], TrainConfig(**TINY))

    def test_nan_input_names_epoch_and_batch(self):
        clouds = _tiny_clouds(2)
        clouds[0][3, 1] = np.nan
        clouds[1][2, 0] = np.nan
        with pytest.raises(TrainingError, match="epoch 1, batch 1"):
            train(_tiny_models(), clouds, TrainConfig(**TINY))

    def test_overflowing_decoder_names_epoch_and_batch(self):
        models = _tiny_models()
        with torch.no_grad():
            models[1].refine[-1].linear.weight.fill_(1e200)
        with pytest.raises(TrainingError, match="epoch 1, batch 1"):
            train(models, _tiny_clouds(2), TrainConfig(**TINY))
