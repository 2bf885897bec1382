"""End-to-end codec training at desk scale.

The encoder and decoder are optimized jointly against the set-based
reconstruction loss.  Training is single-process and fully reproducible
given a seed: shuffling and the optional channel perturbation draw from
one private generator, and parameter initialization is seeded through
``build_models``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields

import numpy as np
import torch

from .errors import ArgumentError, ConfigError, NormalizationError, TrainingError
from .loss import chamfer_loss
from .models import Decoder, Encoder

DEFAULT_LR_HALVE_EPOCHS = 20


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings.

    The optimizer is the adaptive-moment method with a stepwise schedule
    that halves the learning rate every ``lr_halve_epochs`` epochs, so the
    rate during epoch ``lr_halve_epochs + 1`` is ``lr_initial / 2``.
    """

    epochs: int
    batch_size: int
    n: int
    k: int = 20
    lr_initial: float = 1e-3
    lr_halve_epochs: int = DEFAULT_LR_HALVE_EPOCHS
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ArgumentError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ArgumentError(f"batch size must be >= 1, got {self.batch_size}")
        if self.n < 1:
            raise ArgumentError(f"code length must be >= 1, got {self.n}")
        if self.k < 1:
            raise ArgumentError(f"neighbor count must be >= 1, got {self.k}")
        if not self.lr_initial > 0:
            raise ArgumentError(f"learning rate must be > 0, got {self.lr_initial}")
        if self.lr_halve_epochs < 1:
            raise ArgumentError(
                f"halving period must be >= 1, got {self.lr_halve_epochs}"
            )
        if self.noise_sigma < 0:
            raise ArgumentError(f"noise sigma must be >= 0, got {self.noise_sigma}")


@dataclass(frozen=True)
class TrainResult:
    """Per-epoch training record.

    Attributes
    ----------
    epoch_mean_cd : tuple of float
        Mean reconstruction loss over the dataset, one entry per epoch.
    epoch_lr : tuple of float
        Learning rate in effect during each epoch.
    """

    epoch_mean_cd: tuple[float, ...]
    epoch_lr: tuple[float, ...]


def load_train_config(path: str | os.PathLike) -> TrainConfig:
    """Read a :class:`TrainConfig` from a JSON object of its fields.

    Raises
    ------
    ConfigError
        On malformed JSON, unknown fields, wrong types, or out-of-range
        values; messages name the offending field.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    known = {f.name for f in fields(TrainConfig)}
    for name, value in data.items():
        if name not in known:
            raise ConfigError(f"{path}: unknown field {name!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: {name}: expected a number, got {value!r}")
        if name not in ("lr_initial", "noise_sigma") and value != int(value):
            raise ConfigError(f"{path}: {name}: expected an integer, got {value!r}")
    for name in ("epochs", "batch_size", "n"):
        if name not in data:
            raise ConfigError(f"{path}: missing field {name!r}")
    kwargs = {
        name: (float(v) if name in ("lr_initial", "noise_sigma") else int(v))
        for name, v in data.items()
    }
    try:
        return TrainConfig(**kwargs)
    except ArgumentError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def simulate_channel_noise(
    code: torch.Tensor, sigma: float, generator: torch.Generator | None = None
) -> torch.Tensor:
    """Element-wise Gaussian perturbation of a code vector.

    ``sigma == 0`` returns the input unchanged; drawing through
    ``generator`` makes the perturbation reproducible.
    """
    if sigma < 0:
        raise ArgumentError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return code
    noise = torch.empty_like(code).normal_(0.0, sigma, generator=generator)
    return code + noise


def _stacked(dataset) -> torch.Tensor:
    clouds = [np.asarray(c, dtype=np.float64) for c in dataset]
    if not clouds:
        raise ArgumentError("dataset is empty")
    shapes = {c.shape for c in clouds}
    if any(c.ndim != 2 or c.shape[1] != 3 for c in clouds):
        raise ArgumentError(f"expected (n_points, 3) clouds, got shapes {shapes}")
    if len(shapes) != 1:
        raise ArgumentError(f"clouds must share one point count, got shapes {shapes}")
    return torch.from_numpy(np.stack(clouds))


def train(
    models: tuple[Encoder, Decoder], dataset, cfg: TrainConfig
) -> TrainResult:
    """Jointly optimize an encoder/decoder pair on a fixed-size dataset.

    Parameters
    ----------
    models : tuple
        Pair from :func:`build_models`.
    dataset : sequence of array-like
        Clouds of identical shape ``(n_points, 3)``.

    Returns
    -------
    TrainResult
        Per-epoch mean loss and learning rate.

    Raises
    ------
    TrainingError
        On a non-finite loss or an unnormalizable code, naming the epoch
        and batch where it arose.
    """
    encoder, decoder = models
    clouds = _stacked(dataset)
    count = clouds.shape[0]
    generator = torch.Generator().manual_seed(cfg.seed)
    optimizer = torch.optim.Adam(
        list(encoder.parameters()) + list(decoder.parameters()), lr=cfg.lr_initial
    )
    scheduler = torch.optim.lr_scheduler.StepLR(
        optimizer, step_size=cfg.lr_halve_epochs, gamma=0.5
    )
    epoch_mean_cd = []
    epoch_lr = []
    for epoch in range(1, cfg.epochs + 1):
        order = torch.randperm(count, generator=generator)
        loss_sum = 0.0
        for batch_index, start in enumerate(range(0, count, cfg.batch_size), start=1):
            batch = clouds[order[start : start + cfg.batch_size]]
            try:
                code = encoder(batch)
                received = simulate_channel_noise(code, cfg.noise_sigma, generator)
                loss = chamfer_loss(batch, decoder(received))
            except NormalizationError as exc:
                raise TrainingError(
                    f"diverged at epoch {epoch}, batch {batch_index}: {exc}"
                ) from exc
            if not bool(torch.isfinite(loss)):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {batch_index}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            loss_sum += float(loss.detach()) * batch.shape[0]
        epoch_mean_cd.append(loss_sum / count)
        epoch_lr.append(optimizer.param_groups[0]["lr"])
        scheduler.step()
    return TrainResult(tuple(epoch_mean_cd), tuple(epoch_lr))
