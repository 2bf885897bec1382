"""Trainable encoder/decoder pair for fixed-power point-cloud codes.

The encoder maps a cloud of ``N`` points to a single code vector of length
``n`` whose squared norm is exactly ``n`` (power normalization), matching
the archive contract of the companion simulator package.  The decoder maps
a code vector back to an ``N x 3`` cloud.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ArgumentError, ConstructionError, NormalizationError

GRAPH_STAGE_COUNT = 5


@dataclass(frozen=True)
class EncoderSpec:
    """Architecture of the cloud-to-code encoder.

    Parameters
    ----------
    n : int
        Code length; also the per-point feature width just before pooling.
    k : int
        Neighbors per point in the graph-convolution stages.
    stage_widths : tuple of int
        Output widths of the five graph-convolution stages; the last entry
        is the per-point feature width fed into the code head.
    """

    n: int
    k: int = 20
    stage_widths: tuple[int, ...] = (64, 64, 128, 256, 256)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ArgumentError(f"code length must be >= 1, got {self.n}")
        if self.k < 1:
            raise ArgumentError(f"neighbor count must be >= 1, got {self.k}")
        if len(self.stage_widths) != GRAPH_STAGE_COUNT:
            raise ArgumentError(
                f"expected {GRAPH_STAGE_COUNT} stage widths, "
                f"got {len(self.stage_widths)}"
            )
        if any(w < 1 for w in self.stage_widths):
            raise ArgumentError(f"stage widths must be >= 1, got {self.stage_widths}")


@dataclass(frozen=True)
class DecoderSpec:
    """Architecture of the code-to-cloud decoder.

    Parameters
    ----------
    n : int
        Code length accepted as input.
    n_points : int
        Number of points in the reconstructed cloud.
    upsample_widths : tuple of int
        Channel widths of the two transposed-convolution stages that
        stretch the length-``n`` code into per-point features; the second
        entry is the feature width handed to the refinement stages.
    refine_widths : tuple of int
        Output widths of the code-conditioned refinement stages; the last
        entry must be 3 (x, y, z).
    """

    n: int
    n_points: int
    upsample_widths: tuple[int, int] = (64, 64)
    refine_widths: tuple[int, ...] = (64, 32, 3)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ArgumentError(f"code length must be >= 1, got {self.n}")
        if self.n_points < 1:
            raise ArgumentError(f"point count must be >= 1, got {self.n_points}")
        if len(self.upsample_widths) != 2:
            raise ArgumentError(
                f"expected 2 upsample widths, got {len(self.upsample_widths)}"
            )
        if any(w < 1 for w in self.upsample_widths):
            raise ArgumentError(
                f"upsample widths must be >= 1, got {self.upsample_widths}"
            )
        if not self.refine_widths:
            raise ArgumentError("at least one refinement stage is required")
        if any(w < 1 for w in self.refine_widths):
            raise ArgumentError(
                f"refinement widths must be >= 1, got {self.refine_widths}"
            )
        if self.refine_widths[-1] != 3:
            raise ArgumentError(
                f"last refinement width must be 3, got {self.refine_widths[-1]}"
            )


def knn_indices(points: torch.Tensor, k: int) -> torch.Tensor:
    """Indices of the ``k`` nearest neighbors of each point, self excluded.

    Parameters
    ----------
    points : torch.Tensor
        Shape ``(batch, n_points, 3)``.

    Returns
    -------
    torch.Tensor
        Integer tensor of shape ``(batch, n_points, k)``.
    """
    n_points = points.shape[1]
    if k > n_points - 1:
        raise ArgumentError(
            f"k={k} needs at least {k + 1} points, cloud has {n_points}"
        )
    dist = torch.cdist(points, points)
    eye = torch.eye(n_points, dtype=torch.bool, device=points.device)
    dist = dist.masked_fill(eye, math.inf)
    return dist.topk(k, dim=-1, largest=False).indices


class _GraphStage(nn.Module):
    """One edge-aware graph convolution: a linear map applied to each
    point's feature concatenated with the max over its neighborhood of
    feature differences."""

    def __init__(self, width_in: int, width_out: int) -> None:
        super().__init__()
        self.linear = nn.Linear(2 * width_in, width_out)

    def forward(self, feats: torch.Tensor, idx: torch.Tensor) -> torch.Tensor:
        batch = torch.arange(feats.shape[0], device=feats.device)
        neighbors = feats[batch[:, None, None], idx]
        edge = (neighbors - feats.unsqueeze(2)).amax(dim=2)
        return F.relu(self.linear(torch.cat([feats, edge], dim=-1)))


class Encoder(nn.Module):
    """Cloud-to-code encoder.

    Five graph-convolution stages over the kNN adjacency of the input
    points, a per-point linear head of width ``n``, max-pooling over
    points, and power normalization so that ``sum(code**2) == n``.
    The architecture is size-agnostic: any cloud with more than ``k``
    points encodes to the same code length.
    """

    def __init__(self, spec: EncoderSpec) -> None:
        super().__init__()
        self.spec = spec
        widths = (3,) + spec.stage_widths
        self.stages = nn.ModuleList(
            _GraphStage(widths[i], widths[i + 1]) for i in range(len(spec.stage_widths))
        )
        self.head = nn.Linear(spec.stage_widths[-1], spec.n)

    def encode_with_scale(
        self, points: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Encode and also return the power-normalization divisor.

        Returns
        -------
        tuple of torch.Tensor
            ``(code, scale)``: ``code`` has shape ``(batch, n)`` with
            squared norm ``n`` per row, and ``code * scale`` recovers the
            un-normalized head output.
        """
        single = points.dim() == 2
        if single:
            points = points.unsqueeze(0)
        if points.dim() != 3 or points.shape[-1] != 3:
            raise ArgumentError(
                f"expected points of shape (batch, n_points, 3), got {tuple(points.shape)}"
            )
        idx = knn_indices(points, self.spec.k)
        feats = points
        for stage in self.stages:
            feats = stage(feats, idx)
        raw = self.head(feats).amax(dim=1)
        norms = torch.linalg.vector_norm(raw, dim=-1)
        if not bool((torch.isfinite(norms) & (norms > 0)).all()):
            raise NormalizationError(
                "cannot power-normalize a zero or non-finite code vector"
            )
        scale = norms / math.sqrt(self.spec.n)
        code = raw / scale.unsqueeze(-1)
        if single:
            return code.squeeze(0), scale.squeeze(0)
        return code, scale

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        return self.encode_with_scale(points)[0]


class _ConditionedStage(nn.Module):
    """One refinement stage: a per-point linear map modulated by an affine
    transform (gain and offset) predicted from the code vector, so every
    stage of the refinement path is steered by the transmitted code."""

    def __init__(self, width_in: int, width_out: int, n: int, last: bool) -> None:
        super().__init__()
        self.linear = nn.Linear(width_in, width_out)
        self.condition = nn.Linear(n, 2 * width_out)
        self.last = last

    def forward(self, feats: torch.Tensor, code: torch.Tensor) -> torch.Tensor:
        gain, offset = self.condition(code).unsqueeze(1).chunk(2, dim=-1)
        out = self.linear(feats) * (1.0 + gain) + offset
        return out if self.last else F.relu(out)


class Decoder(nn.Module):
    """Code-to-cloud decoder.

    Two transposed-convolution stages stretch the length-``n`` code into
    ``n_points`` per-point feature vectors; code-conditioned refinement
    stages then map the features down to coordinates, ending at width 3.
    """

    def __init__(self, spec: DecoderSpec) -> None:
        super().__init__()
        self.spec = spec
        # stride s with s*s >= n_points/n guarantees the upsampled length
        # reaches n_points before the resize to exactly n_points.
        stride = math.isqrt((spec.n_points - 1) // spec.n) + 1
        width_mid, width_out = spec.upsample_widths
        self.upsample = nn.ModuleList(
            [
                nn.ConvTranspose1d(1, width_mid, kernel_size=stride + 2, stride=stride),
                nn.ConvTranspose1d(
                    width_mid, width_out, kernel_size=stride + 2, stride=stride
                ),
            ]
        )
        widths = (width_out,) + spec.refine_widths
        self.refine = nn.ModuleList(
            _ConditionedStage(
                widths[i],
                widths[i + 1],
                spec.n,
                last=(i == len(spec.refine_widths) - 1),
            )
            for i in range(len(spec.refine_widths))
        )

    def forward(self, code: torch.Tensor) -> torch.Tensor:
        single = code.dim() == 1
        if single:
            code = code.unsqueeze(0)
        if code.dim() != 2 or code.shape[-1] != self.spec.n:
            raise ArgumentError(
                f"expected codes of shape (batch, {self.spec.n}), got {tuple(code.shape)}"
            )
        feats = code.unsqueeze(1)
        for conv in self.upsample:
            feats = F.relu(conv(feats))
        feats = F.interpolate(
            feats, size=self.spec.n_points, mode="linear", align_corners=False
        )
        feats = feats.transpose(1, 2)
        for stage in self.refine:
            feats = stage(feats, code)
        return feats.squeeze(0) if single else feats


def build_models(
    enc: EncoderSpec, dec: DecoderSpec, seed: int | None = None
) -> tuple[Encoder, Decoder]:
    """Construct a matching encoder/decoder pair in float64.

    Parameters
    ----------
    seed : int, optional
        Seeds parameter initialization without disturbing the global
        random state; omit for initialization from the current state.

    Raises
    ------
    ConstructionError
        If the two specs disagree on the code length.
    """
    if enc.n != dec.n:
        raise ConstructionError(
            f"encoder code length {enc.n} != decoder code length {dec.n}"
        )
    if seed is None:
        pair = Encoder(enc), Decoder(dec)
    else:
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            pair = Encoder(enc), Decoder(dec)
    return pair[0].double(), pair[1].double()
