"""Encoder/decoder construction, shapes, and the power invariant."""

import numpy as np
import pytest
import torch

from qsctrainer import (
    ArgumentError,
    ConstructionError,
    Decoder,
    DecoderSpec,
    Encoder,
    EncoderSpec,
    NormalizationError,
    build_models,
    knn_indices,
)


def _cloud(seed, n_points=64):
    return torch.from_numpy(np.random.default_rng(seed).normal(size=(n_points, 3)))


class TestSpecs:
    def test_encoder_defaults(self):
        spec = EncoderSpec(n=50)
        assert spec.k == 20
        assert len(spec.stage_widths) == 5

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n": 0},
            {"n": 10, "k": 0},
            {"n": 10, "stage_widths": (64, 64, 128, 256)},
            {"n": 10, "stage_widths": (64, 64, 128, 256, 0)},
        ],
    )
    def test_encoder_validation(self, kwargs):
        with pytest.raises(ArgumentError):
            EncoderSpec(**kwargs)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n": 0, "n_points": 64},
            {"n": 10, "n_points": 0},
            {"n": 10, "n_points": 64, "upsample_widths": (8,)},
            {"n": 10, "n_points": 64, "upsample_widths": (8, 0)},
            {"n": 10, "n_points": 64, "refine_widths": ()},
            {"n": 10, "n_points": 64, "refine_widths": (16, 4)},
            {"n": 10, "n_points": 64, "refine_widths": (0, 3)},
        ],
    )
    def test_decoder_validation(self, kwargs):
        with pytest.raises(ArgumentError):
            DecoderSpec(**kwargs)

    def test_last_refine_width_is_three(self):
        spec = DecoderSpec(n=10, n_points=64)
        assert spec.refine_widths[-1] == 3


class TestBuildModels:
    def test_code_length_mismatch(self):
        with pytest.raises(ConstructionError, match="code length 10"):
            build_models(EncoderSpec(n=10), DecoderSpec(n=12, n_points=64))

    def test_seeded_build_is_reproducible(self):
        pairs = [
            build_models(EncoderSpec(n=8, k=4), DecoderSpec(n=8, n_points=32), seed=3)
            for _ in range(2)
        ]
        for module_a, module_b in zip(pairs[0], pairs[1]):
            for p_a, p_b in zip(module_a.parameters(), module_b.parameters()):
                assert (p_a == p_b).all()

    def test_seeded_build_preserves_global_state(self):
        state = torch.random.get_rng_state()
        build_models(EncoderSpec(n=8, k=4), DecoderSpec(n=8, n_points=32), seed=3)
        assert (torch.random.get_rng_state() == state).all()

    def test_models_are_double_precision(self):
        encoder, decoder = build_models(
            EncoderSpec(n=8, k=4), DecoderSpec(n=8, n_points=32), seed=0
        )
        assert all(p.dtype == torch.float64 for p in encoder.parameters())
        assert all(p.dtype == torch.float64 for p in decoder.parameters())


class TestKnnIndices:
    def test_collinear_oracle(self):
        # points on a line with all pairwise gaps distinct, so the two
        # nearest neighbors of each point are computable by hand
        points = torch.tensor([[0.0, 0, 0], [1.0, 0, 0], [3.0, 0, 0], [7.0, 0, 0]])
        idx = knn_indices(points.unsqueeze(0), 2).squeeze(0)
        expected = torch.tensor([[1, 2], [0, 2], [1, 0], [2, 1]])
        assert (idx == expected).all()

    def test_self_excluded(self):
        idx = knn_indices(_cloud(0).unsqueeze(0), 5).squeeze(0)
        own = torch.arange(64).unsqueeze(1)
        assert (idx != own).all()

    def test_k_too_large(self):
        with pytest.raises(ArgumentError, match="k=64"):
            knn_indices(_cloud(0).unsqueeze(0), 64)


class TestEncoder:
    def test_output_shape_and_power(self):
        encoder = Encoder(EncoderSpec(n=10, k=4)).double()
        with torch.no_grad():
            code = encoder(_cloud(1))
        assert code.shape == (10,)
        assert abs(float(code.square().sum()) - 10) / 10 <= 1e-4

    def test_batch_matches_single(self):
        encoder = Encoder(EncoderSpec(n=10, k=4)).double()
        clouds = torch.stack([_cloud(2), _cloud(3)])
        with torch.no_grad():
            batched = encoder(clouds)
            singles = torch.stack([encoder(clouds[0]), encoder(clouds[1])])
        assert batched.shape == (2, 10)
        assert torch.allclose(batched, singles, atol=1e-12, rtol=0)

    def test_point_order_does_not_change_code(self):
        encoder = Encoder(EncoderSpec(n=10, k=4)).double()
        cloud = _cloud(4)
        perm = torch.from_numpy(np.random.default_rng(0).permutation(64))
        with torch.no_grad():
            assert torch.allclose(
                encoder(cloud), encoder(cloud[perm]), atol=1e-12, rtol=0
            )

    def test_scale_recovers_unnormalized_output(self):
        encoder = Encoder(EncoderSpec(n=10, k=4)).double()
        with torch.no_grad():
            code, scale = encoder.encode_with_scale(_cloud(5))
        assert scale > 0
        restored = code * scale
        assert abs(float(restored.norm()) - float(scale) * np.sqrt(10)) < 1e-9

    def test_zero_code_rejected(self):
        encoder = Encoder(EncoderSpec(n=10, k=4)).double()
        with torch.no_grad():
            encoder.head.weight.zero_()
            encoder.head.bias.zero_()
        with pytest.raises(NormalizationError, match="zero or non-finite"):
            encoder(_cloud(6))

    def test_bad_input_shape(self):
        encoder = Encoder(EncoderSpec(n=10, k=4)).double()
        with pytest.raises(ArgumentError, match="shape"):
            encoder(torch.zeros(4, 4, dtype=torch.float64))


class TestDecoder:
    def test_output_shape_single_and_batch(self):
        decoder = Decoder(DecoderSpec(n=10, n_points=64)).double()
        code = torch.from_numpy(np.random.default_rng(7).normal(size=(10,)))
        assert decoder(code).shape == (64, 3)
        assert decoder(code.unsqueeze(0).repeat(3, 1)).shape == (3, 64, 3)

    def test_every_refine_stage_sees_the_code(self):
        decoder = Decoder(DecoderSpec(n=10, n_points=64))
        for stage in decoder.refine:
            assert stage.condition.in_features == 10

    def test_output_depends_on_code(self):
        decoder = Decoder(DecoderSpec(n=10, n_points=64)).double()
        rng = np.random.default_rng(8)
        a = torch.from_numpy(rng.normal(size=(10,)))
        b = torch.from_numpy(rng.normal(size=(10,)))
        with torch.no_grad():
            assert not torch.allclose(decoder(a), decoder(b))

    def test_wrong_code_length(self):
        decoder = Decoder(DecoderSpec(n=10, n_points=64)).double()
        with pytest.raises(ArgumentError, match="shape"):
            decoder(torch.zeros(11, dtype=torch.float64))

    @pytest.mark.parametrize("n_points,n", [(1, 10), (7, 300), (500, 3)])
    def test_odd_size_combinations(self, n_points, n):
        decoder = Decoder(DecoderSpec(n=n, n_points=n_points)).double()
        code = torch.from_numpy(np.random.default_rng(9).normal(size=(n,)))
        assert decoder(code).shape == (n_points, 3)


class TestEndToEnd:
    def test_gradients_reach_both_models(self):
        encoder, decoder = build_models(
            EncoderSpec(n=8, k=4), DecoderSpec(n=8, n_points=32), seed=1
        )
        cloud = _cloud(10, 32).unsqueeze(0)
        recon = decoder(encoder(cloud))
        recon.square().sum().backward()
        grads = [
            p.grad
            for p in list(encoder.parameters()) + list(decoder.parameters())
        ]
        assert all(g is not None for g in grads)
        assert any(float(g.abs().sum()) > 0 for g in grads)
