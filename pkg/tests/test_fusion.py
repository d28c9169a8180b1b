import pytest
import torch

from emofuse.errors import EmptyInput, ShapeMismatch
from emofuse.fusion import (
    EmotionModel,
    PredictionHeads,
    fuse_add,
    fuse_concat_broadcast,
    masked_mean_pool,
)

from oracles import check_param_gradients


class TestFuseAdd:
    def test_zero_b_identity(self):
        a = torch.randn(2, 5, 8)
        out, mask = fuse_add(a, torch.zeros(2, 5, 8))
        assert torch.equal(out, a)
        assert mask.all()

    def test_commutative(self):
        a, b = torch.randn(1, 4, 6), torch.randn(1, 4, 6)
        assert torch.equal(fuse_add(a, b)[0], fuse_add(b, a)[0])

    def test_length_alignment_7_and_5(self):
        a = torch.randn(1, 7, 4)
        b = torch.randn(1, 5, 4)
        a_mask = torch.ones(1, 7, dtype=torch.bool)
        b_mask = torch.ones(1, 5, dtype=torch.bool)
        out, mask = fuse_add(a, b, a_mask, b_mask)
        assert out.shape == (1, 7, 4)
        assert mask.all()                       # union of valid positions
        assert torch.equal(out[:, 5:], a[:, 5:])  # b zero-padded beyond its length
        assert torch.equal(out[:, :5], a[:, :5] + b)

    def test_feature_width_mismatch(self):
        with pytest.raises(ShapeMismatch):
            fuse_add(torch.randn(1, 3, 4), torch.randn(1, 3, 5))


class TestFuseConcatBroadcast:
    def test_width_doubles(self):
        seq = torch.randn(2, 6, 128)
        know = torch.randn(2, 1, 128)
        out, _ = fuse_concat_broadcast(seq, know)
        assert out.shape == (2, 6, 256)

    def test_every_row_carries_knowledge(self):
        seq = torch.randn(1, 5, 8)
        know = torch.randn(1, 1, 8)
        out, _ = fuse_concat_broadcast(seq, know)
        for t in range(5):
            assert torch.equal(out[0, t, 8:], know[0, 0])

    def test_zero_knowledge_pads_with_zeros(self):
        seq = torch.randn(1, 3, 8)
        out, _ = fuse_concat_broadcast(seq, torch.zeros(1, 1, 8))
        assert torch.equal(out[..., :8], seq)
        assert torch.all(out[..., 8:] == 0.0)

    def test_multi_row_knowledge_rejected(self):
        with pytest.raises(ShapeMismatch):
            fuse_concat_broadcast(torch.randn(1, 3, 8), torch.randn(1, 2, 8))


class TestPredictionHeads:
    def test_projection_is_128_and_unit_norm(self):
        heads = PredictionHeads(d_fused=64, n_classes=6).eval()
        out = heads(torch.randn(5, 7, 64))
        assert out.projection.shape == (5, 128)
        norms = out.projection.norm(dim=-1)
        assert torch.allclose(norms, torch.ones(5), atol=1e-6)

    def test_four_class_logits(self):
        heads = PredictionHeads(d_fused=32, n_classes=4).eval()
        assert heads(torch.randn(2, 3, 32)).logits.shape == (2, 4)

    def test_one_layer_predictor_variant(self):
        heads = PredictionHeads(d_fused=32, n_classes=4, predictor_layers=1).eval()
        assert heads(torch.randn(2, 3, 32)).logits.shape == (2, 4)

    def test_empty_sequence_rejected(self):
        heads = PredictionHeads(d_fused=32, n_classes=4)
        with pytest.raises(EmptyInput):
            heads(torch.randn(2, 0, 32))

    def test_masked_positions_inert(self):
        heads = PredictionHeads(d_fused=16, n_classes=3).eval()
        x = torch.randn(1, 6, 16)
        mask = torch.tensor([[True, True, True, True, False, False]])
        base = heads(x, mask)
        x2 = x.clone()
        x2[0, 5] += 100.0
        out = heads(x2, mask)
        assert torch.equal(out.logits, base.logits)
        assert torch.equal(out.projection, base.projection)

    def test_masked_mean_pool(self):
        x = torch.arange(12.0).reshape(1, 4, 3)
        mask = torch.tensor([[True, True, False, False]])
        pooled = masked_mean_pool(x, mask)
        assert torch.allclose(pooled[0], x[0, :2].mean(dim=0))

    def test_heads_gradcheck(self):
        torch.manual_seed(0)
        heads = PredictionHeads(d_fused=16, n_classes=3).double().eval()
        x = torch.randn(2, 4, 16, dtype=torch.float64)
        probe_l = torch.randn(2, 3, dtype=torch.float64)
        probe_p = torch.randn(2, 128, dtype=torch.float64)

        def loss():
            out = heads(x)
            return (out.logits * probe_l).sum() + (out.projection * probe_p).sum()

        assert check_param_gradients(heads, loss, n_coords=50) >= 0.95


def _full_inputs(batch=2, t_mel=9, t_words=4, mel_bins=12):
    return {
        "mel": torch.randn(batch, t_mel, mel_bins),
        "words": torch.randn(batch, t_words, 300),
        "knowledge": torch.randn(batch, 768),
    }


def _small_model(**over):
    kwargs = dict(n_classes=4, mel_bins=12, d_model=16, n_layers=1,
                  conv_channels=(4, 8), dropout_p=0.1)
    kwargs.update(over)
    return EmotionModel(**kwargs)


class TestEmotionModel:
    def test_pipeline_order_and_dataflow(self):
        # round1(word, acoustic) -> fuse_add -> round2(knowledge, sum) ->
        # concat-broadcast -> heads, asserted by capturing module inputs
        model = _small_model().eval()
        inputs = _full_inputs()
        calls = []
        captured = {}

        def hook(name):
            def fn(mod, args, output):
                calls.append(name)
                captured[name] = (args, output)
            return fn

        model.round1.register_forward_hook(hook("round1"))
        model.round2.register_forward_hook(hook("round2"))
        model.heads.register_forward_hook(hook("heads"))
        model(**inputs)
        assert calls == ["round1", "round2", "heads"]

        # round1 operated on (word, acoustic): A-branch input is the word
        # feature (T matches the token count), B the acoustic one
        (r1_args, r1_out) = captured["round1"]
        assert r1_args[0].shape[1] == 4     # words
        assert r1_args[1].shape[1] == 9     # mel frames

        # round2's B input is the element-wise sum of round1's outputs
        w2, a2 = r1_out
        expected_sum = fuse_add(w2, a2)[0]
        (r2_args, r2_out) = captured["round2"]
        assert r2_args[0].shape[1] == 1     # knowledge row guides
        assert torch.allclose(r2_args[1], expected_sum, atol=1e-6)

        # heads consume the broadcast concatenation of round2's outputs
        k2, s2 = r2_out
        fused = fuse_concat_broadcast(s2, k2)[0]
        (h_args, _) = captured["heads"]
        assert torch.allclose(h_args[0], fused, atol=1e-6)

    def test_fused_width_with_and_without_knowledge(self):
        assert _small_model().d_fused == 32
        assert _small_model(modalities=("acoustic", "word")).d_fused == 16
        assert _small_model(modalities=("knowledge",)).d_fused == 16

    def test_single_modality_forward(self):
        inputs = _full_inputs()
        for subset, needed in ((("acoustic",), {"mel"}),
                               (("word",), {"words"}),
                               (("knowledge",), {"knowledge"})):
            model = _small_model(modalities=subset).eval()
            sub_inputs = {k: v for k, v in inputs.items()
                          if k.split("_")[0] in needed}
            out = model(**sub_inputs)
            assert out.logits.shape == (2, 4)
            assert out.projection.shape == (2, 128)

    def test_pair_modality_forward(self):
        inputs = _full_inputs()
        for subset in (("acoustic", "word"), ("acoustic", "knowledge"),
                       ("word", "knowledge")):
            model = _small_model(modalities=subset).eval()
            sub_inputs = {}
            if "acoustic" in subset:
                sub_inputs["mel"] = inputs["mel"]
            if "word" in subset:
                sub_inputs["words"] = inputs["words"]
            if "knowledge" in subset:
                sub_inputs["knowledge"] = inputs["knowledge"]
            out = model(**sub_inputs)
            assert out.logits.shape == (2, 4)

    def test_missing_required_modality_rejected(self):
        model = _small_model()
        with pytest.raises(EmptyInput):
            model(mel=torch.randn(1, 5, 12))

    def test_masked_input_rows_inert_end_to_end(self):
        model = _small_model().eval()
        inputs = _full_inputs(batch=1)
        inputs["mel_mask"] = torch.tensor([[True] * 6 + [False] * 3])
        inputs["words_mask"] = torch.tensor([[True, True, True, False]])
        base = model(**inputs)
        poked = {k: (v.clone() if v.dtype.is_floating_point else v)
                 for k, v in inputs.items()}
        poked["mel"][0, 7] += 3.0
        poked["words"][0, 3] += 3.0
        out = model(**poked)
        assert torch.equal(out.logits, base.logits)
        assert torch.equal(out.projection, base.projection)
