import numpy as np
import pytest
import torch

from emofuse.encoders import (
    AcousticEncoder,
    EncoderConfig,
    KnowledgeAdapter,
    WordEncoder,
)
from emofuse.errors import DimensionMismatch, EmptyInput

from oracles import check_param_gradients

SMALL = EncoderConfig(d_model=16, conv_blocks=((4, 3, 2), (8, 3, 2)), dropout_p=0.1)


class TestAcousticEncoder:
    def test_output_shape_time_preserved(self):
        enc = AcousticEncoder(mel_bins=80).eval()
        mel = torch.randn(2, 101, 80)
        feat = enc(mel)
        assert feat.values.shape == (2, 101, 128)   # stride 2 on frequency only
        assert feat.modality_tag == "acoustic"

    def test_frequency_folding_shape_arithmetic(self):
        # 3 blocks with frequency stride 2: 80 -> 40 -> 20 -> 10
        enc = AcousticEncoder(mel_bins=80)
        assert enc.out_freq == 10
        enc2 = AcousticEncoder(mel_bins=40, cfg=SMALL)
        assert enc2.out_freq == 10   # 40 -> 20 -> 10 over two blocks

    def test_identical_inputs_identical_rows_eval(self):
        enc = AcousticEncoder(mel_bins=20, cfg=SMALL).eval()
        mel = torch.randn(1, 13, 20)
        batch = torch.cat([mel, mel], dim=0)
        out = enc(batch).values
        assert torch.equal(out[0], out[1])

    def test_masked_rows_zero_and_inert(self):
        enc = AcousticEncoder(mel_bins=20, cfg=SMALL).eval()
        mel = torch.randn(1, 10, 20)
        mask = torch.tensor([[True] * 7 + [False] * 3])
        out = enc(mel, mask).values
        assert torch.all(out[0, 7:] == 0.0)
        # perturbing masked content must not change anything
        mel2 = mel.clone()
        mel2[0, 8] += 5.0
        assert torch.equal(enc(mel2, mask).values, out)

    def test_empty_input(self):
        enc = AcousticEncoder(mel_bins=20, cfg=SMALL)
        with pytest.raises(EmptyInput):
            enc(torch.zeros(1, 0, 20))

    def test_eval_mode_bit_identical(self):
        enc = AcousticEncoder(mel_bins=20, cfg=SMALL).eval()
        mel = torch.randn(2, 9, 20)
        assert torch.equal(enc(mel).values, enc(mel).values)


class TestWordEncoder:
    def test_length_preserved(self):
        enc = WordEncoder(embed_dim=300).eval()
        out = enc(torch.randn(3, 5, 300))
        assert out.values.shape == (3, 5, 128)

    def test_masked_tail_zero(self):
        enc = WordEncoder(embed_dim=24, cfg=SMALL).eval()
        x = torch.randn(1, 6, 24)
        mask = torch.tensor([[True, True, True, True, False, False]])
        out = enc(x, mask).values
        assert torch.all(out[0, 4:] == 0.0)

    def test_order_sensitivity(self):
        enc = WordEncoder(embed_dim=24, cfg=SMALL).eval()
        x = torch.randn(1, 5, 24)
        swapped = x.clone()
        swapped[0, [1, 2]] = swapped[0, [2, 1]]
        assert not torch.allclose(enc(x).values, enc(swapped).values)

    def test_dim_mismatch(self):
        enc = WordEncoder(embed_dim=24, cfg=SMALL)
        with pytest.raises(DimensionMismatch):
            enc(torch.randn(1, 5, 23))


class TestKnowledgeAdapter:
    def test_zero_input_gives_bias_row(self):
        adapter = KnowledgeAdapter(cfg=SMALL).eval()
        out = adapter(torch.zeros(1, 768)).values
        assert torch.allclose(out[0, 0], adapter.proj.bias)

    def test_wrong_dim_rejected(self):
        adapter = KnowledgeAdapter(cfg=SMALL)
        with pytest.raises(DimensionMismatch):
            adapter(torch.randn(1, 512))

    def test_linearity_of_linear_part(self):
        adapter = KnowledgeAdapter(cfg=SMALL).eval()
        a = torch.randn(1, 768)
        b = torch.randn(1, 768)
        lhs = (adapter(a).values + adapter(b).values
               - adapter(torch.zeros(1, 768)).values)
        rhs = adapter(a + b).values
        assert torch.allclose(lhs, rhs, atol=1e-5)

    def test_output_shape(self):
        adapter = KnowledgeAdapter().eval()
        out = adapter(torch.randn(4, 768))
        assert out.values.shape == (4, 1, 128)
        assert out.modality_tag == "knowledge"


class TestSharedDimension:
    def test_all_encoders_emit_d_model(self):
        cfg = EncoderConfig(d_model=32, conv_blocks=((4, 3, 2),), dropout_p=0.0)
        a = AcousticEncoder(mel_bins=16, cfg=cfg).eval()(torch.randn(1, 4, 16))
        w = WordEncoder(embed_dim=8, cfg=cfg).eval()(torch.randn(1, 4, 8))
        k = KnowledgeAdapter(cfg=cfg).eval()(torch.randn(1, 768))
        assert a.d_model == w.d_model == k.d_model == 32


class TestEncoderGradients:
    def test_acoustic_gradcheck(self):
        torch.manual_seed(0)
        enc = AcousticEncoder(mel_bins=12, cfg=SMALL).double().eval()
        mel = torch.randn(2, 5, 12, dtype=torch.float64)
        probe = torch.randn(2, 5, 16, dtype=torch.float64)
        frac = check_param_gradients(enc, lambda: (enc(mel).values * probe).sum(),
                                     n_coords=40)
        assert frac >= 0.95

    def test_word_gradcheck(self):
        torch.manual_seed(1)
        enc = WordEncoder(embed_dim=10, cfg=SMALL).double().eval()
        x = torch.randn(2, 4, 10, dtype=torch.float64)
        probe = torch.randn(2, 4, 16, dtype=torch.float64)
        frac = check_param_gradients(enc, lambda: (enc(x).values * probe).sum(),
                                     n_coords=40)
        assert frac >= 0.95

    def test_knowledge_gradcheck(self):
        torch.manual_seed(2)
        adapter = KnowledgeAdapter(cfg=SMALL).double().eval()
        x = torch.randn(2, 768, dtype=torch.float64)
        probe = torch.randn(2, 1, 16, dtype=torch.float64)
        frac = check_param_gradients(adapter,
                                     lambda: (adapter(x).values * probe).sum(),
                                     n_coords=40)
        assert frac >= 0.95
