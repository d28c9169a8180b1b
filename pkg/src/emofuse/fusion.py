"""Two-round fusion, final self-attention, pooling and the output heads.

Pipeline (left to right): co-attention over (word, acoustic) -> element-wise
addition -> co-attention over (knowledge, summed sequence) -> broadcast
concatenation -> final self-attention -> masked mean pool -> predictor
(class logits) and projector (unit-norm 128-d vector).
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor, nn

from .attention import AttentionBlock, AttentionConfig, CoAttentionStack
from .encoders import (
    KNOWLEDGE_DIM,
    AcousticEncoder,
    EncoderConfig,
    KnowledgeAdapter,
    ModalityFeature,
    WordEncoder,
)
from .errors import EmptyInput, ShapeMismatch

PROJECTION_DIM = 128
MODALITIES = ("acoustic", "word", "knowledge")


@dataclass
class HeadOutputs:
    logits: Tensor        # B x C
    projection: Tensor    # B x 128, rows unit-norm


def fuse_add(a: Tensor, b: Tensor,
             a_mask: Tensor | None = None,
             b_mask: Tensor | None = None) -> tuple[Tensor, Tensor]:
    """Element-wise sum after aligning lengths.

    The shorter sequence is zero-padded to the longer one and the output
    mask is the union of valid positions, so neither timeline is cut.
    """
    if a.shape[-1] != b.shape[-1] or a.shape[0] != b.shape[0]:
        raise ShapeMismatch(
            f"cannot add features of shapes {tuple(a.shape)} and {tuple(b.shape)}")
    if a_mask is None:
        a_mask = torch.ones(a.shape[:2], dtype=torch.bool, device=a.device)
    if b_mask is None:
        b_mask = torch.ones(b.shape[:2], dtype=torch.bool, device=b.device)

    t = max(a.shape[1], b.shape[1])

    def pad_to(x: Tensor, mask: Tensor) -> tuple[Tensor, Tensor]:
        if x.shape[1] == t:
            return x, mask
        extra = t - x.shape[1]
        x = torch.cat([x, x.new_zeros(x.shape[0], extra, x.shape[2])], dim=1)
        mask = torch.cat([mask, mask.new_zeros(mask.shape[0], extra)], dim=1)
        return x, mask

    a, a_mask = pad_to(a, a_mask)
    b, b_mask = pad_to(b, b_mask)
    return a + b, a_mask | b_mask


def fuse_concat_broadcast(seq: Tensor, know: Tensor,
                          seq_mask: Tensor | None = None) -> tuple[Tensor, Tensor]:
    """Replicate the single knowledge row across time and concatenate on
    the feature axis: (B x T x d, B x 1 x d') -> B x T x (d + d')."""
    if know.ndim != 3 or know.shape[1] != 1:
        raise ShapeMismatch(f"knowledge feature must be B x 1 x d, got {tuple(know.shape)}")
    if know.shape[0] != seq.shape[0]:
        raise ShapeMismatch("batch sizes differ")
    if seq_mask is None:
        seq_mask = torch.ones(seq.shape[:2], dtype=torch.bool, device=seq.device)
    tiled = know.expand(-1, seq.shape[1], -1)
    fused = torch.cat([seq, tiled], dim=-1)
    fused = fused * seq_mask.unsqueeze(-1).to(fused.dtype)
    return fused, seq_mask


def masked_mean_pool(x: Tensor, mask: Tensor) -> Tensor:
    w = mask.unsqueeze(-1).to(x.dtype)
    total = (x * w).sum(dim=1)
    count = w.sum(dim=1).clamp_min(1.0)
    return total / count


class PredictionHeads(nn.Module):
    """Final self-attention, pooling, and the predictor/projector pair."""

    def __init__(self, d_fused: int, n_classes: int,
                 n_heads: int = 1, dropout_p: float = 0.1,
                 predictor_layers: int = 2, proj_dim: int = PROJECTION_DIM):
        super().__init__()
        if predictor_layers not in (1, 2):
            raise ValueError("predictor_layers must be 1 or 2")
        self.final_attention = AttentionBlock(d_fused, n_heads, dropout_p=dropout_p)
        if predictor_layers == 2:
            self.predictor = nn.Sequential(
                nn.Linear(d_fused, d_fused // 2),
                nn.ReLU(),
                nn.Dropout(dropout_p),
                nn.Linear(d_fused // 2, n_classes),
            )
        else:
            self.predictor = nn.Linear(d_fused, n_classes)
        self.projector = nn.Linear(d_fused, proj_dim)

    def forward(self, fused: Tensor, mask: Tensor | None = None) -> HeadOutputs:
        if fused.ndim != 3 or fused.shape[1] == 0:
            raise EmptyInput("fused input must be B x T x d with T >= 1")
        if mask is None:
            mask = torch.ones(fused.shape[:2], dtype=torch.bool, device=fused.device)
        x = self.final_attention(fused, mask)
        pooled = masked_mean_pool(x, mask)
        logits = self.predictor(pooled)
        proj = self.projector(pooled)
        proj = proj / proj.norm(dim=-1, keepdim=True).clamp_min(1e-12)
        return HeadOutputs(logits=logits, projection=proj)


class EmotionModel(nn.Module):
    """Full three-modality classifier; any non-empty modality subset works.

    With one sequence modality absent, round-1 fusion is the identity on
    the present one; with knowledge absent, round 2 is skipped and the
    heads run at width d_model instead of 2*d_model.
    """

    def __init__(self, n_classes: int,
                 modalities: tuple[str, ...] = MODALITIES,
                 mel_bins: int = 80,
                 word_dim: int = 300,
                 knowledge_dim: int = KNOWLEDGE_DIM,
                 d_model: int = 128,
                 n_layers: int = 2,
                 n_heads: int = 1,
                 dropout_p: float = 0.1,
                 predictor_layers: int = 2,
                 proj_dim: int = PROJECTION_DIM,
                 conv_channels: tuple[int, ...] = (32, 64, 128)):
        super().__init__()
        modalities = tuple(modalities)
        unknown = set(modalities) - set(MODALITIES)
        if unknown:
            raise ValueError(f"unknown modalities {sorted(unknown)}")
        if not modalities:
            raise ValueError("at least one modality is required")
        self.modalities = tuple(m for m in MODALITIES if m in modalities)
        self.n_classes = n_classes
        self.d_model = d_model

        enc_cfg = EncoderConfig(
            d_model=d_model,
            conv_blocks=tuple((ch, 3, 2) for ch in conv_channels),
            dropout_p=dropout_p,
        )
        attn_cfg = AttentionConfig(d_model=d_model, n_layers=n_layers,
                                   n_heads=n_heads, dropout_p=dropout_p)

        if "acoustic" in self.modalities:
            self.acoustic_encoder = AcousticEncoder(mel_bins, enc_cfg)
        if "word" in self.modalities:
            self.word_encoder = WordEncoder(word_dim, enc_cfg)
        if "knowledge" in self.modalities:
            self.knowledge_adapter = KnowledgeAdapter(knowledge_dim, enc_cfg)

        has_both_seq = "acoustic" in self.modalities and "word" in self.modalities
        has_knowledge = "knowledge" in self.modalities
        has_seq = "acoustic" in self.modalities or "word" in self.modalities

        if has_both_seq:
            # word features guide the acoustic branch in round 1
            self.round1 = CoAttentionStack(attn_cfg)
        if has_knowledge and has_seq:
            # the knowledge row guides the summed sequence in round 2
            self.round2 = CoAttentionStack(attn_cfg)
            d_fused = 2 * d_model
        else:
            d_fused = d_model
        self.d_fused = d_fused
        self.heads = PredictionHeads(d_fused, n_classes, n_heads=n_heads,
                                     dropout_p=dropout_p,
                                     predictor_layers=predictor_layers,
                                     proj_dim=proj_dim)

    def encode(self, mel=None, mel_mask=None, words=None, words_mask=None,
               knowledge=None) -> dict[str, ModalityFeature]:
        feats: dict[str, ModalityFeature] = {}
        if "acoustic" in self.modalities:
            if mel is None:
                raise EmptyInput("model requires the acoustic modality")
            feats["acoustic"] = self.acoustic_encoder(mel, mel_mask)
        if "word" in self.modalities:
            if words is None:
                raise EmptyInput("model requires the word modality")
            feats["word"] = self.word_encoder(words, words_mask)
        if "knowledge" in self.modalities:
            if knowledge is None:
                raise EmptyInput("model requires the knowledge modality")
            feats["knowledge"] = self.knowledge_adapter(knowledge)
        d_models = {f.d_model for f in feats.values()}
        assert len(d_models) == 1, "encoders disagree on d_model"
        return feats

    def forward(self, mel=None, mel_mask=None, words=None, words_mask=None,
                knowledge=None) -> HeadOutputs:
        feats = self.encode(mel, mel_mask, words, words_mask, knowledge)

        # round 1: word guides acoustic, merged by element-wise addition
        word = feats.get("word")
        acoustic = feats.get("acoustic")
        if word is not None and acoustic is not None:
            w2, a2 = self.round1(word.values, acoustic.values,
                                 word.mask, acoustic.mask)
            seq, seq_mask = fuse_add(w2, a2, word.mask, acoustic.mask)
        elif word is not None:
            seq, seq_mask = word.values, word.mask
        elif acoustic is not None:
            seq, seq_mask = acoustic.values, acoustic.mask
        else:
            seq, seq_mask = None, None

        # round 2: knowledge guides the time-structured sum, merged by
        # broadcast concatenation
        know = feats.get("knowledge")
        if know is not None and seq is not None:
            k2, s2 = self.round2(know.values, seq, know.mask, seq_mask)
            fused, fused_mask = fuse_concat_broadcast(s2, k2, seq_mask)
        elif know is not None:
            fused, fused_mask = know.values, know.mask
        else:
            fused, fused_mask = seq, seq_mask

        return self.heads(fused, fused_mask)
