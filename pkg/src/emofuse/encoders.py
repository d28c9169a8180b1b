"""Per-modality encoders mapping inputs into the shared model dimension.

Acoustic: Conv-BatchNorm-ReLU stack over (time, frequency) then an LSTM
over time. Word: LSTM first, then a same-padded 1-D convolution over the
timeline. Knowledge: a linear adapter from the 768-d sentence vector.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor, nn

from .errors import DimensionMismatch, EmptyInput

KNOWLEDGE_DIM = 768


@dataclass(frozen=True)
class EncoderConfig:
    d_model: int = 128
    # (out_channels, kernel, frequency_stride); time resolution is preserved
    conv_blocks: tuple[tuple[int, int, int], ...] = ((32, 3, 2), (64, 3, 2), (128, 3, 2))
    conv1d_kernel: int = 3
    dropout_p: float = 0.1

    def __post_init__(self):
        if self.conv1d_kernel % 2 != 1:
            raise ValueError("conv1d_kernel must be odd for same-length padding")
        if not (0.0 <= self.dropout_p < 1.0):
            raise ValueError("dropout_p must lie in [0, 1)")


@dataclass
class ModalityFeature:
    """Batched time-major feature (B x T x d_model) with a validity mask."""

    values: Tensor
    mask: Tensor                 # B x T bool, True = valid
    modality_tag: str

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError(f"values must be B x T x d, got shape {tuple(self.values.shape)}")
        if self.mask.shape != self.values.shape[:2]:
            raise ValueError("mask shape must match values batch/time dims")
        if self.modality_tag not in ("acoustic", "word", "knowledge"):
            raise ValueError(f"unknown modality tag {self.modality_tag!r}")

    @property
    def d_model(self) -> int:
        return self.values.shape[-1]


def _apply_mask(x: Tensor, mask: Tensor) -> Tensor:
    return x * mask.unsqueeze(-1).to(x.dtype)


class AcousticEncoder(nn.Module):
    """Mel frames (B x T x mel_bins) -> B x T x d_model."""

    def __init__(self, mel_bins: int, cfg: EncoderConfig = EncoderConfig()):
        super().__init__()
        self.cfg = cfg
        self.mel_bins = mel_bins

        blocks = []
        in_ch = 1
        freq = mel_bins
        for out_ch, kernel, stride in cfg.conv_blocks:
            pad = kernel // 2
            blocks.append(nn.Sequential(
                nn.Conv2d(in_ch, out_ch, kernel_size=kernel,
                          stride=(1, stride), padding=pad),
                nn.BatchNorm2d(out_ch),
                nn.ReLU(),
                nn.Dropout(cfg.dropout_p),
            ))
            freq = (freq + 2 * pad - kernel) // stride + 1
            in_ch = out_ch
        self.conv = nn.ModuleList(blocks)
        self.out_freq = freq
        self.to_model = nn.Linear(in_ch * freq, cfg.d_model)
        self.lstm = nn.LSTM(cfg.d_model, cfg.d_model, batch_first=True)

    def forward(self, mel: Tensor, mask: Tensor | None = None) -> ModalityFeature:
        if mel.ndim != 3 or mel.shape[1] == 0:
            raise EmptyInput("mel input must be B x T x mel_bins with T >= 1")
        if mel.shape[2] != self.mel_bins:
            raise DimensionMismatch(
                f"expected {self.mel_bins} mel bins, got {mel.shape[2]}")
        if mask is None:
            mask = torch.ones(mel.shape[:2], dtype=torch.bool, device=mel.device)

        # zero padded frames so masked content can never leak through convs
        x = _apply_mask(mel, mask).unsqueeze(1)          # B x 1 x T x F
        for block in self.conv:
            x = block(x)
            x = x * mask[:, None, :, None].to(x.dtype)
        b, c, t, f = x.shape
        x = x.permute(0, 2, 1, 3).reshape(b, t, c * f)   # fold frequency into features
        x = self.to_model(x)
        x, _ = self.lstm(x)
        x = _apply_mask(x, mask)
        return ModalityFeature(values=x, mask=mask, modality_tag="acoustic")


class WordEncoder(nn.Module):
    """Word vectors (B x T x embed_dim) -> B x T x d_model, length preserved."""

    def __init__(self, embed_dim: int, cfg: EncoderConfig = EncoderConfig()):
        super().__init__()
        self.cfg = cfg
        self.embed_dim = embed_dim
        self.lstm = nn.LSTM(embed_dim, cfg.d_model, batch_first=True)
        self.dropout = nn.Dropout(cfg.dropout_p)
        self.conv = nn.Conv1d(cfg.d_model, cfg.d_model,
                              kernel_size=cfg.conv1d_kernel,
                              padding=cfg.conv1d_kernel // 2)

    def forward(self, vectors: Tensor, mask: Tensor | None = None) -> ModalityFeature:
        if vectors.ndim != 3 or vectors.shape[1] == 0:
            raise EmptyInput("word input must be B x T x embed_dim with T >= 1")
        if vectors.shape[2] != self.embed_dim:
            raise DimensionMismatch(
                f"expected embedding dim {self.embed_dim}, got {vectors.shape[2]}")
        if mask is None:
            mask = torch.ones(vectors.shape[:2], dtype=torch.bool, device=vectors.device)

        x = _apply_mask(vectors, mask)
        x, _ = self.lstm(x)
        x = self.dropout(_apply_mask(x, mask))
        x = self.conv(x.transpose(1, 2)).transpose(1, 2)
        x = torch.relu(x)
        x = self.dropout(x)
        x = _apply_mask(x, mask)
        return ModalityFeature(values=x, mask=mask, modality_tag="word")


class KnowledgeAdapter(nn.Module):
    """Sentence vector (B x 768) -> B x 1 x d_model via an affine map."""

    def __init__(self, in_dim: int = KNOWLEDGE_DIM, cfg: EncoderConfig = EncoderConfig()):
        super().__init__()
        self.cfg = cfg
        self.in_dim = in_dim
        self.proj = nn.Linear(in_dim, cfg.d_model)
        self.dropout = nn.Dropout(cfg.dropout_p)

    def forward(self, vector: Tensor) -> ModalityFeature:
        if vector.ndim != 2:
            raise EmptyInput("knowledge input must be B x in_dim")
        if vector.shape[1] != self.in_dim:
            raise DimensionMismatch(
                f"expected knowledge dim {self.in_dim}, got {vector.shape[1]}")
        x = self.dropout(self.proj(vector)).unsqueeze(1)   # B x 1 x d
        mask = torch.ones(x.shape[:2], dtype=torch.bool, device=x.device)
        return ModalityFeature(values=x, mask=mask, modality_tag="knowledge")
