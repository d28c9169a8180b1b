"""Supervised contrastive loss, combined objective, momentum queue and
dropout-based paired views.

Per anchor i, with positives P(i) (same label) and contrast set A(i)
(everything but the anchor, plus any queue entries):

    term_i = -(1/|P(i)|) * sum_{p in P(i)} log[ exp(z_i.z_p / tau)
                                               / sum_{a in A(i)} exp(z_i.z_a / tau) ]

Anchors without positives are skipped; the loss is the mean over
contributing anchors, which keeps its scale batch-size independent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import torch
from torch import Tensor, nn

from .errors import (
    BatchTooSmall,
    DimensionMismatch,
    DropoutDisabled,
    NoPositivesAnywhere,
    NonFiniteInput,
)
from .fusion import HeadOutputs, PROJECTION_DIM


@dataclass
class ContrastiveBatch:
    z: Tensor          # N x dim, rows unit-norm
    labels: Tensor     # N ints
    tau: float = 1.0

    def __post_init__(self):
        if self.z.ndim != 2:
            raise ValueError("z must be N x dim")
        if self.labels.shape != (self.z.shape[0],):
            raise ValueError("labels must be a vector matching the batch size")
        if self.tau <= 0:
            raise ValueError(f"temperature must be positive, got {self.tau}")
        norms = self.z.norm(dim=-1)
        if not bool(torch.all((norms - 1.0).abs() <= 1e-5)):
            raise ValueError("projection rows must be unit-norm (within 1e-5)")

    def __len__(self) -> int:
        return self.z.shape[0]


class MoCoQueue:
    """FIFO memory of (projection, label) pairs enlarging the contrast set."""

    def __init__(self, capacity: int = 16384, dim: int = PROJECTION_DIM,
                 momentum_m: float = 0.999):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not (0.0 <= momentum_m <= 1.0):
            raise ValueError("momentum must lie in [0, 1]")
        self.capacity = capacity
        self.dim = dim
        self.momentum_m = momentum_m
        self._z = torch.zeros(capacity, dim)
        self._labels = torch.zeros(capacity, dtype=torch.long)
        self._head = 0          # next write position
        self._size = 0
        self.total_enqueued = 0
        self.total_evicted = 0

    def __len__(self) -> int:
        return self._size

    def enqueue(self, z: Tensor, labels: Tensor) -> None:
        """Append a batch of projections, evicting the oldest beyond capacity."""
        if z.ndim != 2 or z.shape[1] != self.dim:
            raise DimensionMismatch(
                f"queue expects N x {self.dim} projections, got {tuple(z.shape)}")
        if labels.shape != (z.shape[0],):
            raise DimensionMismatch("labels must match the projection batch")
        z = z.detach().to(self._z.dtype)
        labels = labels.detach().to(torch.long)
        for i in range(z.shape[0]):
            if self._size == self.capacity:
                self.total_evicted += 1
            else:
                self._size += 1
            self._z[self._head] = z[i]
            self._labels[self._head] = labels[i]
            self._head = (self._head + 1) % self.capacity
            self.total_enqueued += 1

    def snapshot(self) -> tuple[Tensor, Tensor]:
        """Entries in insertion order (oldest first)."""
        if self._size < self.capacity:
            return self._z[: self._size].clone(), self._labels[: self._size].clone()
        order = torch.cat([torch.arange(self._head, self.capacity),
                           torch.arange(0, self._head)])
        return self._z[order].clone(), self._labels[order].clone()


def supcon_loss(batch: ContrastiveBatch,
                queue: MoCoQueue | None = None,
                queue_in_positives: bool = True) -> Tensor:
    """Vectorized supervised contrastive loss over the batch (and queue)."""
    n = len(batch)
    if n < 2:
        raise BatchTooSmall(f"need at least 2 anchors, got {n}")

    z = batch.z
    labels = batch.labels
    if queue is not None and len(queue) > 0:
        qz, qlabels = queue.snapshot()
        qz = qz.to(z.dtype)
        contrast_z = torch.cat([z, qz], dim=0)
        contrast_labels = torch.cat([labels, qlabels], dim=0)
    else:
        contrast_z = z
        contrast_labels = labels
    m = contrast_z.shape[0]

    sims = (z @ contrast_z.T) / batch.tau                          # N x M
    not_self = ~torch.eye(n, m, dtype=torch.bool, device=z.device)  # excludes anchor itself
    pos = (labels.unsqueeze(1) == contrast_labels.unsqueeze(0)) & not_self
    if queue is not None and not queue_in_positives:
        pos[:, n:] = False

    # log denominator over A(i) = everything but the anchor, numerically stable
    denom_sims = sims.masked_fill(~not_self, float("-inf"))
    log_denom = torch.logsumexp(denom_sims, dim=1, keepdim=True)   # N x 1
    log_prob = sims - log_denom

    pos_counts = pos.sum(dim=1)
    contributing = pos_counts > 0
    if not bool(contributing.any()):
        raise NoPositivesAnywhere("every anchor has an empty positive set")
    per_anchor = -(log_prob * pos).sum(dim=1) / pos_counts.clamp_min(1)
    return per_anchor[contributing].mean()


@dataclass
class LossBreakdown:
    l_ce: Any
    l_supcon: Any
    alpha: float
    l_total: Any = field(init=False)

    def __post_init__(self):
        self.l_total = (self.l_ce + self.alpha * self.l_supcon) / (1.0 + self.alpha)

    def detach(self) -> "LossBreakdown":
        def val(x):
            return float(x.detach()) if isinstance(x, Tensor) else float(x)
        out = LossBreakdown(val(self.l_ce), val(self.l_supcon), float(self.alpha))
        return out


def combined_loss(l_ce, l_supcon, alpha: float) -> LossBreakdown:
    """L = (L_CE + alpha * L_SupCon) / (1 + alpha)."""

    def finite(x) -> bool:
        if isinstance(x, Tensor):
            return bool(torch.isfinite(x).all())
        return math.isfinite(float(x))

    if not (finite(l_ce) and finite(l_supcon) and finite(alpha)):
        raise NonFiniteInput("loss terms must be finite")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return LossBreakdown(l_ce=l_ce, l_supcon=l_supcon, alpha=float(alpha))


@torch.no_grad()
def momentum_update(key_encoder: nn.Module, query_encoder: nn.Module, m: float) -> None:
    """key <- m * key + (1 - m) * query, parameters and buffers alike."""
    if not (0.0 <= m <= 1.0):
        raise ValueError(f"momentum must lie in [0, 1], got {m}")
    for kp, qp in zip(key_encoder.parameters(), query_encoder.parameters()):
        if kp.shape != qp.shape:
            raise DimensionMismatch("encoder parameter shapes differ")
        kp.mul_(m).add_(qp.detach(), alpha=1.0 - m)
    for kb, qb in zip(key_encoder.buffers(), query_encoder.buffers()):
        if kb.dtype.is_floating_point:
            kb.mul_(m).add_(qb.detach().to(kb.dtype), alpha=1.0 - m)
        else:
            kb.copy_(qb)


def moco_step(queue: MoCoQueue, key_projections: Tensor, labels: Tensor,
              key_encoder: nn.Module, query_encoder: nn.Module) -> MoCoQueue:
    """Momentum-update the key encoder, then enqueue the detached keys."""
    momentum_update(key_encoder, query_encoder, queue.momentum_m)
    queue.enqueue(key_projections.detach(), labels)
    return queue


def _has_active_dropout(model: nn.Module) -> bool:
    return any(isinstance(mod, (nn.Dropout, nn.Dropout2d)) and mod.p > 0
               for mod in model.modules())


def paired_views(model: nn.Module, inputs: dict,
                 seed: int | None = None) -> tuple[HeadOutputs, HeadOutputs]:
    """Two forward passes with independent dropout masks on one sample batch.

    Both projections join the contrastive batch under the same label; only
    the first logits feed the cross-entropy term.
    """
    if not model.training:
        raise DropoutDisabled("paired views need training mode (dropout active)")
    if not _has_active_dropout(model):
        raise DropoutDisabled("model has no dropout layer with p > 0")
    if seed is not None:
        torch.manual_seed(seed)
    first = model(**inputs)
    second = model(**inputs)
    return first, second
