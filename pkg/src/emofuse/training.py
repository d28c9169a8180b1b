"""Training, evaluation, cross-validation and ablation orchestration.

Determinism contract: everything random flows from TrainConfig.seed; two
runs with identical config and inputs produce identical loss sequences.
"""
from __future__ import annotations

import copy
import json
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .audio import AugmentPolicy, FrontendConfig, augment, compute_mel_spectrogram, load_wav
from .contrastive import (
    ContrastiveBatch,
    MoCoQueue,
    combined_loss,
    moco_step,
    paired_views,
    supcon_loss,
)
from .data import (
    FOUR_CLASS_NAMES,
    SIX_CLASS_NAMES,
    LabelSet,
    Sample,
    make_session_folds,
)
from .errors import (
    EmptyEvalSet,
    IncompatibleCheckpoint,
    NonFiniteLoss,
    NoPositivesAnywhere,
    ProviderUnavailable,
)
from .fusion import MODALITIES, EmotionModel
from .metrics import MetricsReport, compute_metrics
from .text import (
    ProviderCache,
    SentenceEncoderProvider,
    TranscriptProvider,
    WordVectorSource,
    encode_sentence,
    tokenize_and_embed,
    transcribe,
)

CHECKPOINT_VERSION = 1


def _canonical_modalities(mask: Sequence[str]) -> tuple[str, ...]:
    mask = tuple(mask)
    unknown = set(mask) - set(MODALITIES)
    if unknown:
        raise ValueError(f"unknown modalities {sorted(unknown)}")
    if not mask:
        raise ValueError("modality_mask must be non-empty")
    return tuple(m for m in MODALITIES if m in mask)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    weight_decay: float = 1e-3
    alpha: float = 0.1
    batch_size: int = 256
    epochs: int = 50
    tau: float = 1.0
    seed: int = 0
    dataset_profile: str = "vcemo"
    modality_mask: tuple[str, ...] = MODALITIES
    label_names: tuple[str, ...] = SIX_CLASS_NAMES
    # model dimensions
    d_model: int = 128
    n_layers: int = 2
    n_heads: int = 1
    dropout_p: float = 0.1
    predictor_layers: int = 2
    proj_dim: int = 128
    mel_bins: int = 80
    max_tokens: int = 64
    conv_channels: tuple[int, ...] = (32, 64, 128)
    # contrastive machinery
    double_forward: bool = True
    use_queue: bool = False
    queue_capacity: int = 16384
    momentum: float = 0.999
    queue_in_positives: bool = True
    # when set, the two contrastive views come from independently augmented
    # inputs instead of dropout alone; requires an enabled augment policy
    augment_views: bool = False
    # data handling
    augment: AugmentPolicy = AugmentPolicy()
    speaker_disjoint: bool = False

    def __post_init__(self):
        object.__setattr__(self, "modality_mask",
                           _canonical_modalities(self.modality_mask))
        object.__setattr__(self, "label_names",
                           tuple(sorted(set(self.label_names))))
        object.__setattr__(self, "conv_channels", tuple(self.conv_channels))
        if len(self.label_names) < 2:
            raise ValueError("need at least two classes")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.alpha > 0 and self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 when contrastive loss is enabled")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.augment_views and not self.augment.enabled:
            raise ValueError("augment_views needs an enabled augment policy")

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    @classmethod
    def vcemo(cls, **overrides) -> "TrainConfig":
        """lr 1e-5, weight decay 1e-3, alpha 0.1, batch 256, 50 epochs, tau 1."""
        return cls(dataset_profile="vcemo", **overrides)

    @classmethod
    def iemocap(cls, label_map: dict[str, str], **overrides) -> "TrainConfig":
        """lr 1e-4, weight decay 0, alpha 100, momentum queue enabled.

        The 4-class mapping from raw corpus labels is not standardized, so
        it must be supplied explicitly; apply it with `apply_label_map`
        before splitting.
        """
        if not label_map:
            raise ValueError("the iemocap profile requires an explicit label map")
        targets = set(label_map.values())
        if not targets <= set(FOUR_CLASS_NAMES):
            raise ValueError(f"label map must target {FOUR_CLASS_NAMES}")
        base = dict(
            learning_rate=1e-4,
            weight_decay=0.0,
            alpha=100.0,
            dataset_profile="iemocap",
            label_names=FOUR_CLASS_NAMES,
            use_queue=True,
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def custom(cls, **overrides) -> "TrainConfig":
        return cls(dataset_profile="custom", **overrides)


def apply_label_map(samples: Sequence[Sample], label_map: dict[str, str]) -> list[Sample]:
    """Rename labels through the map; samples with unmapped labels are dropped."""
    out = []
    for s in samples:
        target = label_map.get(s.label)
        if target is not None:
            out.append(replace(s, label=target))
    return out


# --- feature pipeline -------------------------------------------------------

class FeaturePipeline:
    """Turns a Sample into model-ready arrays for the configured modalities.

    Text providers are only attached for the modalities that need them, so
    an acoustic-only pipeline carries no text dependency at all.
    """

    def __init__(self,
                 modalities: Sequence[str] = MODALITIES,
                 frontend: FrontendConfig = FrontendConfig(),
                 word_table: WordVectorSource | None = None,
                 sentence_encoder: SentenceEncoderProvider | None = None,
                 transcript_provider: TranscriptProvider | None = None,
                 cache: ProviderCache | None = None,
                 max_tokens: int = 64,
                 augment_policy: AugmentPolicy = AugmentPolicy()):
        self.modalities = _canonical_modalities(modalities)
        self.frontend = frontend
        needs_text = "word" in self.modalities or "knowledge" in self.modalities
        self.word_table = word_table if "word" in self.modalities else None
        self.sentence_encoder = (sentence_encoder
                                 if "knowledge" in self.modalities else None)
        self.transcript_provider = transcript_provider if needs_text else None
        self.cache = cache
        self.max_tokens = max_tokens
        self.augment_policy = augment_policy
        self._memo: dict[str, dict[str, np.ndarray]] = {}

    def restricted(self, modalities: Sequence[str]) -> "FeaturePipeline":
        """A copy limited to a modality subset, dropping unused providers."""
        return FeaturePipeline(
            modalities=modalities,
            frontend=self.frontend,
            word_table=self.word_table,
            sentence_encoder=self.sentence_encoder,
            transcript_provider=self.transcript_provider,
            cache=self.cache,
            max_tokens=self.max_tokens,
            augment_policy=self.augment_policy,
        )

    def _mel_provider_id(self) -> str:
        f = self.frontend
        return (f"mel-r{f.target_rate}-w{f.win_length}-h{f.hop_length}"
                f"-n{f.fft_size}-m{f.mel_bins}")

    def _text_for(self, sample: Sample) -> str:
        return transcribe(sample, self.transcript_provider, self.cache)

    def _mel_for(self, sample: Sample, rng: np.random.Generator | None,
                 train: bool) -> np.ndarray:
        augmenting = train and self.augment_policy.enabled
        raw = Path(sample.audio_ref).read_bytes() if not augmenting and self.cache else None
        if raw is not None:
            key = ProviderCache.content_key(raw)
            hit = self.cache.get_array(self._mel_provider_id(), key)
            if hit is not None:
                return hit
        w = load_wav(sample.audio_ref)
        if augmenting:
            w = augment(w, self.augment_policy, rng)
        mel = compute_mel_spectrogram(w, self.frontend).values
        if raw is not None:
            self.cache.put_array(self._mel_provider_id(), key, mel)
        return mel

    def features(self, sample: Sample, rng: np.random.Generator | None = None,
                 train: bool = False) -> dict[str, np.ndarray]:
        augmenting = train and self.augment_policy.enabled and "acoustic" in self.modalities
        if not augmenting and sample.id in self._memo:
            return self._memo[sample.id]

        out: dict[str, np.ndarray] = {}
        if "acoustic" in self.modalities:
            out["mel"] = self._mel_for(sample, rng, train)
        if "word" in self.modalities or "knowledge" in self.modalities:
            text = self._text_for(sample)
            if "word" in self.modalities:
                if self.word_table is None:
                    raise ProviderUnavailable("no word-vector source configured")
                out["words"] = tokenize_and_embed(
                    text, self.word_table, self.max_tokens).vectors
            if "knowledge" in self.modalities:
                out["knowledge"] = encode_sentence(
                    text, self.sentence_encoder, self.cache).vector
        if not augmenting:
            self._memo[sample.id] = out
        return out


def collate(feature_dicts: Sequence[dict[str, np.ndarray]],
            label_indices: Sequence[int],
            dtype: torch.dtype = torch.float32) -> tuple[dict, torch.Tensor]:
    """Pad variable-length features to the batch maximum with validity masks."""
    inputs: dict[str, torch.Tensor] = {}
    n = len(feature_dicts)

    def pad_stack(key: str, mask_key: str):
        seqs = [torch.as_tensor(f[key], dtype=dtype) for f in feature_dicts]
        t_max = max(s.shape[0] for s in seqs)
        width = seqs[0].shape[1]
        out = torch.zeros(n, t_max, width, dtype=dtype)
        mask = torch.zeros(n, t_max, dtype=torch.bool)
        for i, s in enumerate(seqs):
            out[i, : s.shape[0]] = s
            mask[i, : s.shape[0]] = True
        inputs[key] = out
        inputs[mask_key] = mask

    if "mel" in feature_dicts[0]:
        pad_stack("mel", "mel_mask")
    if "words" in feature_dicts[0]:
        pad_stack("words", "words_mask")
    if "knowledge" in feature_dicts[0]:
        inputs["knowledge"] = torch.stack(
            [torch.as_tensor(f["knowledge"], dtype=dtype) for f in feature_dicts])
    labels = torch.as_tensor(list(label_indices), dtype=torch.long)
    return inputs, labels


def build_model(cfg: TrainConfig) -> EmotionModel:
    return EmotionModel(
        n_classes=cfg.n_classes,
        modalities=cfg.modality_mask,
        mel_bins=cfg.mel_bins,
        d_model=cfg.d_model,
        n_layers=cfg.n_layers,
        n_heads=cfg.n_heads,
        dropout_p=cfg.dropout_p,
        predictor_layers=cfg.predictor_layers,
        proj_dim=cfg.proj_dim,
        conv_channels=cfg.conv_channels,
    )


# --- checkpointing ----------------------------------------------------------

@dataclass
class Checkpoint:
    format_version: int
    config: TrainConfig
    model_state: dict[str, np.ndarray]
    optimizer_state: dict
    epoch: int
    history: dict

    def build_model(self) -> EmotionModel:
        model = build_model(self.config)
        state = {k: torch.from_numpy(v.copy()) for k, v in self.model_state.items()}
        model.load_state_dict(state)
        return model


def _tensors_to_numpy(obj):
    if isinstance(obj, torch.Tensor):
        return obj.detach().cpu().contiguous().numpy().copy()
    if isinstance(obj, dict):
        return {k: _tensors_to_numpy(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        seq = [_tensors_to_numpy(v) for v in obj]
        return type(obj)(seq) if isinstance(obj, tuple) else seq
    return obj


# Checkpoints use a canonical container (JSON tree header + raw array blobs)
# so that save -> load -> save is bit-identical by construction; pickle's
# output depends on object-identity sharing, which a load cycle reshuffles.
_CKPT_MAGIC = b"EMOFCKPT"


def _encode_node(obj, blobs: list[bytes]):
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if isinstance(obj, np.ndarray):
        arr = np.ascontiguousarray(obj)
        blobs.append(arr.tobytes())
        return {"__array__": {"dtype": arr.dtype.str, "shape": list(arr.shape),
                              "index": len(blobs) - 1}}
    if isinstance(obj, tuple):
        return {"__tuple__": [_encode_node(v, blobs) for v in obj]}
    if isinstance(obj, list):
        return {"__list__": [_encode_node(v, blobs) for v in obj]}
    if isinstance(obj, dict):
        items = []
        for k, v in obj.items():
            if not isinstance(k, (str, int)):
                raise TypeError(f"unsupported checkpoint dict key {k!r}")
            items.append([k, _encode_node(v, blobs)])
        return {"__dict__": items}
    if isinstance(obj, AugmentPolicy):
        return {"__augment__": _encode_node(vars(obj), blobs)}
    if isinstance(obj, TrainConfig):
        return {"__config__": _encode_node(vars(obj), blobs)}
    raise TypeError(f"cannot serialize {type(obj).__name__} into a checkpoint")


def _decode_node(node, blobs: list[bytes]):
    if node is None or isinstance(node, (bool, int, float, str)):
        return node
    tag, payload = next(iter(node.items()))
    if tag == "__array__":
        raw = blobs[payload["index"]]
        arr = np.frombuffer(raw, dtype=np.dtype(payload["dtype"]))
        return arr.reshape(payload["shape"]).copy()
    if tag == "__tuple__":
        return tuple(_decode_node(v, blobs) for v in payload)
    if tag == "__list__":
        return [_decode_node(v, blobs) for v in payload]
    if tag == "__dict__":
        return {k: _decode_node(v, blobs) for k, v in payload}
    if tag == "__augment__":
        return AugmentPolicy(**_decode_node(payload, blobs))
    if tag == "__config__":
        return TrainConfig(**_decode_node(payload, blobs))
    raise IncompatibleCheckpoint(f"unknown checkpoint node tag {tag!r}")


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    blobs: list[bytes] = []
    tree = _encode_node({
        "format_version": ckpt.format_version,
        "config": ckpt.config,
        "model_state": ckpt.model_state,
        "optimizer_state": ckpt.optimizer_state,
        "epoch": ckpt.epoch,
        "history": ckpt.history,
    }, blobs)
    header = json.dumps(
        {"tree": tree, "blob_sizes": [len(b) for b in blobs]},
        ensure_ascii=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    if data[: len(_CKPT_MAGIC)] != _CKPT_MAGIC:
        raise IncompatibleCheckpoint(f"{path} is not a checkpoint container")
    offset = len(_CKPT_MAGIC)
    header_len = int.from_bytes(data[offset:offset + 8], "little")
    offset += 8
    try:
        header = json.loads(data[offset:offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IncompatibleCheckpoint(f"corrupt checkpoint container: {exc}") from None
    offset += header_len
    blobs = []
    for size in header["blob_sizes"]:
        blobs.append(data[offset:offset + size])
        offset += size
    payload = _decode_node(header["tree"], blobs)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise IncompatibleCheckpoint(
            f"unsupported checkpoint version {payload.get('format_version')!r}")
    return Checkpoint(**payload)


# --- training ---------------------------------------------------------------

def _batches(order: list[int], batch_size: int):
    for start in range(0, len(order), batch_size):
        yield order[start:start + batch_size]


def _forward_batch(model: EmotionModel, pipeline: FeaturePipeline,
                   samples: Sequence[Sample], label_set: LabelSet,
                   rng: np.random.Generator | None = None, train: bool = False):
    feats = [pipeline.features(s, rng=rng, train=train) for s in samples]
    labels = [label_set.index(s.label) for s in samples]
    return collate(feats, labels)


def _predict(model: EmotionModel, pipeline: FeaturePipeline,
             samples: Sequence[Sample], label_set: LabelSet,
             batch_size: int) -> tuple[list[int], list[int]]:
    model.eval()
    trues: list[int] = []
    preds: list[int] = []
    with torch.no_grad():
        for chunk in _batches(list(range(len(samples))), batch_size):
            batch = [samples[i] for i in chunk]
            inputs, labels = _forward_batch(model, pipeline, batch, label_set)
            out = model(**inputs)
            # np.argmax guarantees the lowest index on ties
            preds.extend(int(np.argmax(row)) for row in out.logits.numpy())
            trues.extend(int(x) for x in labels)
    return trues, preds


def train(cfg: TrainConfig,
          train_samples: Sequence[Sample],
          val_samples: Sequence[Sample],
          pipeline: FeaturePipeline,
          log_path: str | Path | None = None,
          max_steps: int | None = None) -> Checkpoint:
    """Adam training with the combined objective; returns the checkpoint
    whose validation accuracy was best ("best on val" selection).

    The train/val interface deliberately excludes the test part. max_steps
    caps total optimizer updates (smoke tests); None runs cfg.epochs fully.
    """
    if set(cfg.modality_mask) - set(pipeline.modalities):
        raise ProviderUnavailable(
            f"pipeline provides {pipeline.modalities}, config needs {cfg.modality_mask}")
    if pipeline.frontend.mel_bins != cfg.mel_bins and "acoustic" in cfg.modality_mask:
        raise ValueError("pipeline mel_bins disagrees with the model config")
    if cfg.augment_views and not pipeline.augment_policy.enabled:
        raise ValueError("augment_views needs an augmenting feature pipeline")

    torch.manual_seed(cfg.seed)
    order_rng = random.Random(cfg.seed)
    aug_rng = np.random.default_rng(cfg.seed)

    label_set = LabelSet(cfg.label_names)
    model = build_model(cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate,
                                 weight_decay=cfg.weight_decay)

    use_queue = cfg.use_queue and cfg.alpha > 0
    queue = MoCoQueue(cfg.queue_capacity, cfg.proj_dim, cfg.momentum) if use_queue else None
    key_model = copy.deepcopy(model) if use_queue else None

    aug_views = cfg.augment_views and cfg.alpha > 0
    paired = cfg.double_forward and cfg.alpha > 0 and not aug_views

    step_log: list[dict] = []
    epoch_log: list[dict] = []
    best_state: dict | None = None
    best_acc = float("-inf")
    best_epoch = -1
    step = 0

    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        done = False
        for epoch in range(cfg.epochs):
            if done:
                break
            order = list(range(len(train_samples)))
            order_rng.shuffle(order)
            model.train()
            for chunk in _batches(order, cfg.batch_size):
                batch = [train_samples[i] for i in chunk]
                inputs, labels = _forward_batch(
                    model, pipeline, batch, label_set, rng=aug_rng, train=True)

                if aug_views:
                    second, _ = _forward_batch(
                        model, pipeline, batch, label_set, rng=aug_rng, train=True)
                    out1, out2 = model(**inputs), model(**second)
                elif paired:
                    out1, out2 = paired_views(model, inputs)
                else:
                    out1, out2 = model(**inputs), None

                l_ce = F.cross_entropy(out1.logits, labels)
                if cfg.alpha > 0:
                    if out2 is not None:
                        z = torch.cat([out1.projection, out2.projection])
                        z_labels = torch.cat([labels, labels])
                    else:
                        z = out1.projection
                        z_labels = labels
                    cbatch = ContrastiveBatch(z=z, labels=z_labels, tau=cfg.tau)
                    try:
                        l_sup = supcon_loss(cbatch, queue=queue,
                                            queue_in_positives=cfg.queue_in_positives)
                    except NoPositivesAnywhere:
                        # tail batch with all-distinct labels; contributes no signal
                        l_sup = torch.zeros((), dtype=out1.projection.dtype)
                else:
                    l_sup = torch.zeros((), dtype=out1.logits.dtype)

                if not (torch.isfinite(l_ce) and torch.isfinite(l_sup)):
                    raise NonFiniteLoss(
                        step,
                        f"l_ce={float(l_ce.detach())} l_supcon={float(l_sup.detach())}")
                breakdown = combined_loss(l_ce, l_sup, cfg.alpha)
                total = breakdown.l_total

                optimizer.zero_grad()
                total.backward()
                optimizer.step()

                if queue is not None:
                    key_model.eval()
                    with torch.no_grad():
                        key_out = key_model(**inputs)
                    moco_step(queue, key_out.projection, labels, key_model, model)

                record = {"step": step, "epoch": epoch,
                          "l_ce": float(l_ce.detach()),
                          "l_supcon": float(l_sup.detach()),
                          "alpha": cfg.alpha,
                          "l_total": float(total.detach())}
                step_log.append(record)
                if log_fh:
                    log_fh.write(json.dumps(record) + "\n")
                step += 1
                if max_steps is not None and step >= max_steps:
                    done = True
                    break

            entry: dict = {"epoch": epoch}
            if val_samples:
                trues, preds = _predict(model, pipeline, val_samples, label_set,
                                        cfg.batch_size)
                report = compute_metrics(trues, preds, cfg.n_classes)
                entry.update(val_accuracy=report.accuracy,
                             val_macro_f1=report.macro_f1,
                             val_unweighted_accuracy=report.unweighted_accuracy)
                if report.accuracy > best_acc:
                    best_acc = report.accuracy
                    best_epoch = epoch
                    best_state = _tensors_to_numpy(model.state_dict())
            epoch_log.append(entry)
            if log_fh:
                log_fh.write(json.dumps(entry) + "\n")
    finally:
        if log_fh:
            log_fh.close()

    if best_state is None:       # no validation set: keep the final parameters
        best_state = _tensors_to_numpy(model.state_dict())
        best_epoch = cfg.epochs - 1

    return Checkpoint(
        format_version=CHECKPOINT_VERSION,
        config=cfg,
        model_state=best_state,
        optimizer_state=_tensors_to_numpy(optimizer.state_dict()),
        epoch=best_epoch,
        history={"steps": step_log, "epochs": epoch_log},
    )


def evaluate(checkpoint: Checkpoint, samples: Sequence[Sample],
             pipeline: FeaturePipeline) -> MetricsReport:
    """Deterministic eval-mode metrics; ties break to the lowest class index."""
    if not samples:
        raise EmptyEvalSet("no samples to evaluate")
    cfg = checkpoint.config
    label_set = LabelSet(cfg.label_names)
    bad = sorted({s.label for s in samples} - set(label_set.names))
    if bad:
        raise IncompatibleCheckpoint(
            f"checkpoint classes {label_set.names} cannot score labels {bad}")
    if set(cfg.modality_mask) - set(pipeline.modalities):
        raise IncompatibleCheckpoint(
            f"pipeline provides {pipeline.modalities}, checkpoint needs {cfg.modality_mask}")

    model = checkpoint.build_model()
    trues, preds = _predict(model, pipeline, samples, label_set, cfg.batch_size)
    return compute_metrics(trues, preds, cfg.n_classes)


@dataclass
class CrossValidationResult:
    fold_reports: list[tuple[str, MetricsReport]]
    mean_weighted_accuracy: float
    mean_unweighted_accuracy: float

    def to_dict(self) -> dict:
        return {
            "folds": [{"session": name, **rep.to_dict()} for name, rep in self.fold_reports],
            "mean_weighted_accuracy": self.mean_weighted_accuracy,
            "mean_unweighted_accuracy": self.mean_unweighted_accuracy,
        }


def cross_validate(cfg: TrainConfig, samples: Sequence[Sample],
                   pipeline: FeaturePipeline, k: int = 5,
                   max_steps: int | None = None) -> CrossValidationResult:
    """Leave-one-session-out: train per fold from fresh initialization and
    average the per-fold WA/UA."""
    folds = make_session_folds(samples, k=k)
    reports: list[tuple[str, MetricsReport]] = []
    for fold in folds:
        ckpt = train(cfg, fold.train, fold.val, pipeline, max_steps=max_steps)
        reports.append((fold.val_session, evaluate(ckpt, list(fold.val), pipeline)))
    was = [r.weighted_accuracy for _, r in reports]
    uas = [r.unweighted_accuracy for _, r in reports]
    return CrossValidationResult(
        fold_reports=reports,
        mean_weighted_accuracy=float(np.mean(was)),
        mean_unweighted_accuracy=float(np.mean(uas)),
    )


# The seven standard ablation rows: each single modality, each pair, all three.
ABLATION_SUBSETS: tuple[tuple[str, ...], ...] = (
    ("word",),
    ("knowledge",),
    ("acoustic",),
    ("word", "knowledge"),
    ("word", "acoustic"),
    ("knowledge", "acoustic"),
    ("word", "knowledge", "acoustic"),
)


def subset_key(subset: Sequence[str]) -> str:
    return "+".join(_canonical_modalities(subset))


def ablate(cfg: TrainConfig,
           train_samples: Sequence[Sample],
           val_samples: Sequence[Sample],
           test_samples: Sequence[Sample],
           pipeline: FeaturePipeline,
           subsets: Sequence[Sequence[str]] = ABLATION_SUBSETS,
           max_steps: int | None = None) -> dict[str, MetricsReport]:
    """Train and evaluate one model per modality subset.

    Each row runs on a pipeline restricted to its subset, so e.g. the
    acoustic-only row never touches a text provider.
    """
    results: dict[str, MetricsReport] = {}
    for subset in subsets:
        sub_cfg = replace(cfg, modality_mask=tuple(subset))
        sub_pipe = pipeline.restricted(subset)
        ckpt = train(sub_cfg, train_samples, val_samples, sub_pipe, max_steps=max_steps)
        results[subset_key(subset)] = evaluate(ckpt, test_samples, sub_pipe)
    return results
