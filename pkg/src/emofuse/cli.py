"""Batch command-line interface.

Subcommands: ingest, featurize, train, eval, cross-validate, ablate,
augment, report. Exit codes: 0 success, 1 validation error, 2 runtime
failure. All randomness flows from --seed / the config seed.

Run config schema (YAML or JSON): see README.md. Providers are chosen by
URI: "hash" (deterministic offline vectors/transcripts), "vocab:<path>"
(word-vector table file), or "none".
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import audio, data, errors, text, training
from .audio import AugmentPolicy, FrontendConfig
from .metrics import MetricsReport
from .training import FeaturePipeline, TrainConfig

_VALIDATION_ERRORS = (
    errors.MissingFile,
    errors.MalformedRecord,
    errors.UnknownLabel,
    errors.DuplicateId,
    errors.TooFewSamples,
    errors.EmptyResult,
    errors.SessionCountMismatch,
    errors.ProviderUnavailable,
    errors.EmptyEvalSet,
    errors.IncompatibleCheckpoint,
    errors.UnsupportedAudio,
    ValueError,
)


# --- config loading ---------------------------------------------------------

def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise errors.MissingFile(str(p))
    with p.open("r", encoding="utf-8") as fh:
        loaded = yaml.safe_load(fh)
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ValueError("run config must be a mapping")
    return loaded


def _label_names_for(classes: int | None, cfg_data: dict) -> tuple[str, ...] | None:
    if classes == 4:
        return data.FOUR_CLASS_NAMES
    if classes == 6:
        return data.SIX_CLASS_NAMES
    labels = cfg_data.get("labels")
    if labels:
        return tuple(labels)
    return None


def _augment_policy_from(cfg_data: dict) -> AugmentPolicy:
    a = cfg_data.get("augment") or {}
    kwargs = {}
    for key in ("noise_prob", "noise_snr_db", "pitch_prob", "stretch_prob"):
        if key in a:
            kwargs[key] = float(a[key])
    for key in ("pitch_semitones", "stretch_rate"):
        if key in a:
            kwargs[key] = tuple(float(x) for x in a[key])
    return AugmentPolicy(**kwargs)


def _frontend_from(cfg_data: dict) -> FrontendConfig:
    f = cfg_data.get("frontend") or {}
    allowed = ("target_rate", "win_length", "hop_length", "fft_size",
               "mel_bins", "log_floor")
    return FrontendConfig(**{k: f[k] for k in allowed if k in f})


_TRAIN_KEYS = (
    "learning_rate", "weight_decay", "alpha", "batch_size", "epochs", "tau",
    "d_model", "n_layers", "n_heads", "dropout_p", "predictor_layers",
    "proj_dim", "max_tokens", "double_forward", "use_queue",
    "queue_capacity", "momentum", "queue_in_positives", "speaker_disjoint",
    "conv_channels", "augment_views",
)


def _train_config_from(cfg_data: dict, args) -> TrainConfig:
    profile = args.profile or cfg_data.get("profile", "vcemo")
    overrides = {k: v for k, v in (cfg_data.get("train") or {}).items()
                 if k in _TRAIN_KEYS}
    overrides["seed"] = args.seed if args.seed is not None else int(cfg_data.get("seed", 0))
    overrides["augment"] = _augment_policy_from(cfg_data)
    overrides["mel_bins"] = _frontend_from(cfg_data).mel_bins

    modalities = None
    if getattr(args, "modalities", None):
        modalities = tuple(args.modalities.split(","))
    elif cfg_data.get("modalities"):
        modalities = tuple(cfg_data["modalities"])
    if modalities:
        overrides["modality_mask"] = modalities

    label_names = _label_names_for(getattr(args, "classes", None), cfg_data)
    if label_names:
        overrides["label_names"] = label_names

    if profile == "vcemo":
        return TrainConfig.vcemo(**overrides)
    if profile == "iemocap":
        label_map = cfg_data.get("label_map")
        if not label_map:
            raise ValueError("the iemocap profile requires label_map in the config")
        overrides.setdefault("label_names", data.FOUR_CLASS_NAMES)
        return TrainConfig.iemocap(dict(label_map), **overrides)
    if profile == "custom":
        return TrainConfig.custom(**overrides)
    raise ValueError(f"unknown profile {profile!r}")


def _build_pipeline(cfg_data: dict, cfg: TrainConfig) -> FeaturePipeline:
    providers = cfg_data.get("providers") or {}
    cache_dir = cfg_data.get("cache_dir")
    cache = text.ProviderCache(cache_dir) if cache_dir else text.ProviderCache(
        text.default_cache_dir())

    def word_source(uri: str):
        if uri == "hash":
            return text.HashWordVectors()
        if uri.startswith("vocab:"):
            return text.WordVectorTable.from_file(uri.split(":", 1)[1])
        if uri == "none":
            return None
        raise ValueError(f"unknown word-vector provider {uri!r}")

    def sentence_source(uri: str):
        if uri == "hash":
            return text.HashSentenceEncoder()
        if uri == "none":
            return None
        raise ValueError(f"unknown sentence-encoder provider {uri!r}")

    def transcript_source(uri: str):
        if uri == "hash":
            return text.HashTranscriptProvider()
        if uri == "none":
            return None
        raise ValueError(f"unknown transcript provider {uri!r}")

    return FeaturePipeline(
        modalities=cfg.modality_mask,
        frontend=_frontend_from(cfg_data),
        word_table=word_source(providers.get("word_vectors", "hash")),
        sentence_encoder=sentence_source(providers.get("sentence_encoder", "hash")),
        transcript_provider=transcript_source(providers.get("transcripts", "none")),
        cache=cache,
        max_tokens=cfg.max_tokens,
        augment_policy=cfg.augment,
    )


def _load_samples(manifest: str, cfg: TrainConfig) -> list[data.Sample]:
    samples = data.load_manifest(manifest, label_set=data.SIX_CLASS)
    if set(cfg.label_names) != set(data.SIX_CLASS_NAMES):
        samples = data.filter_classes(samples, cfg.label_names)
    return samples


def _split_from(cfg_data: dict, cfg: TrainConfig, samples) -> data.DatasetSplit:
    ratios = tuple((cfg_data.get("split") or {}).get("ratios", (8, 1, 1)))
    return data.split_dataset(samples, ratios=ratios, seed=cfg.seed,
                              speaker_disjoint=cfg.speaker_disjoint)


def _out_dir(args, cfg_data: dict) -> Path:
    out = args.out_dir or cfg_data.get("out_dir", "runs")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _manifest_path(args, cfg_data: dict) -> str:
    manifest = getattr(args, "manifest", None) or cfg_data.get("manifest")
    if not manifest:
        raise ValueError("a manifest is required (--manifest or config key)")
    return manifest


# --- subcommands --------------------------------------------------------------

def _cmd_ingest(args) -> int:
    label_set = data.FOUR_CLASS if args.classes == 4 else data.SIX_CLASS
    samples = data.load_manifest(args.manifest, label_set=label_set)
    sessions = sorted({s.session_id for s in samples})
    print(f"{len(samples)} samples, {len(sessions)} sessions, "
          f"labels {sorted({s.label for s in samples})}")
    return 0


def _cmd_featurize(args) -> int:
    cfg_data = _load_config_file(args.config)
    cfg = _train_config_from(cfg_data, args)
    pipeline = _build_pipeline(cfg_data, cfg)
    samples = _load_samples(_manifest_path(args, cfg_data), cfg)
    for sample in samples:
        pipeline.features(sample)
    print(f"featurized {len(samples)} samples "
          f"({', '.join(pipeline.modalities)}) into {pipeline.cache.root}")
    return 0


def _cmd_train(args) -> int:
    cfg_data = _load_config_file(args.config)
    cfg = _train_config_from(cfg_data, args)
    pipeline = _build_pipeline(cfg_data, cfg)
    samples = _load_samples(_manifest_path(args, cfg_data), cfg)
    split = _split_from(cfg_data, cfg, samples)
    out = _out_dir(args, cfg_data)
    max_steps = (cfg_data.get("train") or {}).get("max_steps")

    ckpt = training.train(cfg, split.train, split.val, pipeline,
                          log_path=out / "train_log.jsonl",
                          max_steps=max_steps)
    training.save_checkpoint(ckpt, out / "checkpoint.ckpt")
    if split.test:
        report = training.evaluate(ckpt, list(split.test), pipeline)
        (out / "metrics.json").write_text(report.to_json(indent=2), encoding="utf-8")
        print(f"test accuracy {report.accuracy:.4f}, macro-F1 {report.macro_f1:.4f}")
    print(f"checkpoint written to {out / 'checkpoint.ckpt'}")
    return 0


def _cmd_eval(args) -> int:
    ckpt = training.load_checkpoint(args.checkpoint)
    cfg_data = _load_config_file(args.config)
    pipeline = _build_pipeline(cfg_data, ckpt.config)
    samples = _load_samples(_manifest_path(args, cfg_data), ckpt.config)
    report = training.evaluate(ckpt, samples, pipeline)
    payload = report.to_json(indent=2)
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    print(payload)
    return 0


def _cmd_cross_validate(args) -> int:
    cfg_data = _load_config_file(args.config)
    cfg = _train_config_from(cfg_data, args)
    pipeline = _build_pipeline(cfg_data, cfg)
    samples = _load_samples(_manifest_path(args, cfg_data), cfg)
    max_steps = (cfg_data.get("train") or {}).get("max_steps")
    result = training.cross_validate(cfg, samples, pipeline, k=args.folds,
                                     max_steps=max_steps)
    out = _out_dir(args, cfg_data)
    (out / "cv_metrics.json").write_text(
        json.dumps(result.to_dict(), indent=2), encoding="utf-8")
    print(f"mean WA {result.mean_weighted_accuracy:.4f}, "
          f"mean UA {result.mean_unweighted_accuracy:.4f} over {args.folds} folds")
    return 0


def _cmd_ablate(args) -> int:
    cfg_data = _load_config_file(args.config)
    cfg = _train_config_from(cfg_data, args)
    pipeline = _build_pipeline(cfg_data, cfg)
    samples = _load_samples(_manifest_path(args, cfg_data), cfg)
    split = _split_from(cfg_data, cfg, samples)
    max_steps = (cfg_data.get("train") or {}).get("max_steps")
    table = training.ablate(cfg, split.train, split.val, split.test, pipeline,
                            max_steps=max_steps)
    out = _out_dir(args, cfg_data)
    payload = {key: rep.to_dict() for key, rep in table.items()}
    (out / "ablation.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    print(_format_table({k: MetricsReport.from_dict(v) for k, v in payload.items()}))
    return 0


def _cmd_augment(args) -> int:
    cfg_data = _load_config_file(args.config)
    policy = _augment_policy_from(cfg_data)
    if not policy.enabled:
        policy = AugmentPolicy(noise_prob=1.0, pitch_prob=1.0, stretch_prob=1.0)
    samples = data.load_manifest(args.manifest)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    for sample in samples:
        w = audio.load_wav(sample.audio_ref)
        aug = audio.augment(w, policy, rng)
        audio.save_wav(out / f"{sample.id}_aug.wav", aug)
    print(f"wrote {len(samples)} augmented files to {out}")
    return 0


def _format_table(rows: dict[str, MetricsReport]) -> str:
    headers = ("Run", "Accuracy", "F1-score", "WA", "UA")
    body = [
        (name,
         f"{rep.accuracy * 100:.2f}%",
         f"{rep.macro_f1 * 100:.2f}%",
         f"{rep.weighted_accuracy * 100:.2f}%",
         f"{rep.unweighted_accuracy * 100:.2f}%")
        for name, rep in rows.items()
    ]
    widths = [max(len(headers[i]), *(len(r[i]) for r in body)) if body else len(headers[i])
              for i in range(len(headers))]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)


def _cmd_report(args) -> int:
    rows: dict[str, MetricsReport] = {}
    for path in args.inputs:
        p = Path(path)
        if not p.is_file():
            raise errors.MissingFile(str(p))
        payload = json.loads(p.read_text(encoding="utf-8"))
        if "accuracy" in payload:
            rows[p.stem] = MetricsReport.from_dict(payload)
        else:
            # ablation-style mapping of run name -> report
            for name, rep in payload.items():
                if isinstance(rep, dict) and "accuracy" in rep:
                    rows[name] = MetricsReport.from_dict(rep)
    if not rows:
        raise ValueError("no metrics found in the given files")
    print(_format_table(rows))
    return 0


# --- wiring -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emofuse",
        description="Multimodal speech emotion recognition toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="run config file (YAML/JSON)")
        p.add_argument("--profile", choices=("vcemo", "iemocap", "custom"))
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--modalities",
                       help="comma-separated subset of acoustic,word,knowledge")
        p.add_argument("--classes", type=int, choices=(4, 6))

    p = sub.add_parser("ingest", help="validate a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--classes", type=int, choices=(4, 6), default=6)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("featurize", help="precompute and cache features")
    p.add_argument("--manifest")
    common(p)
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--manifest")
    common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval, profile=None, seed=None)

    p = sub.add_parser("cross-validate", help="leave-one-session-out training")
    p.add_argument("--manifest")
    p.add_argument("--folds", type=int, default=5)
    common(p)
    p.set_defaults(func=_cmd_cross_validate)

    p = sub.add_parser("ablate", help="train one model per modality subset")
    p.add_argument("--manifest")
    common(p)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("augment", help="write augmented audio for inspection")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("report", help="render metrics JSON as a text table")
    p.add_argument("--in", dest="inputs", action="append", required=True,
                   help="metrics JSON file (repeatable)")
    p.set_defaults(func=_cmd_report)

    return parser


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
