"""Manifest loading, label sets, dataset splitting and session folds.

A manifest is UTF-8 text with one JSON object per line. Keys: id, audio,
text, label, speaker, session, duration. "text" may be missing (filled
later by a transcript provider); a missing "session" defaults to the
speaker id.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    DuplicateId,
    EmptyResult,
    MalformedRecord,
    MissingFile,
    SessionCountMismatch,
    TooFewSamples,
    UnknownLabel,
)

SIX_CLASS_NAMES = ("angry", "fear", "happy", "neutral", "sad", "surprise")
FOUR_CLASS_NAMES = ("angry", "happy", "neutral", "sad")


@dataclass(frozen=True)
class LabelSet:
    """Closed set of emotion names; indices are alphabetical 0..C-1."""

    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise ValueError("label set must be non-empty")
        ordered = tuple(sorted(set(self.names)))
        if ordered != self.names:
            # normalize silently so LabelSet(("sad", "angry")) is usable
            object.__setattr__(self, "names", ordered)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownLabel(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.names)


SIX_CLASS = LabelSet(SIX_CLASS_NAMES)
FOUR_CLASS = LabelSet(FOUR_CLASS_NAMES)


@dataclass(frozen=True)
class Sample:
    id: str
    audio_ref: str
    transcript: str
    label: str
    speaker_id: str
    session_id: str
    duration_s: float


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[Sample, ...]
    val: tuple[Sample, ...]
    test: tuple[Sample, ...]
    seed: int

    def __len__(self) -> int:
        return len(self.train) + len(self.val) + len(self.test)


@dataclass(frozen=True)
class SessionFold:
    val_session: str
    train_sessions: tuple[str, ...]
    train: tuple[Sample, ...]
    val: tuple[Sample, ...]


_REQUIRED_KEYS = ("id", "audio", "label", "speaker", "duration")


def load_manifest(path: str | Path, label_set: LabelSet = SIX_CLASS) -> list[Sample]:
    """Read and validate a JSONL manifest.

    Rejects unknown labels, duplicate ids and malformed records; blank
    lines are skipped. Returns samples in file order.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))

    samples: list[Sample] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise MalformedRecord(line_no, "record is not a JSON object")
            missing = [k for k in _REQUIRED_KEYS if k not in rec]
            if missing:
                raise MalformedRecord(line_no, f"missing keys {missing}")
            try:
                duration = float(rec["duration"])
            except (TypeError, ValueError):
                raise MalformedRecord(line_no, "duration is not a number") from None
            if duration <= 0:
                raise MalformedRecord(line_no, f"duration must be > 0, got {duration}")

            label = str(rec["label"])
            if label not in label_set:
                raise UnknownLabel(label)
            sample_id = str(rec["id"])
            if sample_id in seen:
                raise DuplicateId(sample_id)
            seen.add(sample_id)

            speaker = str(rec["speaker"])
            samples.append(
                Sample(
                    id=sample_id,
                    audio_ref=str(rec["audio"]),
                    transcript=str(rec.get("text", "") or ""),
                    label=label,
                    speaker_id=speaker,
                    session_id=str(rec.get("session", speaker) or speaker),
                    duration_s=duration,
                )
            )
    return samples


def split_dataset(
    samples: Sequence[Sample],
    ratios: tuple[int, int, int] = (8, 1, 1),
    seed: int = 0,
    speaker_disjoint: bool = False,
) -> DatasetSplit:
    """Shuffle deterministically by seed and partition into train/val/test.

    Eval part sizes are the nearest integers to N*ratio/sum (7477 samples
    at 8/1/1 give 5981/748/748); train takes the remainder. With
    speaker_disjoint=True whole speakers are assigned to one part.
    """
    if any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be positive, got {ratios}")
    n = len(samples)
    if n < 3:
        raise TooFewSamples(f"need at least 3 samples, got {n}")

    total = sum(ratios)
    n_val = int(round(n * ratios[1] / total))
    n_test = int(round(n * ratios[2] / total))
    if n_val + n_test >= n:
        raise TooFewSamples("eval parts would leave no training samples")

    rng = random.Random(seed)
    if not speaker_disjoint:
        order = list(samples)
        rng.shuffle(order)
        test = order[:n_test]
        val = order[n_test:n_test + n_val]
        train = order[n_test + n_val:]
    else:
        by_speaker: dict[str, list[Sample]] = {}
        for s in samples:
            by_speaker.setdefault(s.speaker_id, []).append(s)
        speakers = sorted(by_speaker)
        rng.shuffle(speakers)
        test, val, train = [], [], []
        for spk in speakers:
            group = by_speaker[spk]
            if len(test) < n_test:
                test.extend(group)
            elif len(val) < n_val:
                val.extend(group)
            else:
                train.extend(group)
        if not train:
            raise TooFewSamples("speaker-disjoint split left no training samples")

    return DatasetSplit(train=tuple(train), val=tuple(val), test=tuple(test), seed=seed)


def filter_classes(samples: Sequence[Sample], label_subset: Iterable[str]) -> list[Sample]:
    """Keep only samples whose label is in the subset.

    Index re-packing is implied: build LabelSet(subset) for the retained
    names, whose indices are alphabetical 0..C'-1.
    """
    subset = frozenset(label_subset)
    kept = [s for s in samples if s.label in subset]
    if not kept:
        raise EmptyResult(f"no sample carries a label in {sorted(subset)}")
    return kept


def make_session_folds(samples: Sequence[Sample], k: int = 5) -> list[SessionFold]:
    """Leave-one-session-out folds; requires exactly k distinct sessions."""
    by_session: dict[str, list[Sample]] = {}
    for s in samples:
        by_session.setdefault(s.session_id, []).append(s)
    sessions = sorted(by_session)
    if len(sessions) != k:
        raise SessionCountMismatch(found=len(sessions), expected=k)

    folds = []
    for val_session in sessions:
        train_sessions = tuple(s for s in sessions if s != val_session)
        train = tuple(x for s in train_sessions for x in by_session[s])
        folds.append(
            SessionFold(
                val_session=val_session,
                train_sessions=train_sessions,
                train=train,
                val=tuple(by_session[val_session]),
            )
        )
    return folds
