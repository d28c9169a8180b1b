import json
from pathlib import Path

import numpy as np
import pytest

from emofuse import (
    FOUR_CLASS_NAMES,
    FeaturePipeline,
    HashSentenceEncoder,
    HashWordVectors,
    ProviderCache,
    Sample,
    audio,
)

# class-specific tones keep the synthetic task separable from audio alone
CLASS_TONES = {"angry": 320.0, "happy": 740.0, "neutral": 1480.0, "sad": 2560.0,
               "fear": 440.0, "surprise": 2020.0}
SAMPLE_RATE = 16000


def write_tone_wav(path: Path, freq: float, duration_s: float = 0.4,
                   amplitude: float = 0.4) -> None:
    t = np.arange(int(duration_s * SAMPLE_RATE)) / SAMPLE_RATE
    sig = amplitude * np.cos(2.0 * np.pi * freq * t)
    audio.save_wav(path, audio.Waveform(sig, SAMPLE_RATE))


def make_synthetic_dataset(root: Path, n: int = 64,
                           classes: tuple[str, ...] = FOUR_CLASS_NAMES,
                           n_sessions: int = 5, seed: int = 0,
                           duration_s: float = 0.4,
                           with_text: bool = True) -> tuple[Path, list[Sample]]:
    """Tone-per-class WAVs plus a JSONL manifest; fully deterministic."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    samples = []
    records = []
    for i in range(n):
        label = classes[i % len(classes)]
        freq = CLASS_TONES[label] + rng.uniform(-10.0, 10.0)
        wav_path = root / f"utt{i:03d}.wav"
        write_tone_wav(wav_path, freq, duration_s)
        text = f"{label} voice clip number {i}" if with_text else ""
        sample = Sample(
            id=f"utt{i:03d}",
            audio_ref=str(wav_path),
            transcript=text,
            label=label,
            speaker_id=f"spk{i % 8}",
            session_id=f"s{i % n_sessions + 1}",
            duration_s=duration_s,
        )
        samples.append(sample)
        records.append({
            "id": sample.id, "audio": sample.audio_ref, "text": sample.transcript,
            "label": sample.label, "speaker": sample.speaker_id,
            "session": sample.session_id, "duration": sample.duration_s,
        })
    manifest = root / "manifest.jsonl"
    manifest.write_text("\n".join(json.dumps(r) for r in records) + "\n",
                        encoding="utf-8")
    return manifest, samples


@pytest.fixture(scope="session")
def synth_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    return make_synthetic_dataset(root)


@pytest.fixture()
def offline_pipeline(tmp_path):
    return FeaturePipeline(
        modalities=("acoustic", "word", "knowledge"),
        word_table=HashWordVectors(),
        sentence_encoder=HashSentenceEncoder(),
        cache=ProviderCache(tmp_path / "cache"),
    )
