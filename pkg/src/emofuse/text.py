"""Text-side inputs: token word embeddings, sentence knowledge vectors,
and an external transcript provider, all behind pluggable cached interfaces.

The word table is 300-d per token; the sentence encoder returns one 768-d
vector per utterance. Deterministic hash-seeded providers are included so
everything runs offline (tests, smoke training, CLI demos).
"""
from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .data import Sample
from .errors import EmptyText, MissingFile, ProviderUnavailable, TranscriptionFailed

WORD_DIM = 300
SENTENCE_DIM = 768

# CJK Unified Ideographs and common extensions; tokens containing any of
# these fall back to per-character lookup.
_CJK_RANGES = (
    (0x4E00, 0x9FFF),
    (0x3400, 0x4DBF),
    (0xF900, 0xFAFF),
    (0x3040, 0x30FF),   # kana
)


def _has_cjk(token: str) -> bool:
    return any(lo <= ord(ch) <= hi for ch in token for lo, hi in _CJK_RANGES)


@dataclass
class WordEmbeddingSequence:
    vectors: np.ndarray          # T x 300
    tokens: tuple[str, ...]
    mask: np.ndarray             # T bools, all True here; padding happens at batch time

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1:
            raise ValueError("need at least one token vector")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("word vectors must be finite")


@dataclass
class SentenceEmbedding:
    vector: np.ndarray           # 768

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64).reshape(-1)
        if self.vector.shape[0] != SENTENCE_DIM:
            raise ValueError(f"sentence vector must be {SENTENCE_DIM}-d, got {self.vector.shape[0]}")
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("sentence vector must be finite")


# --- providers --------------------------------------------------------------

@runtime_checkable
class WordVectorSource(Protocol):
    provider_id: str

    def lookup(self, token: str) -> np.ndarray | None:
        """Vector for the token, or None when out of vocabulary."""


@runtime_checkable
class SentenceEncoderProvider(Protocol):
    provider_id: str

    def encode(self, text: str) -> np.ndarray:
        ...


@runtime_checkable
class TranscriptProvider(Protocol):
    provider_id: str

    def transcribe(self, audio_ref: str) -> str:
        ...


class WordVectorTable:
    """Vocabulary file loader: one line per token, 'token v1 ... v300'."""

    def __init__(self, vectors: dict[str, np.ndarray], provider_id: str = "vocab"):
        self.provider_id = provider_id
        self._vectors = vectors

    @classmethod
    def from_file(cls, path: str | Path) -> "WordVectorTable":
        path = Path(path)
        if not path.is_file():
            raise MissingFile(str(path))
        vectors: dict[str, np.ndarray] = {}
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                parts = line.rstrip("\n").split(" ")
                if len(parts) != WORD_DIM + 1:
                    raise ValueError(
                        f"vocabulary line has {len(parts) - 1} values, expected {WORD_DIM}"
                    )
                vectors[parts[0]] = np.asarray([float(x) for x in parts[1:]])
        return cls(vectors, provider_id=f"vocab:{path.name}")

    def lookup(self, token: str) -> np.ndarray | None:
        return self._vectors.get(token)

    def __len__(self) -> int:
        return len(self._vectors)


def _hash_rng(*parts: str) -> np.random.Generator:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


class HashWordVectors:
    """Deterministic pseudo-random word vectors; full vocabulary by design."""

    provider_id = "hash-words"

    def lookup(self, token: str) -> np.ndarray:
        rng = _hash_rng("word", token)
        return rng.standard_normal(WORD_DIM) / np.sqrt(WORD_DIM)


class HashSentenceEncoder:
    """Deterministic pseudo-random 768-d sentence vectors."""

    provider_id = "hash-sentence"

    def encode(self, text: str) -> np.ndarray:
        rng = _hash_rng("sentence", text)
        return rng.standard_normal(SENTENCE_DIM) / np.sqrt(SENTENCE_DIM)


class HashTranscriptProvider:
    """Deterministic placeholder transcripts keyed by the audio reference."""

    provider_id = "hash-transcript"

    def transcribe(self, audio_ref: str) -> str:
        tag = hashlib.sha256(audio_ref.encode("utf-8")).hexdigest()[:8]
        return f"synthetic transcript {tag}"


# --- cache ------------------------------------------------------------------

class ProviderCache:
    """Disk cache keyed by (provider_id, content hash); atomic single-key writes."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def content_key(content: str | bytes) -> str:
        if isinstance(content, str):
            content = content.encode("utf-8")
        return hashlib.sha256(content).hexdigest()

    def _path(self, provider_id: str, key: str, suffix: str) -> Path:
        safe = provider_id.replace("/", "_").replace(":", "_")
        return self.root / safe / f"{key}{suffix}"

    def _atomic_write(self, path: Path, write_fn) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                write_fn(fh)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def get_array(self, provider_id: str, key: str) -> np.ndarray | None:
        path = self._path(provider_id, key, ".npy")
        if not path.is_file():
            return None
        return np.load(path)

    def put_array(self, provider_id: str, key: str, arr: np.ndarray) -> None:
        path = self._path(provider_id, key, ".npy")
        self._atomic_write(path, lambda fh: np.save(fh, arr))

    def get_text(self, provider_id: str, key: str) -> str | None:
        path = self._path(provider_id, key, ".txt")
        if not path.is_file():
            return None
        return path.read_text(encoding="utf-8")

    def put_text(self, provider_id: str, key: str, text: str) -> None:
        path = self._path(provider_id, key, ".txt")
        self._atomic_write(path, lambda fh: fh.write(text.encode("utf-8")))


def default_cache_dir() -> Path:
    env = os.environ.get("EMOFUSE_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "emofuse"


# --- operations ---------------------------------------------------------------

def transcribe(sample: Sample,
               provider: TranscriptProvider | None = None,
               cache: ProviderCache | None = None) -> str:
    """Return the manifest transcript when present, else query the provider.

    Provider results are cached; the cache key identifies the audio by file
    content when readable, by reference string otherwise.
    """
    if sample.transcript:
        return sample.transcript
    if provider is None:
        raise ProviderUnavailable(
            f"sample {sample.id!r} has no transcript and no provider is configured"
        )

    ref_path = Path(sample.audio_ref)
    if ref_path.is_file():
        key = ProviderCache.content_key(ref_path.read_bytes())
    else:
        key = ProviderCache.content_key(sample.audio_ref)

    if cache is not None:
        hit = cache.get_text(provider.provider_id, key)
        if hit is not None:
            return hit
    try:
        text = provider.transcribe(sample.audio_ref)
    except Exception as exc:
        raise TranscriptionFailed(sample.audio_ref, str(exc)) from exc
    if cache is not None:
        cache.put_text(provider.provider_id, key, text)
    return text


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization with a per-character fallback for CJK tokens."""
    tokens: list[str] = []
    for tok in text.split():
        if _has_cjk(tok):
            tokens.extend(tok)
        else:
            tokens.append(tok)
    return tokens


def tokenize_and_embed(text: str,
                       table: WordVectorSource,
                       max_tokens: int = 64) -> WordEmbeddingSequence:
    """Map tokens through the word-vector table; OOV rows are exactly zero.

    Sequences longer than max_tokens are truncated from the end; padding to
    a common length happens at batch-assembly time via the validity mask.
    """
    tokens = tokenize(text.strip())
    if not tokens:
        raise EmptyText("no tokens after normalization")
    tokens = tokens[:max_tokens]
    vectors = np.zeros((len(tokens), WORD_DIM))
    for i, tok in enumerate(tokens):
        vec = table.lookup(tok)
        if vec is not None:
            vectors[i] = vec
    return WordEmbeddingSequence(
        vectors=vectors,
        tokens=tuple(tokens),
        mask=np.ones(len(tokens), dtype=bool),
    )


def encode_sentence(text: str,
                    provider: SentenceEncoderProvider | None,
                    cache: ProviderCache | None = None) -> SentenceEmbedding:
    """768-d sentence-summary vector, cached by content hash."""
    if not text.strip():
        raise EmptyText("cannot encode empty text")
    if provider is None:
        raise ProviderUnavailable("no sentence-encoder provider is configured")
    key = ProviderCache.content_key(text)
    if cache is not None:
        hit = cache.get_array(provider.provider_id, key)
        if hit is not None:
            return SentenceEmbedding(vector=hit)
    vec = np.asarray(provider.encode(text), dtype=np.float64)
    if cache is not None:
        cache.put_array(provider.provider_id, key, vec)
    return SentenceEmbedding(vector=vec)
