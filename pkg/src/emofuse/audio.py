"""Audio decoding, mel-spectrogram frontend and waveform augmentation.

The augmentations are noise addition at a target SNR, a duration-preserving
pitch shift and a pitch-preserving time stretch (phase-vocoder based).
"""
from __future__ import annotations

import wave
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import (
    EmptyAudio,
    MissingFile,
    NonFiniteSample,
    OutOfRangeRate,
    OutOfRangeShift,
    SilentSignal,
    UnsupportedAudio,
)


@dataclass
class Waveform:
    """Mono signal with values in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise EmptyAudio("waveform must be a non-empty 1-D signal")
        if not np.all(np.isfinite(self.samples)):
            raise NonFiniteSample("waveform contains NaN or inf")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class FrontendConfig:
    target_rate: int = 16000
    win_length: int = 400      # 25 ms at 16 kHz
    hop_length: int = 160      # 10 ms
    fft_size: int = 512
    mel_bins: int = 80
    log_floor: float = 1e-6

    def __post_init__(self):
        if not (0 < self.win_length <= self.fft_size):
            raise ValueError("need 0 < win_length <= fft_size")
        if not (0 < self.hop_length <= self.win_length):
            raise ValueError("need 0 < hop_length <= win_length")
        if self.mel_bins < 1:
            raise ValueError("mel_bins must be >= 1")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")


@dataclass
class MelSpectrogram:
    values: np.ndarray          # frames x mel_bins, natural-log energies
    frame_hop_s: float
    params: FrontendConfig

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


# --- WAV IO ---------------------------------------------------------------

def load_wav(path: str | Path) -> Waveform:
    """Read a PCM WAV file; 16-bit native, multi-channel downmixed to mono."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    with wave.open(str(path), "rb") as wf:
        n_channels = wf.getnchannels()
        width = wf.getsampwidth()
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    if width != 2:
        raise UnsupportedAudio(f"only 16-bit PCM supported, got sample width {width}")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    return Waveform(samples=data, sample_rate=rate)


def save_wav(path: str | Path, w: Waveform) -> None:
    data = np.clip(w.samples, -1.0, 1.0)
    pcm = np.round(data * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(w.sample_rate)
        wf.writeframes(pcm.tobytes())


def resample(w: Waveform, target_rate: int) -> Waveform:
    if w.sample_rate == target_rate:
        return w
    frac = Fraction(target_rate, w.sample_rate)
    out = resample_poly(w.samples, frac.numerator, frac.denominator)
    return Waveform(samples=np.clip(out, -1.0, 1.0), sample_rate=target_rate)


# --- STFT / mel -----------------------------------------------------------

def _hann(win_length: int) -> np.ndarray:
    # periodic Hann, constant-overlap-add friendly
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win_length) / win_length)


def _frame(y: np.ndarray, frame_length: int, hop: int) -> np.ndarray:
    n_frames = 1 + (len(y) - frame_length) // hop
    idx = np.arange(frame_length)[None, :] + hop * np.arange(n_frames)[:, None]
    return y[idx]


def _stft(y: np.ndarray, fft_size: int, hop: int, window: np.ndarray,
          center: bool = True) -> np.ndarray:
    """Complex STFT, frames x (fft_size//2 + 1)."""
    win = window
    if len(win) < fft_size:
        pad = fft_size - len(win)
        win = np.pad(win, (pad // 2, pad - pad // 2))
    if center:
        half = fft_size // 2
        mode = "reflect" if len(y) > half else "constant"
        y = np.pad(y, (half, half), mode=mode)
    if len(y) < fft_size:
        y = np.pad(y, (0, fft_size - len(y)))
    frames = _frame(y, fft_size, hop)
    return np.fft.rfft(frames * win[None, :], n=fft_size, axis=1)


def _istft(spec: np.ndarray, fft_size: int, hop: int, window: np.ndarray) -> np.ndarray:
    """Weighted overlap-add inverse of _stft(center=False)."""
    win = window
    if len(win) < fft_size:
        pad = fft_size - len(win)
        win = np.pad(win, (pad // 2, pad - pad // 2))
    n_frames = spec.shape[0]
    out_len = fft_size + hop * (n_frames - 1)
    out = np.zeros(out_len)
    norm = np.zeros(out_len)
    frames = np.fft.irfft(spec, n=fft_size, axis=1)
    wsq = win * win
    for i in range(n_frames):
        start = i * hop
        out[start:start + fft_size] += frames[i] * win
        norm[start:start + fft_size] += wsq
    return out / np.maximum(norm, 1e-10)


def mel_frequencies(mel_bins: int, f_max: float) -> np.ndarray:
    """Center frequencies (Hz) of the triangular mel filters."""

    def to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    pts = from_mel(np.linspace(0.0, float(to_mel(f_max)), mel_bins + 2))
    return pts[1:-1]


def mel_filterbank(mel_bins: int, fft_size: int, sample_rate: int) -> np.ndarray:
    """Triangular filters (mel_bins x fft_size//2+1) spanning 0..rate/2."""

    def to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    f_max = sample_rate / 2.0
    pts = from_mel(np.linspace(0.0, float(to_mel(f_max)), mel_bins + 2))
    bin_freqs = np.fft.rfftfreq(fft_size, d=1.0 / sample_rate)

    fb = np.zeros((mel_bins, len(bin_freqs)))
    for m in range(mel_bins):
        lo, center, hi = pts[m], pts[m + 1], pts[m + 2]
        up = (bin_freqs - lo) / max(center - lo, 1e-12)
        down = (hi - bin_freqs) / max(hi - center, 1e-12)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def compute_mel_spectrogram(w: Waveform, cfg: FrontendConfig = FrontendConfig()) -> MelSpectrogram:
    """Log mel energies with centered framing.

    Frame count is floor(num_samples / hop) + 1 at the target rate; the
    filterbank spans 0..target_rate/2 and mel energies are non-negative
    before the log compression.
    """
    w = resample(w, cfg.target_rate)
    window = _hann(cfg.win_length)
    spec = _stft(w.samples, cfg.fft_size, cfg.hop_length, window, center=True)
    power = np.abs(spec) ** 2                       # frames x bins, >= 0
    fb = mel_filterbank(cfg.mel_bins, cfg.fft_size, cfg.target_rate)
    mel_energy = power @ fb.T
    assert np.all(mel_energy >= 0.0)
    values = np.log(mel_energy + cfg.log_floor)
    return MelSpectrogram(
        values=values,
        frame_hop_s=cfg.hop_length / cfg.target_rate,
        params=cfg,
    )


# --- augmentation ---------------------------------------------------------

def add_noise_snr(w: Waveform, snr_db: float = 30.0,
                  rng: np.random.Generator | None = None) -> Waveform:
    """Add zero-mean Gaussian noise at the requested signal-to-noise ratio."""
    signal_power = float(np.mean(w.samples ** 2))
    if signal_power == 0.0:
        raise SilentSignal("SNR undefined for an all-zero signal")
    if rng is None:
        rng = np.random.default_rng()
    noise_power = signal_power / (10.0 ** (snr_db / 10.0))
    noise = rng.normal(0.0, np.sqrt(noise_power), size=w.samples.shape)
    return Waveform(samples=np.clip(w.samples + noise, -1.0, 1.0),
                    sample_rate=w.sample_rate)


# STFT geometry for the phase vocoder; 75% overlap keeps hann COLA exact.
_PV_FFT = 2048
_PV_HOP = 512


def _phase_vocoder(spec: np.ndarray, rate: float, hop: int, fft_size: int) -> np.ndarray:
    """Resample STFT frames in time by `rate`, accumulating phase."""
    n_frames, n_bins = spec.shape
    steps = np.arange(0.0, n_frames, rate)
    expected = 2.0 * np.pi * hop * np.arange(n_bins) / fft_size

    padded = np.vstack([spec, np.zeros((1, n_bins), dtype=spec.dtype)])
    out = np.zeros((len(steps), n_bins), dtype=complex)
    phase = np.angle(spec[0])
    for t, step in enumerate(steps):
        i = int(step)
        frac = step - i
        mag = (1.0 - frac) * np.abs(padded[i]) + frac * np.abs(padded[i + 1])
        out[t] = mag * np.exp(1j * phase)
        dphase = np.angle(padded[i + 1]) - np.angle(padded[i]) - expected
        dphase -= 2.0 * np.pi * np.round(dphase / (2.0 * np.pi))
        phase = phase + expected + dphase
    return out


def _fix_length(y: np.ndarray, length: int) -> np.ndarray:
    if len(y) > length:
        return y[:length]
    if len(y) < length:
        return np.pad(y, (0, length - len(y)))
    return y


def time_stretch(w: Waveform, rate: float) -> Waveform:
    """Change duration by 1/rate without changing pitch."""
    if not (0.5 <= rate <= 2.0):
        raise OutOfRangeRate(f"rate must be in [0.5, 2.0], got {rate}")
    target_len = int(round(len(w) / rate))
    if rate == 1.0:
        return Waveform(samples=w.samples.copy(), sample_rate=w.sample_rate)
    window = _hann(_PV_FFT)
    spec = _stft(w.samples, _PV_FFT, _PV_HOP, window, center=True)
    stretched = _phase_vocoder(spec, rate, _PV_HOP, _PV_FFT)
    y = _istft(stretched, _PV_FFT, _PV_HOP, window)
    # the centering pad occupies (fft/2)/rate samples after stretching
    y = y[int(round((_PV_FFT // 2) / rate)):]
    return Waveform(samples=np.clip(_fix_length(y, target_len), -1.0, 1.0),
                    sample_rate=w.sample_rate)


def pitch_shift(w: Waveform, semitones: float) -> Waveform:
    """Scale the fundamental by 2^(semitones/12); duration preserved."""
    if abs(semitones) > 12.0:
        raise OutOfRangeShift(f"|semitones| must be <= 12, got {semitones}")
    if semitones == 0.0:
        return Waveform(samples=w.samples.copy(), sample_rate=w.sample_rate)
    rate = 2.0 ** (-semitones / 12.0)
    stretched = time_stretch(w, rate)
    # play the stretched signal back at the original duration
    frac = Fraction(rate).limit_denominator(1000)
    y = resample_poly(stretched.samples, frac.numerator, frac.denominator)
    return Waveform(samples=np.clip(_fix_length(y, len(w)), -1.0, 1.0),
                    sample_rate=w.sample_rate)


@dataclass(frozen=True)
class AugmentPolicy:
    """Per-transform probabilities and parameter ranges.

    Defaults leave every transform disabled. The pitch/stretch ranges are
    engineering defaults, configurable per run.
    """

    noise_prob: float = 0.0
    noise_snr_db: float = 30.0
    pitch_prob: float = 0.0
    pitch_semitones: tuple[float, float] = (-2.0, 2.0)
    stretch_prob: float = 0.0
    stretch_rate: tuple[float, float] = (0.9, 1.1)

    @property
    def enabled(self) -> bool:
        return self.noise_prob > 0 or self.pitch_prob > 0 or self.stretch_prob > 0


def augment(w: Waveform, policy: AugmentPolicy,
            rng: np.random.Generator | None = None) -> Waveform:
    """Apply enabled transforms in the fixed order noise -> pitch -> stretch."""
    if not policy.enabled:
        return w
    if rng is None:
        raise ValueError("an rng is required when any transform is enabled")
    out = w
    if policy.noise_prob > 0 and rng.random() < policy.noise_prob:
        out = add_noise_snr(out, policy.noise_snr_db, rng)
    if policy.pitch_prob > 0 and rng.random() < policy.pitch_prob:
        semitones = rng.uniform(*policy.pitch_semitones)
        out = pitch_shift(out, semitones)
    if policy.stretch_prob > 0 and rng.random() < policy.stretch_prob:
        rate = rng.uniform(*policy.stretch_rate)
        out = time_stretch(out, rate)
    return out


__all__ = [
    "Waveform", "FrontendConfig", "MelSpectrogram", "AugmentPolicy",
    "load_wav", "save_wav", "resample", "compute_mel_spectrogram",
    "mel_filterbank", "mel_frequencies",
    "add_noise_snr", "pitch_shift", "time_stretch", "augment",
]
