"""MFCC feature pipeline and training-example assembly.

Frames are 25 ms every 10 ms. Each frame yields 13 cepstra (c0..c12)
plus delta and delta-delta appended, 39 dimensions total. Training
examples pair a 21-frame noisy context window with an 11-frame clean
target window and the center frame's class label.
"""

import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.fft

from . import fileio
from .errors import InvalidInputError

NUM_STATIC = 13
NUM_FEATURES = 3 * NUM_STATIC  # static + delta + delta-delta
NOISY_CONTEXT = 10  # frames on each side of center -> 21-frame window
CLEAN_CONTEXT = 5   # frames on each side of center -> 11-frame window
NOISY_DIM = (2 * NOISY_CONTEXT + 1) * NUM_FEATURES  # 819
CLEAN_DIM = (2 * CLEAN_CONTEXT + 1) * NUM_FEATURES  # 429

VARIANCE_FLOOR = 1e-8


@dataclass(frozen=True)
class Waveform:
    """Mono waveform with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidInputError("waveform must be mono (1-D)")
        if int(self.sample_rate) <= 0:
            raise InvalidInputError("sample_rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 16000
    frame_seconds: float = 0.025
    shift_seconds: float = 0.010
    preemphasis: float = 0.97
    num_filters: int = 23
    low_hz: float = 64.0
    high_hz: float | None = None  # None -> Nyquist
    num_cepstra: int = NUM_STATIC
    log_floor: float = 1e-10
    delta_window: int = 2

    @property
    def frame_len(self) -> int:
        return round(self.sample_rate * self.frame_seconds)

    @property
    def frame_shift(self) -> int:
        return round(self.sample_rate * self.shift_seconds)

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0

    @property
    def fft_size(self) -> int:
        return 1 << (self.frame_len - 1).bit_length()


@dataclass
class FeatureSequence:
    """Time-major matrix of 39-dim feature frames."""

    frames: np.ndarray
    frame_shift: float = 0.010
    frame_length: float = 0.025
    source_id: str = ""

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 2 or frames.shape[1] != NUM_FEATURES:
            raise InvalidInputError(
                f"feature matrix must have {NUM_FEATURES} columns, got shape {frames.shape}"
            )
        if frames.shape[0] < 1:
            raise InvalidInputError("feature sequence must contain at least one frame")
        if not np.all(np.isfinite(frames)):
            raise InvalidInputError("feature matrix contains non-finite values")
        self.frames = frames

    def __len__(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class TrainingExample:
    """One frame's training triple: noisy context, clean target, label."""

    noisy_window: np.ndarray
    clean_target: np.ndarray
    label: int

    def __post_init__(self):
        if self.noisy_window.shape != (NOISY_DIM,):
            raise InvalidInputError(f"noisy window must have {NOISY_DIM} dims")
        if self.clean_target.shape != (CLEAN_DIM,):
            raise InvalidInputError(f"clean target must have {CLEAN_DIM} dims")
        if self.label < 0:
            raise InvalidInputError("label must be a nonnegative class index")


@dataclass(frozen=True)
class FeatureStats:
    """Per-dimension standardization statistics."""

    mean: np.ndarray
    std: np.ndarray


def num_frames(n_samples: int, cfg: FeatureConfig = FeatureConfig()) -> int:
    if n_samples < cfg.frame_len:
        raise InvalidInputError(
            f"waveform of {n_samples} samples is shorter than one frame ({cfg.frame_len})"
        )
    return 1 + (n_samples - cfg.frame_len) // cfg.frame_shift


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (np.power(10.0, np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filter_edges(cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Hz positions of filter edges/peaks: num_filters + 2 points.

    Filter m peaks at edge m+1 and spans edges m..m+2.
    """
    high = cfg.nyquist if cfg.high_hz is None else cfg.high_hz
    mels = np.linspace(hz_to_mel(cfg.low_hz), hz_to_mel(high), cfg.num_filters + 2)
    return mel_to_hz(mels)


def mel_filterbank(cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Triangular filters as a (num_filters, fft_size // 2 + 1) weight matrix."""
    edges = mel_filter_edges(cfg)
    bin_hz = np.arange(cfg.fft_size // 2 + 1) * (cfg.sample_rate / cfg.fft_size)
    weights = np.zeros((cfg.num_filters, bin_hz.size))
    for m in range(cfg.num_filters):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (bin_hz - lo) / (center - lo)
        falling = (hi - bin_hz) / (hi - center)
        weights[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return weights


def _frame_signal(samples: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    emphasized = np.empty_like(samples)
    emphasized[0] = samples[0]
    emphasized[1:] = samples[1:] - cfg.preemphasis * samples[:-1]
    t = num_frames(samples.size, cfg)
    idx = np.arange(t)[:, None] * cfg.frame_shift + np.arange(cfg.frame_len)[None, :]
    return emphasized[idx]


def mel_log_energies(wave: Waveform, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Log mel-filterbank energies, (T, num_filters)."""
    if wave.sample_rate != cfg.sample_rate:
        raise InvalidInputError(
            f"waveform sample rate {wave.sample_rate} does not match config {cfg.sample_rate}"
        )
    frames = _frame_signal(wave.samples, cfg) * np.hamming(cfg.frame_len)
    spectrum = np.fft.rfft(frames, n=cfg.fft_size, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    energies = power @ mel_filterbank(cfg).T
    return np.log(np.maximum(energies, cfg.log_floor))


def delta(feats: np.ndarray, window: int = 2) -> np.ndarray:
    """Regression-slope time derivative with edge frames replicated."""
    feats = np.asarray(feats)
    padded = np.pad(feats, ((window, window), (0, 0)), mode="edge")
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    out = np.zeros_like(feats, dtype=np.float64)
    t = feats.shape[0]
    for n in range(1, window + 1):
        out += n * (padded[window + n : window + n + t] - padded[window - n : window - n + t])
    return out / denom


def extract_mfcc(wave: Waveform, cfg: FeatureConfig = FeatureConfig()) -> FeatureSequence:
    """Full pipeline: 13 cepstra (c0 retained) plus deltas and delta-deltas."""
    logmel = mel_log_energies(wave, cfg)
    cepstra = scipy.fft.dct(logmel, type=2, axis=1, norm="ortho")[:, : cfg.num_cepstra]
    d1 = delta(cepstra, cfg.delta_window)
    d2 = delta(d1, cfg.delta_window)
    return FeatureSequence(
        frames=np.hstack([cepstra, d1, d2]),
        frame_shift=cfg.shift_seconds,
        frame_length=cfg.frame_seconds,
    )


def stack_windows(frames: np.ndarray, context: int) -> np.ndarray:
    """Per-frame context windows with edge replication, (T, (2c+1)*D)."""
    t = frames.shape[0]
    idx = np.clip(np.arange(t)[:, None] + np.arange(-context, context + 1)[None, :], 0, t - 1)
    return frames[idx].reshape(t, -1)


def window_examples(noisy: FeatureSequence, clean: FeatureSequence, labels) -> list[TrainingExample]:
    """One training example per frame index."""
    labels = np.asarray(labels)
    t = len(noisy)
    if len(clean) != t or labels.shape != (t,):
        raise InvalidInputError(
            f"length mismatch: noisy={len(noisy)}, clean={len(clean)}, labels={labels.shape}"
        )
    noisy_win = stack_windows(noisy.frames, NOISY_CONTEXT)
    clean_win = stack_windows(clean.frames, CLEAN_CONTEXT)
    return [
        TrainingExample(noisy_win[i], clean_win[i], int(labels[i]))
        for i in range(t)
    ]


def compute_stats(seqs: list[FeatureSequence]) -> FeatureStats:
    """Two-pass per-dimension mean/std over a corpus of sequences."""
    if not seqs or sum(len(s) for s in seqs) < 1:
        raise InvalidInputError("need at least one frame to compute statistics")
    total = sum(len(s) for s in seqs)
    mean = np.zeros(NUM_FEATURES)
    for s in seqs:
        mean += s.frames.sum(axis=0, dtype=np.float64)
    mean /= total
    var = np.zeros(NUM_FEATURES)
    for s in seqs:
        var += ((s.frames.astype(np.float64) - mean) ** 2).sum(axis=0)
    var /= total
    if np.any(var < VARIANCE_FLOOR):
        warnings.warn("zero-variance feature dimension; variance floored", RuntimeWarning)
    return FeatureStats(mean=mean, std=np.sqrt(np.maximum(var, VARIANCE_FLOOR)))


def apply_stats(seqs: list[FeatureSequence], stats: FeatureStats) -> list[FeatureSequence]:
    return [
        replace(s, frames=(s.frames - stats.mean) / stats.std)
        for s in seqs
    ]


def normalize_features(seqs: list[FeatureSequence]) -> tuple[list[FeatureSequence], FeatureStats]:
    """Standardize a corpus per dimension; stats are reusable on held-out data."""
    stats = compute_stats(seqs)
    return apply_stats(seqs, stats), stats


@dataclass(frozen=True)
class ManifestEntry:
    utt_id: str
    noisy_path: Path
    clean_path: Path
    label_path: Path


def write_manifest(path, entries: list[ManifestEntry]) -> None:
    """Paths are stored relative to the manifest's directory."""
    base = Path(path).parent
    lines = []
    for e in entries:
        fields = [e.utt_id] + [
            str(Path(p).relative_to(base)) if Path(p).is_absolute() else str(p)
            for p in (e.noisy_path, e.clean_path, e.label_path)
        ]
        lines.append(" ".join(fields))
    fileio.atomic_write_text(path, "\n".join(lines) + "\n")


def read_manifest(path) -> list[ManifestEntry]:
    base = Path(path).parent
    entries = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise InvalidInputError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        entries.append(
            ManifestEntry(parts[0], base / parts[1], base / parts[2], base / parts[3])
        )
    return entries
