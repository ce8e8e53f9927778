"""Synthetic labeled corpus generation and acoustic contamination.

Clean utterances are concatenations of random-length segments; each
segment's class has a fixed spectral signature (three partials plus a
class-specific noise band) so frame labels are exact by construction.
Contamination convolves with a synthetic exponentially-decaying room
response and adds noise at a target utterance-wide SNR.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.signal

from . import features, fileio
from .errors import InvalidInputError
from .features import FeatureConfig, Waveform

# exp(-DECAY_LN / t60 * t) is a 60 dB amplitude drop at t = t60
DECAY_LN = math.log(1000.0)

NOISE_KINDS = ("white", "babble")
SPLITS = ("train", "dev", "test")

_FADE_SECONDS = 0.005
_PARTIAL_AMPS = (1.0, 0.6, 0.35)
_NOISE_AMP = 0.25
_TARGET_RMS = 0.1


@dataclass(frozen=True)
class SynthConfig:
    num_classes: int = 20
    utterance_seconds: float = 2.0
    segment_frames: tuple[int, int] = (5, 15)
    sample_rate: int = 16000
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise InvalidInputError("need at least 2 classes")
        lo, hi = self.segment_frames
        if lo < 3 or hi < lo:
            raise InvalidInputError("segment lengths must be >= 3 frames and ordered")


@dataclass(frozen=True)
class ContaminationConfig:
    t60: float = 0.7
    snr_db: float = 10.0
    noise_kind: str = "babble"
    direct_to_reverb: float = 1.0
    rir_seconds: float | None = None  # None -> 1.5 * t60
    seed: int = 0

    def __post_init__(self):
        if self.t60 <= 0:
            raise InvalidInputError("t60 must be positive")
        if self.noise_kind not in NOISE_KINDS:
            raise InvalidInputError(f"noise_kind must be one of {NOISE_KINDS}")


@dataclass(frozen=True)
class Rir:
    """Synthetic room impulse response; tap 0 is the direct path."""

    taps: np.ndarray
    sample_rate: int
    t60: float


@dataclass(frozen=True)
class CorpusConfig:
    synth: SynthConfig = SynthConfig()
    contamination: ContaminationConfig = ContaminationConfig()
    num_train: int = 2000
    num_dev: int = 200
    num_test: int = 200
    seed: int = 12345


def class_partials(k: int, num_classes: int, sample_rate: int) -> np.ndarray:
    """Three partial frequencies for class k, spread over log-frequency."""
    base = 250.0 * (1.12 ** k)
    r2 = (1.9, 2.3, 2.7, 3.1)[k % 4]
    r3 = (4.2, 5.1, 6.3)[k % 3]
    ceiling = 0.45 * sample_rate
    return np.minimum(np.array([base, base * r2, base * r3]), ceiling)


@lru_cache(maxsize=None)
def _class_noise_sos(k: int, num_classes: int, sample_rate: int):
    base = class_partials(k, num_classes, sample_rate)[0]
    lo = max(40.0, 0.8 * base)
    hi = min(0.45 * sample_rate, 1.25 * base + 50.0)
    return scipy.signal.butter(2, [lo, hi], btype="bandpass", fs=sample_rate, output="sos")


def _segment(k: int, n: int, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    sr = cfg.sample_rate
    t = np.arange(n) / sr
    freqs = class_partials(k, cfg.num_classes, sr)
    out = np.zeros(n)
    for amp, freq in zip(_PARTIAL_AMPS, freqs):
        jitter = 1.0 + rng.uniform(-0.02, 0.02)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        gain = amp * (1.0 + rng.uniform(-0.1, 0.1))
        out += gain * np.sin(2.0 * math.pi * freq * jitter * t + phase)
    noise = scipy.signal.sosfilt(_class_noise_sos(k, cfg.num_classes, sr), rng.standard_normal(n))
    out += _NOISE_AMP * noise
    fade = min(round(_FADE_SECONDS * sr), n // 4)
    if fade > 0:
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(fade) / fade))
        out[:fade] *= ramp
        out[-fade:] *= ramp[::-1]
    return out


def synth_clean_utterance(cfg: SynthConfig, rng_seed) -> tuple[Waveform, np.ndarray]:
    """Generate one utterance and its per-frame class labels.

    Labels follow the feature-extraction framing grid: frame t is
    labeled with the class of the segment covering its center sample.
    """
    fcfg = FeatureConfig(sample_rate=cfg.sample_rate)
    n = round(cfg.utterance_seconds * cfg.sample_rate)
    if n < fcfg.frame_len:
        raise InvalidInputError("utterance shorter than one frame")
    rng = np.random.default_rng(rng_seed)
    samples = np.zeros(n)
    class_of_sample = np.zeros(n, dtype=np.int64)
    lo, hi = cfg.segment_frames
    pos = 0
    while pos < n:
        seg_frames = int(rng.integers(lo, hi + 1))
        k = int(rng.integers(cfg.num_classes))
        seg_len = min(seg_frames * fcfg.frame_shift, n - pos)
        samples[pos : pos + seg_len] = _segment(k, seg_len, cfg, rng)
        class_of_sample[pos : pos + seg_len] = k
        pos += seg_len
    rms = math.sqrt(float(np.mean(samples**2)))
    if rms > 0:
        samples *= _TARGET_RMS / rms
    t = features.num_frames(n, fcfg)
    centers = np.arange(t) * fcfg.frame_shift + fcfg.frame_len // 2
    return Waveform(samples, cfg.sample_rate), class_of_sample[centers]


def synth_rir(t60: float, duration: float, sample_rate: int, rng_seed,
              direct_to_reverb: float = 1.0) -> Rir:
    """Unit direct path followed by an exponentially-shaped Gaussian tail.

    The tail is scaled so direct-to-reverberant energy ratio equals
    `direct_to_reverb`.
    """
    if t60 <= 0:
        raise InvalidInputError("t60 must be positive")
    if duration < t60 / 2:
        raise InvalidInputError("rir duration must be at least t60/2")
    rng = np.random.default_rng(rng_seed)
    n = max(2, round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    with np.errstate(under="ignore"):
        envelope = np.exp(-DECAY_LN * t / t60)
    taps = rng.standard_normal(n) * envelope
    taps[0] = 0.0
    tail_energy = float(np.sum(taps**2))
    if tail_energy > 0:
        taps *= 1.0 / math.sqrt(direct_to_reverb * tail_energy)
    taps[0] = 1.0
    return Rir(taps=taps, sample_rate=sample_rate, t60=t60)


def gen_noise(kind: str, n: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-scale noise; `babble` is band-limited and amplitude-modulated."""
    if kind == "white":
        return rng.standard_normal(n)
    if kind == "babble":
        sos = scipy.signal.butter(
            4, [100.0, min(4000.0, 0.45 * sample_rate)], btype="bandpass",
            fs=sample_rate, output="sos",
        )
        shaped = scipy.signal.sosfilt(sos, rng.standard_normal(n))
        period = rng.uniform(0.5, 2.0)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        t = np.arange(n) / sample_rate
        return shaped * (1.0 + 0.8 * np.sin(2.0 * math.pi * t / period + phase))
    raise InvalidInputError(f"unknown noise kind {kind!r}")


def mix_at_snr(signal: np.ndarray, noise: np.ndarray, snr_db: float) -> tuple[np.ndarray, float]:
    """Return signal + alpha * noise with utterance-wide SNR = snr_db.

    snr_db = +inf disables the noise (alpha = 0).
    """
    p_signal = float(np.mean(np.asarray(signal, dtype=np.float64) ** 2))
    if p_signal == 0.0:
        raise InvalidInputError("zero-power signal")
    if math.isinf(snr_db) and snr_db > 0:
        return np.array(signal, dtype=np.float64), 0.0
    p_noise = float(np.mean(np.asarray(noise, dtype=np.float64) ** 2))
    if p_noise == 0.0:
        raise InvalidInputError("zero-power noise")
    alpha = math.sqrt(p_signal / (p_noise * 10.0 ** (snr_db / 10.0)))
    return signal + alpha * noise, alpha


def contaminate(clean: Waveform, rir: Rir, cfg: ContaminationConfig, rng_seed) -> Waveform:
    """Reverberate and add noise; output is truncated to the clean length."""
    if clean.sample_rate != rir.sample_rate:
        raise InvalidInputError("sample rates of waveform and impulse response differ")
    if float(np.mean(clean.samples**2)) == 0.0:
        raise InvalidInputError("zero-power clean input")
    reverberant = scipy.signal.fftconvolve(clean.samples, rir.taps)[: clean.samples.size]
    # noise is drawn regardless of snr so outputs with the same seed differ
    # only by the mixing step
    noise = gen_noise(cfg.noise_kind, reverberant.size, clean.sample_rate,
                      np.random.default_rng(rng_seed))
    if math.isinf(cfg.snr_db) and cfg.snr_db > 0:
        return Waveform(reverberant, clean.sample_rate)
    mixed, _ = mix_at_snr(reverberant, noise, cfg.snr_db)
    return Waveform(mixed, clean.sample_rate)


def utterance_seed(base_seed: int, split: str, index: int) -> np.random.SeedSequence:
    """Per-utterance seed stream, independent of generation order."""
    return np.random.SeedSequence([base_seed, SPLITS.index(split), index])


def corpus_config_sections(cfg: CorpusConfig) -> dict:
    return {
        "data": {
            "num_classes": cfg.synth.num_classes,
            "utterance_seconds": cfg.synth.utterance_seconds,
            "segment_min_frames": cfg.synth.segment_frames[0],
            "segment_max_frames": cfg.synth.segment_frames[1],
            "sample_rate": cfg.synth.sample_rate,
            "t60": cfg.contamination.t60,
            "snr_db": cfg.contamination.snr_db,
            "noise_kind": cfg.contamination.noise_kind,
            "direct_to_reverb": cfg.contamination.direct_to_reverb,
            "rir_seconds": "" if cfg.contamination.rir_seconds is None
                           else cfg.contamination.rir_seconds,
            "num_train": cfg.num_train,
            "num_dev": cfg.num_dev,
            "num_test": cfg.num_test,
            "seed": cfg.seed,
        }
    }


def corpus_config_from_sections(sections: dict) -> CorpusConfig:
    d = sections["data"]
    rir_seconds = d.get("rir_seconds", "")
    return CorpusConfig(
        synth=SynthConfig(
            num_classes=int(d["num_classes"]),
            utterance_seconds=float(d["utterance_seconds"]),
            segment_frames=(int(d["segment_min_frames"]), int(d["segment_max_frames"])),
            sample_rate=int(d["sample_rate"]),
        ),
        contamination=ContaminationConfig(
            t60=float(d["t60"]),
            snr_db=float(d["snr_db"]),
            noise_kind=d["noise_kind"],
            direct_to_reverb=float(d["direct_to_reverb"]),
            rir_seconds=None if rir_seconds in ("", "none") else float(rir_seconds),
        ),
        num_train=int(d["num_train"]),
        num_dev=int(d["num_dev"]),
        num_test=int(d["num_test"]),
        seed=int(d["seed"]),
    )


def gen_corpus(cfg: CorpusConfig, out_dir, write_waveforms: bool = True) -> dict:
    """Write waveforms, labels, features, manifests, and the config snapshot.

    Returns split -> manifest path. Each utterance derives its own RNG
    streams from (seed, split, index), so output is independent of
    generation order.
    """
    from . import config as configio

    out = Path(out_dir)
    for sub in ("waves", "feats", "labels"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    ccfg = cfg.contamination
    rir_seconds = ccfg.rir_seconds if ccfg.rir_seconds is not None else 1.5 * ccfg.t60
    fcfg = FeatureConfig(sample_rate=cfg.synth.sample_rate)
    counts = {"train": cfg.num_train, "dev": cfg.num_dev, "test": cfg.num_test}
    manifests = {}
    for split in SPLITS:
        entries = []
        for i in range(counts[split]):
            utt = f"{split}_{i:06d}"
            synth_ss, rir_ss, noise_ss = utterance_seed(cfg.seed, split, i).spawn(3)
            clean, labels = synth_clean_utterance(cfg.synth, synth_ss)
            rir = synth_rir(ccfg.t60, rir_seconds, cfg.synth.sample_rate, rir_ss,
                            ccfg.direct_to_reverb)
            noisy = contaminate(clean, rir, ccfg, noise_ss)
            # features are computed from the float32 samples that land on disk
            clean32 = clean.samples.astype(np.float32)
            noisy32 = noisy.samples.astype(np.float32)
            if write_waveforms:
                fileio.write_wave_file(out / "waves" / f"{utt}.clean.wave", clean32,
                                       cfg.synth.sample_rate)
                fileio.write_wave_file(out / "waves" / f"{utt}.noisy.wave", noisy32,
                                       cfg.synth.sample_rate)
            noisy_feat = features.extract_mfcc(
                Waveform(noisy32.astype(np.float64), cfg.synth.sample_rate), fcfg)
            clean_feat = features.extract_mfcc(
                Waveform(clean32.astype(np.float64), cfg.synth.sample_rate), fcfg)
            assert len(noisy_feat) == labels.size
            noisy_path = out / "feats" / f"{utt}.noisy.feat"
            clean_path = out / "feats" / f"{utt}.clean.feat"
            label_path = out / "labels" / f"{utt}.labels"
            fileio.write_feature_file(noisy_path, noisy_feat.frames)
            fileio.write_feature_file(clean_path, clean_feat.frames)
            fileio.write_label_file(label_path, labels)
            entries.append(features.ManifestEntry(utt, noisy_path, clean_path, label_path))
        manifest_path = out / f"manifest_{split}.txt"
        features.write_manifest(manifest_path, entries)
        manifests[split] = manifest_path
    configio.write_config(out / "data_config.cfg", corpus_config_sections(cfg))
    return manifests
