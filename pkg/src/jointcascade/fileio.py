"""Binary containers and atomic file writes.

Feature and waveform files share a 16-byte header layout:
6-byte magic, uint16 format version, then two uint32 fields
(rows/cols for features, samples/sample-rate for waveforms),
all little-endian, followed by row-major float32 payload.
"""

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

FEATURE_MAGIC = b"JCFEAT"
WAVE_MAGIC = b"JCWAVE"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<6sHII")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_feature_file(path, frames: np.ndarray) -> None:
    frames = np.ascontiguousarray(frames, dtype="<f4")
    if frames.ndim != 2:
        raise InvalidInputError("feature matrix must be 2-D")
    header = _HEADER.pack(FEATURE_MAGIC, FORMAT_VERSION, frames.shape[0], frames.shape[1])
    atomic_write_bytes(path, header + frames.tobytes())


def read_feature_file(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise InvalidInputError(f"{path}: truncated feature file")
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != FEATURE_MAGIC:
        raise InvalidInputError(f"{path}: not a feature file")
    if version != FORMAT_VERSION:
        raise InvalidInputError(f"{path}: unsupported feature format version {version}")
    flat = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    if flat.size != rows * cols:
        raise InvalidInputError(f"{path}: payload size does not match header")
    return flat.reshape(rows, cols).copy()


def write_wave_file(path, samples: np.ndarray, sample_rate: int) -> None:
    samples = np.ascontiguousarray(samples, dtype="<f4")
    if samples.ndim != 1:
        raise InvalidInputError("waveform must be mono (1-D)")
    header = _HEADER.pack(WAVE_MAGIC, FORMAT_VERSION, samples.size, sample_rate)
    atomic_write_bytes(path, header + samples.tobytes())


def read_wave_file(path) -> tuple[np.ndarray, int]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise InvalidInputError(f"{path}: truncated waveform file")
    magic, version, n, sample_rate = _HEADER.unpack_from(data)
    if magic != WAVE_MAGIC:
        raise InvalidInputError(f"{path}: not a waveform file")
    if version != FORMAT_VERSION:
        raise InvalidInputError(f"{path}: unsupported waveform format version {version}")
    flat = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    if flat.size != n:
        raise InvalidInputError(f"{path}: payload size does not match header")
    return flat.copy(), int(sample_rate)


def write_label_file(path, labels) -> None:
    labels = np.asarray(labels)
    atomic_write_text(path, "\n".join(str(int(v)) for v in labels) + "\n")


def read_label_file(path) -> np.ndarray:
    lines = Path(path).read_text().split()
    try:
        return np.array([int(v) for v in lines], dtype=np.int64)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: malformed label file") from exc
