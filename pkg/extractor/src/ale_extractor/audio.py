"""WAV decoding to mono float32, stdlib-only."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np


class DecodeError(Exception):
    """The audio file could not be decoded."""


_WIDTH_DTYPES = {1: np.uint8, 2: np.int16, 4: np.int32}


def load_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Decode a PCM WAV file to mono float32 in [-1, 1].

    Returns (samples, sample_rate). Multi-channel audio is downmixed by
    averaging channels. 8-bit (unsigned), 16-bit, and 32-bit PCM are
    supported.
    """
    try:
        with wave.open(str(path), "rb") as wav:
            n_channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            n_frames = wav.getnframes()
            raw = wav.readframes(n_frames)
    except (wave.Error, EOFError, OSError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc

    if width not in _WIDTH_DTYPES:
        raise DecodeError(f"{path}: unsupported sample width {width}")
    if n_frames == 0:
        raise DecodeError(f"{path}: empty audio stream")

    data = np.frombuffer(raw, dtype=_WIDTH_DTYPES[width]).astype(np.float32)
    if width == 1:
        data = (data - 128.0) / 128.0
    else:
        data = data / float(2 ** (8 * width - 1))
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    return data.astype(np.float32), rate
