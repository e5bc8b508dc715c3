import json
import wave
from pathlib import Path

import numpy as np
import pytest


def write_wav(path: Path, samples: np.ndarray, sample_rate: int = 16000, channels: int = 1) -> Path:
    data = np.clip(samples, -1.0, 1.0)
    pcm = (data * 32767.0).astype("<i2")
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(channels)
        wav.setsampwidth(2)
        wav.setframerate(sample_rate)
        wav.writeframes(pcm.tobytes())
    return path


def sine(freq: float, duration: float = 1.0, sample_rate: int = 16000, amp: float = 0.5) -> np.ndarray:
    t = np.arange(int(duration * sample_rate)) / sample_rate
    return (amp * np.sin(2 * np.pi * freq * t)).astype(np.float32)


@pytest.fixture
def rng():
    return np.random.default_rng(99)


@pytest.fixture
def audio_dataset(tmp_path):
    """Two-class toy dataset: low-frequency vs high-frequency tones."""
    root = tmp_path / "dataset"
    samples = []
    for i, freq in enumerate([220.0, 240.0, 2000.0, 2200.0]):
        rel = f"wavs/s{i}.wav"
        write_wav(root / rel, sine(freq, duration=2.0))
        samples.append({"id": f"s{i}", "truth": 0 if freq < 1000 else 1, "audio": rel})
    manifest = {
        "dataset_name": "tones",
        "task": "single_label",
        "labels": ["low tone", "high tone"],
        "samples": samples,
    }
    path = root / "audio_manifest.json"
    path.write_text(json.dumps(manifest), encoding="utf-8")
    return path


@pytest.fixture
def prompt_store(tmp_path):
    path = tmp_path / "store.json"
    path.write_text(
        json.dumps(
            [
                {"id": "p1", "template": "The sound of <label>"},
                {"id": "p2", "template": "A loud sound of a <label>"},
            ]
        ),
        encoding="utf-8",
    )
    return path
