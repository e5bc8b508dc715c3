"""Encoder backends that map audio/text into a shared embedding space.

Two families are registered:

- ``offline-toy-<dim>`` (and ``offline-toy-<dim>-pooled``): deterministic,
  dependency-free encoders for pipeline tests and dry runs. Audio frames
  are windowed spectral summaries pushed through a fixed random
  projection; text is hashed into a unit vector. The ``-pooled`` variant
  mimics checkpoints that expose only a clip-level vector: it emits a
  single frame and is flagged, which makes downstream frame attention
  degenerate but well defined.
- ``laion/clap-*``: real dual-encoder checkpoints via transformers/torch
  (install the ``clap`` extra). Frame-level output is the audio tower's
  last hidden state pushed through the model's projection, i.e. the
  representation just before the model's own pooling.

Embeddings are emitted unnormalized; the consumer normalizes at load.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .audio import load_wav


class UnsupportedModel(Exception):
    """model_id is not in the supported set."""


class OfflineToyEncoder:
    """Deterministic spectral-summary encoder, one frame per second of audio."""

    WINDOW_SECONDS = 1.0
    N_FEATURES = 24

    def __init__(self, model_id: str, dim: int, pooled_only: bool = False):
        self.model_id = model_id
        self.dim = dim
        self.pooled_only = pooled_only
        projection_rng = np.random.default_rng(dim * 7919 + 17)
        self._projection = projection_rng.normal(size=(self.N_FEATURES, dim)).astype(np.float64)

    def _window_features(self, window: np.ndarray, sample_rate: int) -> np.ndarray:
        spectrum = np.abs(np.fft.rfft(window, n=2048))
        bands = np.array_split(spectrum, self.N_FEATURES - 4)
        feats = [float(b.mean()) for b in bands]
        crossings = float(np.mean(np.abs(np.diff(np.signbit(window).astype(np.float64)))))
        feats += [float(window.mean()), float(window.std()), float(np.abs(window).max()), crossings]
        return np.asarray(feats, dtype=np.float64)

    def encode_audio_frames(self, samples: np.ndarray, sample_rate: int) -> np.ndarray:
        window = max(1, int(self.WINDOW_SECONDS * sample_rate))
        chunks = [samples[i : i + window] for i in range(0, len(samples), window)]
        chunks = [c for c in chunks if len(c) > 0] or [samples]
        frames = np.vstack([self._window_features(c, sample_rate) @ self._projection for c in chunks])
        if self.pooled_only:
            frames = frames.mean(axis=0, keepdims=True)
        return frames.astype(np.float32)

    def encode_text(self, texts: list[str]) -> np.ndarray:
        rows = []
        for text in texts:
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            vec = rng.normal(size=self.dim)
            rows.append(vec / np.linalg.norm(vec))
        return np.asarray(rows, dtype=np.float32)


class LaionClapEncoder:
    """CLAP checkpoints through transformers; requires the ``clap`` extra and
    a local or downloadable checkpoint."""

    SAMPLE_RATE = 48_000

    def __init__(self, model_id: str):
        try:
            import torch  # noqa: F401
            from transformers import ClapModel, ClapProcessor
        except ImportError as exc:
            raise UnsupportedModel(
                f"{model_id}: install the 'clap' extra (torch + transformers) to use CLAP checkpoints"
            ) from exc
        self.model_id = model_id
        self.pooled_only = False
        self._torch = __import__("torch")
        self._model = ClapModel.from_pretrained(model_id).eval()
        self._processor = ClapProcessor.from_pretrained(model_id)
        self.dim = int(self._model.config.projection_dim)

    def _resample(self, samples: np.ndarray, sample_rate: int) -> np.ndarray:
        if sample_rate == self.SAMPLE_RATE:
            return samples
        positions = np.arange(0, len(samples), sample_rate / self.SAMPLE_RATE)
        return np.interp(positions, np.arange(len(samples)), samples).astype(np.float32)

    def encode_audio_frames(self, samples: np.ndarray, sample_rate: int) -> np.ndarray:
        torch = self._torch
        audio = self._resample(samples, sample_rate)
        inputs = self._processor(audios=audio, sampling_rate=self.SAMPLE_RATE, return_tensors="pt")
        with torch.no_grad():
            tower = self._model.audio_model(input_features=inputs["input_features"])
            hidden = tower.last_hidden_state  # (1, seq, hidden)
            if hidden.ndim == 4:  # some towers emit (1, hidden, h, w)
                hidden = hidden.flatten(2).transpose(1, 2)
            frames = self._model.audio_projection(hidden)[0]
        return frames.cpu().numpy().astype(np.float32)

    def encode_text(self, texts: list[str]) -> np.ndarray:
        torch = self._torch
        inputs = self._processor(text=texts, return_tensors="pt", padding=True)
        with torch.no_grad():
            embeds = self._model.get_text_features(**inputs)
        return embeds.cpu().numpy().astype(np.float32)


_CLAP_MODELS = (
    "laion/clap-htsat-unfused",
    "laion/clap-htsat-fused",
    "laion/larger_clap_general",
    "laion/larger_clap_music",
)

_OFFLINE_DIMS = (32, 64, 128)


def supported_models() -> list[str]:
    names = []
    for dim in _OFFLINE_DIMS:
        names.append(f"offline-toy-{dim}")
        names.append(f"offline-toy-{dim}-pooled")
    names.extend(_CLAP_MODELS)
    return names


def load_encoder(model_id: str):
    for dim in _OFFLINE_DIMS:
        if model_id == f"offline-toy-{dim}":
            return OfflineToyEncoder(model_id, dim)
        if model_id == f"offline-toy-{dim}-pooled":
            return OfflineToyEncoder(model_id, dim, pooled_only=True)
    if model_id in _CLAP_MODELS:
        return LaionClapEncoder(model_id)
    raise UnsupportedModel(f"unknown model {model_id!r}; supported: {', '.join(supported_models())}")


def encode_wav_file(encoder, path) -> np.ndarray:
    samples, rate = load_wav(path)
    return encoder.encode_audio_frames(samples, rate)
