"""Parameter-free cross-modal alignment between frames and class texts.

A frame-by-class cosine map drives two softmax mixtures: frames are
re-expressed as convex combinations of class embeddings (audio-guided),
and class embeddings as convex combinations of frames (text-guided). The
resulting logits are mixed into the plain cosine logits under two scalar
weights, one per guided term. Everything is training-free: the attention
map is just the cosine grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .tensorio import l2_normalize_rows


@dataclass(frozen=True)
class BetaPair:
    """Mixing weights for the audio-guided and text-guided logit terms."""

    beta_audio: float
    beta_text: float

    def __post_init__(self) -> None:
        for name, value in (("beta_audio", self.beta_audio), ("beta_text", self.beta_text)):
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value}")


def row_softmax(matrix: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis of each row, in float64.

    Every output row sums to 1 and is strictly positive; an all-zero input
    row maps to the uniform distribution.
    """
    x = np.asarray(matrix, dtype=np.float64)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def attention_map(frames: np.ndarray, text_bank: np.ndarray) -> np.ndarray:
    """Frame-by-class cosine grid: entry (i, j) is dot(frame_i, class_j)."""
    frames = np.asarray(frames)
    text_bank = np.asarray(text_bank)
    if frames.ndim != 2 or text_bank.ndim != 2:
        raise DimensionMismatch("frames and text bank must be 2-D")
    if frames.shape[1] != text_bank.shape[1]:
        raise DimensionMismatch(f"frame dim {frames.shape[1]} != text dim {text_bank.shape[1]}")
    return frames.astype(np.float64) @ text_bank.astype(np.float64).T


def audio_guided(attn: np.ndarray, text_bank: np.ndarray) -> np.ndarray:
    """Pooled audio-guided embedding, shape (1, d).

    Each frame becomes a softmax-over-classes mixture of class embeddings;
    the mixtures are mean-pooled over frames and re-normalized.
    """
    attn = np.asarray(attn)
    text_bank = np.asarray(text_bank)
    if attn.ndim != 2 or attn.shape[1] != text_bank.shape[0]:
        raise DimensionMismatch(f"attention has {attn.shape[1]} classes, bank has {text_bank.shape[0]} rows")
    mixed = row_softmax(attn) @ text_bank.astype(np.float64)  # (c, d)
    pooled = mixed.mean(axis=0, keepdims=True)
    return l2_normalize_rows(pooled, warn=False).astype(np.float32)


def text_guided(attn: np.ndarray, frames: np.ndarray) -> np.ndarray:
    """Text-guided class embeddings, shape (M, d).

    Each class becomes a softmax-over-frames mixture of frame embeddings,
    re-normalized per row.
    """
    attn = np.asarray(attn)
    frames = np.asarray(frames)
    if attn.ndim != 2 or attn.shape[0] != frames.shape[0]:
        raise DimensionMismatch(f"attention has {attn.shape[0]} frames, frame tensor has {frames.shape[0]} rows")
    mixed = row_softmax(attn.T) @ frames.astype(np.float64)  # (M, d)
    return l2_normalize_rows(mixed, warn=False).astype(np.float32)


def combined_logits(
    audio_pooled: np.ndarray,
    text_bank: np.ndarray,
    audio_guided_emb: np.ndarray,
    text_guided_bank: np.ndarray,
    betas: BetaPair,
) -> np.ndarray:
    """Mix plain, audio-guided, and text-guided cosine logits.

    logits = audio.bank^T + beta_audio * (guided_audio.bank^T)
                          + beta_text  * (audio.guided_bank^T)

    With both betas zero this is bit-equal to the plain logits.
    """
    a = np.asarray(audio_pooled, dtype=np.float64)
    bank = np.asarray(text_bank, dtype=np.float64)
    a_g = np.asarray(audio_guided_emb, dtype=np.float64)
    t_g = np.asarray(text_guided_bank, dtype=np.float64)
    if a.shape != a_g.shape:
        raise DimensionMismatch(f"pooled audio {a.shape} vs audio-guided {a_g.shape}")
    if bank.shape != t_g.shape:
        raise DimensionMismatch(f"text bank {bank.shape} vs text-guided {t_g.shape}")
    if a.shape[1] != bank.shape[1]:
        raise DimensionMismatch(f"audio dim {a.shape[1]} != text dim {bank.shape[1]}")
    return a @ bank.T + betas.beta_audio * (a_g @ bank.T) + betas.beta_text * (a @ t_g.T)


def pool_frames(frames: np.ndarray) -> np.ndarray:
    """Mean-pool frame rows to a (1, d) embedding and re-normalize."""
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise DimensionMismatch("frames must be 2-D with at least one row")
    pooled = frames.astype(np.float64).mean(axis=0, keepdims=True)
    return l2_normalize_rows(pooled, warn=False).astype(np.float32)


def classify_sample(
    frames: np.ndarray,
    text_bank: np.ndarray,
    betas: BetaPair,
) -> tuple[np.ndarray, int]:
    """Full per-sample pipeline from raw frames to combined logits.

    Frame rows and bank rows are re-normalized here (idempotent when the
    caller already normalized, and what makes the result invariant to any
    positive rescaling of the raw inputs). All-zero padding rows pass
    through silently. Returns the (1, M) logits and the argmax class;
    ties resolve to the earliest index.
    """
    frames_u = l2_normalize_rows(np.asarray(frames), warn=False)
    if frames_u.ndim != 2 or frames_u.shape[0] < 1:
        raise DimensionMismatch("frames must be 2-D with at least one row")
    bank_u = l2_normalize_rows(np.asarray(text_bank), warn=False)
    if bank_u.ndim != 2 or frames_u.shape[1] != bank_u.shape[1]:
        raise DimensionMismatch("frame and text dims differ")

    pooled = pool_frames(frames_u)
    attn = attention_map(frames_u, bank_u)
    a_guided = audio_guided(attn, bank_u)
    t_guided = text_guided(attn, frames_u)
    logits = combined_logits(pooled, bank_u, a_guided, t_guided, betas)
    return logits, int(np.argmax(logits[0]))
