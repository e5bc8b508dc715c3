"""Zero-shot logits, prompt scoring, and prompt ensembles.

The core idea: a prompt that yields confident predictions over the
unlabeled evaluation set deserves more weight. Each prompt's text bank is
scored by the dataset-wide sum of per-sample max class cosines, scores are
softmax-normalized into weights, and the banks are averaged under those
weights. Scoring is transductive: it reads the whole unlabeled set, never
the labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NotNormalized
from .tensorio import l2_normalize_rows

NORM_TOLERANCE = 1e-3


@dataclass(frozen=True)
class PromptWeights:
    """Per-prompt scores and softmax weights, keyed by prompt id."""

    prompt_ids: tuple[str, ...]
    scores: tuple[float, ...]
    weights: tuple[float, ...]
    temperature: float = 1.0

    def __post_init__(self) -> None:
        n = len(self.prompt_ids)
        if len(self.scores) != n or len(self.weights) != n:
            raise DimensionMismatch("prompt_ids, scores, and weights must have equal length")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-6:
            raise ValueError(f"weights must sum to 1, got {sum(self.weights)}")

    def as_records(self) -> list[dict]:
        """Export rows sorted by descending weight (stable on ties)."""
        rows = [
            {"prompt_id": pid, "score": score, "weight": weight}
            for pid, score, weight in zip(self.prompt_ids, self.scores, self.weights)
        ]
        rows.sort(key=lambda r: -r["weight"])
        return rows


def export_weights(weights: PromptWeights, path: str | Path) -> None:
    """Write the sorted weights export JSON."""
    Path(path).write_text(json.dumps(weights.as_records(), indent=2) + "\n", encoding="utf-8")


def _check_unit_rows(arr: np.ndarray, name: str) -> None:
    # All-zero rows are tolerated as a documented degenerate case (padding).
    norms = np.linalg.norm(arr.astype(np.float64, copy=False), axis=1)
    bad = ~((np.abs(norms - 1.0) <= NORM_TOLERANCE) | (norms <= NORM_TOLERANCE))
    if np.any(bad):
        worst = float(norms[bad][0])
        raise NotNormalized(f"{name} rows must be unit-norm (or all-zero); found norm {worst:.6f}")


def compute_logits(audio: np.ndarray, text: np.ndarray) -> np.ndarray:
    """Cosine logits: entry (i, j) is dot(audio_i, text_j).

    Both operands must carry unit (or all-zero) rows; normalization is the
    caller's duty and is checked to 1e-3. Returns float64.
    """
    audio = np.asarray(audio)
    text = np.asarray(text)
    if audio.ndim != 2 or text.ndim != 2:
        raise DimensionMismatch("audio and text must be 2-D")
    if audio.shape[1] != text.shape[1]:
        raise DimensionMismatch(f"audio dim {audio.shape[1]} != text dim {text.shape[1]}")
    _check_unit_rows(audio, "audio")
    _check_unit_rows(text, "text")
    return audio.astype(np.float64) @ text.astype(np.float64).T


def prompt_score(logits: np.ndarray) -> float:
    """Sum over samples of the max class logit, accumulated in float64."""
    logits = np.asarray(logits)
    if logits.ndim != 2 or logits.shape[0] < 1:
        raise DimensionMismatch("logits must be 2-D with at least one sample row")
    return float(np.max(logits, axis=1).sum(dtype=np.float64))


def softmax(scores: Sequence[float] | np.ndarray) -> np.ndarray:
    """Numerically stable softmax in float64 (shift-invariant by construction)."""
    x = np.asarray(scores, dtype=np.float64)
    e = np.exp(x - x.max())
    return e / e.sum()


def _check_banks(text_banks: Sequence[np.ndarray]) -> tuple[int, int]:
    if len(text_banks) < 1:
        raise DimensionMismatch("need at least one text bank")
    shape = np.asarray(text_banks[0]).shape
    for i, bank in enumerate(text_banks):
        b = np.asarray(bank)
        if b.ndim != 2 or b.shape != shape:
            raise DimensionMismatch(f"text bank {i} has shape {b.shape}, expected {shape}")
    return shape


def weighted_prompt_ensemble(
    text_banks: Sequence[np.ndarray],
    audio: np.ndarray,
    temperature: float = 1.0,
    prompt_ids: Sequence[str] | None = None,
) -> tuple[PromptWeights, np.ndarray]:
    """Score each prompt against the pooled audio, then average the banks.

    Per prompt p: score_p = sum over samples of max_j dot(audio_i, bank_p_j).
    Weights are softmax(score / temperature); the ensembled bank is the
    weighted sum of banks, accumulated in float64 and re-normalized per row.

    ``temperature`` is an explicit knob: at the default 1.0 the raw
    dataset-wide sums feed softmax directly, which saturates toward one-hot
    as the sample count grows; larger values flatten the weights.
    """
    if temperature <= 0 or not np.isfinite(temperature):
        raise ValueError(f"temperature must be a positive finite float, got {temperature}")
    m, d = _check_banks(text_banks)
    audio = np.asarray(audio)
    if audio.ndim != 2 or audio.shape[0] < 1:
        raise DimensionMismatch("audio must be a non-empty 2-D matrix")
    if audio.shape[1] != d:
        raise DimensionMismatch(f"audio dim {audio.shape[1]} != bank dim {d}")

    n = len(text_banks)
    ids = tuple(prompt_ids) if prompt_ids is not None else tuple(f"prompt{i}" for i in range(n))
    if len(ids) != n:
        raise DimensionMismatch(f"{len(ids)} prompt ids for {n} banks")

    scores = np.empty(n, dtype=np.float64)
    for p, bank in enumerate(text_banks):
        scores[p] = prompt_score(compute_logits(audio, bank))
    weights = softmax(scores / temperature)

    mixed = np.zeros((m, d), dtype=np.float64)
    for w, bank in zip(weights, text_banks):
        mixed += w * np.asarray(bank, dtype=np.float64)
    ensembled = l2_normalize_rows(mixed).astype(np.float32)

    pw = PromptWeights(
        prompt_ids=ids,
        scores=tuple(float(s) for s in scores),
        weights=tuple(float(w) for w in weights),
        temperature=temperature,
    )
    return pw, ensembled


def uniform_prompt_ensemble(text_banks: Sequence[np.ndarray]) -> np.ndarray:
    """Unweighted mean of the banks per class row, re-normalized.

    Opposing rows can cancel to zero; such rows are preserved and reported
    through the zero-row warning channel.
    """
    m, d = _check_banks(text_banks)
    mixed = np.zeros((m, d), dtype=np.float64)
    for bank in text_banks:
        mixed += np.asarray(bank, dtype=np.float64)
    mixed /= len(text_banks)
    return l2_normalize_rows(mixed).astype(np.float32)


class StreamingPromptScorer:
    """Incremental prompt scoring over blocks of pooled audio rows.

    Feeding the full matrix in one block reproduces
    :func:`weighted_prompt_ensemble` exactly; block-wise feeding matches it
    within float64 re-association error. The batch result stays canonical.
    """

    def __init__(self, text_banks: Sequence[np.ndarray], prompt_ids: Sequence[str] | None = None):
        _check_banks(text_banks)
        self._banks = [np.asarray(b) for b in text_banks]
        self._ids = prompt_ids
        self._sums = np.zeros(len(text_banks), dtype=np.float64)
        self._n_rows = 0

    def update(self, audio_block: np.ndarray) -> None:
        block = np.asarray(audio_block)
        for p, bank in enumerate(self._banks):
            self._sums[p] += prompt_score(compute_logits(block, bank))
        self._n_rows += block.shape[0]

    def finalize(self, temperature: float = 1.0) -> tuple[PromptWeights, np.ndarray]:
        if self._n_rows < 1:
            raise DimensionMismatch("no audio rows were accumulated")
        if temperature <= 0 or not np.isfinite(temperature):
            raise ValueError(f"temperature must be a positive finite float, got {temperature}")
        n = len(self._banks)
        ids = tuple(self._ids) if self._ids is not None else tuple(f"prompt{i}" for i in range(n))
        weights = softmax(self._sums / temperature)
        m, d = self._banks[0].shape
        mixed = np.zeros((m, d), dtype=np.float64)
        for w, bank in zip(weights, self._banks):
            mixed += w * bank.astype(np.float64)
        ensembled = l2_normalize_rows(mixed).astype(np.float32)
        pw = PromptWeights(
            prompt_ids=ids,
            scores=tuple(float(s) for s in self._sums),
            weights=tuple(float(w) for w in weights),
            temperature=temperature,
        )
        return pw, ensembled
