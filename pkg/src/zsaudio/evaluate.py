"""Dataset-level evaluation: accuracy, macro mAP, method ablations, beta grids.

Methods
-------
zs      first prompt only, plain cosine logits
pe      uniform prompt ensemble, plain logits
wpe     weighted prompt ensemble, plain logits
pe+cma  uniform ensemble plus cross-modal alignment
pat     weighted ensemble plus cross-modal alignment

The whole pipeline is deterministic, so one run is one result; reports
note this explicitly because published protocols sometimes average over
repeated runs. Tie-breaking is everywhere by earliest index.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .cma import BetaPair, classify_sample, pool_frames
from .datastore import PromptDatastore
from .errors import (
    ConfigError,
    DimensionMismatch,
    LengthMismatch,
    MetricMismatch,
    MissingEmbedding,
    NoPositives,
    TaskMismatch,
)
from .scoring import (
    PromptWeights,
    compute_logits,
    export_weights,
    uniform_prompt_ensemble,
    weighted_prompt_ensemble,
)
from .tensorio import TASK_MULTI, TASK_SINGLE, DatasetManifest, l2_normalize_rows, read_tensor

METHODS = ("zs", "pe", "wpe", "pe+cma", "pat")

METRIC_ACCURACY = "accuracy"
METRIC_MAP = "mAP"

DETERMINISM_NOTE = "single deterministic run (no repeated-run averaging)"


class SkippedClassWarning(UserWarning):
    """A class with zero positives was skipped during mAP."""


@dataclass(frozen=True)
class EvaluationReport:
    """One evaluated condition: dataset, method, metric value in percent."""

    dataset_name: str
    condition: str
    method: str
    metric_name: str
    value: float
    betas: BetaPair
    n_samples: int
    temperature: float = 1.0
    prompt_weights_ref: str | None = None
    tuned_on: str | None = None
    notes: str = DETERMINISM_NOTE

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 100.0:
            raise ValueError(f"metric value {self.value} outside [0, 100]")
        if self.n_samples < 1:
            raise ValueError("report needs at least one sample")

    def to_json_dict(self) -> dict:
        return {
            "dataset_name": self.dataset_name,
            "condition": self.condition,
            "method": self.method,
            "metric_name": self.metric_name,
            "value": self.value,
            "beta_audio": self.betas.beta_audio,
            "beta_text": self.betas.beta_text,
            "temperature": self.temperature,
            "n_samples": self.n_samples,
            "prompt_weights_ref": self.prompt_weights_ref,
            "tuned_on": self.tuned_on,
            "notes": self.notes,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "EvaluationReport":
        return cls(
            dataset_name=doc["dataset_name"],
            condition=doc["condition"],
            method=doc["method"],
            metric_name=doc["metric_name"],
            value=float(doc["value"]),
            betas=BetaPair(float(doc["beta_audio"]), float(doc["beta_text"])),
            n_samples=int(doc["n_samples"]),
            temperature=float(doc.get("temperature", 1.0)),
            prompt_weights_ref=doc.get("prompt_weights_ref"),
            tuned_on=doc.get("tuned_on"),
            notes=doc.get("notes", DETERMINISM_NOTE),
        )


@dataclass(frozen=True)
class BetaGrid:
    """Candidate (beta_audio, beta_text) pairs for tuning."""

    pairs: tuple[BetaPair, ...]

    def __post_init__(self) -> None:
        if not self.pairs:
            raise ConfigError("beta grid must be non-empty")
        seen = set()
        for pair in self.pairs:
            key = (pair.beta_audio, pair.beta_text)
            if key in seen:
                raise ConfigError(f"duplicate beta pair {key} in grid")
            seen.add(key)


@dataclass(frozen=True)
class GridSearchResult:
    best: BetaPair
    best_report: EvaluationReport
    reports: tuple[EvaluationReport, ...]


@dataclass(frozen=True)
class ComparisonDelta:
    """Signed percent-point difference between two reports."""

    dataset_name: str
    metric_name: str
    condition_baseline: str
    condition_treated: str
    method_baseline: str
    method_treated: str
    value_baseline: float
    value_treated: float

    @property
    def delta(self) -> float:
        return self.value_treated - self.value_baseline


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def accuracy(predictions: Sequence[int], manifest: DatasetManifest) -> float:
    """Fraction of correct single-label predictions, in percent."""
    if manifest.task != TASK_SINGLE:
        raise TaskMismatch(f"accuracy requires a {TASK_SINGLE} manifest, got {manifest.task}")
    if len(predictions) != len(manifest.samples):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(manifest.samples)} samples")
    if not manifest.samples:
        raise LengthMismatch("manifest has no samples")
    correct = sum(1 for pred, s in zip(predictions, manifest.samples) if pred == s.truth)
    return 100.0 * correct / len(manifest.samples)


def _average_precision(class_scores: np.ndarray, class_truth: np.ndarray) -> float:
    # Rank by descending score; stable sort keeps earlier samples first on ties.
    order = np.argsort(-class_scores, kind="stable")
    ranked_truth = class_truth[order]
    positive = ranked_truth == 1
    hits = np.cumsum(ranked_truth)
    ranks = np.arange(1, len(ranked_truth) + 1)
    precisions = hits[positive] / ranks[positive]
    # fsum gives the correctly rounded sum, independent of accumulation order.
    return math.fsum(precisions) / int(positive.sum())


def mean_average_precision(scores: np.ndarray, manifest: DatasetManifest) -> float:
    """Macro mAP in percent: per-class precision-at-positives, no interpolation.

    Classes with zero positives are skipped with a warning; if every class
    is empty the metric is undefined and an error is raised.
    """
    if manifest.task != TASK_MULTI:
        raise TaskMismatch(f"mAP requires a {TASK_MULTI} manifest, got {manifest.task}")
    scores = np.asarray(scores)
    n, m = len(manifest.samples), manifest.num_classes
    if scores.shape != (n, m):
        raise DimensionMismatch(f"score matrix {scores.shape} != ({n}, {m})")
    truth = np.array([s.truth for s in manifest.samples], dtype=np.int64)

    aps: list[float] = []
    for j in range(m):
        if truth[:, j].sum() == 0:
            warnings.warn(
                f"class {manifest.labels[j]!r} has no positives; skipped",
                SkippedClassWarning,
                stacklevel=2,
            )
            continue
        aps.append(_average_precision(scores[:, j], truth[:, j]))
    if not aps:
        raise NoPositives("every class has zero positives; mAP undefined")
    return 100.0 * (math.fsum(aps) / len(aps))


# ---------------------------------------------------------------------------
# Dataset evaluation
# ---------------------------------------------------------------------------


def _parallel_map(fn, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def load_sample_frames(
    manifest: DatasetManifest, embeddings_root: Path | None = None, threads: int = 1
) -> list[np.ndarray]:
    """Read and row-normalize every sample's frame tensor, in manifest order."""

    def load(sample):
        path = manifest.resolve_embedding(sample, embeddings_root)
        if not path.is_file():
            raise MissingEmbedding(f"sample {sample.id!r}: no embedding file at {path}")
        return l2_normalize_rows(read_tensor(path), warn=False)

    return _parallel_map(load, manifest.samples, threads)


def evaluate_dataset(
    manifest: DatasetManifest,
    datastore: PromptDatastore,
    text_banks: Sequence[np.ndarray],
    method: str,
    betas: BetaPair = BetaPair(0.0, 0.0),
    temperature: float = 1.0,
    threads: int = 1,
    embeddings_root: Path | None = None,
    weights_out: Path | None = None,
) -> EvaluationReport:
    """Evaluate one method over a manifest and return its report.

    ``text_banks`` must hold one (M, d) matrix per datastore prompt, in
    datastore order, rendered against the manifest's labels. Embedding
    refs resolve against ``embeddings_root`` or the manifest's own
    directory. Banks and frames are normalized here, once, at load.
    Sample-level work is parallelized over ``threads``; results are merged
    by index so the report is identical to a sequential run.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    if len(text_banks) != len(datastore.prompts):
        raise DimensionMismatch(f"{len(text_banks)} text banks for {len(datastore.prompts)} prompts")
    if not manifest.samples:
        raise LengthMismatch("manifest has no samples")
    m = manifest.num_classes
    banks = [l2_normalize_rows(np.asarray(b), warn=False) for b in text_banks]
    for i, bank in enumerate(banks):
        if bank.ndim != 2 or bank.shape[0] != m:
            raise DimensionMismatch(f"text bank {i} has {bank.shape[0]} rows, manifest has {m} labels")

    frames_per_sample = load_sample_frames(manifest, embeddings_root, threads)
    pooled = np.vstack([pool_frames(f) for f in frames_per_sample])

    weights: PromptWeights | None = None
    if method == "zs":
        bank = banks[0]
    elif method in ("pe", "pe+cma"):
        bank = uniform_prompt_ensemble(banks)
    else:  # wpe, pat
        weights, bank = weighted_prompt_ensemble(banks, pooled, temperature, prompt_ids=datastore.ids)

    use_cma = method in ("pe+cma", "pat")
    effective_betas = betas if use_cma else BetaPair(0.0, 0.0)

    if use_cma:
        rows = _parallel_map(
            lambda frames: classify_sample(frames, bank, effective_betas)[0][0],
            frames_per_sample,
            threads,
        )
        logit_matrix = np.vstack(rows)
    else:
        logit_matrix = compute_logits(pooled, bank)

    if manifest.task == TASK_SINGLE:
        predictions = [int(np.argmax(row)) for row in logit_matrix]
        metric_name, value = METRIC_ACCURACY, accuracy(predictions, manifest)
    else:
        metric_name, value = METRIC_MAP, mean_average_precision(logit_matrix, manifest)

    weights_ref = None
    if weights_out is not None and weights is not None:
        export_weights(weights, weights_out)
        weights_ref = str(weights_out)

    return EvaluationReport(
        dataset_name=manifest.dataset_name,
        condition=manifest.condition,
        method=method,
        metric_name=metric_name,
        value=value,
        betas=effective_betas,
        n_samples=len(manifest.samples),
        temperature=temperature,
        prompt_weights_ref=weights_ref,
    )


def grid_search_betas(
    manifest: DatasetManifest,
    datastore: PromptDatastore,
    text_banks: Sequence[np.ndarray],
    grid: BetaGrid,
    temperature: float = 1.0,
    threads: int = 1,
    embeddings_root: Path | None = None,
    split: str | None = None,
) -> GridSearchResult:
    """Evaluate the full alignment method at every grid pair; argmax wins.

    Ties break toward the earliest grid position. Each report is stamped
    with the data it was tuned on (``split`` if given, else the manifest's
    dataset/condition) so test-set tuning is at least visible.
    """
    tuned_on = split if split is not None else f"{manifest.dataset_name}/{manifest.condition}"

    # Grid points are independent; the worker budget parallelizes across
    # them (inner evaluations then run sequentially). Reports merge by
    # grid position, so the outcome is schedule-independent.
    def eval_pair(pair: BetaPair) -> EvaluationReport:
        report = evaluate_dataset(
            manifest,
            datastore,
            text_banks,
            method="pat",
            betas=pair,
            temperature=temperature,
            threads=1,
            embeddings_root=embeddings_root,
        )
        return replace(report, tuned_on=tuned_on)

    reports = _parallel_map(eval_pair, grid.pairs, threads)
    best_idx = 0
    for i, report in enumerate(reports):
        if report.value > reports[best_idx].value:
            best_idx = i
    return GridSearchResult(
        best=grid.pairs[best_idx],
        best_report=reports[best_idx],
        reports=tuple(reports),
    )


def compare_conditions(baseline: EvaluationReport, treated: EvaluationReport) -> ComparisonDelta:
    """Signed difference (treated - baseline) in percent points."""
    if baseline.metric_name != treated.metric_name:
        raise MetricMismatch(
            f"metric {baseline.metric_name!r} vs {treated.metric_name!r}: reports are not comparable"
        )
    if baseline.dataset_name != treated.dataset_name:
        raise MetricMismatch(
            f"dataset {baseline.dataset_name!r} vs {treated.dataset_name!r}: reports are not comparable"
        )
    return ComparisonDelta(
        dataset_name=baseline.dataset_name,
        metric_name=baseline.metric_name,
        condition_baseline=baseline.condition,
        condition_treated=treated.condition,
        method_baseline=baseline.method,
        method_treated=treated.method,
        value_baseline=baseline.value,
        value_treated=treated.value,
    )
