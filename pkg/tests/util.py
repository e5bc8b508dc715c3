"""Shared fixture builders for the harness tests.

The planted-error dataset is the workhorse: three two-class samples whose
pooled cosine picks the wrong class but whose text-guided logit repairs
them at increasing beta_text, plus one trivially correct sample. Flip
thresholds were charted against the naive reference: the outlier pull
fails at beta_text 0.25 / 1.5 / 2.0 for gamma 1.8 / 2.5 / 3.0.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from zsaudio import write_tensor
from zsaudio.tensorio import l2_normalize_rows


def unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return l2_normalize_rows(rng.normal(size=(n, d)).astype(np.float32))


def write_dataset(
    root: Path,
    labels: list[str],
    sample_frames: list[np.ndarray],
    truths: list,
    banks: list[np.ndarray],
    prompt_ids: list[str] | None = None,
    task: str = "single_label",
    dataset_name: str = "fixture",
    condition: str = "clean",
) -> dict:
    """Materialize manifest + embeddings + datastore + banks under ``root``."""
    emb_dir = root / "embeddings"
    emb_dir.mkdir(parents=True, exist_ok=True)
    samples = []
    for i, frames in enumerate(sample_frames):
        ref = f"embeddings/s{i}.pate"
        write_tensor(np.asarray(frames, dtype=np.float32), root / ref)
        truth = truths[i] if task == "single_label" else list(truths[i])
        samples.append({"id": f"s{i}", "truth": truth, "embedding_ref": ref})
    manifest_path = root / "manifest.json"
    manifest_path.write_text(
        json.dumps(
            {
                "dataset_name": dataset_name,
                "task": task,
                "labels": labels,
                "samples": samples,
                "condition": condition,
            }
        ),
        encoding="utf-8",
    )

    ids = prompt_ids or [f"p{k:03d}" for k in range(len(banks))]
    store_path = root / "datastore.json"
    store_path.write_text(
        json.dumps([{"id": pid, "template": f"variant {pid} sound of <label>"} for pid in ids]),
        encoding="utf-8",
    )
    banks_dir = root / "banks"
    banks_dir.mkdir(exist_ok=True)
    for pid, bank in zip(ids, banks):
        write_tensor(np.asarray(bank, dtype=np.float32), banks_dir / f"{pid}.pate")

    return {
        "manifest": manifest_path,
        "datastore": store_path,
        "banks_dir": banks_dir,
        "embeddings_dir": root,
        "prompt_ids": ids,
    }


def make_separable_dataset(
    root: Path,
    rng: np.random.Generator,
    n_samples: int = 12,
    n_classes: int = 3,
    n_prompts: int = 4,
    d: int = 16,
    frames: int = 3,
) -> dict:
    """Class-cluster embeddings: every method should score 100."""
    centers = unit_rows(rng, n_classes, d)
    sample_frames, truths = [], []
    for i in range(n_samples):
        truth = i % n_classes
        noise = 0.05 * rng.normal(size=(frames, d)).astype(np.float32)
        sample_frames.append(centers[truth] + noise)
        truths.append(truth)
    banks = [
        l2_normalize_rows((centers + 0.02 * rng.normal(size=(n_classes, d))).astype(np.float32))
        for _ in range(n_prompts)
    ]
    labels = [f"class {j}" for j in range(n_classes)]
    return write_dataset(root, labels, sample_frames, truths, banks, dataset_name="separable")


def planted_frames(gamma: float) -> np.ndarray:
    """Two frames leaning toward class 0 (with an off-text component) plus a
    class-1 outlier; the outlier wins plain pooled cosine."""
    u = np.array([1.0, 0.0, gamma], dtype=np.float32)
    u /= np.linalg.norm(u)
    outlier = np.array([0.0, 1.0, 0.0], dtype=np.float32)
    return np.vstack([u, u, outlier])


def make_planted_dataset(root: Path) -> dict:
    """Three planted-error samples (flip thresholds ~0.25, ~1.5, ~2.0 in
    beta_text) plus one clean sample. All truths are class 0."""
    e1 = np.array([1.0, 0.0, 0.0], dtype=np.float32)
    bank = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], dtype=np.float32)
    sample_frames = [
        planted_frames(1.8),
        planted_frames(2.5),
        planted_frames(3.0),
        np.vstack([e1, e1, e1]),
    ]
    truths = [0, 0, 0, 0]
    return write_dataset(root, ["target", "decoy"], sample_frames, truths, [bank], dataset_name="planted")
