"""Extraction jobs: audio manifest in, tensor files + dataset manifest out.

Input is an *audio manifest*, the same shape the downstream dataset
manifest takes but with an ``audio`` field (a wav path relative to the
manifest) instead of ``embedding_ref``::

    {"dataset_name": str,
     "task": "single_label" | "multi_label",
     "labels": [str, ...],
     "samples": [{"id": str, "truth": ..., "audio": "wavs/x.wav"}, ...]}

Augmentation randomness is seeded per sample from (job seed, sample id),
so outputs are bit-identical across re-runs and independent of processing
order. Undecodable files are skipped and logged; everything else fails the
job.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import DecodeError, load_wav
from .augment import AUGMENTATION_NONE, apply_augmentation, condition_string, resolve_params
from .models import load_encoder, supported_models
from .prompts import load_prompt_store
from .tensorfile import write_tensor

log = logging.getLogger("ale_extractor")


@dataclass
class ExtractionJob:
    model_id: str
    dataset_root: Path  # audio manifest JSON path
    manifest_out: Path
    out_dir: Path
    augmentation: str = AUGMENTATION_NONE
    augmentation_params: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        self.dataset_root = Path(self.dataset_root)
        self.manifest_out = Path(self.manifest_out)
        self.out_dir = Path(self.out_dir)
        if self.model_id not in supported_models():
            from .models import UnsupportedModel

            raise UnsupportedModel(
                f"unknown model {self.model_id!r}; supported: {', '.join(supported_models())}"
            )
        # Validates the augmentation name and every override range.
        self.augmentation_params = resolve_params(self.augmentation, self.augmentation_params)

    @property
    def condition(self) -> str:
        seed = self.seed if self.augmentation != AUGMENTATION_NONE else None
        return condition_string(self.augmentation, self.augmentation_params, seed)


def _load_audio_manifest(path: Path) -> dict:
    doc = json.loads(path.read_text(encoding="utf-8"))
    for key in ("dataset_name", "task", "labels", "samples"):
        if key not in doc:
            raise ValueError(f"audio manifest {path}: missing field {key!r}")
    for i, sample in enumerate(doc["samples"]):
        for key in ("id", "truth", "audio"):
            if key not in sample:
                raise ValueError(f"audio manifest {path}: samples[{i}] missing {key!r}")
    return doc


def _sample_rng(seed: int, sample_id: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{sample_id}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _write_json_atomic(doc: dict, path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def extract_audio_embeddings(job: ExtractionJob) -> dict:
    """Run the job: one tensor file per decodable sample plus the manifest.

    Returns summary counts: {"written": int, "skipped": int}.
    """
    audio_manifest = _load_audio_manifest(job.dataset_root)
    audio_root = job.dataset_root.parent
    encoder = load_encoder(job.model_id)
    if getattr(encoder, "pooled_only", False):
        log.warning(
            "%s exposes only pooled output; emitting single-frame tensors (frame attention degenerates)",
            job.model_id,
        )

    emb_dir = job.out_dir / "embeddings"
    emb_dir.mkdir(parents=True, exist_ok=True)

    out_samples = []
    skipped = 0
    for sample in audio_manifest["samples"]:
        wav_path = audio_root / sample["audio"]
        try:
            samples, rate = load_wav(wav_path)
        except DecodeError as exc:
            log.warning("skipping sample %s: %s", sample["id"], exc)
            skipped += 1
            continue
        if job.augmentation != AUGMENTATION_NONE:
            rng = _sample_rng(job.seed, sample["id"])
            samples = apply_augmentation(job.augmentation, samples, rate, rng, job.augmentation_params)
        frames = encoder.encode_audio_frames(samples, rate)
        ref = f"embeddings/{sample['id']}.pate"
        write_tensor(frames, job.out_dir / ref)
        out_samples.append({"id": sample["id"], "truth": sample["truth"], "embedding_ref": ref})

    manifest = {
        "dataset_name": audio_manifest["dataset_name"],
        "task": audio_manifest["task"],
        "labels": audio_manifest["labels"],
        "samples": out_samples,
        "condition": job.condition,
        "model_id": job.model_id,
        "seed": job.seed,
    }
    job.manifest_out.parent.mkdir(parents=True, exist_ok=True)
    _write_json_atomic(manifest, job.manifest_out)
    return {"written": len(out_samples), "skipped": skipped}


def extract_text_banks(model_id: str, datastore_path: Path, labels: list[str], out_dir: Path) -> int:
    """One (M, d) bank per prompt, named ``<prompt_id>.pate``, in store order."""
    encoder = load_encoder(model_id)
    prompts = load_prompt_store(datastore_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for prompt_id, template in prompts:
        texts = [template.replace("<label>", label, 1) for label in labels]
        bank = encoder.encode_text(texts)
        write_tensor(bank, out_dir / f"{prompt_id}.pate")
    return len(prompts)
