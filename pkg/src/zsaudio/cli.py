"""Command-line surface for reproducible runs.

Subcommands: score-prompts, ensemble, classify, evaluate, tune, compare.
A JSON config file may supply any flag; explicit flags win. Exit codes:
0 when a report or export was written, 2 for configuration problems,
3 for data problems, 4 for numeric problems.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .cma import BetaPair, classify_sample
from .datastore import PromptDatastore, load_datastore, seed_datastore_path
from .errors import (
    ConfigError,
    DatastoreError,
    DimensionMismatch,
    LengthMismatch,
    ManifestError,
    MetricMismatch,
    MissingEmbedding,
    NoPositives,
    NotNormalized,
    TaskMismatch,
    TensorIOError,
)
from .evaluate import (
    BetaGrid,
    EvaluationReport,
    compare_conditions,
    evaluate_dataset,
    grid_search_betas,
    load_sample_frames,
)
from .scoring import export_weights, uniform_prompt_ensemble, weighted_prompt_ensemble
from .tensorio import DatasetManifest, l2_normalize_rows, read_manifest, read_tensor, write_tensor

CLI_METHODS = {"zs": "zs", "pe": "pe", "wpe": "wpe", "pe-cma": "pe+cma", "pat": "pat"}


@dataclass
class RunConfig:
    """Validated inputs for one command invocation."""

    manifest_path: Path | None = None
    datastore_path: Path | None = None
    embeddings_dir: Path | None = None
    text_banks_dir: Path | None = None
    method: str = "zs"
    beta_audio: float = 0.0
    beta_text: float = 0.0
    temperature: float = 1.0
    threads: int = 1
    output_path: Path | None = None

    def validate(self, *, need_manifest=True, need_banks=True, need_out=True) -> None:
        if need_manifest and (self.manifest_path is None or not self.manifest_path.is_file()):
            raise ConfigError(f"--manifest: no such file: {self.manifest_path}")
        if self.datastore_path is None or not self.datastore_path.is_file():
            raise ConfigError(f"--datastore: no such file: {self.datastore_path}")
        if need_banks and (self.text_banks_dir is None or not self.text_banks_dir.is_dir()):
            raise ConfigError(f"--text-banks: no such directory: {self.text_banks_dir}")
        if self.embeddings_dir is not None and not self.embeddings_dir.is_dir():
            raise ConfigError(f"--embeddings: no such directory: {self.embeddings_dir}")
        if need_out and self.output_path is None:
            raise ConfigError("--out is required")
        for name, value in (("--beta-audio", self.beta_audio), ("--beta-text", self.beta_text)):
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be a finite float >= 0, got {value}")
        if not np.isfinite(self.temperature) or self.temperature <= 0:
            raise ConfigError(f"--temperature must be a positive finite float, got {self.temperature}")
        if self.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {self.threads}")

    @property
    def betas(self) -> BetaPair:
        return BetaPair(self.beta_audio, self.beta_text)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {
        "manifest": getattr(args, "manifest", None),
        "datastore": getattr(args, "datastore", None),
        "embeddings": getattr(args, "embeddings", None),
        "text_banks": getattr(args, "text_banks", None),
        "method": getattr(args, "method", None),
        "beta_audio": getattr(args, "beta_audio", None),
        "beta_text": getattr(args, "beta_text", None),
        "temperature": getattr(args, "temperature", None),
        "threads": getattr(args, "threads", None),
        "out": getattr(args, "out", None),
    }
    config_path = getattr(args, "config", None)
    if config_path is not None:
        try:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"--config: cannot read {config_path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("--config: file must hold a JSON object")
        for key, value in doc.items():
            if key in values and values[key] is None:
                values[key] = value

    def path_or_none(v):
        return Path(v) if v is not None else None

    method = values["method"] if values["method"] is not None else "zs"
    if method not in CLI_METHODS:
        raise ConfigError(f"--method must be one of {sorted(CLI_METHODS)}, got {method!r}")

    return RunConfig(
        manifest_path=path_or_none(values["manifest"]),
        datastore_path=path_or_none(values["datastore"]) or seed_datastore_path(),
        embeddings_dir=path_or_none(values["embeddings"]),
        text_banks_dir=path_or_none(values["text_banks"]),
        method=CLI_METHODS[method],
        beta_audio=float(values["beta_audio"]) if values["beta_audio"] is not None else 0.0,
        beta_text=float(values["beta_text"]) if values["beta_text"] is not None else 0.0,
        temperature=float(values["temperature"]) if values["temperature"] is not None else 1.0,
        threads=int(values["threads"]) if values["threads"] is not None else 1,
        output_path=path_or_none(values["out"]),
    )


def load_text_banks(datastore: PromptDatastore, banks_dir: Path) -> list[np.ndarray]:
    """Load one ``<prompt_id>.pate`` bank per prompt, in datastore order."""
    banks = []
    for prompt in datastore.prompts:
        path = banks_dir / f"{prompt.id}.pate"
        if not path.is_file():
            raise MissingEmbedding(f"prompt {prompt.id!r}: no text bank at {path}")
        banks.append(read_tensor(path))
    return banks


def _pooled_audio(manifest: DatasetManifest, cfg: RunConfig) -> np.ndarray:
    from .cma import pool_frames

    frames = load_sample_frames(manifest, cfg.embeddings_dir, cfg.threads)
    return np.vstack([pool_frames(f) for f in frames])


def _report_line(report: EvaluationReport) -> str:
    doc = report.to_json_dict()
    doc["meta"] = {"created_at": datetime.now(timezone.utc).isoformat()}
    return json.dumps(doc)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_score_prompts(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    datastore = load_datastore(cfg.datastore_path)
    manifest = read_manifest(cfg.manifest_path)
    banks = [l2_normalize_rows(b, warn=False) for b in load_text_banks(datastore, cfg.text_banks_dir)]
    pooled = _pooled_audio(manifest, cfg)
    weights, _ = weighted_prompt_ensemble(banks, pooled, cfg.temperature, prompt_ids=datastore.ids)
    export_weights(weights, cfg.output_path)
    print(f"wrote {len(weights.prompt_ids)} prompt weights to {cfg.output_path}")
    return 0


def cmd_ensemble(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    if cfg.method not in ("pe", "wpe"):
        raise ConfigError(f"ensemble supports --method pe or wpe, got {cfg.method!r}")
    cfg.validate(need_manifest=cfg.method == "wpe")
    datastore = load_datastore(cfg.datastore_path)
    banks = [l2_normalize_rows(b, warn=False) for b in load_text_banks(datastore, cfg.text_banks_dir)]
    if cfg.method == "pe":
        bank = uniform_prompt_ensemble(banks)
    else:
        manifest = read_manifest(cfg.manifest_path)
        pooled = _pooled_audio(manifest, cfg)
        weights, bank = weighted_prompt_ensemble(banks, pooled, cfg.temperature, prompt_ids=datastore.ids)
        if args.weights_out:
            export_weights(weights, Path(args.weights_out))
    write_tensor(bank, cfg.output_path)
    print(f"wrote ensembled text bank {bank.shape} to {cfg.output_path}")
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    cfg.validate(need_out=False)
    frames_path = Path(args.frames)
    if not frames_path.is_file():
        raise ConfigError(f"--frames: no such file: {frames_path}")
    datastore = load_datastore(cfg.datastore_path)
    manifest = read_manifest(cfg.manifest_path)
    banks = [l2_normalize_rows(b, warn=False) for b in load_text_banks(datastore, cfg.text_banks_dir)]
    frames = l2_normalize_rows(read_tensor(frames_path), warn=False)

    if cfg.method == "zs":
        bank = banks[0]
    elif cfg.method in ("pe", "pe+cma"):
        bank = uniform_prompt_ensemble(banks)
    else:
        from .cma import pool_frames

        _, bank = weighted_prompt_ensemble(banks, pool_frames(frames), cfg.temperature, prompt_ids=datastore.ids)

    betas = cfg.betas if cfg.method in ("pe+cma", "pat") else BetaPair(0.0, 0.0)
    logits, predicted = classify_sample(frames, bank, betas)
    result = {
        "frames": str(frames_path),
        "method": cfg.method,
        "beta_audio": betas.beta_audio,
        "beta_text": betas.beta_text,
        "predicted_index": predicted,
        "predicted_label": manifest.labels[predicted],
        "logits": [float(v) for v in logits[0]],
    }
    payload = json.dumps(result, indent=2) + "\n"
    if cfg.output_path is not None:
        cfg.output_path.write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    datastore = load_datastore(cfg.datastore_path)
    manifest = read_manifest(cfg.manifest_path)
    banks = load_text_banks(datastore, cfg.text_banks_dir)
    weights_out = Path(args.weights_out) if getattr(args, "weights_out", None) else None
    report = evaluate_dataset(
        manifest,
        datastore,
        banks,
        method=cfg.method,
        betas=cfg.betas,
        temperature=cfg.temperature,
        threads=cfg.threads,
        embeddings_root=cfg.embeddings_dir,
        weights_out=weights_out,
    )
    line = _report_line(report)
    with open(cfg.output_path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")
    print(line)
    return 0


def _load_grid(path: Path) -> BetaGrid:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"--grid: cannot read {path}: {exc}") from exc
    if not isinstance(doc, list):
        raise ConfigError("--grid: file must hold a JSON list of [beta_audio, beta_text] pairs")
    pairs = []
    for i, entry in enumerate(doc):
        if not isinstance(entry, list) or len(entry) != 2:
            raise ConfigError(f"--grid: entry {i} must be a [beta_audio, beta_text] pair")
        try:
            pairs.append(BetaPair(float(entry[0]), float(entry[1])))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"--grid: entry {i}: {exc}") from exc
    return BetaGrid(pairs=tuple(pairs))


def cmd_tune(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    if args.grid is None:
        raise ConfigError("--grid is required")
    grid = _load_grid(Path(args.grid))
    datastore = load_datastore(cfg.datastore_path)
    manifest = read_manifest(cfg.manifest_path)
    banks = load_text_banks(datastore, cfg.text_banks_dir)
    result = grid_search_betas(
        manifest,
        datastore,
        banks,
        grid,
        temperature=cfg.temperature,
        threads=cfg.threads,
        embeddings_root=cfg.embeddings_dir,
    )
    doc = {
        "best": {"beta_audio": result.best.beta_audio, "beta_text": result.best.beta_text},
        "best_report": result.best_report.to_json_dict(),
        "reports": [r.to_json_dict() for r in result.reports],
        "meta": {"created_at": datetime.now(timezone.utc).isoformat()},
    }
    Path(cfg.output_path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"best betas ({result.best.beta_audio}, {result.best.beta_text}) -> {result.best_report.value:.2f}")
    return 0


def _read_reports(path: Path) -> list[EvaluationReport]:
    reports = []
    for i, line in enumerate(path.read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        try:
            reports.append(EvaluationReport.from_json_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ConfigError(f"{path}:{i + 1}: not a report line ({exc})") from exc
    if not reports:
        raise ConfigError(f"{path}: no report lines found")
    return reports


def cmd_compare(args: argparse.Namespace) -> int:
    paths = [Path(p) for p in args.reports]
    if len(paths) < 2:
        raise ConfigError("compare needs at least two report files")
    for p in paths:
        if not p.is_file():
            raise ConfigError(f"no such report file: {p}")
    baseline_reports = _read_reports(paths[0])
    exact: dict[tuple[str, str], EvaluationReport] = {}
    by_dataset: dict[str, list[EvaluationReport]] = {}
    for report in baseline_reports:
        exact.setdefault((report.dataset_name, report.condition), report)  # first line wins
        by_dataset.setdefault(report.dataset_name, []).append(report)

    def find_baseline(treated: EvaluationReport) -> EvaluationReport:
        # Same condition when available, otherwise a lone same-dataset
        # baseline (clean-vs-augmented comparisons).
        match = exact.get((treated.dataset_name, treated.condition))
        if match is not None:
            return match
        candidates = by_dataset.get(treated.dataset_name, [])
        if len(candidates) == 1:
            return candidates[0]
        raise MetricMismatch(
            f"no unambiguous baseline for dataset {treated.dataset_name!r} "
            f"(condition {treated.condition!r})"
        )

    lines = [
        "| dataset | condition | metric | baseline | treated | delta |",
        "|---|---|---|---|---|---|",
    ]
    for path in paths[1:]:
        for treated in _read_reports(path):
            delta = compare_conditions(find_baseline(treated), treated)
            lines.append(
                f"| {delta.dataset_name} | {delta.condition_treated} | {delta.metric_name} "
                f"| {delta.value_baseline:.2f} ({delta.method_baseline}) "
                f"| {delta.value_treated:.2f} ({delta.method_treated}) "
                f"| {delta.delta:+.2f} |"
            )
    table = "\n".join(lines) + "\n"
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(table, encoding="utf-8")
    else:
        sys.stdout.write(table)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common_flags(sub: argparse.ArgumentParser, *, frames=False, grid=False, weights_out=False) -> None:
    sub.add_argument("--config", help="JSON file supplying any of the flags below; flags override it")
    sub.add_argument("--manifest", help="dataset manifest JSON")
    sub.add_argument("--datastore", help="prompt datastore JSON (defaults to the bundled seed store)")
    sub.add_argument("--embeddings", help="root directory for per-sample embedding files (defaults to the manifest's directory)")
    sub.add_argument("--text-banks", dest="text_banks", help="directory holding one <prompt_id>.pate bank per prompt")
    sub.add_argument("--method", choices=sorted(CLI_METHODS), help="scoring method (default zs)")
    sub.add_argument("--beta-audio", dest="beta_audio", type=float, help="audio-guided logit weight (default 0)")
    sub.add_argument("--beta-text", dest="beta_text", type=float, help="text-guided logit weight (default 0)")
    sub.add_argument("--temperature", type=float, help="softmax temperature for prompt weights (default 1)")
    sub.add_argument("--threads", type=int, help="worker cap for sample-level parallelism (default 1)")
    sub.add_argument("--out", help="output path")
    if frames:
        sub.add_argument("--frames", required=True, help="frame-embedding .pate file for one sample")
    if grid:
        sub.add_argument("--grid", help="JSON list of [beta_audio, beta_text] pairs")
    if weights_out:
        sub.add_argument("--weights-out", dest="weights_out", help="also export prompt weights JSON here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zsaudio",
        description="Training-free zero-shot audio classification over precomputed embeddings",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("score-prompts", help="score every prompt against the dataset and export weights")
    _add_common_flags(p)
    p.set_defaults(func=cmd_score_prompts)

    p = subparsers.add_parser("ensemble", help="write the ensembled text bank (pe or wpe) as a tensor file")
    _add_common_flags(p, weights_out=True)
    p.set_defaults(func=cmd_ensemble)

    p = subparsers.add_parser("classify", help="classify a single sample from its frame embeddings")
    _add_common_flags(p, frames=True)
    p.set_defaults(func=cmd_classify)

    p = subparsers.add_parser("evaluate", help="evaluate a method over a manifest; append one report line")
    _add_common_flags(p, weights_out=True)
    p.set_defaults(func=cmd_evaluate)

    p = subparsers.add_parser("tune", help="grid-search beta pairs with the full alignment method")
    _add_common_flags(p, grid=True)
    p.set_defaults(func=cmd_tune)

    p = subparsers.add_parser("compare", help="markdown delta table between report files (first file is the baseline)")
    p.add_argument("reports", nargs="+", help="report JSONL files; the first is the baseline")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(exc, 2)
    except MetricMismatch as exc:
        return _fail(exc, 2)
    except (TensorIOError, ManifestError, DatastoreError, MissingEmbedding, TaskMismatch, LengthMismatch, NoPositives) as exc:
        return _fail(exc, 3)
    except (DimensionMismatch, NotNormalized) as exc:
        return _fail(exc, 4)
    except ValueError as exc:
        return _fail(exc, 2)


def _fail(exc: Exception, code: int) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
