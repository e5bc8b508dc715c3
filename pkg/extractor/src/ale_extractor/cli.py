"""CLI: extract embeddings, extract text banks, generate audio manifests."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .augment import AUGMENTATION_NONE, AUGMENTATIONS, InvalidAugmentationParams
from .jobs import ExtractionJob, extract_audio_embeddings, extract_text_banks
from .models import UnsupportedModel, supported_models


def _parse_params(pairs: list[str]) -> dict[str, float]:
    params = {}
    for pair in pairs:
        if "=" not in pair:
            raise InvalidAugmentationParams(f"--param expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        params[key] = float(value)
    return params


def cmd_extract(args: argparse.Namespace) -> int:
    job = ExtractionJob(
        model_id=args.model,
        dataset_root=Path(args.dataset),
        manifest_out=Path(args.manifest_out),
        out_dir=Path(args.out),
        augmentation=args.augment,
        augmentation_params=_parse_params(args.param),
        seed=args.seed,
    )
    summary = extract_audio_embeddings(job)
    print(
        f"wrote {summary['written']} embedding files to {job.out_dir} "
        f"({summary['skipped']} skipped), manifest at {job.manifest_out}"
    )
    return 0 if summary["written"] > 0 else 3


def cmd_text_banks(args: argparse.Namespace) -> int:
    labels_doc = json.loads(Path(args.labels_from).read_text(encoding="utf-8"))
    labels = labels_doc["labels"] if isinstance(labels_doc, dict) else list(labels_doc)
    count = extract_text_banks(args.model, Path(args.datastore), labels, Path(args.out))
    print(f"wrote {count} text banks ({len(labels)} labels each) to {args.out}")
    return 0


def cmd_make_manifest(args: argparse.Namespace) -> int:
    csv_path = Path(args.csv)
    samples = []
    labels: list[str] = []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if args.format == "esc50":
        file_col, label_col = "filename", "category"
    else:
        file_col, label_col = args.file_column, args.label_column
    for row in rows:
        if file_col not in row or label_col not in row:
            raise ValueError(f"{csv_path}: need columns {file_col!r} and {label_col!r}")
        if row[label_col] not in labels:
            labels.append(row[label_col])
    labels.sort()
    for row in rows:
        samples.append(
            {
                "id": Path(row[file_col]).stem,
                "truth": labels.index(row[label_col]),
                "audio": str(Path(args.audio_dir) / row[file_col]) if args.audio_dir else row[file_col],
            }
        )
    doc = {
        "dataset_name": args.dataset_name,
        "task": "single_label",
        "labels": labels,
        "samples": samples,
    }
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"wrote audio manifest with {len(samples)} samples, {len(labels)} labels to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ale-extract",
        description="Extract audio/text embeddings into the zsaudio tensor and manifest formats",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="encode every sample of an audio manifest into frame tensors")
    p.add_argument("--model", required=True, help=f"one of: {', '.join(supported_models())}")
    p.add_argument("--dataset", required=True, help="audio manifest JSON (wav paths relative to it)")
    p.add_argument("--augment", default=AUGMENTATION_NONE, choices=[AUGMENTATION_NONE, *sorted(AUGMENTATIONS)])
    p.add_argument("--param", action="append", default=[], help="augmentation override, key=value; repeatable")
    p.add_argument("--seed", type=int, default=0, help="augmentation seed recorded in the manifest")
    p.add_argument("--out", required=True, help="output directory for embedding files")
    p.add_argument("--manifest-out", dest="manifest_out", required=True, help="dataset manifest to write")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("text-banks", help="encode every prompt x label into per-prompt text banks")
    p.add_argument("--model", required=True)
    p.add_argument("--datastore", required=True, help="prompt datastore JSON")
    p.add_argument("--labels-from", dest="labels_from", required=True, help="manifest JSON (or JSON list) supplying the label vocabulary")
    p.add_argument("--out", required=True, help="output directory for <prompt_id>.pate banks")
    p.set_defaults(func=cmd_text_banks)

    p = sub.add_parser("make-manifest", help="build an audio manifest from a labels CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--audio-dir", dest="audio_dir", default="", help="prefix for wav paths in the CSV")
    p.add_argument("--dataset-name", dest="dataset_name", required=True)
    p.add_argument("--format", choices=["generic", "esc50"], default="generic")
    p.add_argument("--file-column", dest="file_column", default="filename")
    p.add_argument("--label-column", dest="label_column", default="label")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_manifest)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UnsupportedModel, InvalidAugmentationParams) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
