"""Minimal reader for the consumer's prompt datastore format:
a JSON list of {"id": str, "template": str} with one <label> slot each."""

from __future__ import annotations

import json
from pathlib import Path


def load_prompt_store(path: str | Path) -> list[tuple[str, str]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, list) or not doc:
        raise ValueError(f"{path}: datastore must be a non-empty JSON list")
    prompts = []
    seen = set()
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict) or "id" not in entry or "template" not in entry:
            raise ValueError(f"{path}: entry {i} must carry 'id' and 'template'")
        if entry["id"] in seen:
            raise ValueError(f"{path}: duplicate prompt id {entry['id']!r}")
        if entry["template"].count("<label>") != 1:
            raise ValueError(f"{path}: prompt {entry['id']!r} must contain exactly one <label> slot")
        seen.add(entry["id"])
        prompts.append((entry["id"], entry["template"]))
    return prompts
