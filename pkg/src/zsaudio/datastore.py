"""Prompt template storage, validation, and per-label expansion.

A template is a sentence carrying exactly one ``<label>`` slot; any
attribute or source words are filled in at curation time, so expansion at
runtime is a single verbatim substitution. Labels are substituted exactly
as given -- any lowercasing or punctuation policy belongs to whatever
produced the text embeddings, not here.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import DuplicateId, MissingLabelSlot, SchemaError, UnresolvedSlot

LABEL_SLOT = "<label>"

_SLOT_PATTERN = re.compile(r"<[^<>]*>")


@dataclass(frozen=True)
class PromptTemplate:
    """A prompt sentence with exactly one ``<label>`` slot."""

    id: str
    template: str
    origin: str = "user"  # "seed" for the bundled store


@dataclass(frozen=True)
class PromptDatastore:
    """Ordered, validated collection of prompt templates.

    Order is stable and meaningful: prompt weights downstream are reported
    per id, and text banks on disk follow datastore order.
    """

    prompts: tuple[PromptTemplate, ...]
    version: str

    def __len__(self) -> int:
        return len(self.prompts)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.prompts]


def validate_template(text: str, prompt_id: str) -> None:
    """Reject templates whose expansion would be ambiguous or incomplete."""
    slots = _SLOT_PATTERN.findall(text)
    label_slots = [s for s in slots if s == LABEL_SLOT]
    if not label_slots:
        raise MissingLabelSlot(f"prompt {prompt_id!r}: template has no {LABEL_SLOT} slot")
    other = [s for s in slots if s != LABEL_SLOT]
    if other:
        raise UnresolvedSlot(f"prompt {prompt_id!r}: unresolved slot(s) {other}")
    if len(label_slots) > 1:
        # A second <label> would survive single substitution unresolved.
        raise UnresolvedSlot(f"prompt {prompt_id!r}: {LABEL_SLOT} appears {len(label_slots)} times")


def load_datastore(path: str | Path, origin: str = "user") -> PromptDatastore:
    """Load a datastore from a JSON list of ``{"id": str, "template": str}``.

    The store version is a content hash, so identical files load as
    identical stores regardless of location.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"$: not valid JSON ({exc})") from exc
    if not isinstance(doc, list) or not doc:
        raise SchemaError("$: datastore must be a non-empty JSON list")

    prompts: list[PromptTemplate] = []
    seen: set[str] = set()
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict) or not isinstance(entry.get("id"), str) or not isinstance(entry.get("template"), str):
            raise SchemaError(f"$[{i}]: expected an object with string 'id' and 'template'")
        pid, template = entry["id"], entry["template"]
        if pid in seen:
            raise DuplicateId(f"prompt id {pid!r} appears more than once")
        seen.add(pid)
        validate_template(template, pid)
        prompts.append(PromptTemplate(id=pid, template=template, origin=origin))

    digest = hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()[:12]
    return PromptDatastore(prompts=tuple(prompts), version=digest)


def seed_datastore_path() -> Path:
    """Path of the bundled seed template store (40+ curated templates)."""
    return Path(str(resources.files("zsaudio").joinpath("data/seed_prompts.json")))


def load_seed_datastore() -> PromptDatastore:
    return load_datastore(seed_datastore_path(), origin="seed")


def expand_template(template: PromptTemplate | str, label: str) -> str:
    """Replace the ``<label>`` slot with ``label``, altering nothing else."""
    if not label:
        raise ValueError("label must be non-empty")
    text = template.template if isinstance(template, PromptTemplate) else template
    return text.replace(LABEL_SLOT, label, 1)


def render_prompt_matrix(datastore: PromptDatastore, labels: list[str]) -> list[list[str]]:
    """Expand every template against every label.

    Row i, column j is prompt i rendered with label j; rows follow
    datastore order, columns follow the given label order.
    """
    if len(set(labels)) != len(labels):
        raise ValueError("labels must be unique")
    return [[expand_template(p, label) for label in labels] for p in datastore.prompts]
