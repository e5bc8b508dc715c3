"""Binary tensor files, dataset manifests, and row normalization.

Every numerical module in this package consumes only the types defined
here: 2-D float32 arrays read from ``.pate`` tensor files and validated
:class:`DatasetManifest` objects read from JSON.

Tensor file layout (little-endian throughout)::

    offset  size  field
    0       4     magic, b"PATE"
    4       4     format version, uint32 (currently 1)
    8       1     dtype code, uint8 (0 = float32)
    9       1     rank, uint8 (always 2 for embedding and frame tensors)
    10      8*r   dims, uint64 each
    10+8*r  ...   payload, row-major floats

An embedding matrix is a ``(rows, dim)`` array; a frame tensor is a
``(frames, dim)`` array with ``frames >= 1``. Both are stored float32 and
must be finite. Reductions elsewhere in the package accumulate in float64.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DuplicateLabel,
    InvalidDimensions,
    NonFiniteValue,
    SchemaError,
    TruncatedPayload,
    TruthOutOfRange,
    UnsupportedDtype,
    UnsupportedRank,
    UnsupportedVersion,
)

TENSOR_MAGIC = b"PATE"
TENSOR_VERSION = 1
DTYPE_FLOAT32 = 0

TASK_SINGLE = "single_label"
TASK_MULTI = "multi_label"

_HEADER_PREFIX = struct.Struct("<4sIBB")


class ZeroRowWarning(UserWarning):
    """Raised through the warning channel when all-zero rows are left unnormalized."""


def write_tensor(data: np.ndarray, path: str | Path) -> None:
    """Write a 2-D float32 tensor to ``path`` in the PATE layout.

    The array must be 2-D with both dimensions >= 1 and all values finite.
    Round-tripping through :func:`read_tensor` is byte- and value-exact.
    """
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"refusing to write empty tensor of shape {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"tensor destined for {path} contains NaN or infinity")

    header = _HEADER_PREFIX.pack(TENSOR_MAGIC, TENSOR_VERSION, DTYPE_FLOAT32, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(dims)
        fh.write(arr.tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a PATE tensor file back into a 2-D float32 array.

    Rejects wrong magic, unknown versions, non-float32 dtypes, non-2-D
    ranks, zero-sized dims, payload size mismatches, and non-finite values.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER_PREFIX.size:
        raise TruncatedPayload(f"{path}: file shorter than the fixed header")
    magic, version, dtype_code, ndim = _HEADER_PREFIX.unpack_from(raw, 0)
    if magic != TENSOR_MAGIC:
        raise BadMagic(f"{path}: magic {magic!r} != {TENSOR_MAGIC!r}")
    if version != TENSOR_VERSION:
        raise UnsupportedVersion(f"{path}: version {version}, expected {TENSOR_VERSION}")
    if dtype_code != DTYPE_FLOAT32:
        raise UnsupportedDtype(f"{path}: dtype code {dtype_code}, only float32 (0) is supported")
    if ndim != 2:
        raise UnsupportedRank(f"{path}: rank {ndim}, only rank-2 tensors are supported")

    dims_end = _HEADER_PREFIX.size + 8 * ndim
    if len(raw) < dims_end:
        raise TruncatedPayload(f"{path}: file ends inside the dims block")
    dims = struct.unpack_from(f"<{ndim}Q", raw, _HEADER_PREFIX.size)
    if any(d == 0 for d in dims):
        raise InvalidDimensions(f"{path}: zero-sized dimension in {dims}")

    expected = 4 * dims[0] * dims[1]
    payload = raw[dims_end:]
    if len(payload) != expected:
        raise TruncatedPayload(
            f"{path}: payload is {len(payload)} bytes, header dims {dims} require {expected}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{path}: payload contains NaN or infinity")
    # Writable copy in native byte order; callers treat tensors as values.
    return arr.astype(np.float32)


def l2_normalize_rows(data: np.ndarray, *, warn: bool = True) -> np.ndarray:
    """Scale each row to unit Euclidean norm.

    All-zero rows are returned unchanged and, when ``warn`` is set,
    reported through :class:`ZeroRowWarning` (padded frames may be
    legitimately all-zero). Norms are computed in float64; the output
    keeps the input dtype. Idempotent within float rounding.
    """
    arr = np.asarray(data)
    norms = np.linalg.norm(arr.astype(np.float64, copy=False), axis=-1, keepdims=True)
    zero = norms == 0.0
    n_zero = int(np.count_nonzero(zero))
    if n_zero and warn:
        warnings.warn(f"{n_zero} all-zero row(s) left unnormalized", ZeroRowWarning, stacklevel=2)
    safe = np.where(zero, 1.0, norms)
    return (arr / safe).astype(arr.dtype, copy=False)


# ---------------------------------------------------------------------------
# Dataset manifests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    """One evaluation sample: id, ground truth, and the tensor file it points at.

    ``truth`` is a label index for single-label tasks and a 0/1 tuple of
    length M for multi-label tasks. ``embedding_ref`` is a path relative
    to the manifest's directory.
    """

    id: str
    truth: int | tuple[int, ...]
    embedding_ref: str


@dataclass(frozen=True)
class DatasetManifest:
    """Validated dataset description: label vocabulary plus per-sample truth.

    ``root`` is the directory embedding_refs resolve against; it is filled
    in by :func:`read_manifest` and may be overridden downstream.
    ``condition`` names the acoustic condition the embeddings were
    extracted under ("clean" unless the manifest says otherwise).
    """

    dataset_name: str
    task: str
    labels: tuple[str, ...]
    samples: tuple[Sample, ...]
    condition: str = "clean"
    root: Path | None = None

    @property
    def num_classes(self) -> int:
        return len(self.labels)

    def resolve_embedding(self, sample: Sample, root: Path | None = None) -> Path:
        base = root if root is not None else self.root
        if base is None:
            raise ValueError("manifest has no root directory to resolve embedding refs against")
        return Path(base) / sample.embedding_ref


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise SchemaError(f"{path}: {message}")


def read_manifest(path: str | Path) -> DatasetManifest:
    """Parse and validate a dataset manifest JSON file.

    Schema::

        {"dataset_name": str,
         "task": "single_label" | "multi_label",
         "labels": [str, ...],                  # >= 2, unique
         "samples": [{"id": str,
                      "truth": int | [0|1, ...],
                      "embedding_ref": str}, ...]}

    An optional top-level "condition" string is honored; unknown keys are
    ignored so extractor-side metadata (seeds, augmentation parameters)
    can ride along.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"$: not valid JSON ({exc})") from exc

    _require(isinstance(doc, dict), "$", "manifest must be a JSON object")
    for key in ("dataset_name", "task", "labels", "samples"):
        _require(key in doc, f"$.{key}", "missing required field")
    _require(isinstance(doc["dataset_name"], str), "$.dataset_name", "must be a string")
    task = doc["task"]
    _require(task in (TASK_SINGLE, TASK_MULTI), "$.task", f"must be '{TASK_SINGLE}' or '{TASK_MULTI}'")

    labels = doc["labels"]
    _require(isinstance(labels, list) and all(isinstance(x, str) for x in labels), "$.labels", "must be a list of strings")
    _require(len(labels) >= 2, "$.labels", "need at least 2 classes")
    seen: set[str] = set()
    for name in labels:
        if name in seen:
            raise DuplicateLabel(f"label {name!r} appears more than once")
        seen.add(name)
    m = len(labels)

    raw_samples = doc["samples"]
    _require(isinstance(raw_samples, list), "$.samples", "must be a list")
    samples: list[Sample] = []
    for i, entry in enumerate(raw_samples):
        where = f"$.samples[{i}]"
        _require(isinstance(entry, dict), where, "must be an object")
        _require(isinstance(entry.get("id"), str), f"{where}.id", "must be a string")
        _require(isinstance(entry.get("embedding_ref"), str), f"{where}.embedding_ref", "must be a string")
        truth = entry.get("truth")
        if task == TASK_SINGLE:
            _require(isinstance(truth, int) and not isinstance(truth, bool), f"{where}.truth", "must be an integer label index")
            if not 0 <= truth < m:
                raise TruthOutOfRange(f"{where}.truth: index {truth} outside [0, {m})")
            parsed_truth: int | tuple[int, ...] = truth
        else:
            _require(isinstance(truth, list), f"{where}.truth", "must be a 0/1 vector")
            if len(truth) != m:
                raise TruthOutOfRange(f"{where}.truth: vector length {len(truth)} != {m} classes")
            if not all(isinstance(v, int) and not isinstance(v, bool) and v in (0, 1) for v in truth):
                raise TruthOutOfRange(f"{where}.truth: entries must be 0 or 1")
            parsed_truth = tuple(truth)
        samples.append(Sample(id=entry["id"], truth=parsed_truth, embedding_ref=entry["embedding_ref"]))

    condition = doc.get("condition", "clean")
    _require(isinstance(condition, str), "$.condition", "must be a string")

    return DatasetManifest(
        dataset_name=doc["dataset_name"],
        task=task,
        labels=tuple(labels),
        samples=tuple(samples),
        condition=condition,
        root=path.parent,
    )
