"""Exception taxonomy shared by all zsaudio modules.

Errors fall into three operational categories, mirrored by the CLI exit
codes: configuration problems (bad flags, invalid grids), data problems
(malformed files, missing embeddings), and numeric problems (shape or
normalization violations).
"""

from __future__ import annotations


class ZsAudioError(Exception):
    """Base class for all zsaudio errors."""


class ConfigError(ZsAudioError):
    """Invalid run configuration: bad paths, invalid grid, bad flag values."""


# ---------------------------------------------------------------------------
# Tensor file format
# ---------------------------------------------------------------------------


class TensorIOError(ZsAudioError):
    """Base class for tensor file format errors."""


class BadMagic(TensorIOError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersion(TensorIOError):
    """Header declares a format version this reader does not understand."""


class UnsupportedDtype(TensorIOError):
    """Header declares a dtype code other than float32."""


class UnsupportedRank(TensorIOError):
    """Header declares a rank other than 2."""


class InvalidDimensions(TensorIOError):
    """Header declares a zero-sized dimension."""


class TruncatedPayload(TensorIOError):
    """Payload byte count does not match the dimensions in the header."""


class NonFiniteValue(TensorIOError):
    """Tensor contains NaN or infinity."""


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


class ManifestError(ZsAudioError):
    """Base class for dataset manifest errors."""


class SchemaError(ManifestError):
    """Manifest JSON does not match the documented schema; message carries the field path."""


class DuplicateLabel(ManifestError):
    """Label vocabulary contains a repeated class name."""


class TruthOutOfRange(ManifestError):
    """Ground-truth index or vector is inconsistent with the label vocabulary."""


# ---------------------------------------------------------------------------
# Prompt datastore
# ---------------------------------------------------------------------------


class DatastoreError(ZsAudioError):
    """Base class for prompt datastore errors."""


class DuplicateId(DatastoreError):
    """Two templates share an id."""


class MissingLabelSlot(DatastoreError):
    """Template has no "<label>" slot."""


class UnresolvedSlot(DatastoreError):
    """Template carries a slot that label substitution would leave unresolved."""


# ---------------------------------------------------------------------------
# Numerics
# ---------------------------------------------------------------------------


class DimensionMismatch(ZsAudioError):
    """Operand shapes are inconsistent."""


class NotNormalized(ZsAudioError):
    """Rows expected to be unit-norm (or all-zero) are not."""


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


class EvaluationError(ZsAudioError):
    """Base class for evaluation harness errors."""


class TaskMismatch(EvaluationError):
    """Metric applied to a manifest with the wrong task type."""


class LengthMismatch(EvaluationError):
    """Prediction count does not match the sample count."""


class NoPositives(EvaluationError):
    """Every class in a multi-label manifest has zero positives."""


class MissingEmbedding(EvaluationError):
    """A sample's embedding file could not be found; message names the sample id."""


class MetricMismatch(EvaluationError):
    """Reports being compared do not share a dataset and metric."""
