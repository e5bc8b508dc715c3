"""Training-free zero-shot audio classification over precomputed embeddings.

The package operates purely on embedding tensors: per-sample frame-level
audio embeddings and per-prompt class text banks, both stored in a small
binary format. On top of those it provides prompt-ensemble construction
(uniform and confidence-weighted), parameter-free cross-modal alignment,
and an evaluation/tuning harness with a CLI.
"""

from .cma import (
    BetaPair,
    attention_map,
    audio_guided,
    classify_sample,
    combined_logits,
    pool_frames,
    row_softmax,
    text_guided,
)
from .datastore import (
    PromptDatastore,
    PromptTemplate,
    expand_template,
    load_datastore,
    load_seed_datastore,
    render_prompt_matrix,
    seed_datastore_path,
)
from .evaluate import (
    BetaGrid,
    ComparisonDelta,
    EvaluationReport,
    GridSearchResult,
    accuracy,
    compare_conditions,
    evaluate_dataset,
    grid_search_betas,
    load_sample_frames,
    mean_average_precision,
)
from .scoring import (
    PromptWeights,
    StreamingPromptScorer,
    compute_logits,
    export_weights,
    prompt_score,
    uniform_prompt_ensemble,
    weighted_prompt_ensemble,
)
from .tensorio import (
    DatasetManifest,
    Sample,
    ZeroRowWarning,
    l2_normalize_rows,
    read_manifest,
    read_tensor,
    write_tensor,
)

__version__ = "0.1.0"

__all__ = [
    "BetaGrid",
    "BetaPair",
    "ComparisonDelta",
    "DatasetManifest",
    "EvaluationReport",
    "GridSearchResult",
    "PromptDatastore",
    "PromptTemplate",
    "PromptWeights",
    "Sample",
    "StreamingPromptScorer",
    "ZeroRowWarning",
    "accuracy",
    "attention_map",
    "audio_guided",
    "classify_sample",
    "combined_logits",
    "compare_conditions",
    "compute_logits",
    "evaluate_dataset",
    "expand_template",
    "export_weights",
    "grid_search_betas",
    "l2_normalize_rows",
    "load_datastore",
    "load_sample_frames",
    "load_seed_datastore",
    "mean_average_precision",
    "pool_frames",
    "prompt_score",
    "read_manifest",
    "read_tensor",
    "render_prompt_matrix",
    "row_softmax",
    "seed_datastore_path",
    "text_guided",
    "uniform_prompt_ensemble",
    "weighted_prompt_ensemble",
    "write_tensor",
]
