import math

import numpy as np
import pytest

from oracles import (
    naive_cma,
    naive_mean_average_precision,
    naive_weighted_ensemble,
    normalize_rows,
    to_lists,
)
from util import make_planted_dataset, make_separable_dataset, unit_rows, write_dataset

from zsaudio.cma import BetaPair
from zsaudio.datastore import load_datastore
from zsaudio.errors import (
    ConfigError,
    LengthMismatch,
    MetricMismatch,
    MissingEmbedding,
    NoPositives,
    TaskMismatch,
)
from zsaudio.evaluate import (
    BetaGrid,
    EvaluationReport,
    SkippedClassWarning,
    accuracy,
    compare_conditions,
    evaluate_dataset,
    grid_search_betas,
    mean_average_precision,
)
from zsaudio.tensorio import DatasetManifest, Sample, read_manifest


def _manifest(task, truths, m=2):
    samples = tuple(
        Sample(id=f"s{i}", truth=(t if task == "single_label" else tuple(t)), embedding_ref=f"s{i}.pate")
        for i, t in enumerate(truths)
    )
    return DatasetManifest("toy", task, tuple(f"c{j}" for j in range(m)), samples)


# ---------------------------------------------------------------------------
# Accuracy
# ---------------------------------------------------------------------------


def test_accuracy_all_correct():
    manifest = _manifest("single_label", [0, 1, 0])
    assert accuracy([0, 1, 0], manifest) == 100.0


def test_accuracy_three_of_four():
    manifest = _manifest("single_label", [0, 1, 0, 1])
    assert accuracy([0, 1, 0, 0], manifest) == 75.0


def test_accuracy_empty_predictions():
    manifest = _manifest("single_label", [0, 1])
    with pytest.raises(LengthMismatch):
        accuracy([], manifest)


def test_accuracy_task_mismatch():
    manifest = _manifest("multi_label", [[1, 0]])
    with pytest.raises(TaskMismatch):
        accuracy([0], manifest)


def test_accuracy_sample_permutation_invariance(rng):
    truths = [int(rng.integers(0, 3)) for _ in range(9)]
    preds = [int(rng.integers(0, 3)) for _ in range(9)]
    manifest = _manifest("single_label", truths, m=3)
    base = accuracy(preds, manifest)
    perm = list(rng.permutation(9))
    permuted_manifest = _manifest("single_label", [truths[i] for i in perm], m=3)
    assert accuracy([preds[i] for i in perm], permuted_manifest) == base


# ---------------------------------------------------------------------------
# Mean average precision
# ---------------------------------------------------------------------------


def test_map_positives_ranked_first():
    manifest = _manifest("multi_label", [[1, 1], [0, 1], [0, 0]])
    scores = np.array([[0.9, 0.9], [0.1, 0.8], [0.0, 0.1]])
    assert mean_average_precision(scores, manifest) == 100.0


def test_map_positive_ranked_second():
    manifest = _manifest("multi_label", [[0, 1], [1, 1]], m=2)
    scores = np.array([[0.9, 0.9], [0.1, 0.8]])
    # class 0: lone positive at rank 2 -> AP 0.5; class 1: both positive -> AP 1.
    assert mean_average_precision(scores, manifest) == pytest.approx(75.0, abs=1e-12)
    lone = _manifest("multi_label", [[0, 1], [1, 1]], m=2)
    one_class = np.array([[0.9, 0.0], [0.1, 0.0]])
    # Isolate the lone-positive class by emptying the other one.
    manifest_single = _manifest("multi_label", [[0, 0], [1, 0]], m=2)
    with pytest.warns(SkippedClassWarning):
        assert mean_average_precision(one_class, manifest_single) == pytest.approx(50.0, abs=1e-12)
    del lone


def test_map_monotone_transform_invariant(rng):
    truths = (rng.random(size=(10, 3)) < 0.4).astype(int)
    truths[0] = [1, 1, 1]
    manifest = _manifest("multi_label", truths.tolist(), m=3)
    scores = rng.normal(size=(10, 3))
    base = mean_average_precision(scores, manifest)
    assert mean_average_precision(np.exp(scores), manifest) == base


def test_map_matches_naive(rng):
    for _ in range(25):
        n, m = int(rng.integers(2, 13)), int(rng.integers(2, 5))
        truths = (rng.random(size=(n, m)) < 0.4).astype(int)
        truths[0, 0] = 1
        scores = rng.normal(size=(n, m))
        manifest = _manifest("multi_label", truths.tolist(), m=m)
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SkippedClassWarning)
            mine = mean_average_precision(scores, manifest)
        assert mine == naive_mean_average_precision(to_lists(scores), truths.tolist())


def test_map_sample_permutation_invariance(rng):
    # Tie-free scores: permutation of samples must not change the metric.
    n, m = 8, 3
    scores = rng.permutation(n * m).reshape(n, m).astype(float)
    truths = (rng.random(size=(n, m)) < 0.5).astype(int)
    truths[0] = [1, 1, 1]
    manifest = _manifest("multi_label", truths.tolist(), m=m)
    base = mean_average_precision(scores, manifest)
    perm = list(rng.permutation(n))
    permuted = _manifest("multi_label", truths[perm].tolist(), m=m)
    assert mean_average_precision(scores[perm], permuted) == pytest.approx(base, abs=1e-12)


def test_map_task_mismatch():
    manifest = _manifest("single_label", [0])
    with pytest.raises(TaskMismatch):
        mean_average_precision(np.zeros((1, 2)), manifest)


def test_map_all_classes_empty():
    manifest = _manifest("multi_label", [[0, 0], [0, 0]])
    import warnings

    with pytest.raises(NoPositives), warnings.catch_warnings():
        warnings.simplefilter("ignore", SkippedClassWarning)
        mean_average_precision(np.zeros((2, 2)), manifest)


# ---------------------------------------------------------------------------
# evaluate_dataset
# ---------------------------------------------------------------------------


@pytest.fixture
def separable(tmp_path, rng):
    paths = make_separable_dataset(tmp_path, rng)
    manifest = read_manifest(paths["manifest"])
    datastore = load_datastore(paths["datastore"])
    from zsaudio.cli import load_text_banks

    banks = load_text_banks(datastore, paths["banks_dir"])
    return manifest, datastore, banks


def test_separable_every_method_is_perfect(separable):
    manifest, datastore, banks = separable
    for method in ("zs", "pe", "wpe", "pe+cma", "pat"):
        report = evaluate_dataset(manifest, datastore, banks, method=method, betas=BetaPair(0.05, 0.5))
        assert report.value == 100.0
        assert report.method == method
        assert report.metric_name == "accuracy"


def test_zs_equals_pat_single_prompt_zero_betas(tmp_path, rng):
    centers = unit_rows(rng, 3, 8)
    sample_frames = [centers[i % 3] + 0.3 * rng.normal(size=(4, 8)).astype(np.float32) for i in range(9)]
    truths = [i % 3 for i in range(9)]
    bank = unit_rows(rng, 3, 8)
    paths = write_dataset(tmp_path, ["a", "b", "c"], sample_frames, truths, [bank])
    manifest = read_manifest(paths["manifest"])
    datastore = load_datastore(paths["datastore"])
    from zsaudio.cli import load_text_banks

    banks = load_text_banks(datastore, paths["banks_dir"])
    zs = evaluate_dataset(manifest, datastore, banks, method="zs")
    pat = evaluate_dataset(manifest, datastore, banks, method="pat", betas=BetaPair(0.0, 0.0))
    assert zs.value == pat.value


def test_evaluate_deterministic(separable):
    manifest, datastore, banks = separable
    a = evaluate_dataset(manifest, datastore, banks, method="pat", betas=BetaPair(0.01, 0.1))
    b = evaluate_dataset(manifest, datastore, banks, method="pat", betas=BetaPair(0.01, 0.1))
    assert a == b


def test_evaluate_parallel_matches_sequential(separable):
    manifest, datastore, banks = separable
    seq = evaluate_dataset(manifest, datastore, banks, method="pat", betas=BetaPair(0.05, 0.5), threads=1)
    par = evaluate_dataset(manifest, datastore, banks, method="pat", betas=BetaPair(0.05, 0.5), threads=4)
    assert abs(seq.value - par.value) <= 1e-6


def test_evaluate_missing_embedding_names_sample(tmp_path, rng):
    paths = make_separable_dataset(tmp_path, rng, n_samples=3)
    (tmp_path / "embeddings" / "s1.pate").unlink()
    manifest = read_manifest(paths["manifest"])
    datastore = load_datastore(paths["datastore"])
    from zsaudio.cli import load_text_banks

    banks = load_text_banks(datastore, paths["banks_dir"])
    with pytest.raises(MissingEmbedding, match="s1"):
        evaluate_dataset(manifest, datastore, banks, method="zs")


def test_evaluate_multilabel_reports_map(tmp_path, rng):
    centers = unit_rows(rng, 3, 8)
    sample_frames, truths = [], []
    for i in range(8):
        active = sorted(set([i % 3, (i + 1) % 3]))
        mix = centers[active].mean(axis=0) + 0.1 * rng.normal(size=(3, 8)).astype(np.float32)
        sample_frames.append(mix)
        truths.append([1 if j in active else 0 for j in range(3)])
    bank = centers
    paths = write_dataset(tmp_path, ["a", "b", "c"], sample_frames, truths, [bank], task="multi_label")
    manifest = read_manifest(paths["manifest"])
    datastore = load_datastore(paths["datastore"])
    from zsaudio.cli import load_text_banks

    banks = load_text_banks(datastore, paths["banks_dir"])
    report = evaluate_dataset(manifest, datastore, banks, method="pat", betas=BetaPair(0.01, 0.1))
    assert report.metric_name == "mAP"
    assert 0.0 <= report.value <= 100.0


def test_evaluate_pat_matches_end_to_end_oracle(tmp_path, rng):
    n_samples, n_prompts, m, d, c = 20, 4, 3, 8, 3
    centers = unit_rows(rng, m, d)
    sample_frames, truths = [], []
    for i in range(n_samples):
        truth = int(rng.integers(0, m))
        sample_frames.append(centers[truth] + 0.9 * rng.normal(size=(c, d)).astype(np.float32))
        truths.append(truth)
    banks = [
        (centers + 0.4 * rng.normal(size=(m, d))).astype(np.float32) for _ in range(n_prompts)
    ]
    paths = write_dataset(tmp_path, ["a", "b", "c"], sample_frames, truths, banks)
    manifest = read_manifest(paths["manifest"])
    datastore = load_datastore(paths["datastore"])
    from zsaudio.cli import load_text_banks

    disk_banks = load_text_banks(datastore, paths["banks_dir"])
    betas = BetaPair(0.05, 0.5)
    report = evaluate_dataset(manifest, datastore, disk_banks, method="pat", betas=betas)

    # Naive end-to-end recomputation from the raw arrays.
    pooled = []
    for frames in sample_frames:
        rows = normalize_rows(to_lists(frames))
        mean = [sum(col) / len(rows) for col in zip(*rows)]
        pooled.append(normalize_rows([mean])[0])
    _, ensembled = naive_weighted_ensemble([to_lists(b) for b in banks], pooled)
    correct = 0
    for frames, truth in zip(sample_frames, truths):
        result = naive_cma(to_lists(frames), ensembled, betas.beta_audio, betas.beta_text)
        correct += int(result["argmax"] == truth)
    expected = 100.0 * correct / n_samples
    assert abs(report.value - expected) <= 1e-4


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------


@pytest.fixture
def planted(tmp_path):
    paths = make_planted_dataset(tmp_path)
    manifest = read_manifest(paths["manifest"])
    datastore = load_datastore(paths["datastore"])
    from zsaudio.cli import load_text_banks

    banks = load_text_banks(datastore, paths["banks_dir"])
    return manifest, datastore, banks


def test_grid_singleton(planted):
    manifest, datastore, banks = planted
    grid = BetaGrid(pairs=(BetaPair(0.01, 0.1),))
    result = grid_search_betas(manifest, datastore, banks, grid)
    assert result.best == BetaPair(0.01, 0.1)
    assert len(result.reports) == 1


def test_grid_larger_text_weight_wins(planted):
    manifest, datastore, banks = planted
    grid = BetaGrid(pairs=(BetaPair(0.0, 0.25), BetaPair(0.0, 1.5), BetaPair(0.0, 2.0)))
    result = grid_search_betas(manifest, datastore, banks, grid)
    values = [r.value for r in result.reports]
    assert values == sorted(values) and len(set(values)) == 3  # strictly increasing
    assert result.best == BetaPair(0.0, 2.0)
    assert result.best_report.value == 100.0


def test_grid_best_dominates_all(planted):
    manifest, datastore, banks = planted
    grid = BetaGrid(
        pairs=(
            BetaPair(0.01, 0.1),
            BetaPair(0.05, 0.5),
            BetaPair(0.1, 0.02),
            BetaPair(0.01, 0.01),
            BetaPair(0.5, 0.5),
        )
    )
    result = grid_search_betas(manifest, datastore, banks, grid)
    for report in result.reports:
        assert result.best_report.value >= report.value
        assert report.tuned_on == "planted/clean"


def test_grid_tie_breaks_earliest(planted):
    manifest, datastore, banks = planted
    # Both pairs sit below every flip threshold, so values tie.
    grid = BetaGrid(pairs=(BetaPair(0.0, 0.0), BetaPair(0.0, 0.01)))
    result = grid_search_betas(manifest, datastore, banks, grid)
    assert result.reports[0].value == result.reports[1].value
    assert result.best == BetaPair(0.0, 0.0)


def test_grid_parallel_matches_sequential(planted):
    manifest, datastore, banks = planted
    grid = BetaGrid(pairs=(BetaPair(0.0, 0.25), BetaPair(0.0, 1.5), BetaPair(0.0, 2.0)))
    sequential = grid_search_betas(manifest, datastore, banks, grid, threads=1)
    parallel = grid_search_betas(manifest, datastore, banks, grid, threads=3)
    assert sequential == parallel


def test_grid_rejects_duplicates():
    with pytest.raises(ConfigError):
        BetaGrid(pairs=(BetaPair(0.01, 0.1), BetaPair(0.01, 0.1)))
    with pytest.raises(ConfigError):
        BetaGrid(pairs=())


# ---------------------------------------------------------------------------
# Report comparison
# ---------------------------------------------------------------------------


def _report(value, method="zs", metric="accuracy", dataset="esc50", condition="clean"):
    return EvaluationReport(
        dataset_name=dataset,
        condition=condition,
        method=method,
        metric_name=metric,
        value=value,
        betas=BetaPair(0.0, 0.0),
        n_samples=2000,
    )


def test_compare_known_deltas():
    delta = compare_conditions(_report(91.80), _report(94.80, method="pat"))
    assert delta.delta == pytest.approx(3.00, abs=1e-9)
    delta = compare_conditions(_report(58.28), _report(60.76, method="pat"))
    assert delta.delta == pytest.approx(2.48, abs=1e-9)


def test_compare_identical_reports():
    assert compare_conditions(_report(50.0), _report(50.0)).delta == 0.0


def test_compare_metric_mismatch():
    with pytest.raises(MetricMismatch):
        compare_conditions(_report(50.0), _report(50.0, metric="mAP"))
    with pytest.raises(MetricMismatch):
        compare_conditions(_report(50.0), _report(50.0, dataset="usd8k"))


def test_report_json_round_trip():
    report = _report(94.80, method="pat")
    doc = report.to_json_dict()
    assert EvaluationReport.from_json_dict(doc) == report


def test_report_value_range_enforced():
    with pytest.raises(ValueError):
        _report(101.0)
    with pytest.raises(ValueError):
        _report(-0.5)


def test_map_exact_equals_fsum_of_hand_values():
    # One class, 4 samples, positives at ranks 1 and 3 -> AP = (1 + 2/3) / 2.
    manifest = _manifest("multi_label", [[1, 1], [0, 1], [1, 1], [0, 1]], m=2)
    scores = np.array([[0.9, 0.4], [0.8, 0.3], [0.7, 0.2], [0.6, 0.1]])
    expected_class0 = (1.0 + 2.0 / 3.0) / 2.0
    expected = 100.0 * math.fsum([expected_class0, 1.0]) / 2.0
    assert mean_average_precision(scores, manifest) == expected
