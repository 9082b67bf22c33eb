import logging

import numpy as np
import pytest
import torch

from detector.benchmark import (
    REFERENCE_CPU_MS,
    bench_inference,
    log_reference,
    time_calls,
)
from detector.exceptions import SingleClass
from detector.metrics import (
    EvalReport,
    auc,
    eer,
    evaluate_scores,
    per_attack_eer,
    roc_curve,
)
from detector.model import build

"""
Test module for evaluation and timing

Files covered: "metrics.py", "benchmark.py"
"""


def _random_set(rng, ties=False):
    n_bonafide, n_fake = rng.integers(1, 25, size=2)
    labels = np.r_[np.zeros(n_bonafide, int), np.ones(n_fake, int)]
    scores = rng.normal(labels * rng.uniform(-1, 2), 1.0)
    if ties:
        scores = np.round(scores, 1)
    return scores, labels


def _mann_whitney(scores, labels):
    """100 * P(fake > bonafide) + 50 * P(tie), over every pair"""
    fake, bonafide = scores[labels == 1], scores[labels == 0]
    wins = sum((f > b) + 0.5 * (f == b) for f in fake for b in bonafide)
    return 100 * wins / (len(fake) * len(bonafide))


def _brute_force_eer(scores, labels):
    """FAR / FRR counted at every candidate threshold, then interpolated"""
    fake, bonafide = scores[labels == 1], scores[labels == 0]
    thresholds = [np.inf] + sorted(set(scores.tolist()), reverse=True)
    far = [np.mean(bonafide >= t) for t in thresholds]
    frr = [np.mean(fake < t) for t in thresholds]
    for idx, threshold in enumerate(thresholds):
        if far[idx] >= frr[idx]:
            break
    if far[idx] == frr[idx]:
        return 100 * far[idx], threshold
    before = frr[idx - 1] - far[idx - 1]
    alpha = before / (before + far[idx] - frr[idx])
    rate = far[idx - 1] + alpha * (far[idx] - far[idx - 1])
    if np.isfinite(thresholds[idx - 1]):
        threshold = thresholds[idx - 1] + alpha * (threshold - thresholds[idx - 1])
    return 100 * rate, threshold


# ========== unit tests ===============
# ---------- metrics.py ----------------
def test_roc_curve():
    fpr, tpr, thresholds = roc_curve([0.9, 0.1], [1, 0])
    assert list(zip(fpr, tpr)) == [(0, 0), (0, 1), (1, 1)]
    assert thresholds[0] == np.inf and list(thresholds[1:]) == [0.9, 0.1]
    fpr, tpr, _ = roc_curve([0.3, 0.3, 0.3], [1, 0, 1])
    assert list(zip(fpr, tpr)) == [(0, 0), (1, 1)]
    with pytest.raises(SingleClass):
        roc_curve([0.1, 0.2], [1, 1])


def test_roc_curve_exhaustive():
    scores = np.array([0.2, 0.8, 0.5, 0.5, 0.1, 0.9])
    labels = np.array([0, 1, 0, 1, 0, 1])
    fpr, tpr, thresholds = roc_curve(scores, labels)
    expected = [(0.0, 0.0)] + [
        (np.mean(scores[labels == 0] >= t), np.mean(scores[labels == 1] >= t))
        for t in sorted(set(scores), reverse=True)
    ]
    assert list(zip(fpr, tpr)) == expected
    assert (np.diff(fpr) >= 0).all() and (np.diff(tpr) >= 0).all()
    assert len(thresholds) == 1 + len(set(scores))


def test_auc():
    assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 100.0
    assert auc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0
    rng = np.random.default_rng(0)
    chance = auc(rng.uniform(size=20000), rng.integers(0, 2, size=20000))
    assert abs(chance - 50.0) <= 2.0


def test_auc_mann_whitney():
    rng = np.random.default_rng(1)
    for idx in range(1000):
        scores, labels = _random_set(rng, ties=idx % 2 == 0)
        assert abs(auc(scores, labels) - _mann_whitney(scores, labels)) <= 1e-9


def test_eer_examples():
    assert eer([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])[0] == 0.0
    assert eer([0.4] * 6, [0, 1, 0, 1, 0, 1])[0] == 50.0
    # one inversion: bonafide 0.5 above fake 0.4, crossing exactly at 0.5
    scores = [0.1, 0.2, 0.3, 0.5, 0.4, 0.6, 0.7, 0.8]
    labels = [0, 0, 0, 0, 1, 1, 1, 1]
    assert eer(scores, labels) == pytest.approx((25.0, 0.5), abs=1e-9)
    # no exact crossing: FAR 1/3 -> 1/3 while FRR 1/2 -> 0
    rate, threshold = eer([0.1, 0.2, 0.5, 0.4, 0.9], [0, 0, 0, 1, 1])
    assert rate == pytest.approx(100 / 3, abs=1e-9)
    assert threshold == pytest.approx(0.5 - 0.1 / 3, abs=1e-9)


def test_eer_brute_force():
    rng = np.random.default_rng(2)
    for idx in range(1000):
        scores, labels = _random_set(rng, ties=idx % 2 == 0)
        rate, threshold = eer(scores, labels)
        expected_rate, expected_threshold = _brute_force_eer(scores, labels)
        assert abs(rate - expected_rate) <= 1e-9
        assert abs(threshold - expected_threshold) <= 1e-9
        assert 0 <= rate <= 100


def test_metric_invariances():
    rng = np.random.default_rng(3)
    for _ in range(200):
        scores, labels = _random_set(rng)
        base_eer, base_auc = eer(scores, labels)[0], auc(scores, labels)
        for transform in (np.exp, lambda s: 3 * s + 1, np.arctan):
            assert eer(transform(scores), labels)[0] == pytest.approx(base_eer, abs=1e-9)
            assert auc(transform(scores), labels) == pytest.approx(base_auc, abs=1e-9)
        # negated scores with swapped labels describe the same classifier
        assert eer(-scores, 1 - labels)[0] == pytest.approx(base_eer, abs=1e-9)
        assert auc(-scores, 1 - labels) == pytest.approx(base_auc, abs=1e-9)
        # negated scores alone invert it
        assert auc(-scores, labels) == pytest.approx(100 - base_auc, abs=1e-9)
        assert eer(-scores, labels)[0] == pytest.approx(100 - base_eer, abs=1e-9)


def test_per_attack_eer():
    scores = [0.1, 0.2, 0.9, 0.8, 0.15, 0.05]
    labels = [0, 0, 1, 1, 1, 1]
    attacks = ["bonafide", "bonafide", "melgan", "melgan", "pwg", "pwg"]
    results = per_attack_eer(scores, labels, attacks)
    assert list(results) == ["melgan", "pwg"]
    assert results["melgan"] == 0.0
    assert results["pwg"] > 0.0


def test_evaluate_scores():
    report = evaluate_scores([0.1, 0.1, 0.9, 0.9], [0, 0, 1, 1])
    assert (report.eer_percent, report.auc_percent) == (0.0, 100.0)
    assert (report.n_bonafide, report.n_fake) == (2, 2)
    assert set(report.to_dict()) == {
        "eer_percent", "auc_percent", "eer_threshold", "n_bonafide", "n_fake"
    }
    detailed = evaluate_scores([0.1, 0.9], [0, 1], ["bonafide", "melgan"])
    assert detailed.to_dict()["per_attack"] == {"melgan": 0.0}
    assert isinstance(detailed, EvalReport)
    with pytest.raises(SingleClass):
        evaluate_scores([0.1, 0.9], [0, 0])


# ---------- benchmark.py ----------------
def test_time_calls():
    calls = []
    durations = time_calls(lambda: calls.append(1), iterations=5, warmup=3)
    assert len(durations) == 5
    assert len(calls) == 8  # warm-up calls are not timed
    assert (durations >= 0).all()


def test_bench_inference():
    model = build()
    before = {name: p.value.clone() for name, p in model.named_parameters().items()}
    report = bench_inference(model, batch_sizes=(1, 2), iterations=2, warmup=1, n_frames=64)
    assert [row.batch_size for row in report.rows] == [1, 2]
    for row in report.rows:
        assert row.iterations == 2 and row.mean_ms > 0 and row.lfcc_mean_ms is None
    for name, param in model.named_parameters().items():
        assert torch.equal(param.value, before[name]), name  # weights and statistics untouched
    rows = report.to_list()
    assert set(rows[0]) == {"batch_size", "iterations", "mean_ms", "std_ms", "lfcc_mean_ms"}
    assert report.device.startswith("cpu")


def test_bench_inference_defaults():
    report = bench_inference(build(), iterations=1, warmup=0, n_frames=64, measure_lfcc=True)
    assert [row.batch_size for row in report.rows] == [1, 16, 32]
    for row in report.rows:
        assert row.std_ms == 0.0  # one timed call
        assert row.lfcc_mean_ms > 0


def test_log_reference(caplog):
    report = bench_inference(build(), batch_sizes=(1, 4), iterations=1, warmup=0, n_frames=64)
    with caplog.at_level(logging.INFO):
        log_reference(report)
    assert f"published {REFERENCE_CPU_MS[1]:.3f} ms" in caplog.text
    assert "batch 4: measured" in caplog.text and "n/a" in caplog.text


@pytest.mark.slow
def test_batching_amortizes_latency():
    report = bench_inference(build(), batch_sizes=(1, 32), iterations=20)
    single, batched = report.rows
    assert batched.mean_ms / 32 < single.mean_ms
