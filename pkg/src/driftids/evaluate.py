"""Prequential (test-then-train) evaluation, metrics, aggregation and result files."""

from __future__ import annotations

import csv
import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyStream, SchemaVersionError, SingleClassTrainingSet, TooFewRuns
from .features import OnlineMinMaxScaler, extract_stream
from .labels import MALICIOUS
from .learners.batch_forest import BatchRandomForest
from .packets import read_packets

SCHEMA_VERSION = 1
METRICS = ("f1", "accuracy", "precision", "recall", "auc")


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def add(self, predicted, truth):
        if predicted == MALICIOUS:
            if truth == MALICIOUS:
                self.tp += 1
            else:
                self.fp += 1
        elif truth == MALICIOUS:
            self.fn += 1
        else:
            self.tn += 1

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def as_dict(self):
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def metrics_from_counts(counts: ConfusionCounts) -> dict:
    """Accuracy, precision, recall, F1; any zero denominator yields 0."""
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    total = tp + fp + tn + fn
    if total <= 0:
        raise ValueError("no samples counted")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    # same value as 2PR/(P+R), but a single rounding
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return {
        "accuracy": (tp + tn) / total,
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


def auc(scores, truths) -> Optional[float]:
    """Mann-Whitney AUC with ties counted half; None when a class is absent."""
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(truths) == MALICIOUS
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def throughput(bytes_processed: int, wall_seconds: float) -> float:
    """Megabits per second."""
    if wall_seconds <= 0:
        raise ValueError("wall_seconds must be positive")
    return bytes_processed * 8 / 1e6 / wall_seconds


@dataclass
class RunResult:
    learner: str
    f1_trace: np.ndarray
    counts: ConfusionCounts
    metrics: dict
    drift_events: list
    wall_seconds: float
    bytes_processed: int
    bandwidth_mbps: float
    phases: Optional[np.ndarray] = None
    config: dict = field(default_factory=dict)
    validation: Optional[dict] = None

    @property
    def f1(self):
        return self.metrics["f1"]

    def summary(self) -> dict:
        """JSON-ready dict; run-to-run timing noise lives under ``timing``."""
        out = {
            "schema_version": SCHEMA_VERSION,
            "kind": "run",
            "learner": self.learner,
            "samples": int(len(self.f1_trace)),
            "metrics": {k: self.metrics.get(k) for k in METRICS},
            "confusion": self.counts.as_dict(),
            "drift_events": [int(e) for e in self.drift_events],
            "bytes_processed": int(self.bytes_processed),
            "config": self.config,
            "timing": {
                "wall_seconds": self.wall_seconds,
                "bandwidth_mbps": self.bandwidth_mbps,
            },
        }
        if self.validation is not None:
            out["validation"] = self.validation
        return out


def prequential_run(learner, stream: Sequence, schedule=None, scaler=None, learn=True,
                    config=None) -> RunResult:
    """Test each sample, record the outcome, then train on it.

    ``scaler`` (an :class:`OnlineMinMaxScaler`) is applied before the
    learner sees a sample. ``learn=False`` evaluates a frozen model under
    the same recording.
    """
    n = len(stream)
    if n == 0:
        raise EmptyStream("stream has no samples")
    trace = np.empty(n)
    scores = np.empty(n)
    truths = np.empty(n, dtype=np.int8)
    counts = ConfusionCounts()
    tp = fp = fn = 0
    total_bytes = 0
    predict = learner.predict
    train = learner.learn
    start = time.perf_counter()
    for i, sample in enumerate(stream):
        x = sample.features
        if scaler is not None:
            x = scaler.transform_update(x)
        y = sample.label
        label, score = predict(x)
        if label == MALICIOUS:
            if y == MALICIOUS:
                tp += 1
            else:
                fp += 1
        elif y == MALICIOUS:
            fn += 1
        trace[i] = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
        scores[i] = score
        truths[i] = y
        total_bytes += sample.byte_count
        if learn:
            train(x, y)
    wall = time.perf_counter() - start
    counts.tp, counts.fp, counts.fn = tp, fp, fn
    counts.tn = n - tp - fp - fn
    metrics = metrics_from_counts(counts)
    metrics["auc"] = auc(scores, truths)
    phases = None
    if schedule is not None:
        phases = np.searchsorted(np.asarray(schedule.boundaries), np.arange(n), side="right")
    return RunResult(
        learner=getattr(learner, "name", type(learner).__name__),
        f1_trace=trace,
        counts=counts,
        metrics=metrics,
        drift_events=list(getattr(learner, "drift_events", [])),
        wall_seconds=wall,
        bytes_processed=total_bytes,
        bandwidth_mbps=throughput(total_bytes, wall) if wall > 0 else 0.0,
        phases=phases,
        config=dict(config or {}),
    )


def _prepare(stream, scaler):
    X = np.array([s.features for s in stream])
    if scaler is not None:
        X = np.array([scaler.transform_update(x) for x in X])
    return X, np.array([int(s.label) for s in stream])


def batch_reference_run(train_stream, full_stream, schedule=None, seed=0, forest_params=None,
                        validation_fraction=0.2, scale=False, config=None) -> RunResult:
    """Train a frozen forest on phase-one samples, then replay the whole stream.

    Phase one is split ``1 - validation_fraction`` / ``validation_fraction``
    (seeded); held-out metrics land in ``RunResult.validation``. With
    ``scale`` the forest and the replay share one online scaler that is
    warmed on the training samples and keeps adapting during the replay,
    as scaling is the only preprocessing allowed to keep running.
    """
    labels = {int(s.label) for s in train_stream}
    if len(train_stream) < 2 or len(labels) < 2:
        raise SingleClassTrainingSet("phase-one samples must contain both classes")
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(train_stream))
    n_val = int(round(len(idx) * validation_fraction))
    fit_idx, val_idx = idx[n_val:], idx[:n_val]
    scaler = OnlineMinMaxScaler(len(train_stream[0].features)) if scale else None
    X, y = _prepare(train_stream, scaler)
    if len(set(y[fit_idx].tolist())) < 2:
        raise SingleClassTrainingSet("training split lost a class")
    forest = BatchRandomForest(seed=seed, **(forest_params or {})).fit(X[fit_idx], y[fit_idx])
    validation = None
    if n_val:
        vc = ConfusionCounts()
        val_scores = []
        for i in val_idx:
            label, score = forest.predict(X[i])
            vc.add(label, y[i])
            val_scores.append(score)
        validation = metrics_from_counts(vc)
        validation["auc"] = auc(val_scores, y[val_idx])
        validation["samples"] = int(n_val)
    result = prequential_run(forest, full_stream, schedule, scaler=scaler, learn=False,
                             config=config)
    result.validation = validation
    return result


@dataclass
class AggregateResult:
    learner: str
    mean: dict
    std: dict
    n_runs: int
    best: RunResult
    worst: RunResult
    bandwidth_mean: float
    bandwidth_std: float
    config: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "aggregate",
            "learner": self.learner,
            "runs": self.n_runs,
            "mean": self.mean,
            "std": self.std,
            "best": {"f1": self.best.f1, "metrics": self.best.metrics},
            "worst": {"f1": self.worst.f1, "metrics": self.worst.metrics},
            "drift_events": {
                "best": [int(e) for e in self.best.drift_events],
                "worst": [int(e) for e in self.worst.drift_events],
            },
            "config": self.config,
            "timing": {"bandwidth_mbps_mean": self.bandwidth_mean,
                       "bandwidth_mbps_std": self.bandwidth_std},
        }


def _mean_std(values):
    values = [v for v in values if v is not None]
    if not values:
        return None, None
    if len(values) == 1:
        return float(values[0]), 0.0
    return float(np.mean(values)), float(np.std(values, ddof=1))


def aggregate(results: Sequence[RunResult], config=None) -> AggregateResult:
    """Mean and sample standard deviation (n-1) of each final metric."""
    if len(results) < 2:
        raise TooFewRuns(f"aggregation needs at least 2 runs, got {len(results)}")
    mean, std = {}, {}
    for m in METRICS:
        mean[m], std[m] = _mean_std([r.metrics.get(m) for r in results])
    ranked = sorted(results, key=lambda r: r.f1)
    bw_mean, bw_std = _mean_std([r.bandwidth_mbps for r in results])
    return AggregateResult(
        learner=results[0].learner,
        mean=mean,
        std=std,
        n_runs=len(results),
        best=ranked[-1],
        worst=ranked[0],
        bandwidth_mean=bw_mean,
        bandwidth_std=bw_std,
        config=dict(config or {}),
    )


# ---------------------------------------------------------------------------
# persistence

def atomic_write_text(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(summary: dict, path):
    atomic_write_text(path, to_json(summary))


def trace_csv_text(result: RunResult) -> str:
    lines = ["sample_index,cumulative_f1,phase"]
    phases = result.phases if result.phases is not None else np.zeros(len(result.f1_trace), int)
    for i, (f, p) in enumerate(zip(result.f1_trace, phases)):
        lines.append(f"{i},{float(f)!r},{int(p) + 1}")
    return "\n".join(lines) + "\n"


def write_trace_csv(result: RunResult, path):
    atomic_write_text(path, trace_csv_text(result))


def read_trace_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return (np.array([float(r["cumulative_f1"]) for r in rows]),
            np.array([int(r["phase"]) for r in rows]))


def load_summary(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "schema_version" not in data:
        raise SchemaVersionError(f"{path}: no schema_version field")
    return data


def check_versions(summaries) -> int:
    versions = {s["schema_version"] for s in summaries}
    if len(versions) > 1:
        raise SchemaVersionError(f"mixed result schema versions: {sorted(versions)}")
    (version,) = versions
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"result schema version {version}, expected {SCHEMA_VERSION}")
    return version


def pipeline_run(path, learner, scale=True, config=None) -> RunResult:
    """Time the whole chain: read capture, window features, scale, test-then-train.

    Bandwidth counts raw frame bytes over the wall time of every stage.
    """
    start = time.perf_counter()
    packets, _ = read_packets(path)
    vectors = list(extract_stream(packets))
    scaler = OnlineMinMaxScaler() if scale else None
    result = prequential_run(learner, vectors, scaler=scaler, config=config)
    wall = time.perf_counter() - start
    result.wall_seconds = wall
    result.bytes_processed = sum(p.frame_len for p in packets)
    result.bandwidth_mbps = throughput(result.bytes_processed, wall)
    return result
