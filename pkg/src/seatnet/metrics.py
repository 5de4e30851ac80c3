"""Thresholded binary metrics with per-condition breakdowns.

Driver is the positive class; the boundary is inclusive (probability equal to
the threshold classifies as driver). Counts always satisfy
TP + FP + TN + FN = number of evaluated images.
"""

from dataclasses import dataclass, field

import numpy as np

from seatnet.data import preprocess
from seatnet.errors import ConfigError, DataError
from seatnet.model import forward_infer


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.total if self.total else 0.0


@dataclass(frozen=True)
class Metrics:
    threshold: float
    counts: Counts
    groups: dict = field(default_factory=dict)  # column -> {key: Counts}

    @property
    def accuracy(self):
        return self.counts.accuracy


def classify(probability, threshold):
    """'driver' iff probability >= threshold (boundary inclusive)."""
    return "driver" if probability >= threshold else "passenger"


def confusion_counts(probs, labels, threshold):
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    pred = probs >= threshold
    pos = labels == 1
    return Counts(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def metrics_from_probs(probs, labels, threshold, group_keys=None, group_by=()):
    """Pure math layer: counts + optional group breakdowns from cached
    probabilities. ``group_keys`` maps column name -> per-record key list."""
    groups = {}
    for column in group_by:
        keys = group_keys[column]
        table = {}
        for key in sorted(set(keys)):
            sel = np.array([k == key for k in keys])
            table[key] = confusion_counts(
                np.asarray(probs)[sel], np.asarray(labels)[sel], threshold
            )
        groups[column] = table
    return Metrics(
        threshold=threshold,
        counts=confusion_counts(probs, labels, threshold),
        groups=groups,
    )


def predict_probs(config, weights, records, chunk=64):
    """Deterministic eval preprocessing + infer-mode forward over records."""
    if not records:
        raise DataError("no records to evaluate")
    probs = np.empty(len(records), dtype=np.float32)
    labels = np.empty(len(records), dtype=np.int64)
    batch = []
    for i, rec in enumerate(records):
        x, y = preprocess(
            rec,
            "eval",
            input_size=config.input_size,
            rescale_target=config.rescale_short_side,
        )
        batch.append(x)
        labels[i] = y
        if len(batch) == chunk or i == len(records) - 1:
            probs[i + 1 - len(batch) : i + 1] = forward_infer(
                config, weights, np.stack(batch)
            )
            batch = []
    return probs, labels


def _group_keys(records, group_by):
    keys = {}
    for column in group_by:
        if column not in ("time_of_day", "year", "make", "model", "car_id", "seat"):
            raise ConfigError(f"cannot group by {column!r}")
        keys[column] = [str(getattr(r, column)) for r in records]
    return keys


def evaluate(config, weights, records, threshold=0.5, group_by=()):
    """Counts and accuracy at one threshold, with optional breakdowns by a
    manifest column (e.g. time_of_day, year)."""
    probs, labels = predict_probs(config, weights, records)
    return metrics_from_probs(
        probs, labels, threshold, _group_keys(records, group_by), group_by
    )


def threshold_sweep(config, weights, records, grid, group_by=()):
    """One Metrics per threshold from a single cached probability pass."""
    grid = list(grid)
    if not grid:
        raise ConfigError("threshold grid is empty")
    if any(not 0.0 < t < 1.0 for t in grid):
        raise ConfigError(f"thresholds must lie in (0, 1), got {grid}")
    if sorted(grid) != grid:
        raise ConfigError("threshold grid must be sorted ascending")
    probs, labels = predict_probs(config, weights, records)
    keys = _group_keys(records, group_by)
    return [
        (t, metrics_from_probs(probs, labels, t, keys, group_by)) for t in grid
    ]


def format_report(metrics, provenance=()):
    """Stable, diffable text report: summary section, then one section per
    group table in sorted key order."""
    lines = ["[summary]"]
    lines.append(f"threshold = {metrics.threshold:.6f}")
    c = metrics.counts
    lines.append(f"total = {c.total}")
    lines.append(f"tp = {c.tp}")
    lines.append(f"fp = {c.fp}")
    lines.append(f"tn = {c.tn}")
    lines.append(f"fn = {c.fn}")
    lines.append(f"accuracy = {c.accuracy:.4f}")
    if provenance:
        lines.append("")
        lines.append("[config]")
        for key, value in provenance:
            lines.append(f"{key} = {value}")
    for column in sorted(metrics.groups):
        for key in sorted(metrics.groups[column]):
            g = metrics.groups[column][key]
            lines.append("")
            lines.append(f"[group:{column} {key}]")
            lines.append(f"total = {g.total}")
            lines.append(f"tp = {g.tp}")
            lines.append(f"fp = {g.fp}")
            lines.append(f"tn = {g.tn}")
            lines.append(f"fn = {g.fn}")
            lines.append(f"accuracy = {g.accuracy:.4f}")
    return "\n".join(lines) + "\n"


def write_report(path, metrics, provenance=()):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_report(metrics, provenance))
