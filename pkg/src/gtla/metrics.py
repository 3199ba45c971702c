"""Global and balanced segmentation metrics plus the false-positive taxonomy.

Global metrics follow the usual segmentation protocol (frame accuracy,
normalized edit similarity over segment label lists, segment F1 at IoU
thresholds). Balanced metrics average per class and are reported for head
and tail classes separately together with their harmonic mean, so tail
behaviour is not drowned out by frequent classes. Unmatched predicted
segments are further split into activity-irrelevant (FP1), order-violating
(FP2) and remaining (FP3) false positives.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Corpus, Segment, segments_from_frames
from .grouping import GroupSpec, relabel_for_group
from .inference import Prediction
from .priors import TemporalPrior, temporal_bounds

log = logging.getLogger(__name__)

IOU_THRESHOLDS = (0.10, 0.25, 0.50)
TAXONOMY_IOU = 0.25


def mof_accuracy(preds: Sequence[np.ndarray], gts: Sequence[np.ndarray]) -> float:
    """Percentage of correctly labeled frames, pooled over the corpus."""
    correct = total = 0
    for p, g in zip(preds, gts, strict=True):
        p, g = np.asarray(p), np.asarray(g)
        if p.size != g.size:
            raise ValueError(f"length mismatch: {p.size} vs {g.size}")
        correct += int((p == g).sum())
        total += g.size
    return 100.0 * correct / total


def per_class_recall(preds: Sequence[np.ndarray], gts: Sequence[np.ndarray],
                     num_classes: int) -> dict[int, float]:
    """Frame recall per class, for classes with at least one GT frame."""
    correct = np.zeros(num_classes)
    total = np.zeros(num_classes)
    for p, g in zip(preds, gts, strict=True):
        p, g = np.asarray(p), np.asarray(g)
        total += np.bincount(g, minlength=num_classes)
        correct += np.bincount(g[p == g], minlength=num_classes)
    return {c: 100.0 * correct[c] / total[c]
            for c in range(num_classes) if total[c] > 0}


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Edit distance between two label lists (two-row DP)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        current = [i] + [0] * len(b)
        for j, y in enumerate(b, 1):
            current[j] = min(previous[j] + 1, current[j - 1] + 1,
                             previous[j - 1] + (x != y))
        previous = current
    return previous[-1]


def edit_score(pred_segments: Sequence, gt_segments: Sequence) -> float:
    """Normalized edit similarity (percent) between two segment label lists."""
    pred = [s.label if isinstance(s, Segment) else s for s in pred_segments]
    gt = [s.label if isinstance(s, Segment) else s for s in gt_segments]
    longest = max(len(pred), len(gt))
    if longest == 0:
        return 100.0
    return 100.0 * (1.0 - levenshtein(pred, gt) / longest)


def segment_iou(a: Segment, b: Segment) -> float:
    inter = max(0, min(a.end, b.end) - max(a.start, b.start))
    union = (a.end - a.start) + (b.end - b.start) - inter
    return inter / union if union else 0.0


def match_segments(pred_segments: Sequence[Segment], gt_segments: Sequence[Segment],
                   threshold: float) -> list[int | None]:
    """Match predictions to same-class GT segments with IoU >= threshold.

    Returns the matched GT index per prediction (or None); each GT segment
    is consumed at most once. The assignment is a maximum matching, found
    by augmenting paths in prediction order with higher-IoU candidates
    tried first, so the TP count cannot depend on segment ordering and the
    result is deterministic.
    """
    candidates: list[list[int]] = []
    for pred in pred_segments:
        options = [(segment_iou(pred, gt), -j, j)
                   for j, gt in enumerate(gt_segments)
                   if gt.label == pred.label and segment_iou(pred, gt) >= threshold]
        options.sort(reverse=True)
        candidates.append([j for _, _, j in options])

    gt_owner: dict[int, int] = {}

    def assign(i: int, visited: set[int]) -> bool:
        for j in candidates[i]:
            if j in visited:
                continue
            visited.add(j)
            if j not in gt_owner or assign(gt_owner[j], visited):
                gt_owner[j] = i
                return True
        return False

    for i in range(len(pred_segments)):
        assign(i, set())
    matches: list[int | None] = [None] * len(pred_segments)
    for j, i in gt_owner.items():
        matches[i] = j
    return matches


def match_counts(pred_segments, gt_segments, threshold: float) -> tuple[int, int, int]:
    matches = match_segments(pred_segments, gt_segments, threshold)
    tp = sum(m is not None for m in matches)
    return tp, len(pred_segments) - tp, len(gt_segments) - tp


def f1_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2.0 * precision * recall / (precision + recall)


def f1_at_iou(pred_segments, gt_segments, threshold: float) -> tuple[float, float, float]:
    """(precision, recall, F1) of the greedy IoU matching at one threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    return f1_from_counts(*match_counts(pred_segments, gt_segments, threshold))


def harmonic_mean(head: float, tail: float) -> float:
    if head + tail == 0.0:
        return 0.0
    return 2.0 * head * tail / (head + tail)


@dataclass(frozen=True)
class HeadTailSplit:
    head: frozenset[int]
    tail: frozenset[int]
    threshold: float
    imbalance_ratio: float


def head_tail_split(train: Corpus, threshold: float) -> HeadTailSplit:
    """Split classes by training frame count against the threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    counts = np.zeros(len(train.vocab), dtype=np.int64)
    for seq in train.sequences:
        counts += np.bincount(seq.labels, minlength=len(train.vocab))
    head = frozenset(int(c) for c in np.flatnonzero(counts >= threshold))
    tail = frozenset(int(c) for c in np.flatnonzero(counts < threshold))
    positive = counts[counts > 0]
    if positive.size < len(counts):
        log.warning("classes with zero training frames ignored in the imbalance ratio")
    ratio = float(positive.max() / positive.min()) if positive.size else 0.0
    if not tail:
        log.warning("no tail classes below threshold %s; harmonic means degenerate",
                    threshold)
    return HeadTailSplit(head, tail, float(threshold), ratio)


def _split_average(values: dict[int, float], split: HeadTailSplit,
                   ) -> tuple[float, float, float]:
    head_vals = [v for c, v in values.items() if c in split.head]
    tail_vals = [v for c, v in values.items() if c in split.tail]
    head = float(np.mean(head_vals)) if head_vals else 0.0
    tail = float(np.mean(tail_vals)) if tail_vals else 0.0
    if not tail_vals:
        # Degenerate split: report the head value rather than a 0-collapsed mean.
        return head, tail, head
    if not head_vals:
        return head, tail, tail
    return head, tail, harmonic_mean(head, tail)


def balanced_f1(pred_segments_per_seq: Sequence[Sequence[Segment]],
                gt_segments_per_seq: Sequence[Sequence[Segment]],
                threshold: float, split: HeadTailSplit,
                ) -> tuple[float, float, float, dict[int, float]]:
    """Per-class segment F1 averaged within the head and tail sets.

    Class c's counts use only segments of class c, pooled over the corpus;
    classes with neither GT nor predicted segments are excluded.
    """
    tp: dict[int, int] = {}
    fp: dict[int, int] = {}
    fn: dict[int, int] = {}
    for preds, gts in zip(pred_segments_per_seq, gt_segments_per_seq, strict=True):
        classes = {s.label for s in preds} | {s.label for s in gts}
        for c in classes:
            p_c = [s for s in preds if s.label == c]
            g_c = [s for s in gts if s.label == c]
            t, f, n = match_counts(p_c, g_c, threshold)
            tp[c] = tp.get(c, 0) + t
            fp[c] = fp.get(c, 0) + f
            fn[c] = fn.get(c, 0) + n
    per_class = {c: f1_from_counts(tp[c], fp[c], fn[c])[2] * 100.0 for c in tp}
    head, tail, hmean = _split_average(per_class, split)
    return head, tail, hmean, per_class


def fp_taxonomy(pred_segments: Sequence[Segment], gt_seq, spec: GroupSpec,
                prior: TemporalPrior, group: int | None = None,
                threshold: float = TAXONOMY_IOU) -> dict[str, int]:
    """Classify predicted segments as TP or FP1/FP2/FP3.

    Unmatched predictions whose class does not occur in the sequence's
    group are FP1; ones whose class is in the group but whose midpoint
    falls outside the class's ground-truth-derived temporal bounds are
    FP2; the rest are FP3.
    """
    gt_segments = segments_from_frames(gt_seq)
    k = spec.group_of(gt_seq) if group is None else group
    group_classes = set(spec.classes_of_group[k])
    to_local = spec.global_to_local(k)
    local_labels = relabel_for_group(gt_seq, spec, k)
    matches = match_segments(pred_segments, gt_segments, threshold)
    counts = {"tp": 0, "fp1": 0, "fp2": 0, "fp3": 0}
    for seg, match in zip(pred_segments, matches):
        if match is not None:
            counts["tp"] += 1
        elif seg.label not in group_classes:
            counts["fp1"] += 1
        else:
            lo, hi = temporal_bounds(to_local[seg.label], local_labels, prior.groups[k])
            midpoint = (seg.start + seg.end) // 2
            counts["fp2" if not lo <= midpoint <= hi else "fp3"] += 1
    return counts


def group_id_accuracy(pred_groups: Sequence[int], gt_groups: Sequence[int]) -> float:
    pred_groups = list(pred_groups)
    gt_groups = list(gt_groups)
    if len(pred_groups) != len(gt_groups):
        raise ValueError("prediction/ground-truth length mismatch")
    hits = sum(p == g for p, g in zip(pred_groups, gt_groups))
    return 100.0 * hits / len(gt_groups)


@dataclass
class MetricsReport:
    global_metrics: dict[str, float]
    balanced: dict[str, dict[str, float]]
    fp_counts: dict[str, int]
    group_id_accuracy: float
    head_classes: list[str]
    tail_classes: list[str]
    imbalance_ratio: float
    split_threshold: float
    per_class: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "global": self.global_metrics,
            "balanced": self.balanced,
            "fp_taxonomy": self.fp_counts,
            "group_id_accuracy": self.group_id_accuracy,
            "head_tail": {
                "head": self.head_classes,
                "tail": self.tail_classes,
                "imbalance_ratio": self.imbalance_ratio,
                "threshold": self.split_threshold,
            },
            "per_class": self.per_class,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def compute_report(predictions: Sequence[Prediction], dataset: Corpus,
                   spec: GroupSpec, prior: TemporalPrior, split: HeadTailSplit,
                   gt_groups: Sequence[int],
                   iou_thresholds: Sequence[float] = IOU_THRESHOLDS,
                   exclude_classes: Sequence[int] = ()) -> MetricsReport:
    """Assemble the full metric suite for one evaluated corpus.

    ``exclude_classes`` drops classes (e.g. background) from the per-class
    averages and head/tail sets; global metrics always use every frame.
    """
    vocab = dataset.vocab
    excluded = set(exclude_classes)
    pred_labels = [p.labels for p in predictions]
    gt_labels = [s.labels for s in dataset.sequences]
    pred_segs = [segments_from_frames(p) for p in pred_labels]
    gt_segs = [segments_from_frames(g) for g in gt_labels]

    if excluded:
        split = HeadTailSplit(frozenset(split.head - excluded),
                              frozenset(split.tail - excluded),
                              split.threshold, split.imbalance_ratio)

    global_metrics: dict[str, float] = {
        "mof": mof_accuracy(pred_labels, gt_labels),
        "edit": float(np.mean([edit_score(p, g) for p, g in zip(pred_segs, gt_segs)])),
    }
    pooled = {t: np.zeros(3, dtype=np.int64) for t in iou_thresholds}
    for preds, gts in zip(pred_segs, gt_segs):
        for t in iou_thresholds:
            pooled[t] += match_counts(preds, gts, t)
    for t in iou_thresholds:
        global_metrics[f"f1@{t:.2f}"] = f1_from_counts(*pooled[t])[2] * 100.0

    recalls = per_class_recall(pred_labels, gt_labels, len(vocab))
    recalls = {c: v for c, v in recalls.items() if c not in excluded}
    head_r, tail_r, hmean_r = _split_average(recalls, split)
    balanced: dict[str, dict[str, float]] = {
        "recall": {"head": head_r, "tail": tail_r, "hmean": hmean_r},
    }
    per_class: dict[str, dict[str, float]] = {
        "recall": {vocab.name_of(c): v for c, v in sorted(recalls.items())},
    }
    for t in iou_thresholds:
        # excluded classes are in neither split set, so they never enter
        # the head/tail averages; drop them from the per-class detail only
        head_f, tail_f, hmean_f, per_c = balanced_f1(pred_segs, gt_segs, t, split)
        balanced[f"f1@{t:.2f}"] = {"head": head_f, "tail": tail_f, "hmean": hmean_f}
        per_class[f"f1@{t:.2f}"] = {vocab.name_of(c): v
                                    for c, v in sorted(per_c.items())
                                    if c not in excluded}

    fp_counts = {"tp": 0, "fp1": 0, "fp2": 0, "fp3": 0}
    for pred, segs, seq, k in zip(predictions, pred_segs, dataset.sequences, gt_groups):
        counts = fp_taxonomy(segs, seq, spec, prior, group=int(k))
        for key in fp_counts:
            fp_counts[key] += counts[key]

    gid = group_id_accuracy([p.group for p in predictions], list(gt_groups))
    return MetricsReport(
        global_metrics=global_metrics,
        balanced=balanced,
        fp_counts=fp_counts,
        group_id_accuracy=gid,
        head_classes=sorted(vocab.name_of(c) for c in split.head),
        tail_classes=sorted(vocab.name_of(c) for c in split.tail),
        imbalance_ratio=split.imbalance_ratio,
        split_threshold=split.threshold,
        per_class=per_class,
    )
