"""Per-group class priors and action-ordering priors.

For every group the training data yields a frame-frequency prior over the
group's real classes and, per class, the sets of classes that must precede
or must follow it. Those sets turn into per-sequence temporal bounds that
gate the logit adjustment during training.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import ClassVocab, Corpus, FrameSeq, segment_labels
from .errors import ConfigError, FormatError
from .grouping import GroupSpec, relabel_for_group

log = logging.getLogger(__name__)

PRIOR_CLAMP = 1e-6


@dataclass(frozen=True)
class GroupPrior:
    """Prior and ordering sets for one group, over its real local classes."""

    prior: np.ndarray  # length = number of real classes, sums to 1
    must_precede: tuple[frozenset[int], ...]
    must_follow: tuple[frozenset[int], ...]

    def __post_init__(self):
        for c, (bf, af) in enumerate(zip(self.must_precede, self.must_follow)):
            if bf & af:
                raise ValueError(f"class {c}: precede/follow sets overlap")
            if c in bf or c in af:
                raise ValueError(f"class {c}: ordering set contains the class itself")

    @property
    def num_classes(self) -> int:
        return int(self.prior.size)

    def clamped_log_prior(self) -> np.ndarray:
        return np.log(np.clip(self.prior, PRIOR_CLAMP, 1.0 - PRIOR_CLAMP))


@dataclass(frozen=True)
class TemporalPrior:
    groups: tuple[GroupPrior, ...]


def class_prior(group_train: Sequence[FrameSeq], spec: GroupSpec, k: int) -> np.ndarray:
    """Frame-frequency prior over group k's real classes.

    The ``others`` class gets no prior; it is excluded from adjustment.
    """
    if not group_train:
        raise ConfigError(f"group {k} has no training sequences")
    num_real = spec.num_real_classes(k)
    counts = np.zeros(num_real, dtype=np.float64)
    total = 0
    for seq in group_train:
        local = relabel_for_group(seq, spec, k)
        counts += np.bincount(local, minlength=num_real + 1)[:num_real]
        total += local.size
    return counts / total


def extract_temporal_sets(segment_label_seqs: Iterable[Sequence[int]],
                          c: int) -> tuple[frozenset[int], frozenset[int]]:
    """Mine the must-precede / must-follow sets of class ``c``.

    Works on segment-level label lists: ``after`` collects every label seen
    strictly after an occurrence of ``c`` in any sequence, ``before`` the
    ones seen strictly before; the set differences keep only classes whose
    position relative to ``c`` never varies.
    """
    after: set[int] = set()
    before: set[int] = set()
    found = False
    for labels in segment_label_seqs:
        positions = [i for i, lab in enumerate(labels) if lab == c]
        if not positions:
            continue
        found = True
        for i in positions:
            after.update(labels[i + 1:])
            before.update(labels[:i])
    if not found:
        log.warning("class %d never occurs; ordering sets are empty", c)
    return frozenset(before - after), frozenset(after - before)


def extract_priors(train: Corpus, spec: GroupSpec) -> TemporalPrior:
    """Build priors and ordering sets for every group of the spec."""
    groups = []
    for k in range(spec.n):
        seqs = [s for s in train.sequences if spec.group_of(s) == k]
        prior = class_prior(seqs, spec, k)
        seg_seqs = [segment_labels(relabel_for_group(s, spec, k)) for s in seqs]
        num_real = spec.num_real_classes(k)
        precede, follow = [], []
        for c in range(num_real):
            bf, af = extract_temporal_sets(seg_seqs, c)
            precede.append(bf)
            follow.append(af)
        groups.append(GroupPrior(prior, tuple(precede), tuple(follow)))
    return TemporalPrior(tuple(groups))


def temporal_bounds(c: int, labels: np.ndarray, prior: GroupPrior) -> tuple[int, int]:
    """Frame window [lo, hi] (inclusive) where class ``c`` may be adjusted.

    lo is the last frame whose label must precede c, hi the first frame
    whose label must follow c. An empty ordering set, or one whose classes
    do not occur in this sequence, opens the corresponding side fully.
    """
    labels = np.asarray(labels)
    lo, hi = 0, int(labels.size)
    precede = prior.must_precede[c]
    if precede:
        hits = np.flatnonzero(np.isin(labels, list(precede)))
        if hits.size:
            lo = int(hits[-1])
    follow = prior.must_follow[c]
    if follow:
        hits = np.flatnonzero(np.isin(labels, list(follow)))
        if hits.size:
            hi = int(hits[0])
    return lo, hi


def bounds_matrix(labels: np.ndarray, prior: GroupPrior) -> tuple[np.ndarray, np.ndarray]:
    """Per-class lower/upper adjustment bounds for one sequence."""
    num = prior.num_classes
    lo = np.empty(num, dtype=np.int64)
    hi = np.empty(num, dtype=np.int64)
    for c in range(num):
        lo[c], hi[c] = temporal_bounds(c, labels, prior)
    return lo, hi


def temporal_factor(c: int, t: int, bounds: tuple[int, int], y_t: int,
                    prior: GroupPrior) -> float:
    """Adjustment multiplier for class c at frame t.

    Inside the bounds the adjustment applies in full; outside, the factor
    rescales it to match the true label's own adjustment, so the relative
    margin between c and the label is left untouched.
    """
    lo, hi = bounds
    if lo <= t <= hi:
        return 1.0
    log_p = prior.clamped_log_prior()
    return float(log_p[y_t] / log_p[c])


def temporal_factor_matrix(labels: np.ndarray, prior: GroupPrior) -> np.ndarray:
    """Factor matrix F (classes x frames) for a whole relabeled sequence."""
    labels = np.asarray(labels)
    num = prior.num_classes
    if np.any(labels >= num):
        raise ValueError("sequence contains `others` frames; temporal factors "
                         "are defined for the target group only")
    lo, hi = bounds_matrix(labels, prior)
    t = np.arange(labels.size)
    inside = (t[None, :] >= lo[:, None]) & (t[None, :] <= hi[:, None])
    log_p = prior.clamped_log_prior()
    ratio = log_p[labels][None, :] / log_p[:, None]
    return np.where(inside, 1.0, ratio)


def temporal_prior_to_dict(prior: TemporalPrior, spec: GroupSpec,
                           vocab: ClassVocab) -> dict:
    groups = []
    for k, gp in enumerate(prior.groups):
        names = [vocab.name_of(g) for g in spec.classes_of_group[k]]
        groups.append({
            "prior": {names[c]: float(p) for c, p in enumerate(gp.prior)},
            "must_precede": {names[c]: sorted(names[x] for x in gp.must_precede[c])
                             for c in range(gp.num_classes)},
            "must_follow": {names[c]: sorted(names[x] for x in gp.must_follow[c])
                            for c in range(gp.num_classes)},
        })
    return {"version": 1, "groups": groups}


def temporal_prior_from_dict(payload: dict, spec: GroupSpec,
                             vocab: ClassVocab) -> TemporalPrior:
    try:
        groups = []
        for k, entry in enumerate(payload["groups"]):
            names = [vocab.name_of(g) for g in spec.classes_of_group[k]]
            local = {name: c for c, name in enumerate(names)}
            prior = np.array([entry["prior"][name] for name in names])
            precede = tuple(frozenset(local[x] for x in entry["must_precede"][name])
                            for name in names)
            follow = tuple(frozenset(local[x] for x in entry["must_follow"][name])
                           for name in names)
            groups.append(GroupPrior(prior, precede, follow))
        return TemporalPrior(tuple(groups))
    except KeyError as exc:
        raise FormatError(f"temporal prior missing key {exc}") from exc


def save_temporal_prior(path: str | Path, prior: TemporalPrior, spec: GroupSpec,
                        vocab: ClassVocab) -> None:
    Path(path).write_text(
        json.dumps(temporal_prior_to_dict(prior, spec, vocab),
                   indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def load_temporal_prior(path: str | Path, spec: GroupSpec,
                        vocab: ClassVocab) -> TemporalPrior:
    return temporal_prior_from_dict(
        json.loads(Path(path).read_text(encoding="utf-8")), spec, vocab)
