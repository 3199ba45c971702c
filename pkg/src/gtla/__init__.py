"""Long-tail temporal action segmentation with group-wise temporal logit adjustment.

The package covers the full pipeline: synthetic long-tailed corpora and
Breakfast-format I/O (:mod:`gtla.data`), group construction by activity or
clustering (:mod:`gtla.grouping`), class and ordering priors
(:mod:`gtla.priors`), a small dilated temporal convolution backbone with
exact gradients (:mod:`gtla.model`), adjusted training losses
(:mod:`gtla.losses`, :mod:`gtla.training`), group-aware decoding
(:mod:`gtla.inference`), and the balanced metric suite (:mod:`gtla.metrics`).
"""

from .data import (
    ClassVocab,
    Corpus,
    FeatureMatrix,
    FrameSeq,
    Segment,
    SynthConfig,
    load_corpus,
    longtail_benchmark_config,
    segments_from_frames,
    synth_generate,
    write_corpus,
)
from .grouping import (
    ByActivity,
    ByClustering,
    GroupSpec,
    action_frequency,
    build_group_spec,
    hierarchical_cluster,
    relabel_for_group,
    symmetric_kl,
)
from .inference import Prediction, decode_labels, identify_group, predict_corpus
from .losses import TrainConfig, ce_loss, gtla_adjust, gtla_loss, la_loss, smoothing_loss, total_loss
from .metrics import (
    HeadTailSplit,
    MetricsReport,
    compute_report,
    edit_score,
    f1_at_iou,
    fp_taxonomy,
    group_id_accuracy,
    head_tail_split,
    mof_accuracy,
    per_class_recall,
)
from .model import AdamState, BackboneConfig, ModelParams, adam_step, backward, forward, init_params
from .priors import (
    GroupPrior,
    TemporalPrior,
    class_prior,
    extract_priors,
    extract_temporal_sets,
    temporal_bounds,
    temporal_factor,
)
from .training import TrainState, train_model

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BackboneConfig",
    "ByActivity",
    "ByClustering",
    "ClassVocab",
    "Corpus",
    "FeatureMatrix",
    "FrameSeq",
    "GroupPrior",
    "GroupSpec",
    "HeadTailSplit",
    "MetricsReport",
    "ModelParams",
    "Prediction",
    "Segment",
    "SynthConfig",
    "TemporalPrior",
    "TrainConfig",
    "TrainState",
    "action_frequency",
    "adam_step",
    "backward",
    "build_group_spec",
    "ce_loss",
    "class_prior",
    "compute_report",
    "decode_labels",
    "edit_score",
    "extract_priors",
    "extract_temporal_sets",
    "f1_at_iou",
    "forward",
    "fp_taxonomy",
    "group_id_accuracy",
    "gtla_adjust",
    "gtla_loss",
    "head_tail_split",
    "hierarchical_cluster",
    "identify_group",
    "init_params",
    "la_loss",
    "load_corpus",
    "longtail_benchmark_config",
    "mof_accuracy",
    "per_class_recall",
    "predict_corpus",
    "relabel_for_group",
    "segments_from_frames",
    "smoothing_loss",
    "symmetric_kl",
    "synth_generate",
    "temporal_bounds",
    "temporal_factor",
    "total_loss",
    "train_model",
    "write_corpus",
]
