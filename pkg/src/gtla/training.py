"""Sequence-at-a-time training of the backbone with Adam.

All randomness (initialization, dropout masks, epoch shuffling) flows from
the single training seed through named substreams, so runs are exactly
reproducible and ablations differ only in the intended factor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import Corpus
from .grouping import GroupSpec, relabel_for_group
from .losses import TrainConfig, total_loss
from .model import (
    AdamState,
    BackboneConfig,
    ModelParams,
    adam_step,
    backward,
    forward,
    init_params,
)
from .priors import TemporalPrior

log = logging.getLogger(__name__)

# Fixed offsets carving independent seed streams out of one training seed.
_STREAMS = {"init": 0, "dropout": 1, "order": 2}


def _substream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_STREAMS[name],)))


@dataclass
class TrainState:
    params: ModelParams
    adam: AdamState
    epoch: int = 0
    history: list[float] = field(default_factory=list)
    dropout_rng: np.random.Generator | None = None
    order_rng: np.random.Generator | None = None

    def rng_payload(self) -> dict:
        return {
            "dropout": self.dropout_rng.bit_generator.state if self.dropout_rng else None,
            "order": self.order_rng.bit_generator.state if self.order_rng else None,
            "epoch": self.epoch,
            "history": self.history,
        }

    @staticmethod
    def restore(params: ModelParams, adam: AdamState, payload: dict) -> "TrainState":
        state = TrainState(params, adam, epoch=int(payload.get("epoch", 0)),
                           history=list(payload.get("history", [])))
        state.dropout_rng = np.random.default_rng(0)
        state.order_rng = np.random.default_rng(0)
        if payload.get("dropout"):
            state.dropout_rng.bit_generator.state = payload["dropout"]
        if payload.get("order"):
            state.order_rng.bit_generator.state = payload["order"]
        return state


def init_train_state(train_cfg: TrainConfig, backbone: BackboneConfig) -> TrainState:
    params = init_params(backbone, _substream(train_cfg.seed, "init"))
    state = TrainState(params, AdamState())
    state.dropout_rng = _substream(train_cfg.seed, "dropout")
    state.order_rng = _substream(train_cfg.seed, "order")
    return state


def train_epoch(state: TrainState, train: Corpus, spec: GroupSpec,
                prior: TemporalPrior, cfg: TrainConfig) -> float:
    """One pass over the corpus in shuffled order; returns the mean loss."""
    order = state.order_rng.permutation(len(train.sequences))
    total = 0.0
    for idx in order:
        seq = train.sequences[idx]
        feats = train.features[idx]
        k = spec.group_of(seq)
        local = relabel_for_group(seq, spec, k)
        out = forward(feats, state.params, mode="train", dropout_rng=state.dropout_rng)
        loss, d_logits, _ = total_loss(out.logits, local, k, spec, prior, cfg)
        grads = backward(out.tape, d_logits)
        adam_step(state.params, grads, state.adam, lr=cfg.lr)
        total += loss
    state.epoch += 1
    mean = total / len(train.sequences)
    state.history.append(mean)
    return mean


def train_model(train: Corpus, spec: GroupSpec, prior: TemporalPrior,
                backbone: BackboneConfig, cfg: TrainConfig,
                state: TrainState | None = None) -> TrainState:
    """Train for cfg.epochs total epochs (continuing from ``state`` if given)."""
    if state is None:
        state = init_train_state(cfg, backbone)
    while state.epoch < cfg.epochs:
        mean = train_epoch(state, train, spec, prior, cfg)
        log.info("epoch %d/%d: loss %.4f", state.epoch, cfg.epochs, mean)
    return state
