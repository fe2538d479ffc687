"""Supervised training of every expert on a labelled split.

Used for source pre-training and for the labelled-target upper bound. Each
expert trains on its own PK batch stream with the identity plus softmax-triplet
objective; at the end the temporal average is synced to the trained weights.
"""
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from meb.core.errors import ConfigError, NonFiniteError
from meb.core.logger import logger, timer
from meb.core.utils import make_rng
from meb.data.records import SplitDataset, label_index
from meb.data.sampler import PKSampler
from meb.evaluation.retrieval import evaluate_expert
from meb.experts.model import TARGET_HEAD, ExpertModel, forward, sync_average
from meb.losses import mine_hard, source_loss
from meb.numcore import GradTape, Tensor
from meb.schemas.enums import Domain, ParamSet
from meb.schemas.reports import LossBreakdown
from meb.schemas.training import PretrainConfig
from meb.services.metrics_publisher import MetricsPublisher, NullPublisher
from meb.trainloop.guard import abort_training, non_finite
from meb.trainloop.optim import Adam, step_lr


def _check_fit(experts: Sequence[ExpertModel], dataset: SplitDataset, num_classes: int) -> None:
    for m in experts:
        if m.input_dim != dataset.input_dim:
            raise ConfigError(f"{m.name} expects {m.input_dim}-dim inputs, dataset has {dataset.input_dim}")
        if m.num_source_classes != num_classes:
            raise ConfigError(f"{m.name} classifies {m.num_source_classes} identities, dataset has {num_classes}")


def _train_expert(
        expert: ExpertModel,
        dataset: SplitDataset,
        labels: np.ndarray,
        cfg: PretrainConfig,
        seed: int,
        stage: str,
        publisher,
        out_dir: Path | None,
) -> list[dict]:
    rng = make_rng(seed, stage, expert.name)
    sampler = PKSampler(labels)
    optimizer = Adam(cfg.lr, cfg.weight_decay)
    x = dataset.train.features
    iterations = cfg.iterations_per_epoch or max(1, math.ceil(len(labels) / (cfg.P * cfg.K)))
    names = [n for n in expert.trainable() if not n.startswith(TARGET_HEAD)]
    history = []

    for epoch in range(1, cfg.epochs + 1):
        optimizer.lr = step_lr(cfg.lr, epoch, cfg.lr_milestones, cfg.lr_gamma)
        breakdowns = []
        for it in range(iterations):
            batch = sampler.sample(cfg.P, cfg.K, rng)
            try:
                with GradTape() as tape:
                    out = forward(expert, ParamSet.THETA, Tensor(x[batch.indices]))
                    mined = mine_hard(out.features, batch.labels)
                    l_id, l_tri = source_loss(out.features, out.logits_src, batch.labels, mined, cfg.epsilon)
                    total = l_id + l_tri
                grads = dict(zip(names, tape.gradient(total, [expert.theta[n] for n in names])))
            except NonFiniteError as exc:
                raise abort_training(exc.detail, out_dir, {"stage": stage, "expert": expert.name, "epoch": epoch,
                                                           "iteration": it})
            bad = non_finite(grads)
            if bad:
                raise abort_training("non-finite gradient", out_dir, {"stage": stage, "expert": expert.name,
                                                                     "epoch": epoch, "iteration": it,
                                                                     "tensors": bad})
            optimizer.step(expert.theta, grads)
            breakdowns.append(LossBreakdown(id=l_id.item(), tri=l_tri.item(), total=total.item()))

        losses = LossBreakdown.average(breakdowns)
        record = {"stage": stage, "epoch": epoch, "expert": expert.name, "lr": optimizer.lr,
                  "losses": losses.as_dict()}
        if cfg.eval_every and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
            record["metrics"] = evaluate_expert(expert, dataset, ParamSet.THETA, epoch=epoch).summary()
        logger.info("Supervised epoch", **record)
        publisher.publish("epoch", record)
        history.append(record)
    return history


def _supervised(
        experts: Sequence[ExpertModel],
        dataset: SplitDataset,
        cfg: PretrainConfig,
        seed: int,
        stage: str,
        publisher: MetricsPublisher | None,
        out_dir: Path | str | None,
) -> list[dict]:
    labels, classes = label_index(dataset.train.identities)
    _check_fit(experts, dataset, classes.size)
    publisher = publisher or NullPublisher()
    out_dir = Path(out_dir) if out_dir is not None else None
    history = []
    for expert in experts:
        with timer(f"{stage} {expert.name}", extra_data={"epochs": cfg.epochs}):
            history.extend(_train_expert(expert, dataset, labels, cfg, seed, stage, publisher, out_dir))
        sync_average(expert)
    return history


def pretrain_source(
        experts: Sequence[ExpertModel],
        source: SplitDataset,
        cfg: PretrainConfig,
        seed: int,
        publisher: MetricsPublisher | None = None,
        out_dir: Path | str | None = None,
) -> list[dict]:
    """Train each expert on the labelled source split; returns one record per expert and epoch."""
    if source.domain != Domain.SOURCE:
        raise ConfigError(f"pretraining expects the source domain, got {source.domain.value}")
    return _supervised(experts, source, cfg, seed, "pretrain", publisher, out_dir)


def train_supervised(
        experts: Sequence[ExpertModel],
        target: SplitDataset,
        cfg: PretrainConfig,
        seed: int,
        publisher: MetricsPublisher | None = None,
        out_dir: Path | str | None = None,
) -> list[dict]:
    """Upper bound: the same training on target identities, which adaptation never sees."""
    if target.domain != Domain.TARGET:
        raise ConfigError(f"the supervised upper bound trains on the target domain, got {target.domain.value}")
    return _supervised(experts, target, cfg, seed, "supervised", publisher, out_dir)
