"""Target adaptation by multi-expert brainstorming.

Every epoch:
  1. cluster the averaged, normalised features of the group into pseudo-labels;
  2. point every target head at the centroids of the pseudo-labels in that
     expert's own feature space;
  3. score each expert's authority by its own cluster scatter;
  4. run the iterations: teachers are snapshotted first, then each student is
     updated on its brainstorming loss and every temporal average moves toward
     its student.

The ``single_transfer`` variant runs the same loop once per expert, each on
its own clustering and with the voting loss only.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from meb.authority import epoch_authority
from meb.cluster import (
    assign_pseudo_labels,
    cluster_centroids,
    dump_assignment,
    ensemble_features,
    expert_features,
    minibatch_kmeans,
    pseudo_label_purity,
)
from meb.core.errors import ConfigError, NonFiniteError
from meb.core.logger import logger, timer
from meb.core.utils import derive_seed, make_rng
from meb.data.records import SplitDataset
from meb.data.sampler import PKSampler
from meb.evaluation.retrieval import evaluate_ensemble, evaluate_expert
from meb.experts.checkpoint import save_checkpoint
from meb.experts.model import TARGET_HEAD, ExpertModel, ema_update, forward, reset_target_head
from meb.losses import brainstorm_loss, mine_hard, teacher_signal, voting_loss
from meb.numcore import GradTape, Tensor
from meb.schemas.enums import Ablation, Domain, ParamSet, variant_name
from meb.schemas.reports import LossBreakdown, MetricsReport
from meb.schemas.training import AdaptConfig, LossConfig
from meb.services.metrics_publisher import MetricsPublisher, NullPublisher
from meb.trainloop.guard import abort_training, non_finite
from meb.trainloop.optim import Adam


@dataclass
class AdaptResult:
    experts: list[ExpertModel]
    variant: str
    reports: list[MetricsReport] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)

    def final(self) -> dict[str, MetricsReport]:
        """Reports of the last evaluated epoch, keyed by expert name."""
        if not self.reports:
            return {}
        last = max(r.epoch for r in self.reports)
        return {r.expert: r for r in self.reports if r.epoch == last}


def loss_config(cfg: AdaptConfig, weights: list[float] | None) -> LossConfig:
    return LossConfig(
        epsilon=cfg.epsilon,
        use_authority=cfg.authority_enabled,
        weights=weights,
        mutual_identity=cfg.mutual_enabled and not cfg.has(Ablation.NO_MID),
        mutual_triplet=cfg.mutual_enabled and not cfg.has(Ablation.NO_MTRI),
    )


class _Group:
    """Experts that share one clustering, one sampler stream and one another as teachers."""

    def __init__(self, key: str, experts: list[ExpertModel], cfg: AdaptConfig):
        self.key = key
        self.experts = experts
        self.optimizers = [Adam(cfg.lr, cfg.weight_decay) for _ in experts]
        self.breakdowns: list[list[LossBreakdown]] = [[] for _ in experts]
        self.weights = [1.0] * len(experts)
        self.purity = 0.0


def _cluster_params(cfg: AdaptConfig) -> ParamSet:
    return ParamSet.THETA_AVG if cfg.temporal_average else ParamSet.THETA


def _eval_params(cfg: AdaptConfig) -> ParamSet:
    return _cluster_params(cfg)


def _prepare_epoch(group: _Group, target: SplitDataset, cfg: AdaptConfig, seed: int, epoch: int,
                   out_dir: Path | None, dump_clusters: bool) -> np.ndarray:
    x = target.train.features
    with timer("clustering", extra_data={"group": group.key, "epoch": epoch}):
        points = ensemble_features(group.experts, x, _cluster_params(cfg))
        assignment = minibatch_kmeans(
            points,
            cfg.num_clusters,
            batch_size=cfg.cluster.resolved_batch_size(points.shape[0]),
            iters=cfg.cluster.iters,
            seed=derive_seed(seed, "kmeans", group.key, epoch),
            seeding_sample=cfg.cluster.seeding_sample,
        )
    pseudo = assign_pseudo_labels(assignment, target.train)
    # true identities are read for reporting only
    group.purity = pseudo_label_purity(pseudo.labels, target.train.identities)
    if dump_clusters and out_dir is not None:
        dump_assignment(out_dir / "clusters" / f"{group.key}_epoch{epoch:03d}.csv", assignment)

    for expert, optimizer in zip(group.experts, group.optimizers):
        own = expert_features(expert, x, _cluster_params(cfg))
        centroids = cluster_centroids(own, pseudo.labels, cfg.num_clusters, fallback=assignment.centroids)
        reset_target_head(expert, centroids, cfg.num_clusters)
        optimizer.reset([f"{TARGET_HEAD}.weight", f"{TARGET_HEAD}.bias"])

    group.weights = [1.0] * len(group.experts)
    if cfg.authority_enabled and len(group.experts) > 1:
        report = epoch_authority(group.experts, x, cfg.num_clusters, derive_seed(seed, "authority", epoch),
                                 epoch, cfg.cluster, _cluster_params(cfg))
        group.weights = report.weights
    return pseudo.labels


def _iteration(group: _Group, x: np.ndarray, labels: np.ndarray, sampler: PKSampler, rng: np.random.Generator,
               cfg: AdaptConfig, loss_cfg: LossConfig, alpha: float, context: dict, out_dir: Path | None) -> None:
    batch = sampler.sample(cfg.P, cfg.K, rng)
    xb = Tensor(x[batch.indices])
    mutual = len(group.experts) > 1 and (loss_cfg.mutual_identity or loss_cfg.mutual_triplet)

    teacher_which = ParamSet.THETA_AVG if cfg.temporal_average else ParamSet.THETA
    snapshot = []
    if mutual:
        for m in group.experts:
            out = forward(m, teacher_which, xb)
            snapshot.append((out.features.data.copy(), out.logits_tgt.data.copy()))

    for k, (student, optimizer) in enumerate(zip(group.experts, group.optimizers)):
        names = student.trainable()
        try:
            with GradTape() as tape:
                out = forward(student, ParamSet.THETA, xb)
                mined = mine_hard(out.features, batch.labels)
                if mutual:
                    teachers = [teacher_signal(e, feats, logits, mined)
                                for e, (feats, logits) in enumerate(snapshot) if e != k]
                    total, breakdown = brainstorm_loss(out.features, out.logits_tgt, teachers, mined, batch.labels,
                                                       loss_cfg)
                else:
                    l_id, l_tri = voting_loss(out.features, out.logits_tgt, batch.labels, mined, cfg.epsilon)
                    total = l_id + l_tri
                    breakdown = LossBreakdown(id=l_id.item(), tri=l_tri.item(), total=total.item())
            grads = dict(zip(names, tape.gradient(total, [student.theta[n] for n in names])))
        except NonFiniteError as exc:
            raise abort_training(exc.detail, out_dir, {**context, "expert": student.name})
        bad = non_finite(grads)
        if bad:
            raise abort_training("non-finite gradient", out_dir, {**context, "expert": student.name, "tensors": bad})
        optimizer.step(student.theta, grads)
        group.breakdowns[k].append(breakdown)

    for m in group.experts:
        ema_update(m, alpha)


def _groups(experts: list[ExpertModel], cfg: AdaptConfig) -> list[_Group]:
    if cfg.has(Ablation.SINGLE_TRANSFER):
        return [_Group(m.name, [m], cfg) for m in experts]
    if len(experts) < 2:
        raise ConfigError("brainstorming needs at least two experts; use single_transfer for one")
    return [_Group("all", list(experts), cfg)]


def adapt_target(
        experts: Sequence[ExpertModel],
        target: SplitDataset,
        cfg: AdaptConfig,
        seed: int,
        publisher: MetricsPublisher | None = None,
        out_dir: Path | str | None = None,
        dump_clusters: bool = False,
) -> AdaptResult:
    """Adapt pre-trained experts to the unlabelled target split; the experts are updated in place."""
    if target.domain != Domain.TARGET:
        raise ConfigError(f"adaptation expects the target domain, got {target.domain.value}")
    experts = list(experts)
    for m in experts:
        if m.input_dim != target.input_dim:
            raise ConfigError(f"{m.name} expects {m.input_dim}-dim inputs, target has {target.input_dim}")
    if len(target.train) < cfg.num_clusters:
        raise ConfigError(f"{len(target.train)} target records cannot form {cfg.num_clusters} clusters")

    publisher = publisher or NullPublisher()
    out_dir = Path(out_dir) if out_dir is not None else None
    variant = variant_name(cfg.ablations)
    alpha = cfg.alpha if cfg.temporal_average else 0.0
    groups = _groups(experts, cfg)
    result = AdaptResult(experts=experts, variant=variant)
    x = target.train.features

    for epoch in range(1, cfg.epochs + 1):
        with timer("adaptation epoch", extra_data={"variant": variant, "epoch": epoch}):
            for group in groups:
                labels = _prepare_epoch(group, target, cfg, seed, epoch, out_dir, dump_clusters)
                sampler = PKSampler(labels)
                rng = make_rng(seed, "adapt", group.key, epoch)
                loss_cfg = loss_config(cfg, group.weights)
                group.breakdowns = [[] for _ in group.experts]
                for it in range(cfg.iterations_per_epoch):
                    context = {"variant": variant, "epoch": epoch, "iteration": it}
                    _iteration(group, x, labels, sampler, rng, cfg, loss_cfg, alpha, context, out_dir)
            _finish_epoch(result, groups, target, cfg, epoch, publisher)

        if out_dir is not None and cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            save_checkpoint(out_dir / "checkpoints" / f"epoch{epoch:03d}", experts,
                            {"variant": variant, "epoch": epoch})
    return result


def _finish_epoch(result: AdaptResult, groups: list[_Group], target: SplitDataset, cfg: AdaptConfig, epoch: int,
                  publisher) -> None:
    evaluate_now = epoch % cfg.eval_every == 0 or epoch == cfg.epochs
    which = _eval_params(cfg)
    for group in groups:
        for expert, weight, breakdowns in zip(group.experts, group.weights, group.breakdowns):
            record = {
                "variant": result.variant,
                "epoch": epoch,
                "expert": expert.name,
                "losses": LossBreakdown.average(breakdowns).as_dict(),
                "w": weight,
                "purity": group.purity,
            }
            if evaluate_now:
                report = evaluate_expert(expert, target, which, epoch=epoch)
                result.reports.append(report)
                record["metrics"] = report.summary()
            logger.info("Adaptation epoch", **record)
            publisher.publish("epoch", record)
            result.history.append(record)

    if evaluate_now and len(result.experts) > 1:
        report = evaluate_ensemble(result.experts, target, which, epoch=epoch)
        result.reports.append(report)
        record = {"variant": result.variant, "epoch": epoch, "expert": "ensemble", "metrics": report.summary()}
        publisher.publish("epoch", record)
        result.history.append(record)
