"""Pipeline stages behind the ``meb`` subcommands.

Stage outputs under the run directory ``out``::

    config.resolved.json  run.json
    data/source.csv  data/target.csv
    pretrain/checkpoint/  pretrain/metrics.jsonl  pretrain/summary.json
    adapt/<variant>/...   eval/<name>/...
"""
from pathlib import Path

from meb.core.errors import ArtifactMissingError
from meb.core.logger import logger, timer
from meb.core.utils import code_version, write_json
from meb.data.generator import generate
from meb.data.io import load_dataset, save_dataset
from meb.data.records import SplitDataset, label_index
from meb.evaluation.retrieval import evaluate_ensemble, evaluate_expert, write_per_query_ap
from meb.experts.checkpoint import load_checkpoint, save_checkpoint
from meb.experts.model import ExpertModel, build_experts
from meb.schemas.enums import ParamSet, variant_name
from meb.schemas.experiment import ExperimentConfig
from meb.services.metrics_publisher import MetricsPublisher
from meb.trainloop.adapt import adapt_target
from meb.trainloop.supervised import pretrain_source, train_supervised

SOURCE_FILE = "source.csv"
TARGET_FILE = "target.csv"


def record_run(cfg: ExperimentConfig, out: Path, command: str, **extra) -> None:
    write_json(out / "config.resolved.json", cfg.resolved())
    write_json(out / "run.json", {"code_version": code_version(), "seed": cfg.seed, "command": command, **extra})


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise ArtifactMissingError(f"{path} not found; {hint}")
    return path


def load_domains(out: Path) -> tuple[SplitDataset, SplitDataset]:
    data = out / "data"
    source = load_dataset(_require(data / SOURCE_FILE, "run `meb gen` first"))
    target = load_dataset(_require(data / TARGET_FILE, "run `meb gen` first"))
    return source, target


def evaluate_all(experts: list[ExpertModel], dataset: SplitDataset, which: ParamSet) -> dict:
    reports = [evaluate_expert(m, dataset, which) for m in experts]
    reports.append(evaluate_ensemble(experts, dataset, which))
    return {r.expert: r for r in reports}


def run_gen(cfg: ExperimentConfig, out: Path) -> list[Path]:
    source, target = generate(cfg.generator)
    paths = [save_dataset(source, out / "data" / SOURCE_FILE), save_dataset(target, out / "data" / TARGET_FILE)]
    record_run(cfg, out, "gen")
    logger.info("Datasets written", paths=[str(p) for p in paths], source=len(source.train), target=len(target.train))
    return paths


def run_pretrain(cfg: ExperimentConfig, out: Path) -> Path:
    source, _ = load_domains(out)
    stage_dir = out / "pretrain"
    _, classes = label_index(source.train.identities)
    experts = build_experts(cfg.experts, cfg.stage_seed("init"), source.input_dim, classes.size)
    with MetricsPublisher(stage_dir / "metrics.jsonl") as publisher:
        pretrain_source(experts, source, cfg.pretrain, cfg.stage_seed("pretrain"), publisher, stage_dir)
    checkpoint = save_checkpoint(stage_dir / "checkpoint", experts, {"stage": "pretrain", "seed": cfg.seed})
    summary = {m.name: evaluate_expert(m, source, ParamSet.THETA).summary() for m in experts}
    write_json(stage_dir / "summary.json", {"stage": "pretrain", "seed": cfg.seed, "source": summary})
    record_run(cfg, stage_dir, "pretrain")
    return checkpoint


def run_adapt(cfg: ExperimentConfig, out: Path, checkpoint: Path | None = None, dump_clusters: bool = False) -> dict:
    _, target = load_domains(out)
    checkpoint = _require(checkpoint or out / "pretrain" / "checkpoint", "run `meb pretrain` first")
    experts = load_checkpoint(checkpoint, expected=cfg.experts)
    variant = variant_name(cfg.adapt.ablations)
    stage_dir = out / "adapt" / variant

    with MetricsPublisher(stage_dir / "metrics.jsonl") as publisher:
        result = adapt_target(experts, target, cfg.adapt, cfg.stage_seed("adapt"), publisher, stage_dir,
                              dump_clusters)
    save_checkpoint(stage_dir / "checkpoint", experts, {"stage": "adapt", "variant": variant, "seed": cfg.seed})

    final = {name: report.summary() for name, report in result.final().items()}
    summary = {
        "stage": "adapt",
        "variant": variant,
        "ablations": [a.value for a in cfg.adapt.ablations],
        "seed": cfg.seed,
        "final": final,
        "curve": [
            {"epoch": r["epoch"], "expert": r["expert"], "mAP": r["metrics"]["mAP"]}
            for r in result.history if "metrics" in r
        ],
    }
    write_json(stage_dir / "summary.json", summary)
    record_run(cfg, stage_dir, "adapt", checkpoint=str(checkpoint))
    return summary


def run_eval(
        cfg: ExperimentConfig,
        out: Path,
        checkpoint: Path,
        name: str | None = None,
        which: ParamSet = ParamSet.THETA_AVG,
        per_query_ap: bool = False,
) -> dict:
    """Evaluate stored experts on the target split; on pre-trained weights this is direct transfer."""
    _, target = load_domains(out)
    experts = load_checkpoint(_require(Path(checkpoint), "pass an existing --checkpoint"), expected=cfg.experts)
    name = name or Path(checkpoint).parent.name
    stage_dir = out / "eval" / name
    with timer("evaluation", extra_data={"checkpoint": str(checkpoint)}):
        reports = evaluate_all(experts, target, which)
    with MetricsPublisher(stage_dir / "metrics.jsonl") as publisher:
        for report in reports.values():
            publisher.publish("eval", {"name": name, "expert": report.expert, "metrics": report.summary(),
                                       "skipped_queries": report.skipped_queries})
    if per_query_ap:
        for report in reports.values():
            write_per_query_ap(stage_dir / f"per_query_ap_{report.expert}.csv", report, target.query)
    summary = {"stage": "eval", "name": name, "seed": cfg.seed, "params": which.value,
               "final": {k: r.summary() for k, r in reports.items()}}
    write_json(stage_dir / "summary.json", summary)
    record_run(cfg, stage_dir, "eval", checkpoint=str(checkpoint))
    return summary


def run_supervised(cfg: ExperimentConfig, out: Path) -> dict:
    """Upper bound: fresh experts trained with the pretraining recipe on labelled target identities."""
    _, target = load_domains(out)
    stage_dir = out / "supervised"
    _, classes = label_index(target.train.identities)
    experts = build_experts(cfg.experts, cfg.stage_seed("init"), target.input_dim, classes.size)
    with MetricsPublisher(stage_dir / "metrics.jsonl") as publisher:
        train_supervised(experts, target, cfg.pretrain, cfg.stage_seed("supervised"), publisher, stage_dir)
    reports = evaluate_all(experts, target, ParamSet.THETA)
    summary = {"stage": "supervised", "seed": cfg.seed, "final": {k: r.summary() for k, r in reports.items()}}
    write_json(stage_dir / "summary.json", summary)
    record_run(cfg, stage_dir, "supervised")
    return summary
