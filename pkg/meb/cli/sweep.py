"""Ablation sweep: every configured variant over every seed, summarised as CSV tables.

For each seed the benchmark is generated and the experts pre-trained once; the
direct-transfer and supervised rows come from those. Each (seed, variant)
adaptation is an independent job that reloads data and checkpoint from disk.
"""
import csv
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from statistics import median

from meb.cli.commands import run_adapt, run_eval, run_gen, run_pretrain, run_supervised
from meb.core.logger import logger, timer
from meb.core.utils import write_json
from meb.schemas.enums import Ablation, variant_name
from meb.schemas.experiment import ExperimentConfig

SUPERVISED = "Supervised"
DIRECT_TRANSFER = "Direct Transfer"
METRICS = ("mAP", "cmc1", "cmc5", "cmc10")
ARCHITECTURE_COLUMNS = (
    ("supervised", SUPERVISED),
    ("direct_transfer", DIRECT_TRANSFER),
    ("single_transfer", Ablation.SINGLE_TRANSFER.value),
    ("baseline_ensemble", Ablation.BASELINE_ENSEMBLE.value),
    ("full", "full"),
)


def best_expert(final: dict[str, dict]) -> dict:
    """Metrics of the strongest single expert; the ensemble row is not a single model."""
    singles = {k: v for k, v in final.items() if k != "ensemble"}
    return max(singles.values(), key=lambda m: m["mAP"])


def _adapt_job(payload: dict, out: str, ablations: list[str], dump_clusters: bool) -> dict:
    cfg = ExperimentConfig.model_validate(payload).with_ablations([Ablation(a) for a in ablations])
    return run_adapt(cfg, Path(out), dump_clusters=dump_clusters)


def _prepare_seed(cfg: ExperimentConfig, out: Path) -> dict[str, dict]:
    run_gen(cfg, out)
    checkpoint = run_pretrain(cfg, out)
    rows = {DIRECT_TRANSFER: run_eval(cfg, out, checkpoint, name="direct_transfer")}
    if cfg.sweep.supervised:
        rows[SUPERVISED] = run_supervised(cfg, out)
    return rows


def run_sweep(cfg: ExperimentConfig, out: Path, parallel: int = 1, dump_clusters: bool = False) -> dict[str, Path]:
    sweep_dir = out / "sweep"
    results: dict[tuple[str, int], dict] = {}
    jobs = []
    for seed in cfg.sweep.seeds:
        seeded = cfg.with_seed(seed)
        seed_dir = sweep_dir / f"seed_{seed}"
        with timer("sweep seed preparation", extra_data={"seed": seed}):
            for name, summary in _prepare_seed(seeded, seed_dir).items():
                results[(name, seed)] = summary
        for flags in cfg.sweep.variants:
            jobs.append((seed, variant_name(flags), seeded.resolved(), str(seed_dir), [Ablation(f).value for f in flags]))

    logger.info("Running sweep variants", jobs=len(jobs), parallel=parallel)
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [(seed, name, pool.submit(_adapt_job, payload, seed_dir, flags, dump_clusters))
                       for seed, name, payload, seed_dir, flags in jobs]
            for seed, name, future in futures:
                results[(name, seed)] = future.result()
    else:
        for seed, name, payload, seed_dir, flags in jobs:
            results[(name, seed)] = _adapt_job(payload, seed_dir, flags, dump_clusters)

    variants = cfg.sweep.variant_names
    rows = ([SUPERVISED] if cfg.sweep.supervised else []) + [DIRECT_TRANSFER] + variants
    paths = {
        "table": write_table(sweep_dir / "table.csv", rows, cfg.sweep.seeds, results),
        "architectures": write_architectures(sweep_dir / "architectures.csv", [a.name for a in cfg.experts],
                                             cfg.sweep.seeds, results),
        "curves": write_curves(sweep_dir / "curves.csv", variants, cfg.sweep.seeds, results),
    }
    write_json(sweep_dir / "sweep.json", {"seeds": cfg.sweep.seeds, "variants": variants,
                                          "outputs": {k: str(v) for k, v in paths.items()}})
    return paths


def write_table(path: Path, rows: list[str], seeds: list[int], results: dict) -> Path:
    """One row per method: medians over seeds of the best single expert's final metrics."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", *METRICS, "seeds"])
        for row in rows:
            picked = [best_expert(results[(row, s)]["final"]) for s in seeds if (row, s) in results]
            if not picked:
                continue
            writer.writerow([row, *(f"{median(p[m] for p in picked):.4f}" for m in METRICS), len(picked)])
    return path


def write_architectures(path: Path, names: list[str], seeds: list[int], results: dict) -> Path:
    """Per-architecture median mAP for supervised, direct transfer, single transfer, baseline ensemble and full."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["architecture", *(column for column, _ in ARCHITECTURE_COLUMNS)])
        for name in names:
            cells = []
            for _, method in ARCHITECTURE_COLUMNS:
                values = [results[(method, s)]["final"][name]["mAP"] for s in seeds
                          if (method, s) in results and name in results[(method, s)]["final"]]
                cells.append(f"{median(values):.4f}" if values else "")
            writer.writerow([name, *cells])
    return path


def write_curves(path: Path, variants: list[str], seeds: list[int], results: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["variant", "seed", "epoch", "expert", "mAP"])
        for variant in variants:
            for seed in seeds:
                for point in results.get((variant, seed), {}).get("curve", []):
                    writer.writerow([variant, seed, point["epoch"], point["expert"], f"{point['mAP']:.6f}"])
    return path
