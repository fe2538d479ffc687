import argparse
import sys
from pathlib import Path

from meb import __version__
from meb.cli.commands import run_adapt, run_eval, run_gen, run_pretrain
from meb.cli.sweep import run_sweep
from meb.config import settings
from meb.core.errors import MebError
from meb.core.logger import logger
from meb.schemas.enums import Ablation, ParamSet
from meb.schemas.experiment import ExperimentConfig, load_experiment_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meb", description="Multi-expert brainstorming for domain adaptive re-ID")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML or JSON experiment config; defaults apply when omitted")
    common.add_argument("--out", type=Path, help="run directory (defaults to the config's output_dir)")
    common.add_argument("--seed", type=int, help="override the experiment seed")

    sub.add_parser("gen", parents=[common], help="generate the synthetic source and target datasets")
    sub.add_parser("pretrain", parents=[common], help="train every expert on the labelled source domain")

    adapt = sub.add_parser("adapt", parents=[common], help="adapt pre-trained experts to the target domain")
    adapt.add_argument("--ablation", action="append", default=[], choices=[a.value for a in Ablation],
                       help="disable a component; repeatable")
    adapt.add_argument("--checkpoint", type=Path, help="pre-trained checkpoint (default <out>/pretrain/checkpoint)")
    adapt.add_argument("--dump-clusters", action="store_true", help="write per-epoch pseudo-label CSVs")

    evaluate = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on the target domain")
    evaluate.add_argument("--checkpoint", type=Path, help="checkpoint directory (default <out>/pretrain/checkpoint)")
    evaluate.add_argument("--name", help="name of the evaluation output directory")
    evaluate.add_argument("--params", choices=[p.value for p in ParamSet], default=ParamSet.THETA_AVG.value)
    evaluate.add_argument("--per-query-ap", action="store_true", help="write per-query AP CSVs")

    sweep = sub.add_parser("sweep", parents=[common], help="run the ablation sweep over seeds")
    sweep.add_argument("--parallel", type=int, default=settings.NUM_WORKERS, help="worker processes")
    sweep.add_argument("--dump-clusters", action="store_true")
    return parser


def resolve_config(args: argparse.Namespace) -> tuple[ExperimentConfig, Path]:
    cfg = load_experiment_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "ablation", None):
        cfg = cfg.with_ablations([Ablation(a) for a in args.ablation])
    out = args.out or Path(cfg.output_dir)
    return cfg, out


def dispatch(args: argparse.Namespace) -> None:
    cfg, out = resolve_config(args)
    logger.info("Command started", command=args.command, out=str(out), seed=cfg.seed)
    if args.command == "gen":
        for path in run_gen(cfg, out):
            print(path)
    elif args.command == "pretrain":
        print(run_pretrain(cfg, out))
    elif args.command == "adapt":
        summary = run_adapt(cfg, out, args.checkpoint, args.dump_clusters)
        print(out / "adapt" / summary["variant"] / "summary.json")
    elif args.command == "eval":
        checkpoint = args.checkpoint or out / "pretrain" / "checkpoint"
        summary = run_eval(cfg, out, checkpoint, args.name, ParamSet(args.params), args.per_query_ap)
        print(out / "eval" / summary["name"] / "summary.json")
    elif args.command == "sweep":
        for path in run_sweep(cfg, out, args.parallel, args.dump_clusters).values():
            print(path)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sweep" and args.parallel < 1:
        parser.error("--parallel must be at least 1")
    try:
        dispatch(args)
    except MebError as exc:
        logger.error("Command failed", command=args.command, error_type=type(exc).__name__, detail=exc.detail)
        print(f"meb {args.command}: error: {exc.detail}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
