import argparse
import sys
from pathlib import Path

from app.core.config import settings
from app.core.exceptions import ExoShapeError
from app.core.logging import configure_logging, get_logger
from app.services import pipeline


configure_logging()
logger = get_logger(__name__)


def _float_list(text: str) -> list[float]:
    if not text.strip():
        return []
    try:
        return [float(item) for item in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exoshape", description="Double compliance shaping toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {pipeline.__version__}")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="overrides EXOSHAPE_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path, help="project config (JSON)")
        p.add_argument("--out", type=Path, default=Path(settings.output_dir), help="output directory or file")
        return p

    command("design", "synthesize gains; write gains.json and summary.json")

    bode = command("bode", "Bode table of one chain system as CSV")
    bode.add_argument("--system", required=True, choices=["C4", "C5", "C6", "C7", "ratio", "Gv", "L_dob"])
    bode.add_argument("--fmin", type=float, default=0.01, help="Hz")
    bode.add_argument("--fmax", type=float, default=1000.0, help="Hz")
    bode.add_argument("--points", type=int, default=400)
    bode.add_argument("--mode", choices=["nominal", "realized"], default="nominal")

    simulate = command("simulate", "time-domain scenario; write trace.csv and summary.json")
    simulate.add_argument("--scenario", choices=["locked-output", "dob-hysteresis", "coupled-human", "free"])

    sweep = command("sweep", "one metric over values of a config parameter, as CSV")
    sweep.add_argument("--param", required=True, help="dotted path, e.g. design.alpha")
    sweep.add_argument("--values", required=True, type=_float_list, help="comma-separated")
    sweep.add_argument("--metric", required=True, help=", ".join(pipeline.SWEEP_METRICS))

    command("dob-check", "observer loop margin and delay-limited critical cutoff")
    return parser


def _csv_target(out: Path, default_name: str) -> Path:
    return out if out.suffix == ".csv" else out / default_name


def run(args: argparse.Namespace) -> None:
    loaded = pipeline.load_config(args.config)
    if args.command == "design":
        pipeline.cmd_design(loaded, args.out)
    elif args.command == "bode":
        target = _csv_target(args.out, f"bode_{args.system}_{args.mode}.csv")
        pipeline.cmd_bode(loaded, args.system, args.fmin, args.fmax, args.points, args.mode, target)
    elif args.command == "simulate":
        pipeline.cmd_simulate(loaded, args.scenario, args.out)
    elif args.command == "sweep":
        target = _csv_target(args.out, f"sweep_{args.metric}.csv")
        pipeline.cmd_sweep(loaded, args.param, args.values, args.metric, target)
    elif args.command == "dob-check":
        pipeline.cmd_dob_check(loaded, args.out)
    logger.info("cli.command_complete", command=args.command, out=str(args.out))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        configure_logging(args.log_level)
    try:
        run(args)
    except ExoShapeError as exc:
        logger.error("cli.command_failed", command=args.command, error=type(exc).__name__, detail=str(exc))
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
