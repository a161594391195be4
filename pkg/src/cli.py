"""
Command line for scenario runs, convergence studies and design verification

    python src/cli.py run clipped_sine --out out
    python src/cli.py study diode_circuit --dts 4e-3,2e-3,1e-3
    python src/cli.py verify data/designs/clipped_sine.json
    python src/cli.py list
"""
import argparse
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv

from scenarios import (
    RunResult,
    builtin_names,
    convergence_study,
    format_report,
    format_table,
    get_builtin,
    run_many,
    verify_design,
    write_convergence_report,
    write_design_file,
)
from scenarios.report import summarize
from utils.errors import EviError
from utils.settings import Settings

logger = logging.getLogger("cli")

SUMMARY_KEYS = (
    "max_constraint_violation",
    "terminal_tracking_error",
    "lyapunov.monotone",
    "monotonicity.max_cross_term",
)


def _dt_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (EVI_OUTPUT_DIR)")
    common.add_argument("--seed", type=int, help="seed for randomized checks (EVI_SEED)")
    common.add_argument("--tol", type=float, help="algebraic tolerance (EVI_TOL)")
    common.add_argument("--log-level", help="logging level (EVI_LOG_LEVEL)")

    parser = argparse.ArgumentParser(prog="evi-regulation", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="simulate scenarios and write CSVs and reports")
    run.add_argument("scenarios", nargs="+", help="builtin names or scenario files")
    run.add_argument("--dt", type=float, help="step size override")
    run.add_argument("--horizon", type=float, help="horizon override")
    run.add_argument("--jobs", type=int, help="parallel scenarios (EVI_JOBS)")

    study = sub.add_parser("study", parents=[common], help="grid-refinement convergence study")
    study.add_argument("scenario", help="builtin name or scenario file")
    study.add_argument("--dts", type=_dt_list, required=True, help="comma-separated step sizes")
    study.add_argument("--horizon", type=float, help="horizon override")

    verify = sub.add_parser("verify", parents=[common], help="re-verify a design file")
    verify.add_argument("design", help="design JSON file")

    export = sub.add_parser("export", parents=[common], help="write a builtin scenario's design file")
    export.add_argument("scenario", help="builtin name")
    export.add_argument("path", help="target JSON file")

    sub.add_parser("list", parents=[common], help="list builtin scenarios")
    return parser


def _settings(args: argparse.Namespace) -> Settings:
    return Settings.from_env().override(
        output_dir=args.out,
        seed=args.seed,
        tol=args.tol,
        jobs=getattr(args, "jobs", None),
        log_level=args.log_level.upper() if args.log_level else None,
    )


def _cmd_run(args, settings: Settings) -> int:
    results = run_many(
        args.scenarios,
        jobs=settings.jobs,
        dt=args.dt,
        horizon=args.horizon,
        out_dir=settings.output_dir,
        settings=settings,
    )
    status = 0
    for name, result in zip(args.scenarios, results):
        if isinstance(result, RunResult):
            print(f"✅ {result.name}: {summarize(result.items, SUMMARY_KEYS)}")
            for kind, path in result.files.items():
                print(f"   {kind}: {path}")
        else:
            print(f"❌ {name}: {result}")
            status = 1
    return status


def _cmd_study(args, settings: Settings) -> int:
    table = convergence_study(args.scenario, args.dts, horizon=args.horizon, settings=settings)
    path = write_convergence_report(table, settings.output_dir)
    print(format_table(table))
    print(f"report: {path}")
    if table.error:
        print(f"❌ {table.error}")
        return 1
    return 0


def _cmd_verify(args, settings: Settings) -> int:
    result = verify_design(args.design, tol=settings.tol)
    sys.stdout.write(format_report(result.items))
    for failure in result.failures:
        print(f"❌ {failure}")
    return 0 if result.passed else 1


def _cmd_export(args, settings: Settings) -> int:
    path = write_design_file(get_builtin(args.scenario), args.path)
    print(f"✅ wrote {path}")
    return 0


def _cmd_list(args, settings: Settings) -> int:
    for name in builtin_names():
        print(f"{name}: {get_builtin(name).description}")
    return 0


COMMANDS = {
    "run": _cmd_run,
    "study": _cmd_study,
    "verify": _cmd_verify,
    "export": _cmd_export,
    "list": _cmd_list,
}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    try:
        settings = _settings(args)
    except ValueError as e:
        print(f"❌ {e}", file=sys.stderr)
        return 2

    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    try:
        return COMMANDS[args.command](args, settings)
    except (EviError, KeyError, OSError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"❌ {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
