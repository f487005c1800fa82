import argparse
import logging
import sys
from logging import getLogger

from jsonschema import ValidationError
from pandas import DataFrame

from src.config import RunConfig
from src.exceptions import AcceptanceError, CapacityError
from src.reports_exporter import ReportsExporter

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAPACITY = 3
EXIT_ACCEPTANCE = 4

ReportTypes = ReportsExporter.ReportTypes


def _run(report_type: ReportTypes, config: RunConfig, output: str) -> DataFrame:
    return ReportsExporter.export_report_by_type(config, report_type, output, config.format)


def cmd_tables(config: RunConfig, output: str) -> DataFrame:
    """Builds or refreshes the factor table cache"""
    return _run(ReportTypes.TABLES, config, output)


def cmd_moments(config: RunConfig, output: str) -> DataFrame:
    return _run(ReportTypes.MOMENTS, config, output)


def cmd_verify(config: RunConfig, output: str) -> DataFrame:
    """Closed form vs diagonal sum vs quadrature; raises AcceptanceError after saving on failure"""
    return _run(ReportTypes.VERIFY, config, output)


def cmd_bounds(config: RunConfig, output: str) -> DataFrame:
    return _run(ReportTypes.BOUNDS, config, output)


def cmd_zeros(config: RunConfig, output: str) -> DataFrame:
    return _run(ReportTypes.ZEROS, config, output)


def cmd_rv(config: RunConfig, output: str) -> DataFrame:
    return _run(ReportTypes.RV, config, output)


COMMANDS = {
    ReportTypes.TABLES: cmd_tables,
    ReportTypes.MOMENTS: cmd_moments,
    ReportTypes.VERIFY: cmd_verify,
    ReportTypes.BOUNDS: cmd_bounds,
    ReportTypes.ZEROS: cmd_zeros,
    ReportTypes.RV: cmd_rv,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration; flags override its values.")
    common.add_argument("--T", dest="T", type=float, nargs="+", help="Heights T (each >= 100).")
    common.add_argument("--alpha", type=float, nargs="+", help="Lengths alpha of Z_alpha.")
    common.add_argument("--k", dest="k_max", type=int, help="Largest moment order.")
    common.add_argument(
        "--mollifier",
        dest="mollifiers",
        action="append",
        help="unit | lambda | lambda2 | lambdaK=k | flip=b1,b2 | lambda-dr=r[,eta] | general=b1,b2,r,eta;"
        " repeat for several.",
    )
    common.add_argument("--tail-eps", dest="tail_eps", type=float, help="Gaussian tail cut of the grid.")
    common.add_argument("--cache-dir", dest="cache_dir", help="Directory of the factor table cache.")
    common.add_argument(
        "--format", choices=[f.value for f in ReportsExporter.AvailableFormats], help="Output format."
    )
    common.add_argument("--seed", type=int, help="Seed of the Monte Carlo generators.")
    common.add_argument("--threads", type=int, help="Worker threads for polynomial evaluation.")
    common.add_argument("--samples", type=int, help="Monte Carlo sample count.")
    common.add_argument("--zeros-file", dest="zeros_file", help="Plain-text zero table.")
    common.add_argument("--output", help="Report path, the format extension is appended when missing.")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="zeta-lab",
        description="Pseudo-moments of the truncated logarithmic derivative of zeta against mollified measures.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for report_type, command in COMMANDS.items():
        subparsers.add_parser(report_type.value, parents=[common], help=command.__doc__)
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        key: getattr(args, key)
        for key in (
            "T", "alpha", "k_max", "mollifiers", "tail_eps", "cache_dir", "format", "seed",
            "threads", "samples", "zeros_file",
        )
    }
    if args.config:
        return RunConfig.from_file(args.config, **overrides)
    return RunConfig().with_overrides(**overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")

    report_type = ReportTypes(args.command)
    try:
        config = load_run_config(args)
        report = COMMANDS[report_type](config, args.output or f"zeta_lab_{report_type}")
    except CapacityError as e:
        getLogger().error(f"Capacity exceeded: {e}")
        return EXIT_CAPACITY
    except AcceptanceError as e:
        getLogger().error(f"Verification failed: {e}")
        return EXIT_ACCEPTANCE
    except (ValueError, ValidationError, OSError) as e:
        getLogger().error(f"Invalid input: {e}")
        return EXIT_VALIDATION
    getLogger().info(f"{report_type} report: {len(report)} rows")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
