"""Command-line front end: verify-safety, verify-ltl and coverage runs."""
import argparse
import logging
import sys
from collections.abc import Callable

from .config import Config, load_config, make_config
from .errors import ConfigurationError, IntegrityError, InternalLogicError, ResourceError
from .explorer import SearchLimits, SearchStats, Verdict, VerdictKind, dfs_safety
from .ltl import format_formula, get_property_repository, verify_ltl
from .model import KernelModel
from .reports import RunManifest, format_coverage, format_lasso, format_stats, format_trace, write_text
from .workload import Mutation, parse_mutation

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_VIOLATION = 1
EXIT_INCOMPLETE = 2
EXIT_CONFIG = 3

DEFAULT_COVERAGE_OUT = "coverage.txt"


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", nargs="?", help="key=value config file (defaults: base config)")
    common.add_argument("--max-depth", type=_positive, help="override max_depth")
    common.add_argument("--trace-out", help="where to write a counterexample trace")
    common.add_argument("--coverage-out", help="where to write the unreached-statement report")
    common.add_argument("--stats", choices=("text", "kv"), help="print search statistics")
    common.add_argument("--mutate", metavar="NAME",
                        help="seed a known bug into the workload: drop-lock or drop-signal")
    common.add_argument("--manifest-out", help="also write the run manifest to this file")
    common.add_argument("--log-level", default="INFO",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"))

    parser = argparse.ArgumentParser(
        prog="rtos-verifier",
        description="Explicit-state model checking of a preemptive ARMv7-M kernel model.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("verify-safety", parents=[common], help="exhaustive safety search")
    ltl = commands.add_parser("verify-ltl", parents=[common], help="check one LTL property")
    ltl.add_argument("--prop", required=True, help="property name in the property file")
    ltl.add_argument("--props", help="property file (default: the shipped properties)")
    commands.add_parser("coverage", parents=[common], help="report statements never executed")
    return parser


def exit_status(verdict: Verdict) -> int:
    if verdict.kind is not VerdictKind.PASS:
        return EXIT_VIOLATION
    return EXIT_PASS if verdict.complete else EXIT_INCOMPLETE


def _emit_stats(args, stats: SearchStats) -> None:
    # stdout carries only the manifest.
    if args.stats:
        sys.stderr.write(format_stats(stats, args.stats))


def cmd_verify_safety(args, config: Config, model: KernelModel) -> RunManifest:
    verdict, stats, coverage = dfs_safety(model, SearchLimits.from_config(config))
    artifacts = {}
    if not verdict.passed:
        artifacts["trace"] = write_text(args.trace_out or "verify-safety.trail", format_trace(verdict.trace))
    if args.coverage_out:
        artifacts["coverage"] = write_text(args.coverage_out, format_coverage(coverage))
    _emit_stats(args, stats)
    return _manifest(args, config, verdict, stats, artifacts)


def cmd_verify_ltl(args, config: Config, model: KernelModel) -> RunManifest:
    prop = get_property_repository(args.props).get_property(args.prop)
    verdict, stats = verify_ltl(model, prop["formula"], SearchLimits.from_config(config), prop["name"])
    artifacts = {}
    if verdict.lasso is not None:
        artifacts["trace"] = write_text(args.trace_out or "verify-ltl.trail", format_lasso(verdict.lasso))
    _emit_stats(args, stats)
    return _manifest(args, config, verdict, stats, artifacts,
                     property=prop["name"], formula=format_formula(prop["formula"]))


def cmd_coverage(args, config: Config, model: KernelModel) -> RunManifest:
    verdict, stats, coverage = dfs_safety(model, SearchLimits.from_config(config))
    report = format_coverage(coverage)
    artifacts = {"coverage": write_text(args.coverage_out or DEFAULT_COVERAGE_OUT, report)}
    if not verdict.passed:
        artifacts["trace"] = write_text(args.trace_out or "coverage.trail", format_trace(verdict.trace))
    logger.info(f"{len(coverage.unreached)} of {coverage.total} statements unreached")
    _emit_stats(args, stats)
    return _manifest(args, config, verdict, stats, artifacts)


COMMANDS: dict[str, Callable[..., RunManifest]] = {
    "verify-safety": cmd_verify_safety,
    "verify-ltl": cmd_verify_ltl,
    "coverage": cmd_coverage,
}


def _limits(config: Config) -> dict[str, int | bool]:
    return {
        "max_depth": config.max_depth,
        "max_states": config.max_states,
        "max_memory_mb": config.max_memory_mb,
        "debug_store": config.debug_store,
    }


def _manifest(args, config: Config, verdict: Verdict, stats: SearchStats,
              artifacts: dict[str, str], **extra) -> RunManifest:
    return RunManifest.from_run(
        args.command,
        config.model_dump(mode="json"),
        verdict,
        stats,
        exit_status(verdict),
        mutation=args.mutate or Mutation.NONE.value,
        limits=_limits(config),
        artifacts=artifacts,
        **extra,
    )


def _failure_manifest(args, config: Config | None, error: Exception, status: int) -> RunManifest:
    return RunManifest(
        command=args.command,
        config=config.model_dump(mode="json") if config is not None else {},
        property=getattr(args, "prop", None),
        mutation=args.mutate or Mutation.NONE.value,
        limits=_limits(config) if config is not None else {},
        verdict="error",
        complete=False,
        detail=f"{type(error).__name__}: {error}",
        exit_status=status,
        stats={},
    )


def run(args: argparse.Namespace) -> tuple[int, RunManifest]:
    config = None
    try:
        config = load_config(args.config) if args.config else make_config()
        config = config.with_limits(max_depth=args.max_depth)
        model = KernelModel(config, parse_mutation(args.mutate))
        manifest = COMMANDS[args.command](args, config, model)
        return manifest.exit_status, manifest
    except (ConfigurationError, IntegrityError) as e:
        logger.error(f"{e}")
        return EXIT_CONFIG, _failure_manifest(args, config, e, EXIT_CONFIG)
    except ResourceError as e:
        logger.critical(f"Search aborted: {e}")
        return EXIT_INCOMPLETE, _failure_manifest(args, config, e, EXIT_INCOMPLETE)
    except InternalLogicError as e:
        logger.critical(f"Internal error in the model or search, please report: {e}")
        return EXIT_INCOMPLETE, _failure_manifest(args, config, e, EXIT_INCOMPLETE)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )
    status, manifest = run(args)
    text = manifest.model_dump_json()
    if args.manifest_out:
        manifest.artifacts["manifest"] = args.manifest_out
        text = manifest.model_dump_json()
        write_text(args.manifest_out, text + "\n")
    sys.stdout.write(text + "\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
