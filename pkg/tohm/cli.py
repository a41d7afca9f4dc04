"""Command-line interface for TOHM scans.

Usage:
    tohm simulate  --config run.yaml -o data.csv        # simulate a data set (or a synthetic trace)
    tohm scan      --config run.yaml --dataset data.csv -o trace.csv
    tohm pvalue    --config run.yaml --trace trace.csv -o report.json
    tohm upcross   --config run.yaml -o elbow.csv       # E[upcrossings of c0] against R
    tohm sensitivity --config run.yaml -o paths.csv     # null paths for choosing c0
    tohm berman    --config run.yaml -o berman.csv      # score-correlation decay
    tohm compare   --config run.yaml -o ratio.csv       # Bonferroni / upcrossing bound
    tohm oracle    --config run.yaml -o oracle.csv      # brute-force global p-values

Every flag overrides the key of the same name in the config file. Reports and tables
are deterministic given the config; JSON outputs embed the config hash.

Exit codes:
    0  success
    2  invalid config, flag or input file
    3  a fit or a scan failed
    4  too many Monte-Carlo replicates failed
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from dotenv import load_dotenv

from tohm._util import format_pvalue, format_sigma, initialize_logging
from tohm.config import (
    RunConfig,
    build_grid,
    build_model,
    build_source,
    build_synthetic,
    config_hash,
    load_config,
    resolve_workers,
)
from tohm.diagnostics import berman_curve, ratio_curve
from tohm.exceptions import (
    ConfigError,
    EnsembleFailureError,
    FitFailureError,
    InvalidArgumentError,
    NonConvergenceError,
)
from tohm.grid import ProcessTrace, ScanGrid
from tohm.io import (
    dump_traces,
    read_dataset,
    read_ensemble,
    read_trace,
    write_dataset,
    write_json,
    write_table,
    write_trace,
)
from tohm.models import (
    BinomialGroups,
    Dataset,
    Direction,
    SubTestModel,
    SyntheticProcess,
    run_scan,
)
from tohm.montecarlo import (
    EnsembleSummary,
    c0_sensitivity,
    estimate_upcrossings,
    oracle_curve,
    upcrossing_curve,
)
from tohm.tail_bound import ProcessFamily, build_report, observed_max, suggest_c0


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FIT_FAILURE = 3
EXIT_ENSEMBLE_FAILURE = 4


def _require(value: Path | None, key: str) -> Path:
    if value is None:
        raise ConfigError([f"'{key}' is required for this command"])
    return value


def _dataset_size(dataset: Dataset) -> int:
    if isinstance(dataset, BinomialGroups):
        return dataset.total_trials
    return len(dataset)


def _null_source(config: RunConfig) -> tuple[SubTestModel | SyntheticProcess, int]:
    """Null simulator and the size of its data sets.

    With a data set configured and `bootstrap_null` set, replicates are drawn from the null
    fit of that data set and have its size. Otherwise the configured parameters (with the
    effect at its null value) and `n_obs` are used.
    """
    source = build_source(config)
    if config.dataset is None or not config.bootstrap_null or isinstance(source, SyntheticProcess):
        return source, config.n_obs
    dataset = read_dataset(config.dataset)
    source.check_dataset(dataset)
    null_fit = source.fit_null(dataset)
    n_obs = _dataset_size(dataset)
    logger.info(f"Bootstrapping null replicates of size {n_obs} from {null_fit.estimate}")
    return source.bootstrap_from(dataset, null_fit), n_obs


def _null_location(config: RunConfig) -> float | None:
    """Null-fitted location of an exclusion test on the configured data set, if any."""
    if config.model == "synthetic" or config.dataset is None:
        return None
    model = build_model(config)
    if model.direction is not Direction.EXCLUSION:
        return None
    dataset = read_dataset(config.dataset)
    model.check_dataset(dataset)
    return model.fit_null(dataset).estimate["theta"]


def _resolve_c0(
    config: RunConfig,
    source: SubTestModel | SyntheticProcess,
    grid: ScanGrid,
    n_obs: int,
) -> float:
    if isinstance(config.c0, float):
        return config.c0
    if config.c0 == "direct":
        raise ConfigError(["c0='direct' is only valid for the compare command"])
    suggested = suggest_c0(source.family)
    if suggested is not None:
        logger.info(f"Using c0 = {suggested:g} (argmax of a(c) for {source.family})")
        return suggested
    if not config.sensitivity:
        raise ConfigError(
            [
                f"c0='auto' has no closed form for {source.family}; set a numeric c0 or "
                "'sensitivity: true' to pick it from simulated null paths"
            ]
        )
    result = c0_sensitivity(
        source,
        grid,
        config.n_paths,
        config.master_seed,
        n_obs=n_obs,
        workers=resolve_workers(config),
    )
    return result.recommended_c0


def _default_c_ladder(family: ProcessFamily) -> np.ndarray:
    if family.is_gaussian:
        return np.linspace(0.5, 4.0, 15)
    return np.linspace(1.0, 16.0, 16)


def _check_ensemble(summary: EnsembleSummary, trace: ProcessTrace, family: ProcessFamily) -> None:
    errors = []
    if summary.family != family.descriptor:
        errors.append(f"family '{summary.family}' differs from the model's '{family.descriptor}'")
    grid = trace.grid
    if summary.resolution != grid.resolution:
        errors.append(f"resolution {summary.resolution} differs from the trace's {grid.resolution}")
    if not (np.isclose(summary.lower, grid.lower) and np.isclose(summary.upper, grid.upper)):
        errors.append(
            f"range [{summary.lower:g}, {summary.upper:g}] differs from the trace's "
            f"[{grid.lower:g}, {grid.upper:g}]"
        )
    if errors:
        raise ConfigError(errors, "ensemble")


def _check_c0(c0: float, c_R: float) -> None:
    if c0 > c_R:
        raise ConfigError(
            [
                f"c0={c0:g} exceeds the observed maximum c_R={c_R:g}; the bound "
                "extrapolates upwards only, choose c0 <= c_R"
            ]
        )


def cmd_simulate(config: RunConfig) -> None:
    """Simulate a data set, or a null trace for synthetic processes."""
    output = _require(config.output, "output")
    if config.model == "synthetic":
        process = build_synthetic(config)
        trace = process.simulate_null_trace(
            build_grid(config, process), config.n_obs, config.master_seed
        )
        write_trace(trace, output)
        print(f"Wrote synthetic {process.family} trace to {output} (seed {config.master_seed})")
        return
    model = build_model(config)
    dataset = model.simulate(config.n_obs, config.master_seed)
    write_dataset(dataset, output)
    print(
        f"Wrote {len(dataset)} rows from model '{model.name}' to {output} "
        f"(seed {config.master_seed})"
    )


def cmd_scan(config: RunConfig) -> None:
    """Scan a data set; writes the trace CSV and a summary JSON beside it."""
    output = _require(config.output, "output")
    model = build_model(config)
    dataset = read_dataset(_require(config.dataset, "dataset"))
    result = run_scan(model, dataset, build_grid(config, model))
    write_trace(result.trace, output)

    summary = {
        **result.summary(),
        "model": model.name,
        "test": model.direction.value,
        "config_hash": config_hash(config),
    }
    write_json(summary, output.with_suffix(".json"))
    print(
        f"c_R = {summary['c_R']:.4f} at theta_hat = {summary['theta_hat']:.4f} "
        f"(R = {summary['resolution']}); trace written to {output}"
    )
    if model.direction is Direction.EXCLUSION:
        print(f"Estimated location (null fit) = {summary['estimated_location']:.4f}")


def cmd_pvalue(config: RunConfig) -> None:
    """Global p-value of an observed trace: upcrossing bound and Bonferroni."""
    output = _require(config.output, "output")
    trace = read_trace(_require(config.trace, "trace"))
    family = build_source(config).family
    c_R = observed_max(family, trace).c_R
    digest = config_hash(config)

    if config.ensemble is not None:
        summary = read_ensemble(config.ensemble)
        _check_ensemble(summary, trace, family)
        if isinstance(config.c0, float) and config.c0 != summary.c0:
            raise ConfigError(
                [f"c0={config.c0:g} differs from the ensemble's c0={summary.c0:g}"]
            )
        c0, expected, error = summary.c0, summary.e_upcrossings, summary.mc_std_error
        _check_c0(c0, c_R)
    else:
        source, n_obs = _null_source(config)
        c0 = _resolve_c0(config, source, trace.grid, n_obs)
        _check_c0(c0, c_R)
        ensemble = estimate_upcrossings(
            source,
            trace.grid,
            c0,
            config.n_replicates,
            n_obs,
            config.master_seed,
            workers=resolve_workers(config),
        )
        write_json(ensemble.summary(digest), output.with_suffix(".ensemble.json"))
        if config.dump_traces is not None:
            dump_traces(ensemble.batch, config.dump_traces)
        expected, error = ensemble.e_upcrossings, ensemble.mc_std_error

    report = build_report(
        family,
        trace,
        c0,
        expected,
        error,
        estimated_location=_null_location(config),
        config_hash=digest,
    )
    write_json(report, output)

    print(f"c_R = {report.c_R:.4f} at theta_hat = {report.theta_hat:.4f} (R = {report.resolution})")
    print(
        f"TOHM:       {format_pvalue(report.tohm_pvalue)} "
        f"({format_sigma(abs(report.sigma_tohm))})  "
        f"[c0 = {c0:g}, E[N_c0] = {expected:.4g} +/- {error:.2g}]"
    )
    print(
        f"Bonferroni: {format_pvalue(report.bonferroni_pvalue)} "
        f"({format_sigma(abs(report.sigma_bonferroni))})"
    )


def cmd_upcross(config: RunConfig) -> None:
    """Expected upcrossings of c0 against the grid resolution."""
    output = _require(config.output, "output")
    source, n_obs = _null_source(config)
    c0 = _resolve_c0(config, source, build_grid(config, source), n_obs)
    table = upcrossing_curve(
        source,
        c0,
        config.resolutions,
        config.n_replicates,
        n_obs,
        config.master_seed,
        workers=resolve_workers(config),
    )
    write_table(table, output)
    print(f"Wrote upcrossing table for c0 = {c0:g} ({len(table)} resolutions) to {output}")


def cmd_sensitivity(config: RunConfig) -> None:
    """Null paths for choosing c0, plus the mean upcrossing count per candidate."""
    output = _require(config.output, "output")
    source, n_obs = _null_source(config)
    result = c0_sensitivity(
        source,
        build_grid(config, source),
        config.n_paths,
        config.master_seed,
        n_obs=n_obs,
        workers=resolve_workers(config),
    )
    write_table(result.paths, output)
    write_table(result.ladder, output.with_suffix(".ladder.csv"))
    print(f"Recommended c0 = {result.recommended_c0:g}; paths written to {output}")


def cmd_berman(config: RunConfig) -> None:
    """Decay of the score correlations."""
    output = _require(config.output, "output")
    source, n_obs = _null_source(config)
    result = berman_curve(
        source,
        build_grid(config, source),
        config.n_replicates,
        config.master_seed,
        n_obs=n_obs,
        n_tau=config.n_tau,
        workers=resolve_workers(config),
    )
    write_table(result.table, output)
    if config.dump_covariance is not None:
        write_table(result.covariance.to_frame(), config.dump_covariance)
    print(f"Wrote Berman table ({len(result.table)} lags) to {output}")


def cmd_compare(config: RunConfig) -> None:
    """Ratio of the Bonferroni bound to the upcrossing bound."""
    output = _require(config.output, "output")
    source, n_obs = _null_source(config)
    c0: float | None = None
    if config.c0 != "direct":
        c0 = _resolve_c0(config, source, build_grid(config, source), n_obs)
    if config.c_ladder is not None:
        ladder = np.asarray(config.c_ladder, dtype=float)
    else:
        ladder = _default_c_ladder(source.family)
        if c0 is not None:
            ladder = ladder[ladder >= c0]
    table = ratio_curve(
        source,
        config.resolutions,
        ladder,
        config.n_replicates,
        n_obs,
        config.master_seed,
        c0=c0,
        workers=resolve_workers(config),
    )
    write_table(table, output)
    print(f"Wrote ratio table ({len(table)} rows) to {output}")


def cmd_oracle(config: RunConfig) -> None:
    """Brute-force global p-values from the maxima of null traces."""
    output = _require(config.output, "output")
    source, n_obs = _null_source(config)
    ladder = config.c_ladder if config.c_ladder is not None else _default_c_ladder(source.family)
    table = oracle_curve(
        source,
        build_grid(config, source),
        ladder,
        config.n_replicates,
        n_obs,
        config.master_seed,
        workers=resolve_workers(config),
    )
    write_table(table, output)
    print(f"Wrote oracle table ({len(table)} thresholds) to {output}")


COMMANDS: dict[str, tuple[Callable[[RunConfig], None], str]] = {
    "simulate": (cmd_simulate, "Simulate a data set (or a synthetic null trace)"),
    "scan": (cmd_scan, "Scan a data set over the grid"),
    "pvalue": (cmd_pvalue, "Global p-value of a trace"),
    "upcross": (cmd_upcross, "Expected upcrossings against the grid resolution"),
    "sensitivity": (cmd_sensitivity, "Null paths for choosing c0"),
    "berman": (cmd_berman, "Score-correlation decay table"),
    "compare": (cmd_compare, "Bonferroni to upcrossing-bound ratio table"),
    "oracle": (cmd_oracle, "Brute-force global p-values"),
}


def _parse_c0(text: str) -> float | str:
    if text in {"auto", "direct"}:
        return text
    try:
        return float(text)
    except ValueError as ex:
        raise argparse.ArgumentTypeError(
            f"c0 must be a number, 'auto' or 'direct', got '{text}'"
        ) from ex


def _parse_param(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    try:
        if not sep or not name:
            raise ValueError
        return name.strip(), float(value)
    except ValueError as ex:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got '{text}'") from ex


def _common_options() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", type=Path, help="YAML run configuration")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    parser.add_argument("--model", help="bump, nonnested, breakpoint or synthetic")
    parser.add_argument("--test", help="detection, exclusion or twosided")
    parser.add_argument(
        "--param",
        dest="params",
        action="append",
        type=_parse_param,
        metavar="NAME=VALUE",
        help="Model parameter (can be specified multiple times)",
    )
    parser.add_argument("--range", dest="range", nargs=2, type=float, metavar=("LOWER", "UPPER"))
    parser.add_argument("--resolution", type=int, help="Number of grid points R")
    parser.add_argument("--resolutions", nargs="+", type=int, help="Resolutions for tables")
    parser.add_argument("--c0", type=_parse_c0, help="Reference threshold, 'auto' or 'direct'")
    parser.add_argument(
        "--sensitivity",
        action="store_const",
        const=True,
        help="Pick c0 from simulated null paths",
    )
    parser.add_argument("--master-seed", dest="master_seed", type=int)
    parser.add_argument("--n-replicates", dest="n_replicates", type=int)
    parser.add_argument("--n-obs", dest="n_obs", type=int)
    parser.add_argument("--workers", type=int, help="Worker processes (default: $TOHM_WORKERS)")
    parser.add_argument("--c-ladder", dest="c_ladder", nargs="+", type=float)
    parser.add_argument("--n-paths", dest="n_paths", type=int)
    parser.add_argument("--n-tau", dest="n_tau", type=int)
    parser.add_argument(
        "--no-bootstrap-null",
        dest="bootstrap_null",
        action="store_const",
        const=False,
        help="Simulate replicates from the configured parameters, not from the null fit",
    )
    parser.add_argument(
        "--no-warm-start", dest="warm_start", action="store_const", const=False
    )
    parser.add_argument("--family", help="Synthetic process family, e.g. chi_square(3)")
    parser.add_argument("--length-scale", dest="length_scale", type=float)
    parser.add_argument("--dataset", type=Path)
    parser.add_argument("--trace", type=Path)
    parser.add_argument("--ensemble", type=Path, help="Ensemble summary JSON to reuse")
    parser.add_argument("-o", "--output", type=Path)
    parser.add_argument("--dump-traces", dest="dump_traces", type=Path, metavar="DIR")
    parser.add_argument("--dump-covariance", dest="dump_covariance", type=Path)
    return parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Global significance of scan statistics (TOHM)",
        prog="tohm",
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands", required=True)
    common = _common_options()
    for name, (func, help_text) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text, parents=[common])
        sub.set_defaults(func=func)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    overrides: dict[str, Any] = {
        key: getattr(args, key)
        for key in (
            "model",
            "test",
            "resolution",
            "resolutions",
            "c0",
            "sensitivity",
            "master_seed",
            "n_replicates",
            "n_obs",
            "workers",
            "c_ladder",
            "n_paths",
            "n_tau",
            "bootstrap_null",
            "warm_start",
        )
    }
    if args.range is not None:
        overrides["range"] = list(args.range)
    if args.params:
        overrides["params"] = dict(args.params)
    synthetic = {"family": args.family, "length_scale": args.length_scale}
    synthetic = {k: v for k, v in synthetic.items() if v is not None}
    if synthetic:
        overrides["synthetic"] = synthetic
    for key in ("dataset", "trace", "ensemble", "output", "dump_traces", "dump_covariance"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = str(value)
    return overrides


def run(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run one subcommand and return its exit code."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    initialize_logging(logging.DEBUG if args.verbose else logging.INFO)
    try:
        config = load_config(args.config, _overrides(args))
        args.func(config)
    except (ConfigError, InvalidArgumentError) as ex:
        logger.error(str(ex))
        return EXIT_CONFIG
    except (FitFailureError, NonConvergenceError) as ex:
        logger.error(str(ex))
        return EXIT_FIT_FAILURE
    except EnsembleFailureError as ex:
        logger.error(str(ex))
        return EXIT_ENSEMBLE_FAILURE
    return EXIT_OK


def main() -> None:
    """Main CLI entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
