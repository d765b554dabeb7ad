# cli.py - click command group: trace, estimate-h, sample, replay, gibbs, verify

import functools
from pathlib import Path
from typing import Any, Dict, Optional

import click
import numpy as np
import pandas as pd
import structlog
from pydantic import ValidationError

from domain_algebra import LinkPattern, is_link_pattern
from errors import ConfigError, MultiSLEError, VerificationFailed
from exports import dumps_json, envelope, write_csv, write_json
from loewner_core import extract_trace
from multisle_sampler import gibbs_run, replay_ensemble, sample_cascade, save_ensemble
from partition_mc import estimate_H
from schemas import VERSION, OutputFormat, RunConfig, VerifySuite
from settings import configure_logging, settings
from sle_sampling import RngStream, mobius_to_chord, sample_chordal_driving
from special_fns import kappa_params
from verification import SUITE_DEFAULT_LINKS, run_suite

logger = structlog.get_logger(__name__)

# flag name -> RunConfig field
_FLAG_FIELDS = {
    "kappa": "kappa",
    "links": "links",
    "samples": "n_samples",
    "dt": "dt",
    "t_max": "t_max",
    "seed": "seed",
    "out": "out_path",
    "output_format": "format",
    "steps": "n_steps",
    "burn_in": "burn_in",
    "thin": "thin",
    "jobs": "jobs",
    "monte_carlo": "monte_carlo",
}


def run_options(func):
    """Flags shared by every subcommand; all default to None so the config file can fill them"""
    options = [
        click.option("--kappa", type=float, help="SLE parameter, 0 < kappa < 8"),
        click.option("--links", type=str, help='Semicolon separated a,b pairs, e.g. "0,inf;1,2"'),
        click.option("--samples", type=int, help="Monte-Carlo sample count"),
        click.option("--dt", type=float, help="Capacity step"),
        click.option("--t-max", "t_max", type=float, help="Capacity budget per chord"),
        click.option("--seed", type=int, help="Root seed"),
        click.option("--out", type=click.Path(file_okay=False), help="Output directory"),
        click.option("--format", "output_format", type=click.Choice([f.value for f in OutputFormat]),
                     help="Record format"),
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
                     help="key=value file; flags override it"),
        click.option("--jobs", type=int, help="joblib workers (-1 for all cores)"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def gibbs_options(func):
    for option in reversed([
        click.option("--steps", type=int, help="Gibbs steps"),
        click.option("--burn-in", "burn_in", type=int, help="Steps discarded before recording"),
        click.option("--thin", type=int, help="Record every thin-th state"),
    ]):
        func = option(func)
    return func


def handle_errors(func):
    """Map MultiSLEError to its exit code with the message on stderr"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except MultiSLEError as exc:
            logger.error("❌ command failed", error=type(exc).__name__, **exc.details)
            click.echo(f"Error: {exc.message}", err=True)
            raise SystemExit(exc.exit_code)

    return wrapper


def build_config(config_file: Optional[str] = None, defaults: Optional[Dict[str, Any]] = None, **flags) -> RunConfig:
    """defaults < config file < flags"""
    values: Dict[str, Any] = {"jobs": settings.n_jobs, "out_path": settings.output_dir}
    values.update(defaults or {})
    if config_file:
        values.update(RunConfig.from_key_value_file(config_file))
    for flag, value in flags.items():
        if value is not None and flag in _FLAG_FIELDS:
            values[_FLAG_FIELDS[flag]] = value
    if values.get("kappa") is None:
        raise ConfigError("--kappa is required (flag or config file)")
    kappa_params(float(values["kappa"]))
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors())
        raise ConfigError(f"invalid configuration: {problems}") from exc


def _out_dir(config: RunConfig) -> Path:
    path = Path(config.out_path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_record(record: dict, config: RunConfig, stem: str) -> Path:
    out = _out_dir(config)
    wrapped = envelope(record, config, VERSION)
    if config.format == OutputFormat.CSV:
        flat = pd.json_normalize(wrapped, sep=".")
        for column in flat.columns:
            if flat[column].map(lambda v: isinstance(v, (list, dict))).any():
                flat[column] = flat[column].map(lambda v: dumps_json(v, indent=0).replace("\n", ""))
        return write_csv(flat, out / f"{stem}.csv")
    return write_json(wrapped, out / f"{stem}.json")


@click.group()
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], case_sensitive=False),
              default=None, help="Overrides MULTISLE_LOG_LEVEL")
@click.option("--log-json/--no-log-json", default=None, help="JSON log lines on stderr")
@click.version_option(VERSION, prog_name="multisle")
def cli(log_level, log_json):
    """Multiple SLE: cascade sampling, partition functions and their verification"""
    configure_logging(log_level, log_json)


@cli.command()
@run_options
@handle_errors
def trace(config_file, **flags):
    """Sample one chord a -> b and write trace.csv, driving.csv and manifest.json"""
    config = build_config(config_file, **flags)
    pattern = LinkPattern(links=config.links)
    if pattern.n_links != 1:
        raise ConfigError("trace takes exactly one link", {"links": pattern.to_string()})
    is_link_pattern(pattern)
    params = kappa_params(config.kappa)
    numerics = config.numerics()

    driving = sample_chordal_driving(params, config.t_max, config.dt, RngStream(seed=config.seed, stream_index=0))
    std = extract_trace(driving, numerics.trace_stride).coarsen(numerics.max_trace_points)
    a, b = pattern.links[0]
    mobius = mobius_to_chord(a, b)
    points = mobius.apply(std.points)

    out = _out_dir(config)
    trace_frame = pd.DataFrame({"capacity": std.capacities, "re": np.real(points), "im": np.imag(points)})
    write_csv(trace_frame, out / "trace.csv")
    write_csv(driving.to_frame(), out / "driving.csv")
    manifest = {
        "files": ["trace.csv", "driving.csv"],
        "n_points": int(len(std)),
        "n_steps": driving.n_steps,
        "total_capacity": driving.total_capacity,
        "flagged_steps": std.flagged_steps,
        "tip": [float(np.real(points[-1])), float(np.imag(points[-1]))],
    }
    write_json(envelope(manifest, config, VERSION), out / "manifest.json")
    logger.info("✅ trace written", out=str(out), n_points=len(std), flagged=std.flagged_steps)
    click.echo(str(out / "manifest.json"))


@cli.command("estimate-h")
@run_options
@click.option("--monte-carlo/--closed-form", "monte_carlo", default=None,
              help="Run the cascade even when a closed form exists")
@handle_errors
def estimate_h(config_file, **flags):
    """Estimate the partition function H of a link pattern"""
    config = build_config(config_file, **flags)
    params = kappa_params(config.kappa)
    estimate = estimate_H(params, config.links, config.n_samples, config.numerics(), config.seed,
                          closed_form_max=1 if config.monte_carlo else 2, n_jobs=config.jobs)
    path = _write_record(estimate.to_record(), config, "estimate")
    for warning in estimate.warnings:
        click.echo(f"Warning: {warning}", err=True)
    click.echo(str(path))


@cli.command()
@run_options
@handle_errors
def sample(config_file, **flags):
    """Draw a weighted cascade ensemble and save it as manifest.json plus per-member curves"""
    config = build_config(config_file, **flags)
    params = kappa_params(config.kappa)
    ensemble = sample_cascade(params, LinkPattern(links=config.links), config.n_samples, config.numerics(),
                              config.seed, config.jobs)
    path = save_ensemble(ensemble, _out_dir(config), config)
    click.echo(str(path))


@cli.command()
@click.argument("source", type=click.Path(exists=True, file_okay=False))
@click.option("--out", type=click.Path(file_okay=False), required=True, help="Directory for the regenerated ensemble")
@click.option("--jobs", type=int, default=None)
@handle_errors
def replay(source, out, jobs):
    """Regenerate a saved weighted ensemble from its manifest"""
    ensemble = replay_ensemble(source, jobs)
    path = save_ensemble(ensemble, Path(out))
    click.echo(str(path))


@cli.command()
@run_options
@gibbs_options
@handle_errors
def gibbs(config_file, **flags):
    """Run the Gibbs chain from tube initial curves; write gibbs.json, observables.csv and final curves"""
    config = build_config(config_file, **flags)
    params = kappa_params(config.kappa)
    pattern = LinkPattern(links=config.links)
    run = gibbs_run(params, pattern, None, config.n_steps, config.burn_in, config.thin, config.numerics(), config.seed)
    out = _out_dir(config)
    write_csv(run.observables, out / "observables.csv")
    files = ["observables.csv"]
    for k, curve in enumerate(run.final.traces, start=1):
        name = f"final_curve_{k}.csv"
        write_csv(curve.to_frame(), out / name)
        files.append(name)
    table = run.observables.drop(columns=["step"], errors="ignore")
    record = {
        "kappa": config.kappa,
        "links": pattern.to_string(),
        "n_steps": config.n_steps,
        "burn_in": config.burn_in,
        "thin": config.thin,
        "retained": int(len(run.observables)),
        "n_failures": run.n_failures,
        "means": {c: float(table[c].mean()) for c in table.columns},
        "autocorrelation_times": run.autocorrelation_times,
        "files": files,
    }
    path = write_json(envelope(record, config, VERSION), out / "gibbs.json")
    click.echo(str(path))


@cli.command()
@click.argument("suite", type=click.Choice([s.value for s in VerifySuite]))
@run_options
@gibbs_options
@handle_errors
def verify(suite, config_file, **flags):
    """Run one verification suite; exit 0 on pass, 1 on failure"""
    suite = VerifySuite(suite)
    defaults = {"links": SUITE_DEFAULT_LINKS[suite]}
    config = build_config(config_file, defaults=defaults, **flags)
    result = run_suite(suite, config)
    out = _out_dir(config)
    path = write_json(result, out / f"verify_{suite.value}.json")
    if config.format == OutputFormat.CSV:
        frame = pd.DataFrame(result.details.get("checks", []))
        write_csv(frame, out / f"verify_{suite.value}.csv")
    click.echo(str(path))
    status = "PASS" if result.passed else "FAIL"
    click.echo(f"{'✅' if result.passed else '❌'} {suite.value}: {status}", err=True)
    if not result.passed:
        raise VerificationFailed(f"{suite.value} verification failed", {"result": str(path)})


def main():
    cli(prog_name="multisle")


if __name__ == "__main__":
    main()
