"""Command-line front end.

    rodca run      --config desk --out results/run1
    rodca sweep    --config sweep.json --out results/grid --jobs 4
    rodca validate --config my.json --set traffic.load_scale=2

``--config`` takes a JSON file or the name of a bundled preset. Exit codes:
0 success, 2 invalid configuration, 1 failure while running.
"""
from __future__ import annotations

import csv
import itertools
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from . import __version__
from .config import apply_overrides, build_config, read_document, resolve_key, set_field
from .engine import Simulator
from .exceptions import ConfigError
from .metrics import (AGGREGATE_METRICS, export_events, export_summary, export_timeseries,
                      mean_confidence_interval, write_json)

EXIT_RUNTIME = 1
EXIT_INVALID = 2


def _fail_config(exc: ConfigError):
    where = f" [{exc.field}]" if getattr(exc, "field", None) else ""
    click.echo(f"invalid configuration{where}: {exc}", err=True)
    sys.exit(EXIT_INVALID)


def _base_document(config, seed, no_reconfig, overrides):
    doc = apply_overrides(read_document(config), overrides)
    if seed is not None:
        doc = set_field(doc, "seed", seed)
    if no_reconfig:
        doc = set_field(doc, "reconfiguration_enabled", False)
    return doc


def simulate(config, out_dir, timeseries=True):
    """Run one configuration and write its outputs; returns the summary document."""
    out = Path(out_dir)
    sim = Simulator(config)
    result = sim.run()
    export_summary(result.summary, out / "summary.json")
    if timeseries:
        export_timeseries(result.records, out / "timeseries.csv")
        export_events(result.events, out / "events.csv", config.slot_duration)
    return result.summary


config_option = click.option("--config", "config", required=True,
                             help="JSON config file or preset name (paper, desk).")
set_option = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                          help="Override a field; dotted (traffic.load_scale) or bare name.")
seed_option = click.option("--seed", type=int, default=None, help="Random seed (base seed for sweeps).")
reconf_option = click.option("--no-reconfig", is_flag=True, help="Disable reconfiguration.")


@click.group()
@click.version_option(__version__, prog_name="rodca")
def main():
    """Time-slotted simulator of a reconfigurable AWGR-based optical DCN."""


@main.command()
@config_option
@set_option
@seed_option
@reconf_option
def validate(config, overrides, seed, no_reconfig):
    """Check a configuration without running it."""
    try:
        cfg = build_config(_base_document(config, seed, no_reconfig, overrides))
    except ConfigError as exc:
        _fail_config(exc)
    t = cfg.topology
    click.echo(f"ok: P={t.n_clusters} M={t.racks_per_cluster} W={t.n_wavelengths} "
               f"({t.n_racks} racks), slot {cfg.slot_duration * 1e6:.3f} us, "
               f"{cfg.n_slots} slots")


@main.command("run")
@config_option
@click.option("--out", "out_dir", default="results/run", show_default=True,
              type=click.Path(file_okay=False), help="Output directory.")
@set_option
@seed_option
@reconf_option
def run_cmd(config, out_dir, overrides, seed, no_reconfig):
    """Run one simulation; writes summary.json, timeseries.csv and events.csv."""
    try:
        cfg = build_config(_base_document(config, seed, no_reconfig, overrides))
    except ConfigError as exc:
        _fail_config(exc)
    t0 = time.perf_counter()
    try:
        summary = simulate(cfg, out_dir)
    except Exception as exc:  # noqa: BLE001 - report any run failure as exit 1
        click.echo(f"run failed: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    click.echo(f"{summary.slots} slots in {time.perf_counter() - t0:.1f} s: "
               f"mean latency {summary.mean_latency_us:.3f} us, "
               f"drop rate {summary.drop_rate:.6f}, "
               f"{summary.reconfigurations} reconfigurations -> {out_dir}", err=True)


def _sweep_job(doc, run_dir):
    try:
        summary = simulate(build_config(doc), run_dir, timeseries=False)
        return summary.to_dict(), None
    except Exception as exc:  # noqa: BLE001 - recorded per run
        return None, f"{type(exc).__name__}: {exc}"


def plan_sweep(spec: dict, trials=None, base_seed=None, overrides=(), no_reconfig=False):
    """Expand a sweep document into ``(axes, points, jobs)``.

    ``points`` lists axis-value tuples; ``jobs`` lists
    ``(point_index, trial, config_document)`` with seed ``base_seed + trial``.
    A document without ``base`` is treated as a plain config swept over
    nothing.
    """
    if "base" in spec:
        base = spec["base"]
        base_doc = read_document(base) if isinstance(base, str) else dict(base)
        base_doc = apply_overrides(base_doc, spec.get("set", ()))
        axes = dict(spec.get("axes", {}))
        n_trials = spec.get("trials", 1)
        seed0 = spec.get("base_seed", base_doc.get("seed", 0))
    else:
        base_doc, axes, n_trials, seed0 = dict(spec), {}, 1, spec.get("seed", 0)
    base_doc = apply_overrides(base_doc, overrides)
    if no_reconfig:
        base_doc = set_field(base_doc, "reconfiguration_enabled", False)
    if trials is not None:
        n_trials = trials
    if base_seed is not None:
        seed0 = base_seed
    if isinstance(n_trials, bool) or not isinstance(n_trials, int) or n_trials < 1:
        raise ConfigError("trials must be an integer >= 1", field="trials")
    for key, values in axes.items():
        resolve_key(key)
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep axis {key!r} must be a non-empty list", field=key)
    names = list(axes)
    points = list(itertools.product(*(axes[k] for k in names)))
    jobs = []
    for p, values in enumerate(points):
        doc = base_doc
        for key, value in zip(names, values):
            doc = set_field(doc, key, value)
        build_config(doc)      # validate every grid point before anything runs
        for trial in range(n_trials):
            jobs.append((p, trial, set_field(doc, "seed", seed0 + trial)))
    return names, points, jobs


def write_aggregate(path, names, points, n_trials, results):
    """One row per grid point: axis values, trial counts, mean and 95% half-width."""
    header = ["point", *names, "trials", "completed"]
    for m in AGGREGATE_METRICS:
        header += [f"{m}_mean", f"{m}_ci95"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for p, values in enumerate(points):
            done = [s for s in results.get(p, []) if s is not None]
            row = [p, *values, n_trials, len(done)]
            for m in AGGREGATE_METRICS:
                if done:
                    mean, half = mean_confidence_interval([s[m] for s in done])
                    row += [f"{mean:.9g}", "" if half != half else f"{half:.9g}"]
                else:
                    row += ["", ""]
            writer.writerow(row)


@main.command()
@config_option
@click.option("--out", "out_dir", default="results/sweep", show_default=True,
              type=click.Path(file_okay=False), help="Output directory.")
@click.option("--trials", type=int, default=None, help="Trials per grid point.")
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
              help="Simulations run concurrently.")
@set_option
@seed_option
@reconf_option
def sweep(config, out_dir, trials, jobs, overrides, seed, no_reconfig):
    """Run a parameter grid with replicated trials.

    Trial k of every grid point uses seed base_seed + k. Writes one
    summary per run under runs/ and aggregate.csv with the mean and 95%
    confidence half-width of each metric per grid point.
    """
    try:
        spec = read_document(config)
        names, points, job_list = plan_sweep(spec, trials, seed, overrides, no_reconfig)
    except ConfigError as exc:
        _fail_config(exc)
    out = Path(out_dir)
    n_trials = max(t for _, t, _ in job_list) + 1
    dirs = [out / "runs" / f"p{p:03d}_t{t:03d}" for p, t, _ in job_list]
    docs = [doc for _, _, doc in job_list]
    t0 = time.perf_counter()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_sweep_job, docs, dirs))
    else:
        outcomes = [_sweep_job(d, r) for d, r in zip(docs, dirs)]
    results: dict[int, list] = {}
    failures = []
    for (p, t, _), run_dir, (summary, error) in zip(job_list, dirs, outcomes):
        results.setdefault(p, []).append(summary)
        if error is not None:
            failures.append({"point": p, "trial": t, "run": run_dir.name, "error": error})
    out.mkdir(parents=True, exist_ok=True)
    write_aggregate(out / "aggregate.csv", names, points, n_trials, results)
    write_json({"failures": failures}, out / "failures.json")
    click.echo(f"{len(job_list)} runs over {len(points)} grid points in "
               f"{time.perf_counter() - t0:.1f} s, {len(failures)} failed -> {out_dir}", err=True)
    if failures:
        for f in failures:
            click.echo(f"  {f['run']}: {f['error']}", err=True)
        sys.exit(EXIT_RUNTIME)


if __name__ == "__main__":
    main()
