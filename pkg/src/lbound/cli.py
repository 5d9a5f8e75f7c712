"""Command-line entry points.

Exit codes are a stable contract: 0 success, 2 input or parse error,
3 performance-database miss, 4 storage error. Human-readable latencies
print in milliseconds with 3 decimals; structured output stays in
microseconds. ``LBOUND_DB`` sets the default database path.
"""

from __future__ import annotations

import functools
import json
import os
import sys

import click

from . import analyzer, benchgen, dedup, perfdb, profile_ingest, synth_runner
from .errors import (
    ConfigError,
    CorrelationError,
    DomainError,
    GenerationError,
    GraphStructureError,
    MissError,
    ModelParseError,
    ProfileFormatError,
    ShapeInferenceError,
    ShapeStateError,
    StorageError,
)
from .model_ir import infer_shapes, load_model_file

_INPUT_ERRORS = (ModelParseError, GraphStructureError, ShapeInferenceError,
                 ShapeStateError, ConfigError, GenerationError,
                 ProfileFormatError, CorrelationError, DomainError)


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _INPUT_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except MissError as exc:
            click.echo(f"error: {exc}", err=True)
            for key in exc.keys:
                click.echo(f"  missing: {key}", err=True)
            click.echo("hint: run `lbound bench --delta --simulate` to fill the gaps "
                       "or pass --allow-missing", err=True)
            sys.exit(3)
        except StorageError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(4)
    return wrapper


def _load_inferred(path: str, batch: int):
    graph = load_model_file(path)
    return infer_shapes(graph, batch)


def _db_path(value: str | None) -> str:
    path = value or os.environ.get("LBOUND_DB")
    if not path:
        raise ConfigError("no database path: pass --db or set LBOUND_DB")
    return path


@click.group()
def main():
    """Lower-bound latency benchmarking and analysis for DL model graphs."""


# ---------------------------------------------------------------------------
# process
# ---------------------------------------------------------------------------

@main.command()
@click.argument("models", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--batch", default=1, show_default=True, type=int)
@click.option("--dtype", default="f32", show_default=True,
              type=click.Choice(["f32", "f16"]))
@click.option("--coverage", is_flag=True, help="Also print per-op API coverage.")
@click.option("--format", "fmt", default="text", show_default=True,
              type=click.Choice(["text", "jsonl"]))
@_exit_codes
def process(models, batch, dtype, coverage, fmt):
    """Parse models, infer shapes, and report unique-layer statistics."""
    graphs = [_load_inferred(p, batch) for p in models]
    report = dedup.unique_layers(graphs, dtype)
    if fmt == "jsonl":
        click.echo(dedup.stats_jsonl(report), nl=False)
    else:
        for st in report.per_model + [report.pooled]:
            click.echo(f"{st.model}: {st.total} layers, {st.unique} unique "
                       f"({st.percent:.1f}%)")
    if coverage:
        for graph in graphs:
            cov = dedup.support_coverage(graph)
            click.echo(f"{cov.model}: {cov.percent:.2f}% of layers backed by "
                       f"cuDNN/cuBLAS")
            for row in cov.by_op:
                mark = "supported" if row.supported else "unsupported"
                click.echo(f"  {row.op_type}: {row.count} ({row.share_percent:.1f}%), {mark}")


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

@main.command()
@click.argument("models", nargs=-1, type=click.Path(exists=True))
@click.option("--from-manifest", type=click.Path(exists=True),
              help="Generate from a spec manifest instead of models.")
@click.option("--from-misses", type=click.Path(exists=True),
              help="Generate only the keys listed in a miss file (from analyze --miss-out).")
@click.option("--db", "db_path", default=None, help="Database path (or LBOUND_DB).")
@click.option("--system", "system_name", default=None,
              help="System profile name or JSON path (required to simulate).")
@click.option("--batch", default=1, show_default=True, type=int)
@click.option("--dtypes", default="f32,f16", show_default=True)
@click.option("--layouts", default="NCHW", show_default=True)
@click.option("--algorithms", default=None,
              help="Comma-separated algorithm subset (default: all 8).")
@click.option("--fusion/--no-fusion", default=False, show_default=True)
@click.option("--delta", is_flag=True,
              help="Skip specs that already have results for this system.")
@click.option("--simulate", "do_simulate", is_flag=True,
              help="Run the synthetic cost model and store records.")
@click.option("--emit-src", type=click.Path(), default=None,
              help="Write one generated source file per spec to this directory.")
@click.option("--manifest", "manifest_out", type=click.Path(), default=None,
              help="Write the spec manifest to this path.")
@click.option("--jitter-seed", type=int, default=None,
              help="Enable +/-3% seeded jitter in the simulator.")
@_exit_codes
def bench(models, from_manifest, from_misses, db_path, system_name, batch, dtypes,
          layouts, algorithms, fusion, delta, do_simulate, emit_src, manifest_out,
          jitter_seed):
    """Generate benchmark specs; simulate them or emit source."""
    algos = tuple(benchgen.ConvAlgorithm)
    if algorithms:
        try:
            algos = tuple(benchgen.ConvAlgorithm[a.strip()]
                          for a in algorithms.split(",") if a.strip())
        except KeyError as exc:
            raise ConfigError(f"unknown algorithm {exc}") from exc
    config = benchgen.BenchConfig(
        dtypes=tuple(d.strip() for d in dtypes.split(",") if d.strip()),
        layouts=tuple(l.strip() for l in layouts.split(",") if l.strip()),
        enable_fusion=fusion,
        algorithms=algos,
    )

    if from_manifest:
        with open(from_manifest, "r", encoding="utf-8") as fh:
            specs = benchgen.parse_manifest(fh.read())
    elif from_misses:
        specs = _specs_from_misses(from_misses, config)
    elif models:
        uniques: set[dedup.LayerSignature] = set()
        sites: list[benchgen.FusionSite] = []
        for path in models:
            graph = _load_inferred(path, batch)
            uniques |= dedup.unique_layers([graph], config.dtypes[0]).signatures
            if fusion:
                sites.extend(benchgen.fusion_candidates(graph, config.dtypes[0]))
        specs = benchgen.generate_specs(uniques, config, fusion_sites=sites)
    else:
        raise click.UsageError("give MODELS, --from-manifest, or --from-misses")

    click.echo(f"generated {len(specs)} benchmark spec(s)")

    if manifest_out:
        with open(manifest_out, "w", encoding="utf-8") as fh:
            fh.write(benchgen.manifest_lines(specs))
        click.echo(f"wrote manifest to {manifest_out}")

    if delta or do_simulate:
        path = _db_path(db_path)
        with perfdb.PerfDb(path, mode="rw" if do_simulate else "r") as db:
            if delta:
                if not system_name:
                    raise ConfigError("--delta needs --system to check existing results")
                sysid = _system_id(system_name)
                specs = benchgen.delta_specs(specs, db, sysid)
                click.echo(f"delta: {len(specs)} spec(s) not yet in the database")
            if do_simulate:
                if not system_name:
                    raise ConfigError("--simulate needs --system")
                profile = synth_runner.load_system_profile(system_name)
                n = synth_runner.run_specs(specs, profile, db, jitter_seed=jitter_seed)
                click.echo(f"simulated {n} record(s) into {path}")

    if emit_src:
        os.makedirs(emit_src, exist_ok=True)
        for spec in specs:
            out = os.path.join(emit_src, benchgen.spec_filename(spec))
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(benchgen.emit_benchmark_source(spec))
        click.echo(f"emitted {len(specs)} source file(s) to {emit_src}")


def _system_id(name_or_path: str) -> str:
    return synth_runner.load_system_profile(name_or_path).system_id


def _specs_from_misses(path: str, config: benchgen.BenchConfig):
    """Rebuild specs for the signatures named in a miss-key file."""
    uniques: set[dedup.LayerSignature] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            canonical = line.split("/", 5)[-1] if "/" in line else line
            uniques.add(dedup.parse_signature(canonical))
    return benchgen.generate_specs(uniques, config)


# ---------------------------------------------------------------------------
# db
# ---------------------------------------------------------------------------

@main.group()
def db():
    """Inspect and maintain the performance database."""


@db.command("import")
@click.argument("database", type=click.Path())
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True))
@_exit_codes
def db_import(database, files):
    """Import external result files (same line format, e.g. real hardware)."""
    with perfdb.PerfDb(database, mode="rw") as handle:
        total = 0
        for path in files:
            with open(path, "r", encoding="utf-8") as fh:
                total += handle.import_lines(fh.read())
    click.echo(f"imported {total} record(s) into {database}")


@db.command("compact")
@click.argument("database", type=click.Path(exists=True))
@_exit_codes
def db_compact(database):
    """Drop superseded records and rewrite the file."""
    with perfdb.PerfDb(database, mode="rw") as handle:
        dropped = handle.compact()
    click.echo(f"compacted {database}: dropped {dropped} superseded record(s)")


@db.command("stats")
@click.argument("database", type=click.Path(exists=True))
@_exit_codes
def db_stats(database):
    with perfdb.PerfDb(database) as handle:
        recs = handle.records()
        systems = sorted({r.key.system for r in recs})
        click.echo(f"{len(recs)} live record(s), {len(handle.audit_log)} superseded")
        for system in systems:
            n = sum(1 for r in recs if r.key.system == system)
            click.echo(f"  {system}: {n}")


# ---------------------------------------------------------------------------
# profile
# ---------------------------------------------------------------------------

@main.group()
def profile():
    """Execution-profile utilities."""


@profile.command("convert")
@click.option("--cudnn-log", type=click.Path(exists=True), default=None)
@click.option("--kernels", type=click.Path(exists=True), default=None)
@click.option("--latency-ms", type=float, required=True)
@click.option("--model", required=True)
@click.option("--system", required=True)
@click.option("--batch", default=1, show_default=True, type=int)
@click.option("--strict", is_flag=True, help="Reject unparseable logger lines.")
@click.option("-o", "--out", type=click.Path(), required=True)
@_exit_codes
def profile_convert(cudnn_log, kernels, latency_ms, model, system, batch, strict, out):
    """Convert library logs and a kernel trace into the canonical profile."""
    log_text = ""
    if cudnn_log:
        with open(cudnn_log, "r", encoding="utf-8") as fh:
            log_text = fh.read()
    kern_text = ""
    if kernels:
        with open(kernels, "r", encoding="utf-8") as fh:
            kern_text = fh.read()
    prof = profile_ingest.build_profile(
        model, system, batch, latency_ms, log_text, kern_text, strict=strict)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(profile_ingest.serialize_profile(prof))
    click.echo(f"wrote profile with {len(prof.api_calls)} api call(s) and "
               f"{len(prof.kernels)} kernel(s) to {out}")


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

@main.command()
@click.argument("model", type=click.Path(exists=True))
@click.option("--db", "db_path", default=None, help="Database path (or LBOUND_DB).")
@click.option("--system", "system_name", required=True)
@click.option("--batch", default=1, show_default=True, type=int)
@click.option("--dtype", default="f32", show_default=True,
              type=click.Choice(["f32", "f16"]))
@click.option("--profile", "profile_path", type=click.Path(exists=True), default=None)
@click.option("--measured-ms", type=float, default=None,
              help="Measured latency when no profile is available.")
@click.option("--parallel", is_flag=True, help="Joint scenario: parallel execution.")
@click.option("--fusion", is_flag=True, help="Run the fusion analysis.")
@click.option("--ideal-algo/--logged-algo", default=True, show_default=True,
              help="Joint scenario: ideal vs logged algorithm selection.")
@click.option("--tensor-core", is_flag=True, help="Run the tensor-core analysis.")
@click.option("--layout", default="NCHW", show_default=True,
              type=click.Choice(["NCHW", "NHWC"]))
@click.option("--allow-missing", is_flag=True,
              help="Treat database misses as zero-latency layers.")
@click.option("--out", "fmt", default="text", show_default=True,
              type=click.Choice(["text", "json", "dot"]))
@click.option("--out-file", type=click.Path(), default=None)
@click.option("--miss-out", type=click.Path(), default=None,
              help="Write missing keys to a file consumable by bench --from-misses.")
@_exit_codes
def analyze(model, db_path, system_name, batch, dtype, profile_path, measured_ms,
            parallel, fusion, ideal_algo, tensor_core, layout, allow_missing,
            fmt, out_file, miss_out):
    """Compute lower bounds, Benanza Ratios, and optimization advice."""
    graph = _load_inferred(model, batch)
    sysid = _system_id(system_name)
    prof = None
    if profile_path:
        with open(profile_path, "r", encoding="utf-8") as fh:
            prof = profile_ingest.parse_profile(fh.read())
        measured_ms = measured_ms if measured_ms is not None else prof.measured_latency_ms

    with perfdb.PerfDb(_db_path(db_path)) as handle:
        try:
            lb_seq, ann = analyzer.lower_bound_sequential(
                graph, handle, sysid, dtype, allow_missing=allow_missing)
        except MissError as exc:
            if miss_out:
                with open(miss_out, "w", encoding="utf-8") as fh:
                    fh.write("\n".join(exc.keys) + "\n")
            raise
        cp = analyzer.critical_path(ann)
        report = analyzer.AnalysisReport(
            model=graph.name, system=sysid, batch=batch, dtype=dtype,
            lb_sequential_us=lb_seq, lb_parallel_us=cp.total_latency_us,
            critical_path=cp, measured_ms=measured_ms, missing=ann.missing,
        )
        if measured_ms is not None:
            measured_us = measured_ms * 1000.0
            report.br_sequential = analyzer.benanza_ratio(lb_seq, measured_us)
            report.br_parallel = analyzer.benanza_ratio(cp.total_latency_us, measured_us)
        if prof is not None:
            report.algorithm = analyzer.algorithm_advice(prof, graph, handle, sysid, dtype)
            expected = analyzer.expected_api_sequence(graph, dtype)
            report.deviations = analyzer.framework_diff(prof, expected)
        if fusion:
            report.fusion = analyzer.fusion_analysis(graph, handle, sysid, dtype)
        if tensor_core:
            report.tensorcore = analyzer.tensorcore_analysis(
                graph, handle, sysid, layout=layout, profile=prof)
        if parallel or fusion or tensor_core or not ideal_algo:
            scenario = analyzer.Scenario(
                parallel=parallel, ideal_algo=ideal_algo, fusion=fusion,
                tensor_core=tensor_core, layout=layout)
            report.joint = analyzer.joint_analysis(
                graph, handle, sysid, scenario,
                measured_us=measured_ms * 1000.0 if measured_ms else None,
                profile=prof)

    if fmt == "dot":
        text = analyzer.export_dot(ann, cp)
    elif fmt == "json":
        text = analyzer.report_to_json(report)
    else:
        text = analyzer.report_to_text(report)
    if out_file:
        with open(out_file, "w", encoding="utf-8") as fh:
            fh.write(text)
        click.echo(f"wrote {fmt} report to {out_file}")
    else:
        click.echo(text, nl=False)


# ---------------------------------------------------------------------------
# advise
# ---------------------------------------------------------------------------

@main.command()
@click.argument("model", type=click.Path(exists=True))
@click.option("--db", "db_path", default=None, help="Database path (or LBOUND_DB).")
@click.option("--systems", required=True, help="Comma-separated system ids.")
@click.option("--batch", default=1, show_default=True, type=int)
@click.option("--dtype", default="f32", show_default=True,
              type=click.Choice(["f32", "f16"]))
@click.option("--costs", default=None,
              help="Comma-separated system=dollars_per_hour pairs.")
@click.option("--rank-by", default=None, type=click.Choice(["latency", "cost"]),
              help="Default: cost when --costs given, else latency.")
@_exit_codes
def advise(model, db_path, systems, batch, dtype, costs, rank_by):
    """Rank systems for a model by lower bound, optionally weighted by cost."""
    graph = _load_inferred(model, batch)
    system_list = [s.strip() for s in systems.split(",") if s.strip()]
    cost_map = None
    if costs:
        cost_map = {}
        for pair in costs.split(","):
            key, sep, value = pair.partition("=")
            if not sep:
                raise ConfigError(f"bad cost entry {pair!r}; use system=value")
            cost_map[key.strip()] = float(value)
    if rank_by is None:
        rank_by = "cost" if cost_map else "latency"
    with perfdb.PerfDb(_db_path(db_path)) as handle:
        rows = analyzer.advise_systems(graph, handle, system_list, dtype,
                                       cost_per_hour=cost_map, rank_by=rank_by)
    for i, row in enumerate(rows, start=1):
        cost = f", cost score {row.cost_score:.1f}" if row.cost_score is not None else ""
        flag = "  [incomplete: database misses]" if row.has_misses else ""
        click.echo(f"{i}. {row.system}: {row.lb_us / 1000.0:.3f} ms{cost}{flag}")


if __name__ == "__main__":
    main()
