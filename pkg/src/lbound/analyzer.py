"""Lower-bound latency computation and optimization analyses.

The sequential lower bound sums each supported layer's best benchmark
latency; non-compute layers (Opaque, reshape-family, concat) contribute
zero. The parallel lower bound assumes unbounded concurrency between
data-independent layers and equals the critical-path total: the graph is
re-weighted with edge weight (u -> v) = -latency(v), a virtual source feeds
every producer-less node with weight -latency(node) and a virtual sink
collects terminal nodes at weight zero, and a single shortest-path pass in
topological order yields the path whose negated distance is the bound.
Among equal-latency paths the lexicographically smallest node-id sequence
wins, keeping report output stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .benchgen import fusion_candidates
from .dedup import LayerSignature, api_for_op, render_value, signature
from .errors import ConfigError, CorrelationError, DomainError, MissError
from .model_ir import ModelGraph, topo_order
from .perfdb import ANY, PerfDb, PerfRecord, RecordKey
from .profile_ingest import ApiCall, ExecutionProfile, detect_tensorcore


@dataclass
class LatencyAnnotatedGraph:
    graph: ModelGraph
    latencies: dict[str, float]
    chosen: dict[str, PerfRecord | None]
    missing: list[str] = field(default_factory=list)


@dataclass
class CriticalPath:
    node_ids: list[str]
    total_latency_us: float


@dataclass
class BenanzaRatio:
    br: float
    speedup: float
    warning: str | None = None


def annotate(graph: ModelGraph, db: PerfDb, system: str, dtype: str,
             layout: str | None = None, allow_missing: bool = False) -> LatencyAnnotatedGraph:
    """Attach the best database latency to every supported layer.

    ``layout`` restricts convolution-family lookups; other layers always
    take their lowest-latency record. Misses abort with the full miss list
    unless ``allow_missing``, in which case missing layers contribute zero
    and are reported.
    """
    latencies: dict[str, float] = {}
    chosen: dict[str, PerfRecord | None] = {}
    missing: list[str] = []
    for nid in topo_order(graph):
        node = graph.nodes[nid]
        if api_for_op(node.op_type) is None:
            latencies[nid] = 0.0
            chosen[nid] = None
            continue
        sig = signature(node, dtype)
        want_layout = layout if (layout and node.op_type == "Conv") else ANY
        try:
            rec = db.best(system, dtype, sig, layout=want_layout, fused=None)
        except MissError as exc:
            missing.extend(exc.keys)
            latencies[nid] = 0.0
            chosen[nid] = None
            continue
        latencies[nid] = rec.latency_us
        chosen[nid] = rec
    if missing and not allow_missing:
        raise MissError(missing)
    return LatencyAnnotatedGraph(graph, latencies, chosen, missing)


def sequential_total(ann: LatencyAnnotatedGraph) -> float:
    return sum(ann.latencies[nid] for nid in topo_order(ann.graph))


def lower_bound_sequential(graph: ModelGraph, db: PerfDb, system: str, dtype: str,
                           layout: str | None = None, allow_missing: bool = False,
                           ) -> tuple[float, LatencyAnnotatedGraph]:
    ann = annotate(graph, db, system, dtype, layout=layout, allow_missing=allow_missing)
    return sequential_total(ann), ann


def critical_path(ann: LatencyAnnotatedGraph) -> CriticalPath:
    """Highest-total source-to-sink simple path under per-node latencies."""
    graph = ann.graph
    order = topo_order(graph)
    if not order:
        return CriticalPath([], 0.0)
    lat = ann.latencies
    node_ids = set(graph.nodes)
    # dist[v]: shortest distance from the virtual source using weights
    # -latency(v); path[v]: lexicographically smallest arg-min path.
    dist: dict[str, float] = {}
    path: dict[str, tuple[str, ...]] = {}
    for nid in order:
        preds = [p for p in graph.nodes[nid].input_ids if p in node_ids]
        if not preds:
            cands = [(0.0 - lat[nid], (nid,))]
        else:
            cands = [(dist[p] - lat[nid], path[p] + (nid,)) for p in preds]
        dist[nid], path[nid] = min(cands)
    sinks = [nid for nid in order if not graph.nodes[nid].output_ids]
    best_dist, best_path = min((dist[s], path[s]) for s in sinks)
    return CriticalPath(list(best_path), -best_dist)


def lower_bound_parallel(ann: LatencyAnnotatedGraph) -> float:
    return critical_path(ann).total_latency_us


def _total(ann: LatencyAnnotatedGraph, latencies: dict[str, float], mode: str) -> float:
    scoped = LatencyAnnotatedGraph(ann.graph, latencies, ann.chosen, ann.missing)
    if mode == "parallel":
        return critical_path(scoped).total_latency_us
    if mode == "sequential":
        return sequential_total(scoped)
    raise ConfigError(f"unknown mode {mode!r}")


def benanza_ratio(lower_bound_us: float, measured_us: float) -> BenanzaRatio:
    """br = lower bound / measured; 1/br is the potential speedup."""
    if lower_bound_us <= 0 or measured_us <= 0:
        raise DomainError(
            f"latencies must be positive, got lower bound {lower_bound_us} "
            f"and measured {measured_us}")
    br = lower_bound_us / measured_us
    warning = None
    if br > 1.0:
        warning = ("lower bound exceeds measured latency; "
                   "database results may be stale or the profile mismatched")
    return BenanzaRatio(br, 1.0 / br, warning)


# ---------------------------------------------------------------------------
# Q3: convolution algorithm selection
# ---------------------------------------------------------------------------

@dataclass
class AdviceEntry:
    node_id: str
    chosen_algorithm: str
    ideal_algorithm: str
    chosen_us: float
    ideal_us: float
    ratio: float


@dataclass
class AlgorithmAdvice:
    entries: list[AdviceEntry]
    unknown: list[str]  # node ids whose logged algorithm has no DB record
    warnings: list[str]
    lb_chosen_us: float
    lb_ideal_us: float
    aggregate_speedup: float


def algorithm_advice(profile: ExecutionProfile, graph: ModelGraph, db: PerfDb,
                     system: str, dtype: str, layout: str = "NCHW") -> AlgorithmAdvice:
    """Audit logged convolution algorithms against the measured optimum.

    The i-th logged convolution call corresponds to the i-th convolution in
    topological order; shape parameters in the log, when present, are
    cross-checked and mismatches downgrade to a warning.
    """
    conv_nodes = [graph.nodes[nid] for nid in topo_order(graph)
                  if graph.nodes[nid].op_type == "Conv"]
    conv_calls = [c for c in profile.api_calls if c.api_name == "cudnnConvolutionForward"]
    if len(conv_nodes) != len(conv_calls):
        raise CorrelationError(
            f"graph has {len(conv_nodes)} convolution layers but the log has "
            f"{len(conv_calls)} convolution calls")
    ann = annotate(graph, db, system, dtype, layout=layout)
    entries: list[AdviceEntry] = []
    unknown: list[str] = []
    warnings: list[str] = []
    lb_ideal = sequential_total(ann)
    lb_chosen = lb_ideal
    for node, call in zip(conv_nodes, conv_calls):
        x_logged = call.params.get("x")
        if x_logged and node.in_shapes and x_logged != node.in_shapes[0].render():
            warnings.append(
                f"call seq {call.seq}: input dims {x_logged} differ from layer "
                f"{node.id!r} ({node.in_shapes[0].render()})")
        logged = call.params.get("algo")
        if not logged:
            unknown.append(node.id)
            continue
        sig = signature(node, dtype)
        rec = db.record_for(RecordKey(
            system, dtype, sig.hash64, sig.canonical_string, logged, layout, None))
        if rec is None or rec.status != "ok":
            unknown.append(node.id)
            continue
        ideal_us = ann.latencies[node.id]
        lb_chosen += rec.latency_us - ideal_us
        if rec.latency_us > ideal_us:
            ideal_rec = ann.chosen[node.id]
            entries.append(AdviceEntry(
                node_id=node.id,
                chosen_algorithm=logged,
                ideal_algorithm=ideal_rec.key.algorithm or "-",
                chosen_us=rec.latency_us,
                ideal_us=ideal_us,
                ratio=rec.latency_us / ideal_us,
            ))
    aggregate = lb_chosen / lb_ideal if lb_ideal > 0 else 1.0
    return AlgorithmAdvice(entries, unknown, warnings, lb_chosen, lb_ideal, aggregate)


# ---------------------------------------------------------------------------
# Q4: framework inefficiency inspection
# ---------------------------------------------------------------------------

@dataclass
class ExpectedCall:
    node_id: str
    api_name: str
    params: dict[str, str]


@dataclass
class Deviation:
    kind: str  # missing_call | extra_call | param_mismatch | foreign_api
    #          # excessive_sync | unexpected_kernel
    detail: str
    count: int = 1
    backtrace: list[str] | None = None


def expected_api_sequence(graph: ModelGraph, dtype: str) -> list[ExpectedCall]:
    """Library calls a faithful execution of the graph would make, in order."""
    calls: list[ExpectedCall] = []
    for nid in topo_order(graph):
        node = graph.nodes[nid]
        row = api_for_op(node.op_type)
        if row is None:
            continue
        params: dict[str, str] = {}
        if node.in_shapes:
            params["x"] = node.in_shapes[0].render()
        if node.op_type == "Conv":
            for key in ("w1", "strides", "pads", "dilations", "group"):
                if key in node.params:
                    name = "w" if key == "w1" else key
                    params[name] = render_value(node.params[key])
        calls.append(ExpectedCall(nid, row.api_name, params))
    return calls


def _lcs_pairs(expected: list[str], actual: list[str]) -> list[tuple[int, int]]:
    n, m = len(expected), len(actual)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if expected[i] == actual[j]:
                table[i][j] = table[i + 1][j + 1] + 1
            else:
                table[i][j] = max(table[i + 1][j], table[i][j + 1])
    pairs: list[tuple[int, int]] = []
    i = j = 0
    while i < n and j < m:
        if expected[i] == actual[j]:
            pairs.append((i, j))
            i += 1
            j += 1
        elif table[i + 1][j] >= table[i][j + 1]:
            i += 1
        else:
            j += 1
    return pairs


def framework_diff(profile: ExecutionProfile,
                   expected: list[ExpectedCall]) -> list[Deviation]:
    """Compare the logged execution against the expected call sequence.

    Reports extra and missing library calls, parameter mismatches on
    matched calls, foreign CUDA API activity between library calls, and
    kernels recorded between calls (with backtraces when present).
    """
    lib_calls: list[ApiCall] = []
    other_calls: list[ApiCall] = []
    for call in profile.api_calls:
        if call.api_name.startswith(("cudnn", "cublas")):
            lib_calls.append(call)
        else:
            other_calls.append(call)

    deviations: list[Deviation] = []
    pairs = _lcs_pairs([e.api_name for e in expected], [c.api_name for c in lib_calls])
    matched_e = {i for i, _ in pairs}
    matched_a = {j for _, j in pairs}

    for i, j in pairs:
        exp, act = expected[i], lib_calls[j]
        for key in sorted(set(exp.params) & set(act.params)):
            if str(act.params[key]) != exp.params[key]:
                deviations.append(Deviation(
                    kind="param_mismatch",
                    detail=(f"{act.api_name} (seq {act.seq}, layer {exp.node_id!r}): "
                            f"{key} expected {exp.params[key]}, logged {act.params[key]}"),
                ))
    for i, exp in enumerate(expected):
        if i not in matched_e:
            deviations.append(Deviation(
                kind="missing_call",
                detail=f"expected {exp.api_name} for layer {exp.node_id!r} never appeared",
            ))
    for j, act in enumerate(lib_calls):
        if j not in matched_a:
            deviations.append(Deviation(
                kind="extra_call",
                detail=f"unexpected {act.api_name} at seq {act.seq}",
                backtrace=act.backtrace,
            ))

    lib_seqs = sorted(c.seq for c in lib_calls)
    sync_count = 0
    for call in other_calls:
        between = lib_seqs and lib_seqs[0] < call.seq < lib_seqs[-1]
        if call.api_name == "cudaStreamWaitEvent" and between:
            sync_count += 1
        else:
            deviations.append(Deviation(
                kind="foreign_api",
                detail=f"{call.api_name} at seq {call.seq}",
                backtrace=call.backtrace,
            ))
    if sync_count:
        deviations.append(Deviation(
            kind="excessive_sync",
            detail="cudaStreamWaitEvent between consecutive library calls",
            count=sync_count,
        ))

    for kern in profile.kernels:
        if kern.seq_between is not None:
            deviations.append(Deviation(
                kind="unexpected_kernel",
                detail=(f"kernel {kern.name} ({kern.duration_us} us) between "
                        f"calls {kern.seq_between[0]} and {kern.seq_between[1]}"),
            ))
    return deviations


# ---------------------------------------------------------------------------
# Q5: layer fusion
# ---------------------------------------------------------------------------

@dataclass
class FusionSiteResult:
    pattern_id: str
    member_ids: tuple[str, ...]
    applied: bool
    fused_us: float | None
    member_sum_us: float
    profit_us: float  # signed; negative when fusing is slower


@dataclass
class FusionAnalysis:
    unfused_lb_us: float
    fused_lb_us: float
    profit_ratio: float
    fused_layer_count: int
    sites: list[FusionSiteResult]


def fusion_analysis(graph: ModelGraph, db: PerfDb, system: str, dtype: str,
                    mode: str = "sequential", layout: str | None = None) -> FusionAnalysis:
    """Lower-bound profit of fusing registered patterns.

    Where a fused record exists its latency replaces the member latencies;
    where it is absent the non-fused layer latencies are kept. Substitution
    applies even when the fused record is slower; the signed profit says so.
    """
    ann = annotate(graph, db, system, dtype, layout=layout)
    sites = fusion_candidates(graph, dtype)
    latencies = dict(ann.latencies)
    results: list[FusionSiteResult] = []
    for site in sites:
        member_sum = sum(ann.latencies[m] for m in site.member_ids)
        try:
            rec = db.best(system, dtype, site.head_signature,
                          layout=layout if layout else ANY, fused=site.pattern_id)
        except MissError:
            results.append(FusionSiteResult(
                site.pattern_id, site.member_ids, False, None, member_sum, 0.0))
            continue
        head = site.member_ids[0]
        latencies[head] = rec.latency_us
        for mid in site.member_ids[1:]:
            latencies[mid] = 0.0
        results.append(FusionSiteResult(
            site.pattern_id, site.member_ids, True, rec.latency_us, member_sum,
            member_sum - rec.latency_us))
    unfused_lb = _total(ann, ann.latencies, mode)
    fused_lb = _total(ann, latencies, mode)
    ratio = unfused_lb / fused_lb if fused_lb > 0 else 1.0
    fused_layer_count = sum(len(site.member_ids) for site in sites)
    return FusionAnalysis(unfused_lb, fused_lb, ratio, fused_layer_count, results)


# ---------------------------------------------------------------------------
# Q6: Tensor Cores
# ---------------------------------------------------------------------------

@dataclass
class TensorCoreAnalysis:
    lb_f32_us: float
    lb_f16_us: float
    speedup: float
    layout: str
    tc_used_in_profile: bool | None


def tensorcore_analysis(graph: ModelGraph, db: PerfDb, system: str,
                        mode: str = "sequential", layout: str = "NCHW",
                        profile: ExecutionProfile | None = None) -> TensorCoreAnalysis:
    """f32 vs f16 lower bound; kernel names reveal actual tensor-core use."""
    ann32 = annotate(graph, db, system, "f32", layout="NCHW")
    ann16 = annotate(graph, db, system, "f16", layout=layout)
    lb32 = _total(ann32, ann32.latencies, mode)
    lb16 = _total(ann16, ann16.latencies, mode)
    tc_used = None
    if profile is not None:
        tc_used = any(detect_tensorcore(k.name) for k in profile.kernels)
    speedup = lb32 / lb16 if lb16 > 0 else 1.0
    return TensorCoreAnalysis(lb32, lb16, speedup, layout, tc_used)


# ---------------------------------------------------------------------------
# Joint what-if analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    parallel: bool = False
    ideal_algo: bool = True
    fusion: bool = False
    tensor_core: bool = False
    layout: str = "NCHW"


@dataclass
class JointAnalysis:
    scenario: Scenario
    dtype: str
    lb_us: float
    speedup: float | None  # vs measured, when a measurement is available


def joint_analysis(graph: ModelGraph, db: PerfDb, system: str, scenario: Scenario,
                   measured_us: float | None = None,
                   profile: ExecutionProfile | None = None) -> JointAnalysis:
    """Apply scenario toggles compositionally and report the what-if bound.

    dtype/layout selection runs first, then fusion substitution, then
    per-layer algorithm choice (best, or the logged algorithms when
    ``ideal_algo`` is off and a profile is supplied), then the sequential
    sum or the critical path.
    """
    dtype = "f16" if scenario.tensor_core else "f32"
    layout = scenario.layout if scenario.tensor_core else None
    ann = annotate(graph, db, system, dtype, layout=layout)
    latencies = dict(ann.latencies)

    if not scenario.ideal_algo and profile is not None:
        conv_nodes = [graph.nodes[nid] for nid in topo_order(graph)
                      if graph.nodes[nid].op_type == "Conv"]
        conv_calls = [c for c in profile.api_calls
                      if c.api_name == "cudnnConvolutionForward"]
        if len(conv_nodes) != len(conv_calls):
            raise CorrelationError(
                f"graph has {len(conv_nodes)} convolution layers but the log has "
                f"{len(conv_calls)} convolution calls")
        for node, call in zip(conv_nodes, conv_calls):
            logged = call.params.get("algo")
            if not logged:
                continue
            sig = signature(node, dtype)
            rec = db.record_for(RecordKey(
                system, dtype, sig.hash64, sig.canonical_string, logged,
                layout or "NCHW", None))
            if rec is not None and rec.status == "ok":
                latencies[node.id] = rec.latency_us

    if scenario.fusion:
        for site in fusion_candidates(graph, dtype):
            try:
                rec = db.best(system, dtype, site.head_signature,
                              layout=layout if layout else ANY, fused=site.pattern_id)
            except MissError:
                continue
            latencies[site.member_ids[0]] = rec.latency_us
            for mid in site.member_ids[1:]:
                latencies[mid] = 0.0

    mode = "parallel" if scenario.parallel else "sequential"
    lb = _total(ann, latencies, mode)
    speedup = (measured_us / lb) if (measured_us and lb > 0) else None
    return JointAnalysis(scenario, dtype, lb, speedup)


# ---------------------------------------------------------------------------
# Cross-system advising
# ---------------------------------------------------------------------------

@dataclass
class SystemAdvice:
    system: str
    lb_us: float
    cost_score: float | None
    has_misses: bool


def advise_systems(graph: ModelGraph, db: PerfDb, systems: list[str], dtype: str,
                   cost_per_hour: dict[str, float] | None = None,
                   rank_by: str = "latency") -> list[SystemAdvice]:
    """Rank systems by lower bound, or by lower bound x cost.

    Systems with database misses rank last and are flagged.
    """
    if rank_by not in ("latency", "cost"):
        raise ConfigError(f"unknown ranking key {rank_by!r}")
    rows: list[SystemAdvice] = []
    for system in systems:
        lb, ann = lower_bound_sequential(graph, db, system, dtype, allow_missing=True)
        cost = (cost_per_hour or {}).get(system)
        score = lb * cost if cost is not None else None
        if rank_by == "cost" and score is None:
            raise ConfigError(f"no cost given for system {system!r}")
        rows.append(SystemAdvice(system, lb, score, bool(ann.missing)))
    key = (lambda r: (r.has_misses, r.cost_score, r.system)) if rank_by == "cost" \
        else (lambda r: (r.has_misses, r.lb_us, r.system))
    rows.sort(key=key)
    return rows


# ---------------------------------------------------------------------------
# Report assembly and rendering
# ---------------------------------------------------------------------------

@dataclass
class AnalysisReport:
    model: str
    system: str
    batch: int
    dtype: str
    lb_sequential_us: float
    lb_parallel_us: float
    critical_path: CriticalPath
    measured_ms: float | None = None
    br_sequential: BenanzaRatio | None = None
    br_parallel: BenanzaRatio | None = None
    missing: list[str] = field(default_factory=list)
    algorithm: AlgorithmAdvice | None = None
    deviations: list[Deviation] | None = None
    fusion: FusionAnalysis | None = None
    tensorcore: TensorCoreAnalysis | None = None
    joint: JointAnalysis | None = None


def report_to_json(report: AnalysisReport) -> str:
    """Deterministic structured rendering; latencies stay in microseconds."""
    obj: dict = {
        "model": report.model,
        "system": report.system,
        "batch": report.batch,
        "dtype": report.dtype,
        "lb_sequential_us": report.lb_sequential_us,
        "lb_parallel_us": report.lb_parallel_us,
        "critical_path": report.critical_path.node_ids,
        "measured_ms": report.measured_ms,
        "br_sequential": _br_obj(report.br_sequential),
        "br_parallel": _br_obj(report.br_parallel),
        "missing": report.missing,
    }
    if report.algorithm is not None:
        obj["algorithm_advice"] = {
            "entries": [{
                "node": e.node_id,
                "chosen": e.chosen_algorithm,
                "ideal": e.ideal_algorithm,
                "chosen_us": e.chosen_us,
                "ideal_us": e.ideal_us,
                "ratio": e.ratio,
            } for e in report.algorithm.entries],
            "unknown": report.algorithm.unknown,
            "warnings": report.algorithm.warnings,
            "lb_chosen_us": report.algorithm.lb_chosen_us,
            "lb_ideal_us": report.algorithm.lb_ideal_us,
            "aggregate_speedup": report.algorithm.aggregate_speedup,
        }
    if report.deviations is not None:
        obj["framework_deviations"] = [{
            "kind": d.kind,
            "detail": d.detail,
            "count": d.count,
            "backtrace": d.backtrace,
        } for d in report.deviations]
    if report.fusion is not None:
        obj["fusion"] = {
            "unfused_lb_us": report.fusion.unfused_lb_us,
            "fused_lb_us": report.fusion.fused_lb_us,
            "profit_ratio": report.fusion.profit_ratio,
            "fused_layer_count": report.fusion.fused_layer_count,
            "sites": [{
                "pattern": s.pattern_id,
                "members": list(s.member_ids),
                "applied": s.applied,
                "fused_us": s.fused_us,
                "member_sum_us": s.member_sum_us,
                "profit_us": s.profit_us,
            } for s in report.fusion.sites],
        }
    if report.tensorcore is not None:
        obj["tensorcore"] = {
            "lb_f32_us": report.tensorcore.lb_f32_us,
            "lb_f16_us": report.tensorcore.lb_f16_us,
            "speedup": report.tensorcore.speedup,
            "layout": report.tensorcore.layout,
            "tc_used_in_profile": report.tensorcore.tc_used_in_profile,
        }
    if report.joint is not None:
        obj["joint"] = {
            "scenario": {
                "parallel": report.joint.scenario.parallel,
                "ideal_algo": report.joint.scenario.ideal_algo,
                "fusion": report.joint.scenario.fusion,
                "tensor_core": report.joint.scenario.tensor_core,
                "layout": report.joint.scenario.layout,
            },
            "dtype": report.joint.dtype,
            "lb_us": report.joint.lb_us,
            "speedup": report.joint.speedup,
        }
    return json.dumps(obj, separators=(",", ":")) + "\n"


def _br_obj(br: BenanzaRatio | None):
    if br is None:
        return None
    return {"br": br.br, "speedup": br.speedup, "warning": br.warning}


def _ms(us: float) -> str:
    return f"{us / 1000.0:.3f} ms"


def report_to_text(report: AnalysisReport) -> str:
    lines = [
        f"model {report.model}  system {report.system}  batch {report.batch}  "
        f"dtype {report.dtype}",
        f"  lower bound (sequential): {_ms(report.lb_sequential_us)}",
        f"  lower bound (parallel):   {_ms(report.lb_parallel_us)}",
        f"  critical path: {len(report.critical_path.node_ids)} layers",
    ]
    if report.measured_ms is not None:
        lines.append(f"  measured: {report.measured_ms:.3f} ms")
    if report.br_sequential is not None:
        lines.append(f"  BR sequential: {report.br_sequential.br:.3f} "
                     f"(potential speedup {report.br_sequential.speedup:.2f}x)")
    if report.br_parallel is not None:
        lines.append(f"  BR parallel:   {report.br_parallel.br:.3f} "
                     f"(potential speedup {report.br_parallel.speedup:.2f}x)")
    for br in (report.br_sequential, report.br_parallel):
        if br is not None and br.warning:
            lines.append(f"  warning: {br.warning}")
    if report.missing:
        lines.append(f"  missing benchmarks: {len(report.missing)}")
        for key in report.missing:
            lines.append(f"    - {key}")
    if report.algorithm is not None:
        adv = report.algorithm
        lines.append(f"  algorithm selection: {len(adv.entries)} sub-optimal layer(s), "
                     f"aggregate speedup {adv.aggregate_speedup:.3f}x")
        for e in adv.entries:
            lines.append(f"    - {e.node_id}: {e.chosen_algorithm} "
                         f"({_ms(e.chosen_us)}) vs {e.ideal_algorithm} "
                         f"({_ms(e.ideal_us)}): {e.ratio:.2f}x")
        for nid in adv.unknown:
            lines.append(f"    - {nid}: logged algorithm missing from database")
        for w in adv.warnings:
            lines.append(f"    warning: {w}")
    if report.deviations is not None:
        lines.append(f"  framework deviations: {len(report.deviations)}")
        for d in report.deviations:
            extra = f" x{d.count}" if d.count > 1 else ""
            lines.append(f"    - [{d.kind}]{extra} {d.detail}")
    if report.fusion is not None:
        fu = report.fusion
        applied = sum(1 for s in fu.sites if s.applied)
        lines.append(
            f"  fusion: {len(fu.sites)} site(s), {fu.fused_layer_count} fusable layer(s), "
            f"{applied} applied; lb {_ms(fu.unfused_lb_us)} -> {_ms(fu.fused_lb_us)} "
            f"({fu.profit_ratio:.3f}x)")
    if report.tensorcore is not None:
        tc = report.tensorcore
        used = ("yes" if tc.tc_used_in_profile else "no") \
            if tc.tc_used_in_profile is not None else "unknown"
        lines.append(
            f"  tensor cores ({tc.layout}): f32 {_ms(tc.lb_f32_us)} vs "
            f"f16 {_ms(tc.lb_f16_us)} ({tc.speedup:.2f}x); used in profile: {used}")
    if report.joint is not None:
        sc = report.joint.scenario
        toggles = ",".join(t for t, on in (
            ("parallel", sc.parallel), ("ideal-algo", sc.ideal_algo),
            ("fusion", sc.fusion), ("tensor-core", sc.tensor_core)) if on) or "none"
        speed = f", {report.joint.speedup:.2f}x vs measured" if report.joint.speedup else ""
        lines.append(f"  joint [{toggles}]: lb {_ms(report.joint.lb_us)}{speed}")
    return "\n".join(lines) + "\n"


def export_dot(ann: LatencyAnnotatedGraph, path: CriticalPath | None = None) -> str:
    """DOT rendering with name, type, latency per node; critical path in red."""
    graph = ann.graph
    on_path = set(path.node_ids) if path else set()
    path_edges = set(zip(path.node_ids, path.node_ids[1:])) if path else set()
    lines = [f'digraph "{graph.name}" {{',
             "  rankdir=TB;",
             '  node [shape=box, fontname="Helvetica"];']
    for nid in topo_order(graph):
        node = graph.nodes[nid]
        label = f"{nid}\\n{node.op_type}\\n{ann.latencies.get(nid, 0.0):.3f} us"
        style = ' color=red penwidth=2.0' if nid in on_path else ""
        lines.append(f'  "{nid}" [label="{label}"{style}];')
    for nid in topo_order(graph):
        for src in graph.nodes[nid].input_ids:
            if src not in graph.nodes:
                continue
            style = " [color=red penwidth=2.0]" if (src, nid) in path_edges else ""
            lines.append(f'  "{src}" -> "{nid}"{style};')
    lines.append("}")
    return "\n".join(lines) + "\n"
