"""Benchmark spec generation from unique layers.

Every convolution expands over all eight algorithm choices by default; the
runner decides per shape whether an algorithm is actually usable, so
applicability is a result rather than a generation-time filter. NHWC layout
applies only to f16 convolution-family specs. Fused specs carry the
signature of the pattern head (the convolution) plus the pattern id, so
fused and unfused results coexist in the database.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .dedup import API_TABLE, LayerSignature, api_for_op, signature
from .errors import ConfigError, GenerationError, ModelParseError
from .model_ir import ACTIVATION_OPS, DTYPES, LAYOUTS, ModelGraph, topo_order


class ConvAlgorithm(Enum):
    """The eight convolution algorithm choices, in library order."""

    IGEMM = "IMPLICIT_GEMM"
    IPGEMM = "IMPLICIT_PRECOMP_GEMM"
    GEMM = "GEMM"
    DRCT = "DIRECT"
    FFT = "FFT"
    TFFT = "FFT_TILING"
    WING = "WINOGRAD"
    WINGNF = "WINOGRAD_NONFUSED"

    @property
    def token(self) -> str:
        """Full library constant, e.g. CUDNN_CONVOLUTION_FWD_ALGO_WINOGRAD."""
        return f"CUDNN_CONVOLUTION_FWD_ALGO_{self.value}"


ALGO_RANK = {algo: i for i, algo in enumerate(ConvAlgorithm)}
ALGO_BY_TOKEN = {algo.token: algo for algo in ConvAlgorithm}


@dataclass(frozen=True)
class FusionPattern:
    """A fusable layer sequence; each element lists acceptable op types."""

    id: str
    ops: tuple[tuple[str, ...], ...]
    api_name: str
    min_lib_version: str | None = None


FUSION_PATTERNS: dict[str, FusionPattern] = {}


def register_fusion_pattern(pattern: FusionPattern) -> None:
    if not pattern.ops or pattern.ops[0] != ("Conv",):
        raise ConfigError(f"fusion pattern {pattern.id!r} must start with Conv")
    FUSION_PATTERNS[pattern.id] = pattern


register_fusion_pattern(FusionPattern(
    id="conv_bias_act",
    ops=(("Conv",), ("Add",), ACTIVATION_OPS),
    api_name="cudnnConvolutionBiasActivationForward",
))
# Bias-only fusion runs through the same API with an identity activation;
# older library versions fall back to two unfused calls instead.
register_fusion_pattern(FusionPattern(
    id="conv_bias",
    ops=(("Conv",), ("Add",)),
    api_name="cudnnConvolutionBiasActivationForward",
    min_lib_version="7.1",
))


@dataclass(frozen=True)
class BenchmarkSpec:
    signature: LayerSignature
    algorithm: ConvAlgorithm | None
    dtype: str
    layout: str
    fused: str | None
    api_name: str

    def __post_init__(self):
        if self.dtype not in DTYPES:
            raise ConfigError(f"unknown dtype {self.dtype!r}")
        if self.layout not in LAYOUTS:
            raise ConfigError(f"unknown layout {self.layout!r}")


@dataclass(frozen=True)
class BenchConfig:
    dtypes: tuple[str, ...] = ("f32", "f16")
    layouts: tuple[str, ...] = ("NCHW",)
    enable_fusion: bool = False
    algorithms: tuple[ConvAlgorithm, ...] = tuple(ConvAlgorithm)

    def __post_init__(self):
        if not self.dtypes:
            raise ConfigError("config needs at least one dtype")
        for d in self.dtypes:
            if d not in DTYPES:
                raise ConfigError(f"unknown dtype {d!r}")
        for lay in self.layouts:
            if lay not in LAYOUTS:
                raise ConfigError(f"unknown layout {lay!r}")


@dataclass(frozen=True)
class FusionSite:
    """One occurrence of a fusion pattern in a graph."""

    head_signature: LayerSignature
    pattern_id: str
    member_ids: tuple[str, ...]


def _is_bias_add(node) -> bool:
    # A bias add consumes exactly one data edge; the bias vector arrives as
    # a recorded weight operand.
    has_weight = any(k.startswith("w") and k[1:].isdigit() for k in node.params)
    return len(node.input_ids) == 1 and has_weight


def fusion_candidates(graph: ModelGraph, dtype: str = "f32") -> list[FusionSite]:
    """Scan topological order for registered fusion patterns.

    Longer patterns win; occurrences never overlap. Every non-head member
    must be the sole consumer of its predecessor, otherwise fusing would
    change graph semantics.
    """
    order = topo_order(graph)
    patterns = sorted(FUSION_PATTERNS.values(), key=lambda p: -len(p.ops))
    claimed: set[str] = set()
    sites: list[FusionSite] = []
    for nid in order:
        if nid in claimed:
            continue
        for pattern in patterns:
            members = _match_pattern(graph, nid, pattern, claimed)
            if members:
                sites.append(FusionSite(
                    head_signature=signature(graph.nodes[nid], dtype),
                    pattern_id=pattern.id,
                    member_ids=tuple(members),
                ))
                claimed.update(members)
                break
    return sites


def _match_pattern(graph: ModelGraph, head: str, pattern: FusionPattern,
                   claimed: set[str]) -> list[str] | None:
    current = graph.nodes[head]
    if current.op_type not in pattern.ops[0] or head in claimed:
        return None
    members = [head]
    for accepted in pattern.ops[1:]:
        if len(current.output_ids) != 1:
            return None
        nxt = graph.nodes[current.output_ids[0]]
        if nxt.op_type not in accepted or nxt.id in claimed:
            return None
        if nxt.op_type == "Add" and not _is_bias_add(nxt):
            return None
        if len(nxt.input_ids) != 1:
            return None
        members.append(nxt.id)
        current = nxt
    return members


def generate_specs(uniques: set[LayerSignature], config: BenchConfig,
                   fusion_sites: list[FusionSite] | None = None) -> list[BenchmarkSpec]:
    """Expand unique layers into benchmark specs, deterministically ordered."""
    if not uniques:
        raise ConfigError("no unique layers to generate benchmarks for")
    specs: list[BenchmarkSpec] = []
    for sig in sorted(uniques, key=lambda s: s.canonical_string):
        row = api_for_op(sig.op_type)
        if row is None:
            continue
        if sig.op_type == "Conv":
            for dtype in config.dtypes:
                for layout in _applicable_layouts(config.layouts, dtype):
                    for algo in config.algorithms:
                        specs.append(BenchmarkSpec(
                            sig.with_dtype(dtype), algo, dtype, layout, None, row.api_name))
        else:
            for dtype in config.dtypes:
                specs.append(BenchmarkSpec(
                    sig.with_dtype(dtype), None, dtype, "NCHW", None, row.api_name))
    if config.enable_fusion and fusion_sites:
        seen: set[tuple[str, str]] = set()
        fused_api = {p.id: p.api_name for p in FUSION_PATTERNS.values()}
        for site in sorted(fusion_sites,
                           key=lambda s: (s.head_signature.canonical_string, s.pattern_id)):
            key = (site.head_signature.canonical_string, site.pattern_id)
            if key in seen:
                continue
            seen.add(key)
            for dtype in config.dtypes:
                for layout in _applicable_layouts(config.layouts, dtype):
                    specs.append(BenchmarkSpec(
                        site.head_signature.with_dtype(dtype), None, dtype, layout,
                        site.pattern_id, fused_api[site.pattern_id]))
    return specs


def _applicable_layouts(layouts: tuple[str, ...], dtype: str) -> list[str]:
    out = [lay for lay in layouts if lay == "NCHW" or dtype == "f16"]
    return out or ["NCHW"]


def delta_specs(specs: list[BenchmarkSpec], db, system: str) -> list[BenchmarkSpec]:
    """Specs with no stored result for ``system``; order preserved."""
    return [spec for spec in specs if not db.has_spec(system, spec)]


# ---------------------------------------------------------------------------
# Manifest (canonical interchange)
# ---------------------------------------------------------------------------

def manifest_lines(specs: list[BenchmarkSpec]) -> str:
    """Serialize specs as JSON lines with a stable field order."""
    lines = []
    for spec in specs:
        lines.append(json.dumps({
            "signature": spec.signature.canonical_string,
            "api": spec.api_name,
            "algorithm": spec.algorithm.name if spec.algorithm else None,
            "dtype": spec.dtype,
            "layout": spec.layout,
            "fused_pattern": spec.fused,
        }, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> list[BenchmarkSpec]:
    from .dedup import parse_signature

    specs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            algo = ConvAlgorithm[rec["algorithm"]] if rec["algorithm"] else None
            specs.append(BenchmarkSpec(
                signature=parse_signature(rec["signature"]),
                algorithm=algo,
                dtype=rec["dtype"],
                layout=rec["layout"],
                fused=rec["fused_pattern"],
                api_name=rec["api"],
            ))
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise ModelParseError(f"bad manifest line: {exc}", offset=lineno) from exc
    return specs


# ---------------------------------------------------------------------------
# Source emission
# ---------------------------------------------------------------------------

_DTYPE_TOKEN = {"f32": "CUDNN_DATA_FLOAT", "f16": "CUDNN_DATA_HALF"}
_LAYOUT_TOKEN = {"NCHW": "CUDNN_TENSOR_NCHW", "NHWC": "CUDNN_TENSOR_NHWC"}


def spec_filename(spec: BenchmarkSpec) -> str:
    slot = spec.fused or (spec.algorithm.name if spec.algorithm else "none")
    suffix = "_nhwc" if spec.layout == "NHWC" else ""
    return f"{spec.signature.hash64}_{slot}_{spec.dtype}{suffix}.gen.cpp"


def emit_benchmark_source(spec: BenchmarkSpec) -> str:
    """Render one C++ micro-benchmark body for a spec.

    Emitted source is a convenience artifact: it is never parsed back or
    compiled here. The canonical signature string is embedded in the header
    comment so results can always be traced to their layer.
    """
    if not spec.api_name:
        raise GenerationError(
            f"no library API for {spec.signature.op_type} layer "
            f"{spec.signature.canonical_string!r}"
        )
    sig = spec.signature
    header = [
        "// auto-generated micro-benchmark, do not edit",
        f"// signature: {sig.canonical_string}",
        f"// api: {spec.api_name}  dtype: {spec.dtype}  layout: {spec.layout}"
        + (f"  fused: {spec.fused}" if spec.fused else ""),
    ]
    include = "#include <cublas_v2.h>" if spec.api_name.startswith("cublas") \
        else "#include <cudnn.h>"
    lines = header + [include, '#include "bench_runtime.h"', ""]
    params = dict(sig.params)
    in_dims = ", ".join("{" + ",".join(str(d) for d in dims) + "}" for dims in sig.in_dims)
    lines.append(f"// inputs: {in_dims or 'none'}")
    for key, value in sorted(params.items()):
        lines.append(f"// {key}: {value}")
    fn = f"bench_{sig.hash64}_{spec.fused or (spec.algorithm.name if spec.algorithm else 'base')}_{spec.dtype}"
    lines.append(f"BENCH({fn}) {{")
    lines.append(f"  const cudnnDataType_t data_type = {_DTYPE_TOKEN[spec.dtype]};")
    if sig.op_type == "Conv" or spec.fused:
        lines.append(f"  const cudnnTensorFormat_t layout = {_LAYOUT_TOKEN[spec.layout]};")
        x = "{" + ",".join(str(d) for d in sig.in_dims[0]) + "}"
        w = "{" + ",".join(str(d) for d in (sig.param_dims("w1") or ())) + "}"
        lines.append(f"  const int x_dims[4] = {x};")
        lines.append(f"  const int w_dims[4] = {w};")
        lines.append(f"  const int pads[4] = {{{_csv(params.get('pads'))}}};")
        lines.append(f"  const int strides[2] = {{{_csv(params.get('strides'))}}};")
        lines.append(f"  const int dilations[2] = {{{_csv(params.get('dilations'))}}};")
        lines.append(f"  const int group = {params.get('group', 1)};")
        if spec.fused:
            lines.append("  // bias and activation applied by the fused call")
            lines.append(f"  CUDNN_CALL({spec.api_name}(handle, &alpha1, x_desc, x, w_desc, w,")
            lines.append("      conv_desc, algo, workspace, workspace_size, &alpha2,")
            lines.append("      z_desc, z, bias_desc, bias, act_desc, y_desc, y));")
        else:
            lines.append(f"  const cudnnConvolutionFwdAlgo_t algo = {spec.algorithm.token};")
            lines.append(f"  CUDNN_CALL({spec.api_name}(handle, &alpha, x_desc, x, w_desc, w,")
            lines.append("      conv_desc, algo, workspace, workspace_size, &beta, y_desc, y));")
    elif spec.api_name.startswith("cublas"):
        dims = sig.in_dims[0]
        b = sig.param_dims("w1") or (sig.in_dims[1] if len(sig.in_dims) > 1 else ())
        trans_b = sig.param("transB", 0)
        m = dims[0] if not sig.param("transA", 0) else dims[-1]
        k = dims[-1] if not sig.param("transA", 0) else dims[0]
        n = (b[0] if trans_b else b[-1]) if b else 0
        lines.append(f"  const int m = {m}, n = {n}, k = {k};")
        lines.append(f"  CUBLAS_CALL({spec.api_name}(handle, transa, transb, m, n, k,")
        lines.append("      &alpha, a, lda, b, ldb, &beta, c, ldc));")
    else:
        x = "{" + ",".join(str(d) for d in sig.in_dims[0]) + "}"
        lines.append(f"  const int x_dims[] = {x};")
        for key, value in sorted(params.items()):
            lines.append(f"  // param {key} = {value}")
        lines.append(f"  CUDNN_CALL({spec.api_name}(handle, /* descriptors from dims above */")
        lines.append("      &alpha, x_desc, x, &beta, y_desc, y));")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _csv(value) -> str:
    if value is None:
        return "0"
    parsed = value
    if isinstance(value, str):
        parsed = tuple(value.split("x")) if "x" in value else (value,)
    if isinstance(parsed, (tuple, list)):
        return ",".join(str(v) for v in parsed)
    return str(parsed)
