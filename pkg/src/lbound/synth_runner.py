"""Deterministic analytic cost model standing in for GPU benchmark runs.

This is a simulator, not a predictor: it exists so the full pipeline runs
and is testable at desk scale. Latency follows a roofline shape::

    latency_us = max(compute_us, memory_us) * f + kernel_overhead_us
    compute_us = 2 * MACs / (peak_tflops * 1e6)
    memory_us  = bytes_touched / (mem_bw_gbps * 1e3)

where peak is the tensor-core rate for f16 on capable systems and APIs,
bytes_touched covers input, output, and weight elements at the dtype width,
and f is a per-algorithm factor (1.0 for non-convolutions). The factor
table is synthetic; it exists to create a nontrivial, shape-dependent
optimal-algorithm landscape. Winograd variants only earn their discount on
3x3 stride-1 shapes, FFT variants refuse strides above 1 entirely, and a
fused spec runs its convolution at the best applicable factor with the
kernel overhead paid once.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .benchgen import BenchmarkSpec, ConvAlgorithm
from .dedup import LayerSignature, api_for_op
from .errors import ConfigError
from .model_ir import DTYPE_BYTES, node_macs, output_dims, weight_elems
from .perfdb import PerfRecord, make_record

DEFAULT_ALGO_FACTOR = {
    ConvAlgorithm.IPGEMM: 1.0,
    ConvAlgorithm.IGEMM: 1.15,
    ConvAlgorithm.GEMM: 1.25,
    ConvAlgorithm.WING: 0.8,
    ConvAlgorithm.WINGNF: 0.9,
    ConvAlgorithm.FFT: 1.4,
    ConvAlgorithm.TFFT: 1.1,
    ConvAlgorithm.DRCT: 2.0,
}
# Winograd discount applies to 3x3 stride-1 convolutions only.
_WINOGRAD_PENALTY = 10.0


@dataclass
class SystemProfile:
    system_id: str
    fp32_tflops: float
    mem_bw_gbps: float
    tensor_tflops: float | None = None
    tensor_core: bool = False
    kernel_overhead_us: float = 2.0
    algo_factor: dict[ConvAlgorithm, float] = field(
        default_factory=lambda: dict(DEFAULT_ALGO_FACTOR))
    mem_gb: float | None = None
    gpu: str = ""
    architecture: str = ""

    def __post_init__(self):
        if self.fp32_tflops <= 0 or self.mem_bw_gbps <= 0:
            raise ConfigError(f"system {self.system_id!r}: rates must be positive")
        if self.kernel_overhead_us < 0:
            raise ConfigError(f"system {self.system_id!r}: overhead must be >= 0")
        if self.tensor_core != (self.tensor_tflops is not None):
            raise ConfigError(
                f"system {self.system_id!r}: tensor_tflops must be present "
                f"exactly when tensor_core is set")
        if self.tensor_tflops is not None and self.tensor_tflops <= 0:
            raise ConfigError(f"system {self.system_id!r}: tensor_tflops must be positive")
        if any(v <= 0 for v in self.algo_factor.values()):
            raise ConfigError(f"system {self.system_id!r}: algo factors must be positive")


@dataclass(frozen=True)
class SpecCost:
    macs: int
    in_elems: int
    out_elems: int
    weight_elems: int


def signature_cost(sig: LayerSignature) -> SpecCost:
    """MACs and element counts derived from a signature alone."""
    params = {k: sig.param(k) for k, _ in sig.params}
    for k in list(params):
        if k.startswith("w") and k[1:].isdigit() and isinstance(params[k], int):
            params[k] = (params[k],)
    in_dims = [tuple(d) for d in sig.in_dims]
    out = output_dims(sig.op_type, in_dims, params, node_id=sig.hash64)
    macs = node_macs(sig.op_type, in_dims, out, params)
    in_elems = sum(_prod(d) for d in in_dims)
    out_elems = _prod(out)
    return SpecCost(macs, in_elems, out_elems, weight_elems(params))


def _prod(dims) -> int:
    n = 1
    for d in dims:
        n *= d
    return n


def _is_3x3_stride1(sig: LayerSignature) -> bool:
    return sig.param("kernel") == (3, 3) and sig.param("strides") in ((1, 1), None)


def _stride_above_one(sig: LayerSignature) -> bool:
    strides = sig.param("strides")
    return strides is not None and (not isinstance(strides, tuple) or max(strides) > 1) \
        and strides != 1


def effective_factor(sig: LayerSignature, algo: ConvAlgorithm,
                     factors: dict[ConvAlgorithm, float]) -> float | None:
    """Algorithm factor for this shape; None when the algorithm refuses it."""
    if algo in (ConvAlgorithm.FFT, ConvAlgorithm.TFFT) and _stride_above_one(sig):
        return None
    f = factors[algo]
    if algo in (ConvAlgorithm.WING, ConvAlgorithm.WINGNF) and not _is_3x3_stride1(sig):
        return _WINOGRAD_PENALTY
    return f


def _ideal_factor(sig: LayerSignature, factors: dict[ConvAlgorithm, float]) -> float:
    applicable = [effective_factor(sig, a, factors) for a in ConvAlgorithm]
    usable = [f for f in applicable if f is not None]
    return min(usable) if usable else 1.0


def simulate(spec: BenchmarkSpec, sys: SystemProfile,
             jitter_seed: int | None = None) -> PerfRecord:
    """Produce one benchmark record; same inputs, identical output."""
    sig = spec.signature
    cost = signature_cost(sig)

    if spec.algorithm is not None:
        f = effective_factor(sig, spec.algorithm, sys.algo_factor)
        if f is None:
            return make_record(sys.system_id, spec, None, status="unsupported",
                               metadata={"reason": "algorithm unsupported for shape"})
    elif spec.fused:
        f = _ideal_factor(sig, sys.algo_factor)
    else:
        f = 1.0

    row = api_for_op(sig.op_type)
    tc_capable = (row.tensor_core if row else False) or bool(spec.fused)
    if spec.dtype == "f16" and sys.tensor_core and tc_capable:
        peak = sys.tensor_tflops
    else:
        peak = sys.fp32_tflops
    compute_us = 2.0 * cost.macs / (peak * 1e6)
    dt_bytes = DTYPE_BYTES[spec.dtype]
    touched = (cost.in_elems + cost.out_elems + cost.weight_elems) * dt_bytes
    memory_us = touched / (sys.mem_bw_gbps * 1e3)
    latency = max(compute_us, memory_us) * f + sys.kernel_overhead_us

    if jitter_seed is not None:
        latency *= _jitter(jitter_seed, sys.system_id, spec)
    if latency <= 0:
        latency = 1e-6  # zero-cost layers on zero-overhead systems still take time
    return make_record(sys.system_id, spec, latency, metadata={
        "macs": cost.macs,
        "bytes": touched,
        "model": "roofline-synthetic",
    })


def _jitter(seed: int, system_id: str, spec: BenchmarkSpec) -> float:
    # +/-3% multiplicative, keyed on (seed, record identity) so results do
    # not depend on simulation order.
    ident = f"{seed}|{system_id}|{spec.signature.canonical_string}|" \
            f"{spec.algorithm.name if spec.algorithm else '-'}|{spec.layout}|{spec.fused or '-'}"
    digest = hashlib.blake2b(ident.encode("utf-8"), digest_size=8).digest()
    u = int.from_bytes(digest, "big") / float(1 << 64)
    return 0.97 + 0.06 * u


def run_specs(specs: list[BenchmarkSpec], sys: SystemProfile, db,
              jitter_seed: int | None = None) -> int:
    """Simulate every spec and insert the records; returns the count."""
    for spec in specs:
        db.insert(simulate(spec, sys, jitter_seed=jitter_seed))
    return len(specs)


# ---------------------------------------------------------------------------
# System profile files
# ---------------------------------------------------------------------------

def load_system_profile(name_or_path: str) -> SystemProfile:
    """Load a profile from a JSON file or from the bundled system set."""
    if os.path.exists(name_or_path):
        with open(name_or_path, "r", encoding="utf-8") as fh:
            return _profile_from_json(json.load(fh))
    try:
        from importlib import resources

        ref = resources.files("lbound").joinpath(f"data/systems/{name_or_path}.json")
        return _profile_from_json(json.loads(ref.read_text(encoding="utf-8")))
    except FileNotFoundError:
        raise ConfigError(
            f"unknown system profile {name_or_path!r}; "
            f"builtins: {', '.join(builtin_systems())}") from None


def builtin_systems() -> list[str]:
    from importlib import resources

    names = []
    for entry in resources.files("lbound").joinpath("data/systems").iterdir():
        if entry.name.endswith(".json"):
            names.append(entry.name[:-5])
    return sorted(names)


def _profile_from_json(obj: dict) -> SystemProfile:
    try:
        factors = dict(DEFAULT_ALGO_FACTOR)
        for k, v in (obj.get("algo_factor") or {}).items():
            factors[ConvAlgorithm[k]] = float(v)
        return SystemProfile(
            system_id=obj["system_id"],
            fp32_tflops=float(obj["fp32_tflops"]),
            mem_bw_gbps=float(obj["mem_bw_gbps"]),
            tensor_tflops=(float(obj["tensor_tflops"])
                           if obj.get("tensor_tflops") is not None else None),
            tensor_core=bool(obj.get("tensor_core", obj.get("tensor_tflops") is not None)),
            kernel_overhead_us=float(obj.get("kernel_overhead_us", 2.0)),
            algo_factor=factors,
            mem_gb=obj.get("mem_gb"),
            gpu=obj.get("gpu", ""),
            architecture=obj.get("architecture", ""),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad system profile: {exc}") from exc
