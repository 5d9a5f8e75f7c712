"""Execution-profile parsing: measured latency, API-call log, kernel trace.

The canonical container is a text file with three sections::

    lbound-profile v1
    [META]
    model: <name>
    system: <id>
    batch: <int>
    measured_latency_ms: <float>
    [APICALLS]
    {"seq":1,"api":"cudnnConvolutionForward","params":{...},"backtrace":[...]}
    [KERNELS]
    {"name":"...","duration_us":12.5,"between":[3,4]}

META and APICALLS are required; KERNELS may be absent (tensor-core
detection is then unavailable). APICALLS and KERNELS hold one JSON object
per line; ``params`` and ``backtrace`` are omitted when empty, ``between``
names the API-call seq pair a foreign kernel ran between and is omitted
for kernels attributed to an API call. Serialization and parsing round-trip
byte-for-byte.

A lenient parser for the cuDNN/cuBLAS logger style (blocks opened by
``I! CuDNN (v...) function <name>() called:`` with indented
``key: type=<t>; val=<v>;`` lines) converts real logs into ApiCall lists.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

from .benchgen import ALGO_BY_TOKEN
from .errors import ProfileFormatError

logger = logging.getLogger(__name__)

_HEADER = "lbound-profile v1"

# Kernel names matching "_[ish]<digits>" use reduced-precision matrix units.
_TENSOR_CORE_RE = re.compile(r"_[ish][0-9]+")


@dataclass
class ApiCall:
    seq: int
    api_name: str
    params: dict = field(default_factory=dict)
    backtrace: list[str] | None = None


@dataclass
class KernelRecord:
    name: str
    duration_us: float
    seq_between: tuple[int, int] | None = None

    def __post_init__(self):
        if self.duration_us <= 0:
            raise ProfileFormatError(
                f"kernel {self.name!r} needs a positive duration, got {self.duration_us}")


@dataclass
class ExecutionProfile:
    model: str
    system_id: str
    batch: int
    measured_latency_ms: float
    api_calls: list[ApiCall] = field(default_factory=list)
    kernels: list[KernelRecord] = field(default_factory=list)

    @property
    def measured_latency_us(self) -> float:
        return self.measured_latency_ms * 1000.0


def detect_tensorcore(kernel_name: str) -> bool:
    """True iff the name contains an underscore, one of i/s/h, then digits."""
    return _TENSOR_CORE_RE.search(kernel_name) is not None


# ---------------------------------------------------------------------------
# Container serialization
# ---------------------------------------------------------------------------

def serialize_profile(profile: ExecutionProfile) -> str:
    lines = [
        _HEADER,
        "[META]",
        f"model: {profile.model}",
        f"system: {profile.system_id}",
        f"batch: {profile.batch}",
        f"measured_latency_ms: {profile.measured_latency_ms!r}",
        "[APICALLS]",
    ]
    for call in profile.api_calls:
        obj: dict = {"seq": call.seq, "api": call.api_name}
        if call.params:
            obj["params"] = call.params
        if call.backtrace is not None:
            obj["backtrace"] = call.backtrace
        lines.append(json.dumps(obj, separators=(",", ":")))
    lines.append("[KERNELS]")
    for kern in profile.kernels:
        obj = {"name": kern.name, "duration_us": kern.duration_us}
        if kern.seq_between is not None:
            obj["between"] = list(kern.seq_between)
        lines.append(json.dumps(obj, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def parse_profile(text: str) -> ExecutionProfile:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _HEADER:
        raise ProfileFormatError(f"missing {_HEADER!r} header line")
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for raw in lines[1:]:
        line = raw.rstrip("\n")
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            if current in sections:
                raise ProfileFormatError(f"duplicate section {current!r}")
            sections[current] = []
        elif line.strip():
            if current is None:
                raise ProfileFormatError(f"content before first section: {line!r}")
            sections[current].append(line)

    for required in ("META", "APICALLS"):
        if required not in sections:
            raise ProfileFormatError(f"missing required section {required!r}")

    meta: dict[str, str] = {}
    for line in sections["META"]:
        key, sep, value = line.partition(":")
        if not sep:
            raise ProfileFormatError(f"bad META line {line!r}")
        meta[key.strip()] = value.strip()
    try:
        model = meta["model"]
        system_id = meta["system"]
        batch = int(meta["batch"])
        measured = float(meta["measured_latency_ms"])
    except (KeyError, ValueError) as exc:
        raise ProfileFormatError(f"bad or missing META field: {exc}") from exc
    if measured <= 0:
        raise ProfileFormatError(f"measured latency must be positive, got {measured}")

    api_calls: list[ApiCall] = []
    last_seq = 0
    for line in sections["APICALLS"]:
        try:
            obj = json.loads(line)
            call = ApiCall(
                seq=int(obj["seq"]),
                api_name=obj["api"],
                params=obj.get("params", {}),
                backtrace=obj.get("backtrace"),
            )
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise ProfileFormatError(f"bad APICALLS line {line!r}: {exc}") from exc
        if call.seq <= last_seq:
            raise ProfileFormatError(
                f"api call seq {call.seq} not monotonically increasing (after {last_seq})")
        last_seq = call.seq
        api_calls.append(call)

    kernels: list[KernelRecord] = []
    for line in sections.get("KERNELS", []):
        try:
            obj = json.loads(line)
            between = obj.get("between")
            kernels.append(KernelRecord(
                name=obj["name"],
                duration_us=float(obj["duration_us"]),
                seq_between=tuple(between) if between is not None else None,
            ))
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise ProfileFormatError(f"bad KERNELS line {line!r}: {exc}") from exc

    return ExecutionProfile(model, system_id, batch, measured, api_calls, kernels)


# ---------------------------------------------------------------------------
# Library logger parsing
# ---------------------------------------------------------------------------

_BLOCK_RE = re.compile(
    r"^I!\s+(CuDNN|cuBLAS)\s+\(v[\w.]*\)\s+function\s+(\w+)\(\)\s+called:\s*$")
_PARAM_RE = re.compile(r"^\s+(\w+):\s*type=([^;]*);\s*val=([^;]*);")


def parse_cudnn_log(text: str, strict: bool = False) -> list[ApiCall]:
    """One ApiCall per logger block; conv calls capture the algorithm token.

    Unparseable blocks are skipped with a warning in lenient mode and raise
    in strict mode.
    """
    calls: list[ApiCall] = []
    seq = 0
    current: ApiCall | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        m = _BLOCK_RE.match(line)
        if m:
            seq += 1
            current = ApiCall(seq=seq, api_name=m.group(2))
            calls.append(current)
            continue
        m = _PARAM_RE.match(line)
        if m and current is not None:
            key, _type, value = m.group(1), m.group(2).strip(), m.group(3).strip()
            if value.startswith("CUDNN_CONVOLUTION_FWD_ALGO_"):
                token = value.split()[0]
                algo = ALGO_BY_TOKEN.get(token)
                if algo is not None:
                    current.params["algo"] = algo.name
                    continue
            current.params[key] = value
            continue
        if line.startswith("I!") or line[:1].isspace():
            # Unknown logger chatter inside or between blocks.
            if strict:
                raise ProfileFormatError(f"unparseable logger line {lineno}: {line!r}")
            logger.warning("skipping unparseable logger line %d: %r", lineno, line)
            continue
        if strict:
            raise ProfileFormatError(f"unparseable logger line {lineno}: {line!r}")
        logger.warning("skipping unparseable logger line %d: %r", lineno, line)
    return calls


def parse_kernel_lines(text: str) -> list[KernelRecord]:
    """Kernel trace in the KERNELS line format (for the convert command)."""
    kernels = []
    for line in text.splitlines():
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            between = obj.get("between")
            kernels.append(KernelRecord(
                name=obj["name"],
                duration_us=float(obj["duration_us"]),
                seq_between=tuple(between) if between is not None else None,
            ))
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise ProfileFormatError(f"bad kernel line {line!r}: {exc}") from exc
    return kernels


def build_profile(model: str, system_id: str, batch: int, measured_latency_ms: float,
                  cudnn_log: str = "", kernel_lines: str = "",
                  strict: bool = False) -> ExecutionProfile:
    """Assemble a canonical profile from raw logger and trace inputs."""
    if measured_latency_ms <= 0:
        raise ProfileFormatError("measured latency must be positive")
    return ExecutionProfile(
        model=model,
        system_id=system_id,
        batch=batch,
        measured_latency_ms=measured_latency_ms,
        api_calls=parse_cudnn_log(cudnn_log, strict=strict),
        kernels=parse_kernel_lines(kernel_lines),
    )
