"""File-backed performance database.

Storage is a single file of line-delimited JSON records plus an in-memory
index built at open. Appending is the only write path; re-inserting a key
replaces the live record while the superseded one stays on disk and in the
audit trail until ``compact`` rewrites the file. Readers take a snapshot at
open; a writer holds an advisory file lock for the lifetime of the handle.

Record fields, in on-disk order: v, system, dtype, hash64, signature,
algorithm, layout, fused, status, latency_us, source, timestamp, metadata.
The canonical signature string is stored alongside its hash as a collision
guard; equality is always decided on the string.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, replace

from .benchgen import ALGO_RANK, BenchmarkSpec, ConvAlgorithm
from .dedup import LayerSignature
from .errors import MissError, StorageError


class _Any:
    def __repr__(self):
        return "ANY"


ANY = _Any()

_LAYOUT_RANK = {"NCHW": 0, "NHWC": 1}


@dataclass(frozen=True)
class RecordKey:
    system: str
    dtype: str
    hash64: str
    signature: str  # canonical string, authoritative
    algorithm: str | None  # ConvAlgorithm name
    layout: str
    fused: str | None

    def index_key(self) -> tuple:
        return (self.system, self.dtype, self.signature, self.algorithm,
                self.layout, self.fused)

    def render(self) -> str:
        algo = self.algorithm or "-"
        fused = self.fused or "-"
        return f"{self.system}/{self.dtype}/{self.layout}/{algo}/{fused}/{self.signature}"


@dataclass
class PerfRecord:
    key: RecordKey
    latency_us: float | None
    status: str = "ok"  # "ok" | "unsupported"
    metadata: dict = field(default_factory=dict)
    source: str = "simulated"  # "simulated" | "imported"
    timestamp: float = 0.0

    def __post_init__(self):
        if self.status == "ok":
            if self.latency_us is None or self.latency_us <= 0:
                raise StorageError(
                    f"ok record needs a positive latency, got {self.latency_us!r}")
        elif self.status == "unsupported":
            if self.latency_us is not None:
                raise StorageError("unsupported record must not carry a latency")
        else:
            raise StorageError(f"unknown record status {self.status!r}")


@dataclass
class QueryResult:
    hits: list[PerfRecord]
    misses: list[RecordKey]


def key_for_spec(system: str, spec: BenchmarkSpec) -> RecordKey:
    return RecordKey(
        system=system,
        dtype=spec.dtype,
        hash64=spec.signature.hash64,
        signature=spec.signature.canonical_string,
        algorithm=spec.algorithm.name if spec.algorithm else None,
        layout=spec.layout,
        fused=spec.fused,
    )


def _record_to_json(rec: PerfRecord) -> str:
    return json.dumps({
        "v": 1,
        "system": rec.key.system,
        "dtype": rec.key.dtype,
        "hash64": rec.key.hash64,
        "signature": rec.key.signature,
        "algorithm": rec.key.algorithm,
        "layout": rec.key.layout,
        "fused": rec.key.fused,
        "status": rec.status,
        "latency_us": rec.latency_us,
        "source": rec.source,
        "timestamp": rec.timestamp,
        "metadata": rec.metadata,
    }, separators=(",", ":"))


def _record_from_json(line: str, lineno: int) -> PerfRecord:
    try:
        obj = json.loads(line)
        key = RecordKey(
            system=obj["system"],
            dtype=obj["dtype"],
            hash64=obj["hash64"],
            signature=obj["signature"],
            algorithm=obj.get("algorithm"),
            layout=obj.get("layout", "NCHW"),
            fused=obj.get("fused"),
        )
        return PerfRecord(
            key=key,
            latency_us=obj.get("latency_us"),
            status=obj.get("status", "ok"),
            metadata=obj.get("metadata") or {},
            source=obj.get("source", "imported"),
            timestamp=obj.get("timestamp", 0.0),
        )
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise StorageError(f"bad database record at line {lineno}: {exc}") from exc


class PerfDb:
    """Open with mode "r" for a read-only snapshot or "rw" to insert."""

    def __init__(self, path, mode: str = "r"):
        if mode not in ("r", "rw"):
            raise StorageError(f"unknown db mode {mode!r}")
        self.path = str(path)
        self.mode = mode
        self._index: dict[tuple, PerfRecord] = {}
        self._audit: list[PerfRecord] = []
        self._fh = None
        self._load()
        if mode == "rw":
            self._acquire_writer()

    # -- lifecycle ----------------------------------------------------------

    def _load(self) -> None:
        if not os.path.exists(self.path):
            if self.mode == "r":
                return  # empty snapshot; analyzer reports misses
            return
        try:
            with open(self.path, "r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    rec = _record_from_json(line, lineno)
                    prev = self._index.get(rec.key.index_key())
                    if prev is not None:
                        self._audit.append(prev)
                    self._index[rec.key.index_key()] = rec
        except OSError as exc:
            raise StorageError(f"cannot read database {self.path}: {exc}") from exc

    def _acquire_writer(self) -> None:
        import fcntl

        try:
            self._fh = open(self.path, "a", encoding="utf-8")
            fcntl.flock(self._fh.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError as exc:
            self._fh.close()
            self._fh = None
            raise StorageError(f"database {self.path} is locked by another writer") from exc
        except OSError as exc:
            raise StorageError(f"cannot open database {self.path} for writing: {exc}") from exc

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- writes -------------------------------------------------------------

    def insert(self, record: PerfRecord) -> None:
        if self.mode != "rw" or self._fh is None:
            raise StorageError("database opened read-only")
        try:
            self._fh.write(_record_to_json(record) + "\n")
            self._fh.flush()
        except OSError as exc:
            raise StorageError(f"cannot append to database {self.path}: {exc}") from exc
        prev = self._index.get(record.key.index_key())
        if prev is not None:
            self._audit.append(prev)
        self._index[record.key.index_key()] = record

    def import_lines(self, text: str) -> int:
        """Insert records from an external result file (same line format)."""
        n = 0
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            self.insert(_record_from_json(line, lineno))
            n += 1
        return n

    def compact(self) -> int:
        """Rewrite the file with live records only; clears the audit trail."""
        if self.mode != "rw" or self._fh is None:
            raise StorageError("database opened read-only")
        dropped = len(self._audit)
        tmp = self.path + ".compact"
        try:
            with open(tmp, "w", encoding="utf-8") as out:
                for rec in self._index.values():
                    out.write(_record_to_json(rec) + "\n")
            os.replace(tmp, self.path)
        except OSError as exc:
            raise StorageError(f"cannot compact database {self.path}: {exc}") from exc
        # Reacquire the append handle on the new inode.
        self.close()
        self._audit = []
        self._acquire_writer()
        return dropped

    # -- reads --------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._index)

    @property
    def audit_log(self) -> list[PerfRecord]:
        return list(self._audit)

    def records(self) -> list[PerfRecord]:
        return list(self._index.values())

    def record_for(self, key: RecordKey) -> PerfRecord | None:
        return self._index.get(key.index_key())

    def has_spec(self, system: str, spec: BenchmarkSpec) -> bool:
        return key_for_spec(system, spec).index_key() in self._index

    def query(self, system: str, dtype: str, signature: LayerSignature | str) -> QueryResult:
        """All records for a layer across algorithms, layouts, and fusion."""
        canonical = signature if isinstance(signature, str) else signature.canonical_string
        hits = [
            rec for rec in self._index.values()
            if rec.key.system == system and rec.key.dtype == dtype
            and rec.key.signature == canonical
        ]
        hits.sort(key=_hit_order)
        if hits:
            return QueryResult(hits=hits, misses=[])
        h64 = signature.hash64 if isinstance(signature, LayerSignature) else ""
        miss = RecordKey(system, dtype, h64, canonical, None, "NCHW", None)
        return QueryResult(hits=[], misses=[miss])

    def best(self, system: str, dtype: str, signature: LayerSignature | str,
             *, layout=ANY, fused=None) -> PerfRecord:
        """Lowest-latency ok record matching the filter.

        ``layout``/``fused`` accept a concrete value, None, or ANY. ``fused``
        defaults to None: only unfused results compete unless a pattern id
        (or ANY) is requested. Ties break by algorithm enum order, then NCHW
        before NHWC.
        """
        result = self.query(system, dtype, signature)
        candidates = [
            rec for rec in result.hits
            if rec.status == "ok"
            and (layout is ANY or rec.key.layout == layout)
            and (fused is ANY or rec.key.fused == fused)
        ]
        if not candidates:
            canonical = signature if isinstance(signature, str) else signature.canonical_string
            h64 = signature.hash64 if isinstance(signature, LayerSignature) else ""
            raise MissError([RecordKey(
                system, dtype, h64, canonical,
                None, layout if layout is not ANY else "NCHW",
                fused if fused is not ANY else None,
            ).render()])
        return min(candidates, key=_hit_order)


def _hit_order(rec: PerfRecord) -> tuple:
    algo_rank = ALGO_RANK[ConvAlgorithm[rec.key.algorithm]] if rec.key.algorithm else -1
    return (
        rec.latency_us if rec.latency_us is not None else float("inf"),
        algo_rank,
        _LAYOUT_RANK.get(rec.key.layout, 9),
        rec.key.fused or "",
    )


def make_record(system: str, spec: BenchmarkSpec, latency_us: float | None,
                status: str = "ok", metadata: dict | None = None,
                source: str = "simulated") -> PerfRecord:
    return PerfRecord(
        key=key_for_spec(system, spec),
        latency_us=latency_us,
        status=status,
        metadata=metadata or {},
        source=source,
        timestamp=time.time(),
    )
