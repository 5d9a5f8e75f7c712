"""Model graph IR: loading, shape inference, topological order, MAC counts.

A model is a DAG of layer nodes. Two loaders produce the same IR: a binary
ONNX-format reader (see :mod:`lbound.onnx_reader`) and a line-based text
format used for fixtures and small experiments. Weight tensors are recorded
by shape only; their values are discarded at load time. Graphs are treated
as immutable after construction: ``infer_shapes`` returns a new graph.

Text model grammar (one directive per line, ``#`` starts a comment)::

    graph <name>
    input <name> <d0>x<d1>x...
    node <id> <op_type> inputs=<csv> attrs=<k=v;...>
    output <id>

Attribute values parse as int, float, ``AxBx...`` integer tuples, or raw
strings. ``w<slot>=<dims>`` records a weight tensor (by shape) feeding the
given input slot, e.g. ``w1=64x3x7x7`` for a convolution filter.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .errors import (
    GraphStructureError,
    ModelParseError,
    ShapeInferenceError,
    ShapeStateError,
)

DTYPES = ("f32", "f16")
DTYPE_BYTES = {"f32": 4, "f16": 2}
LAYOUTS = ("NCHW", "NHWC")

# Operator vocabulary. Anything else becomes Opaque: kept for connectivity,
# excluded from lower-bound latency.
ACTIVATION_OPS = ("Relu", "Sigmoid", "Tanh")
POOL_OPS = ("MaxPool", "AveragePool", "GlobalAveragePool")
RESHAPE_OPS = ("Reshape", "Flatten", "Unsqueeze", "Squeeze", "Transpose")
SUPPORTED_OPS = frozenset(
    ("Conv", "Gemm", "MatMul", "BatchNorm", "Softmax", "Add", "Mul", "Concat",
     "Dropout", "Identity", "Opaque")
    + ACTIVATION_OPS
    + POOL_OPS
    + RESHAPE_OPS
)

# Accepted spellings from other toolchains, normalized at load time.
OP_ALIASES = {"BatchNormalization": "BatchNorm"}


@dataclass(frozen=True)
class TensorShape:
    """Shape of one activation tensor, NCHW order for 4-D tensors."""

    dims: tuple[int, ...]
    dtype: str = "f32"

    def __post_init__(self):
        if len(self.dims) < 1:
            raise ShapeInferenceError(f"rank must be >= 1, got {self.dims!r}")
        if any(not isinstance(d, int) or d < 1 for d in self.dims):
            raise ShapeInferenceError(f"all dims must be positive integers, got {self.dims!r}")
        if self.dtype not in DTYPES:
            raise ShapeInferenceError(f"unknown dtype {self.dtype!r}")

    def numel(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n

    def render(self) -> str:
        return "x".join(str(d) for d in self.dims)


@dataclass
class LayerNode:
    """One layer operator.

    ``input_ids`` reference producing nodes or named graph inputs; weight
    tensors never appear as edges, only as ``w<slot>`` shape params.
    """

    id: str
    op_type: str
    params: dict = field(default_factory=dict)
    input_ids: list[str] = field(default_factory=list)
    output_ids: list[str] = field(default_factory=list)
    in_shapes: list[TensorShape] | None = None
    out_shapes: list[TensorShape] | None = None
    macs: int = 0


@dataclass
class ModelGraph:
    name: str
    nodes: dict[str, LayerNode]
    graph_inputs: list[tuple[str, TensorShape]]
    graph_outputs: list[str]

    def input_shape(self, name: str) -> TensorShape | None:
        for n, shape in self.graph_inputs:
            if n == name:
                return shape
        return None


def validate(graph: ModelGraph) -> None:
    """Check edge integrity and acyclicity; fill consumer lists."""
    input_names = {n for n, _ in graph.graph_inputs}
    for node in graph.nodes.values():
        node.output_ids = []
    for node in graph.nodes.values():
        if not node.input_ids:
            raise GraphStructureError(
                f"node {node.id!r} has no inputs; only declared graph inputs may lack a producer"
            )
        for src in node.input_ids:
            if src in graph.nodes:
                graph.nodes[src].output_ids.append(node.id)
            elif src not in input_names:
                raise GraphStructureError(f"node {node.id!r} references unknown input {src!r}")
    for out in graph.graph_outputs:
        if out not in graph.nodes:
            raise GraphStructureError(f"graph output {out!r} is not a node")
    topo_order(graph)  # raises on cycles


def topo_order(graph: ModelGraph) -> list[str]:
    """Topological order of node ids; ties broken by node id, ascending."""
    indeg = {nid: 0 for nid in graph.nodes}
    for node in graph.nodes.values():
        for src in node.input_ids:
            if src in graph.nodes:
                indeg[node.id] += 1
    ready = [nid for nid, d in sorted(indeg.items()) if d == 0]
    heapq.heapify(ready)
    consumers: dict[str, list[str]] = {nid: [] for nid in graph.nodes}
    for node in graph.nodes.values():
        for src in node.input_ids:
            if src in graph.nodes:
                consumers[src].append(node.id)
    order: list[str] = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for consumer in consumers[nid]:
            indeg[consumer] -= 1
            if indeg[consumer] == 0:
                heapq.heappush(ready, consumer)
    if len(order) != len(graph.nodes):
        remaining = sorted(set(graph.nodes) - set(order))
        culprit = remaining[0]
        back = next(
            (s for s in graph.nodes[culprit].input_ids if s in remaining), remaining[-1]
        )
        raise GraphStructureError(f"graph has a cycle: back edge {back!r} -> {culprit!r}")
    return order


# ---------------------------------------------------------------------------
# Parameter canonicalization
# ---------------------------------------------------------------------------

def _as_pair(value, name: str, node_id: str) -> tuple[int, int]:
    if isinstance(value, int):
        return (value, value)
    if isinstance(value, tuple) and len(value) == 2:
        return (int(value[0]), int(value[1]))
    raise ShapeInferenceError(f"node {node_id!r}: bad {name} value {value!r}")


def _as_pads(value, node_id: str) -> tuple[int, int, int, int]:
    # ONNX 2-D order: (h_begin, w_begin, h_end, w_end); asymmetric allowed.
    if isinstance(value, int):
        return (value,) * 4
    if isinstance(value, tuple):
        if len(value) == 2:
            h, w = value
            return (int(h), int(w), int(h), int(w))
        if len(value) == 4:
            return tuple(int(v) for v in value)  # type: ignore[return-value]
    raise ShapeInferenceError(f"node {node_id!r}: bad pads value {value!r}")


def _as_dims(value) -> tuple[int, ...]:
    if isinstance(value, int):
        return (value,)
    return tuple(int(v) for v in value)


def _resolve_auto_pad(mode: str, in_dim: int, k: int, stride: int, dil: int) -> tuple[int, int]:
    if mode == "VALID":
        return (0, 0)
    out = (in_dim + stride - 1) // stride
    total = max(0, (out - 1) * stride + (k - 1) * dil + 1 - in_dim)
    begin = total // 2
    end = total - begin
    if mode == "SAME_LOWER":
        begin, end = end, begin
    return (begin, end)


def canonicalize_params(op_type: str, params: dict, in_dims: list[tuple[int, ...]],
                        node_id: str) -> dict:
    """Normalize op params so identical layers render identical signatures.

    Fills documented defaults (pads=0, strides=1, dilations=1, group=1),
    expands scalars to tuples, resolves auto_pad into explicit pads, and
    derives the convolution weight shape from ``filters`` when no ``w1``
    was recorded. Inference-irrelevant attributes are dropped.
    """
    p = dict(params)
    for k, v in list(p.items()):
        if k.startswith("w") and k[1:].isdigit():
            p[k] = _as_dims(v)
    for k in ("momentum", "spatial", "is_test", "consumed_inputs"):
        p.pop(k, None)

    def keep_weights(out: dict) -> dict:
        for k in sorted(p):
            if k.startswith("w") and k[1:].isdigit():
                out[k] = p[k]
        return out

    if op_type == "Conv":
        strides = _as_pair(p.get("strides", 1), "strides", node_id)
        dilations = _as_pair(p.get("dilations", 1), "dilations", node_id)
        group = int(p.get("group", 1))
        if "w1" in p:
            w1 = p["w1"]
            kernel = _as_pair(p.get("kernel", tuple(w1[2:4])), "kernel", node_id)
        elif "kernel" in p and "filters" in p:
            kernel = _as_pair(p["kernel"], "kernel", node_id)
            if not in_dims:
                raise ShapeInferenceError(f"node {node_id!r}: Conv has no data input")
            cin = in_dims[0][1]
            w1 = (int(p["filters"]), cin // group, kernel[0], kernel[1])
        else:
            raise ShapeInferenceError(
                f"node {node_id!r}: Conv needs w1 dims or kernel+filters attrs"
            )
        if "auto_pad" in p and p["auto_pad"] not in ("NOTSET", ""):
            hb, he = _resolve_auto_pad(str(p["auto_pad"]), in_dims[0][2], kernel[0],
                                       strides[0], dilations[0])
            wb, we = _resolve_auto_pad(str(p["auto_pad"]), in_dims[0][3], kernel[1],
                                       strides[1], dilations[1])
            pads = (hb, wb, he, we)
        else:
            pads = _as_pads(p.get("pads", 0), node_id)
        out = {"dilations": dilations, "group": group, "kernel": kernel,
               "pads": pads, "strides": strides, "w1": _as_dims(w1)}
        if "w2" in p:
            out["w2"] = p["w2"]
        return out

    if op_type in ("MaxPool", "AveragePool"):
        kernel = _as_pair(p["kernel"], "kernel", node_id) if "kernel" in p else None
        if kernel is None:
            raise ShapeInferenceError(f"node {node_id!r}: {op_type} needs kernel dims")
        out = {
            "kernel": kernel,
            "pads": _as_pads(p.get("pads", 0), node_id),
            "strides": _as_pair(p.get("strides", 1), "strides", node_id),
        }
        if p.get("ceil_mode"):
            out["ceil_mode"] = 1
        return out

    if op_type == "GlobalAveragePool":
        return {}

    if op_type == "Gemm":
        out = {"transA": int(p.get("transA", 0)), "transB": int(p.get("transB", 0))}
        for k in ("alpha", "beta"):
            if k in p and float(p[k]) != 1.0:
                out[k] = float(p[k])
        return keep_weights(out)

    if op_type == "BatchNorm":
        return keep_weights({"epsilon": float(p.get("epsilon", 1e-5))})

    if op_type == "Softmax":
        return {"axis": int(p.get("axis", -1))}

    if op_type == "Concat":
        if "axis" not in p:
            raise ShapeInferenceError(f"node {node_id!r}: Concat needs axis")
        return {"axis": int(p["axis"])}

    if op_type == "Flatten":
        return {"axis": int(p.get("axis", 1))}

    if op_type == "Reshape":
        if "shape" not in p:
            raise ShapeInferenceError(f"node {node_id!r}: Reshape needs target shape")
        return {"shape": tuple(int(v) for v in _as_dims(p["shape"]))}

    if op_type == "Unsqueeze":
        if "axes" not in p:
            raise ShapeInferenceError(f"node {node_id!r}: Unsqueeze needs axes")
        return {"axes": _as_dims(p["axes"])}

    if op_type == "Squeeze":
        return {"axes": _as_dims(p["axes"])} if "axes" in p else {}

    if op_type == "Transpose":
        if "perm" in p:
            return {"perm": _as_dims(p["perm"])}
        if in_dims:
            return {"perm": tuple(reversed(range(len(in_dims[0]))))}
        return {}

    if op_type == "Dropout":
        return {"ratio": float(p["ratio"])} if "ratio" in p else {}

    if op_type in ("Add", "Mul"):
        return keep_weights({})

    if op_type in ACTIVATION_OPS or op_type == "Identity":
        return {}

    # Opaque: keep whatever was recorded, normalized enough to render.
    return {k: p[k] for k in sorted(p)}


# ---------------------------------------------------------------------------
# Shape rules
# ---------------------------------------------------------------------------

def _conv_axis(in_dim: int, k: int, stride: int, pad_b: int, pad_e: int, dil: int,
               ceil_mode: bool = False) -> int:
    eff = dil * (k - 1) + 1
    num = in_dim + pad_b + pad_e - eff
    if num < 0:
        raise ShapeInferenceError(
            f"kernel {k} (dilation {dil}) larger than padded input {in_dim}+{pad_b}+{pad_e}"
        )
    if ceil_mode:
        return -((-num) // stride) + 1
    return num // stride + 1


def _broadcast(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...] | None:
    out = []
    for da, db in zip(reversed((1,) * max(0, len(b) - len(a)) + a),
                      reversed((1,) * max(0, len(a) - len(b)) + b)):
        if da == db or db == 1:
            out.append(da)
        elif da == 1:
            out.append(db)
        else:
            return None
    return tuple(reversed(out))


def output_dims(op_type: str, in_dims: list[tuple[int, ...]], params: dict,
                node_id: str = "?") -> tuple[int, ...]:
    """Output dims of one node given canonicalized params and input dims.

    ``in_dims`` holds the data-input dims in slot order; weight operands
    live in ``params`` as ``w<slot>`` entries.
    """

    def err(msg: str) -> ShapeInferenceError:
        return ShapeInferenceError(f"node {node_id!r} ({op_type}): {msg}")

    if op_type == "Conv":
        (n, c, h, w) = in_dims[0]
        w1 = params["w1"]
        group = params["group"]
        if len(w1) != 4:
            raise err(f"weight must be rank 4, got {w1}")
        if w1[1] * group != c:
            raise err(f"input channels {c} do not match weight {w1} with group {group}")
        kh, kw = params["kernel"]
        sh, sw = params["strides"]
        dh, dw = params["dilations"]
        pt, pl, pb, pr = params["pads"]
        return (n, w1[0],
                _conv_axis(h, kh, sh, pt, pb, dh),
                _conv_axis(w, kw, sw, pl, pr, dw))

    if op_type in ("MaxPool", "AveragePool"):
        (n, c, h, w) = in_dims[0]
        kh, kw = params["kernel"]
        sh, sw = params["strides"]
        pt, pl, pb, pr = params["pads"]
        ceil = bool(params.get("ceil_mode"))
        return (n, c,
                _conv_axis(h, kh, sh, pt, pb, 1, ceil),
                _conv_axis(w, kw, sw, pl, pr, 1, ceil))

    if op_type == "GlobalAveragePool":
        (n, c, *_rest) = in_dims[0]
        return (n, c, 1, 1)

    if op_type == "Gemm":
        a = in_dims[0]
        if len(a) != 2:
            raise err(f"expects a rank-2 input, got {a}")
        b = tuple(params["w1"]) if "w1" in params else (in_dims[1] if len(in_dims) > 1 else None)
        if b is None or len(b) != 2:
            raise err(f"no rank-2 B operand (got {b})")
        m, k = (a[1], a[0]) if params["transA"] else a
        kb, n_out = (b[1], b[0]) if params["transB"] else b
        if k != kb:
            raise err(f"inner dims differ: A gives {k}, B gives {kb} ({a} vs {b})")
        return (m, n_out)

    if op_type == "MatMul":
        a = in_dims[0]
        b = tuple(params["w1"]) if "w1" in params else (in_dims[1] if len(in_dims) > 1 else None)
        if b is None:
            raise err("no B operand")
        if len(a) < 2 or len(b) < 2:
            raise err(f"operands must be rank >= 2, got {a} and {b}")
        if a[-1] != b[-2]:
            raise err(f"inner dims differ: {a} vs {b}")
        batch = _broadcast(a[:-2], b[:-2]) if (len(a) > 2 or len(b) > 2) else ()
        if batch is None:
            raise err(f"batch dims do not broadcast: {a} vs {b}")
        return tuple(batch) + (a[-2], b[-1])

    if op_type in ("Add", "Mul"):
        dims = list(in_dims)
        for k in sorted(params):
            if k.startswith("w") and k[1:].isdigit():
                dims.append(tuple(params[k]))
        if not dims:
            raise err("no operands")
        out = dims[0]
        for d in dims[1:]:
            merged = _broadcast(out, d)
            if merged is None:
                raise err(f"shapes {out} and {d} do not broadcast")
            out = merged
        return out

    if op_type == "Concat":
        axis = params["axis"]
        base = list(in_dims[0])
        axis = axis if axis >= 0 else axis + len(base)
        if not 0 <= axis < len(base):
            raise err(f"axis {params['axis']} out of range for rank {len(base)}")
        for d in in_dims[1:]:
            if len(d) != len(base) or any(
                i != axis and d[i] != base[i] for i in range(len(base))
            ):
                raise err(f"shapes {tuple(base)} and {d} differ off-axis")
            base[axis] += d[axis]
        return tuple(base)

    if op_type == "Reshape":
        target = list(params["shape"])
        in_numel = 1
        for d in in_dims[0]:
            in_numel *= d
        out = []
        infer_at = None
        for i, d in enumerate(target):
            if d == 0:
                out.append(in_dims[0][i])
            elif d == -1:
                if infer_at is not None:
                    raise err("more than one -1 in reshape target")
                infer_at = i
                out.append(1)
            else:
                out.append(d)
        known = 1
        for d in out:
            known *= d
        if infer_at is not None:
            if in_numel % known:
                raise err(f"cannot reshape {in_dims[0]} to {tuple(target)}")
            out[infer_at] = in_numel // known
            known *= out[infer_at]
        if known != in_numel:
            raise err(f"cannot reshape {in_dims[0]} ({in_numel} elems) to {tuple(target)}")
        return tuple(out)

    if op_type == "Flatten":
        axis = params["axis"]
        d = in_dims[0]
        axis = axis if axis >= 0 else axis + len(d)
        lead = 1
        for v in d[:axis]:
            lead *= v
        tail = 1
        for v in d[axis:]:
            tail *= v
        return (lead, tail)

    if op_type == "Unsqueeze":
        out = list(in_dims[0])
        rank = len(out) + len(params["axes"])
        for ax in sorted(a if a >= 0 else a + rank for a in params["axes"]):
            out.insert(ax, 1)
        return tuple(out)

    if op_type == "Squeeze":
        d = in_dims[0]
        axes = params.get("axes")
        if axes is None:
            out = tuple(v for v in d if v != 1)
        else:
            norm = {a if a >= 0 else a + len(d) for a in axes}
            for a in norm:
                if d[a] != 1:
                    raise err(f"cannot squeeze non-1 dim {a} of {d}")
            out = tuple(v for i, v in enumerate(d) if i not in norm)
        return out if out else (1,)

    if op_type == "Transpose":
        d = in_dims[0]
        perm = params.get("perm", tuple(reversed(range(len(d)))))
        if sorted(perm) != list(range(len(d))):
            raise err(f"bad perm {perm} for rank {len(d)}")
        return tuple(d[p] for p in perm)

    if op_type in ACTIVATION_OPS or op_type in ("BatchNorm", "Softmax", "Dropout",
                                                "Identity", "Opaque"):
        # Opaque layers pass their first input through so downstream shapes
        # stay defined; they carry no compute.
        return in_dims[0]

    raise err("no shape rule")


def node_macs(op_type: str, in_dims: list[tuple[int, ...]], out_dims: tuple[int, ...],
              params: dict) -> int:
    """Multiply-accumulate count; zero for non-MAC ops."""
    if op_type == "Conv":
        w1 = params["w1"]  # (K, C/g, R, S)
        out_elems = 1
        for d in out_dims:
            out_elems *= d
        return out_elems * w1[1] * w1[2] * w1[3]
    if op_type == "Gemm":
        a = in_dims[0]
        k = a[0] if params["transA"] else a[1]
        return out_dims[0] * out_dims[1] * k
    if op_type == "MatMul":
        a = in_dims[0]
        out_elems = 1
        for d in out_dims:
            out_elems *= d
        return out_elems * a[-1]
    return 0


def weight_elems(params: dict) -> int:
    total = 0
    for k, v in params.items():
        if k.startswith("w") and k[1:].isdigit():
            n = 1
            for d in v:
                n *= d
            total += n
    return total


# ---------------------------------------------------------------------------
# Shape inference over a graph
# ---------------------------------------------------------------------------

def infer_shapes(graph: ModelGraph, batch: int) -> ModelGraph:
    """Return a copy of ``graph`` with all shapes populated at ``batch``.

    The leading dim of every graph input is the batch dim and is replaced
    by ``batch``. Propagation follows topological order; idempotent.
    """
    if batch < 1:
        raise ShapeInferenceError(f"batch must be >= 1, got {batch}")
    inputs = [
        (name, TensorShape((batch,) + s.dims[1:], s.dtype))
        for name, s in graph.graph_inputs
    ]
    by_name = dict(inputs)
    nodes: dict[str, LayerNode] = {}
    out = ModelGraph(graph.name, nodes, inputs, list(graph.graph_outputs))

    for nid in topo_order(graph):
        node = graph.nodes[nid]
        in_shapes: list[TensorShape] = []
        for src in node.input_ids:
            if src in nodes:
                in_shapes.append(nodes[src].out_shapes[0])
            elif src in by_name:
                in_shapes.append(by_name[src])
            else:
                raise GraphStructureError(f"node {nid!r} references unknown input {src!r}")
        in_dims = [s.dims for s in in_shapes]
        params = canonicalize_params(node.op_type, node.params, in_dims, nid)
        dims = output_dims(node.op_type, in_dims, params, nid)
        new = LayerNode(
            id=nid,
            op_type=node.op_type,
            params=params,
            input_ids=list(node.input_ids),
            output_ids=list(node.output_ids),
            in_shapes=in_shapes,
            out_shapes=[TensorShape(dims)],
        )
        new.macs = node_macs(node.op_type, in_dims, dims, params)
        nodes[nid] = new
    return out


def macs(graph: ModelGraph) -> tuple[dict[str, int], int]:
    """Per-node MAC counts and their total; requires inferred shapes."""
    per_node: dict[str, int] = {}
    total = 0
    for nid, node in graph.nodes.items():
        if node.out_shapes is None or node.in_shapes is None:
            raise ShapeStateError(f"node {nid!r} has no inferred shapes; run infer_shapes first")
        per_node[nid] = node.macs
        total += node.macs
    return per_node, total


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

def _parse_attr_value(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    parts = text.split("x")
    if len(parts) > 1:
        try:
            return tuple(int(p) for p in parts)
        except ValueError:
            pass
    return text


def parse_text_model(text: str, name: str = "model") -> ModelGraph:
    nodes: dict[str, LayerNode] = {}
    graph_inputs: list[tuple[str, TensorShape]] = []
    outputs: list[str] = []
    graph_name = name

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]
        try:
            if kind == "graph":
                graph_name = tokens[1]
            elif kind == "input":
                dims = tuple(int(d) for d in tokens[2].split("x"))
                graph_inputs.append((tokens[1], TensorShape(dims)))
            elif kind == "output":
                outputs.append(tokens[1])
            elif kind == "node":
                nid, op = tokens[1], tokens[2]
                op = OP_ALIASES.get(op, op)
                params: dict = {}
                if op not in SUPPORTED_OPS:
                    params["op"] = op
                    op = "Opaque"
                inputs: list[str] = []
                for tok in tokens[3:]:
                    if tok.startswith("inputs="):
                        csv = tok[len("inputs="):]
                        inputs = [s for s in csv.split(",") if s]
                    elif tok.startswith("attrs="):
                        for pair in tok[len("attrs="):].split(";"):
                            if not pair:
                                continue
                            k, _, v = pair.partition("=")
                            params[k] = _parse_attr_value(v)
                    else:
                        raise ValueError(f"unknown token {tok!r}")
                if nid in nodes:
                    raise ValueError(f"duplicate node id {nid!r}")
                nodes[nid] = LayerNode(id=nid, op_type=op, params=params, input_ids=inputs)
            else:
                raise ValueError(f"unknown directive {kind!r}")
        except (IndexError, ValueError) as exc:
            raise ModelParseError(f"bad model line {raw.strip()!r}: {exc}", offset=lineno) from exc

    if not outputs:
        consumed = {src for n in nodes.values() for src in n.input_ids}
        outputs = [nid for nid in nodes if nid not in consumed]
    graph = ModelGraph(graph_name, nodes, graph_inputs, outputs)
    validate(graph)
    return graph


def render_text_model(graph: ModelGraph) -> str:
    """Serialize a graph back to the text format (parse round-trips)."""
    lines = [f"graph {graph.name}"]
    for name, shape in graph.graph_inputs:
        lines.append(f"input {name} {shape.render()}")
    for node in graph.nodes.values():
        attrs = []
        params = node.params
        op = node.op_type
        if op == "Opaque" and "op" in params:
            op = params["op"]
            params = {k: v for k, v in params.items() if k != "op"}
        for k in sorted(params):
            v = params[k]
            if isinstance(v, tuple):
                attrs.append(f"{k}={'x'.join(str(d) for d in v)}")
            else:
                attrs.append(f"{k}={v}")
        line = f"node {node.id} {op} inputs={','.join(node.input_ids)}"
        if attrs:
            line += f" attrs={';'.join(attrs)}"
        lines.append(line)
    for out in graph.graph_outputs:
        lines.append(f"output {out}")
    return "\n".join(lines) + "\n"


def load_model_file(path) -> ModelGraph:
    """Load a model from disk, sniffing binary ONNX format vs. text."""
    from . import onnx_reader

    with open(path, "rb") as fh:
        data = fh.read()
    name = str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    head = data[:256]
    try:
        text_head = head.decode("utf-8")
    except UnicodeDecodeError:
        return onnx_reader.load_model(data, name=name)
    stripped = text_head.lstrip()
    if stripped.startswith(("graph", "input", "node", "#")):
        return parse_text_model(data.decode("utf-8"), name=name)
    return onnx_reader.load_model(data, name=name)
