"""Architecture graph IR: layer kinds, shape inference, scheduling, JSON I/O.

Graphs are append-only during construction and treated as immutable once
shapes are inferred; every analysis in the other modules is a pure read.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union


class GraphError(ValueError):
    """Raised for malformed graphs or invalid construction steps."""


@dataclass(frozen=True)
class TensorShape:
    channels: int
    height: int
    width: int

    def __post_init__(self):
        for name in ("channels", "height", "width"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise GraphError(f"{name} must be a positive integer, got {v!r}")

    @property
    def element_count(self) -> int:
        return self.channels * self.height * self.width

    def as_list(self) -> list:
        return [self.channels, self.height, self.width]


# --- layer kinds -----------------------------------------------------------

@dataclass(frozen=True)
class Input:
    pass


@dataclass(frozen=True)
class Conv:
    out_channels: int
    kernel_h: int = 3
    kernel_w: int = 3
    stride: int = 1
    dilation: int = 1
    groups: int = 1
    bias: bool = False

    def __post_init__(self):
        for name in ("out_channels", "kernel_h", "kernel_w", "stride", "dilation", "groups"):
            if getattr(self, name) < 1:
                raise GraphError(f"Conv.{name} must be >= 1")
        if self.out_channels % self.groups != 0:
            raise GraphError("groups must divide out_channels")


@dataclass(frozen=True)
class Pool:
    mode: str  # "avg" | "max"
    kernel: int = 2
    stride: int = 2

    def __post_init__(self):
        if self.mode not in ("avg", "max"):
            raise GraphError(f"unknown pool mode {self.mode!r}")
        if self.kernel < 1 or self.stride < 1:
            raise GraphError("Pool kernel and stride must be >= 1")


@dataclass(frozen=True)
class TransposedConv:
    out_channels: int
    kernel: int = 2
    stride: int = 2

    def __post_init__(self):
        if self.out_channels < 1 or self.kernel < 1 or self.stride < 1:
            raise GraphError("TransposedConv fields must be >= 1")


@dataclass(frozen=True)
class Concat:
    pass


@dataclass(frozen=True)
class Add:
    """Element-wise sum (residual shortcut); all inputs share one shape."""


@dataclass(frozen=True)
class GlobalPool:
    pass


@dataclass(frozen=True)
class Linear:
    out_features: int

    def __post_init__(self):
        if self.out_features < 1:
            raise GraphError("Linear.out_features must be >= 1")


LayerKind = Union[Input, Conv, Pool, TransposedConv, Concat, Add, GlobalPool, Linear]

_KIND_NAMES = {
    Input: "input",
    Conv: "conv",
    Pool: "pool",
    TransposedConv: "tconv",
    Concat: "concat",
    Add: "add",
    GlobalPool: "global_pool",
    Linear: "linear",
}
_NAME_KINDS = {v: k for k, v in _KIND_NAMES.items()}


@dataclass(frozen=True)
class Node:
    id: int
    kind: LayerKind
    inputs: tuple
    label: Optional[str] = None


@dataclass
class ArchGraph:
    name: str = "graph"
    nodes: list = field(default_factory=list)
    shapes: dict = field(default_factory=dict)
    input_shape: Optional[TensorShape] = None

    # --- construction ---

    def add(self, kind: LayerKind, inputs: Iterable[int] = (), label: Optional[str] = None) -> int:
        inputs = tuple(inputs)
        nid = len(self.nodes)
        if isinstance(kind, Input):
            if any(isinstance(n.kind, Input) for n in self.nodes):
                raise GraphError("graph already has an Input node")
            if inputs:
                raise GraphError("Input node takes no inputs")
        else:
            if not inputs:
                raise GraphError(f"{_KIND_NAMES[type(kind)]} node requires >= 1 input")
        if isinstance(kind, Concat) and len(inputs) < 2:
            raise GraphError("Concat requires >= 2 inputs")
        for i in inputs:
            if not (0 <= i < nid):
                raise GraphError(f"unknown input id {i} for node {nid}")
        self.nodes.append(Node(nid, kind, inputs, label))
        return nid

    def node(self, nid: int) -> Node:
        return self.nodes[nid]

    def validate(self) -> None:
        n_inputs = sum(1 for n in self.nodes if isinstance(n.kind, Input))
        if n_inputs != 1:
            raise GraphError(f"graph must have exactly one Input node, found {n_inputs}")
        for n in self.nodes:
            for i in n.inputs:
                if i >= n.id:
                    raise GraphError(f"node {n.id} references non-preceding input {i}")

    # --- shape inference ---

    def infer_shapes(self, input_shape: TensorShape) -> "ArchGraph":
        self.validate()
        self.input_shape = input_shape
        shapes = {}
        for n in self.nodes:
            shapes[n.id] = self._node_shape(n, shapes)
        self.shapes = shapes
        return self

    def _node_shape(self, n: Node, shapes) -> TensorShape:
        k = n.kind
        if isinstance(k, Input):
            return self.input_shape
        ins = [shapes[i] for i in n.inputs]
        s = ins[0]
        if isinstance(k, Conv):
            c_in = sum(i.channels for i in ins)
            if any(i.height != s.height or i.width != s.width for i in ins):
                raise GraphError(f"conv {n.id}: spatial mismatch among concatenated inputs")
            if c_in % k.groups != 0:
                raise GraphError(f"conv {n.id}: groups={k.groups} does not divide c_in={c_in}")
            h = _conv_out(s.height, k.kernel_h, k.stride, k.dilation)
            w = _conv_out(s.width, k.kernel_w, k.stride, k.dilation)
            return TensorShape(k.out_channels, h, w)
        if isinstance(k, Pool):
            return TensorShape(s.channels, s.height // k.stride, s.width // k.stride)
        if isinstance(k, TransposedConv):
            return TensorShape(k.out_channels, s.height * k.stride, s.width * k.stride)
        if isinstance(k, Concat):
            if any(i.height != s.height or i.width != s.width for i in ins):
                raise GraphError(f"concat {n.id}: inputs disagree on spatial size")
            return TensorShape(sum(i.channels for i in ins), s.height, s.width)
        if isinstance(k, Add):
            if any(i != s for i in ins):
                raise GraphError(f"add {n.id}: inputs must share one shape")
            return s
        if isinstance(k, GlobalPool):
            return TensorShape(s.channels, 1, 1)
        if isinstance(k, Linear):
            return TensorShape(k.out_features, 1, 1)
        raise GraphError(f"unknown kind {k!r}")

    def conv_input_shape(self, n: Node) -> TensorShape:
        """Effective (possibly concatenated) input tensor of a node."""
        ins = [self.shapes[i] for i in n.inputs]
        if len(ins) == 1:
            return ins[0]
        return TensorShape(sum(i.channels for i in ins), ins[0].height, ins[0].width)

    # --- scheduling ---

    def schedule(self) -> list:
        """Deterministic topological order; ties broken by ascending node id."""
        self.validate()
        # ids are assigned append-only and inputs always precede, so ascending
        # id order is itself the tie-broken topological order.
        order = [n.id for n in self.nodes]
        seen = set()
        for nid in order:
            if any(i not in seen for i in self.nodes[nid].inputs):
                raise GraphError("cycle detected")
            seen.add(nid)
        return order

    # --- serialization ---

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "input": self.input_shape.as_list() if self.input_shape else None,
            "nodes": [
                {
                    "id": n.id,
                    "kind": _KIND_NAMES[type(n.kind)],
                    "params": _kind_params(n.kind),
                    "inputs": list(n.inputs),
                    **({"label": n.label} if n.label else {}),
                }
                for n in self.nodes
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ArchGraph":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise GraphError(f"malformed graph JSON: {e}") from e
        g = cls(name=doc.get("name", "graph"))
        nodes = sorted(doc["nodes"], key=lambda d: d["id"])
        for i, d in enumerate(nodes):
            if d["id"] != i:
                raise GraphError("node ids must be contiguous from 0")
            kind = _kind_from_json(d["kind"], d.get("params", {}))
            g.add(kind, d.get("inputs", []), d.get("label"))
        if doc.get("input"):
            c, h, w = doc["input"]
            g.infer_shapes(TensorShape(c, h, w))
        return g


def _conv_out(size: int, kernel: int, stride: int, dilation: int) -> int:
    # "same" padding for odd kernels; even kernels pad to keep stride tiling.
    pad = dilation * (kernel - 1) // 2
    return (size + 2 * pad - dilation * (kernel - 1) - 1) // stride + 1


def _kind_params(k: LayerKind) -> dict:
    if isinstance(k, Conv):
        return {
            "out_channels": k.out_channels,
            "kernel": [k.kernel_h, k.kernel_w],
            "stride": k.stride,
            "dilation": k.dilation,
            "groups": k.groups,
            "bias": k.bias,
        }
    if isinstance(k, Pool):
        return {"mode": k.mode, "kernel": k.kernel, "stride": k.stride}
    if isinstance(k, TransposedConv):
        return {"out_channels": k.out_channels, "kernel": k.kernel, "stride": k.stride}
    if isinstance(k, Linear):
        return {"out_features": k.out_features}
    return {}


def _kind_from_json(name: str, params: dict) -> LayerKind:
    if name not in _NAME_KINDS:
        raise GraphError(f"unknown node kind {name!r}")
    cls = _NAME_KINDS[name]
    if cls is Conv:
        kh, kw = params.get("kernel", [3, 3])
        return Conv(
            out_channels=params["out_channels"],
            kernel_h=kh,
            kernel_w=kw,
            stride=params.get("stride", 1),
            dilation=params.get("dilation", 1),
            groups=params.get("groups", 1),
            bias=params.get("bias", False),
        )
    if cls is Pool:
        return Pool(params["mode"], params.get("kernel", 2), params.get("stride", 2))
    if cls is TransposedConv:
        return TransposedConv(params["out_channels"], params.get("kernel", 2), params.get("stride", 2))
    if cls is Linear:
        return Linear(params["out_features"])
    return cls()


def to_dot(graph: ArchGraph) -> str:
    """Graphviz DOT rendering, one DOT node per graph node."""
    lines = [f'digraph "{graph.name}" {{', "  rankdir=TB;"]
    for n in graph.nodes:
        kind = _KIND_NAMES[type(n.kind)]
        shape = graph.shapes.get(n.id)
        extra = f"\\n{shape.channels}x{shape.height}x{shape.width}" if shape else ""
        label = n.label or kind
        lines.append(f'  n{n.id} [label="{n.id}: {label}{extra}"];')
    for n in graph.nodes:
        for i in n.inputs:
            lines.append(f"  n{i} -> n{n.id};")
    lines.append("}")
    return "\n".join(lines) + "\n"
