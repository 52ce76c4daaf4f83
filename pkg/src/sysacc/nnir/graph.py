"""Graph IR: nodes, weight references and shape inference."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

OPS = ("input", "conv2d", "dense", "relu", "add", "maxpool", "avgpool_global", "pad")
WEIGHTED_OPS = ("conv2d", "dense")


class GraphError(ValueError):
    pass


class ShapeError(GraphError):
    pass


@dataclass(frozen=True)
class TensorShape:
    n: int
    h: int
    w: int
    c: int

    def __post_init__(self):
        if min(self.n, self.h, self.w, self.c) <= 0:
            raise ShapeError(f"non-positive dimension in {self}")

    @property
    def numel(self) -> int:
        return self.n * self.h * self.w * self.c

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.n, self.h, self.w, self.c)

    def __str__(self):
        return "x".join(map(str, self.as_tuple()))


@dataclass(frozen=True)
class WeightRef:
    tensor: int
    shape: tuple[int, ...]
    offset: int
    dtype: str = "float32"

    def __post_init__(self):
        if self.dtype != "float32":
            raise GraphError(f"unsupported weight dtype {self.dtype}")
        if self.offset < 0 or self.offset % 4:
            raise GraphError(f"weight offset {self.offset} must be a non-negative multiple of 4")
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))

    @property
    def numel(self) -> int:
        n = 1
        for s in self.shape:
            n *= s
        return n

    @property
    def nbytes(self) -> int:
        return 4 * self.numel


@dataclass(frozen=True)
class LayerNode:
    id: int
    op: str
    inputs: tuple[int, ...] = ()
    attrs: dict = field(default_factory=dict)
    out_shape: TensorShape | None = None
    weights: WeightRef | None = None
    bias: WeightRef | None = None
    name: str = ""

    def __post_init__(self):
        if self.op not in OPS:
            raise GraphError(f"unknown op {self.op!r}")
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if self.op == "add" and len(self.inputs) != 2:
            raise GraphError(f"add node {self.id} needs exactly two inputs")
        if self.op == "input" and self.inputs:
            raise GraphError("input node takes no inputs")
        if self.op not in ("input", "add") and len(self.inputs) != 1:
            raise GraphError(f"{self.op} node {self.id} needs exactly one input")

    def kernel(self) -> tuple[int, int]:
        kh, kw = self.attrs["kernel"]
        return int(kh), int(kw)


@dataclass(frozen=True)
class Graph:
    nodes: tuple[LayerNode, ...]
    input_id: int
    output_id: int

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        seen = set()
        for n in self.nodes:
            if n.id in seen:
                raise GraphError(f"duplicate node id {n.id}")
            for i in n.inputs:
                if i not in seen:
                    raise GraphError(f"node {n.id} references {i}, which is not an earlier node")
            seen.add(n.id)
        inputs = [n.id for n in self.nodes if n.op == "input"]
        if self.nodes:
            if inputs != [self.input_id]:
                raise GraphError("graph needs exactly one input node matching input_id")
            if self.output_id not in seen:
                raise GraphError(f"output id {self.output_id} not in graph")
        for n in self.nodes:
            if n.op in WEIGHTED_OPS and n.weights is None:
                raise GraphError(f"{n.op} node {n.id} has no weights")

    def node(self, nid: int) -> LayerNode:
        return self._index()[nid]

    def _index(self) -> dict[int, LayerNode]:
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {n.id: n for n in self.nodes}
            object.__setattr__(self, "_idx", idx)
        return idx

    def consumers(self, nid: int) -> list[LayerNode]:
        return [n for n in self.nodes if nid in n.inputs]

    def weighted(self) -> list[LayerNode]:
        return [n for n in self.nodes if n.op in WEIGHTED_OPS]

    @property
    def input_shape(self) -> TensorShape | None:
        return self.node(self.input_id).out_shape if self.nodes else None

    @property
    def output_shape(self) -> TensorShape | None:
        return self.node(self.output_id).out_shape if self.nodes else None


EMPTY_GRAPH = Graph((), -1, -1)


def conv_out(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def expected_weight_shape(node: LayerNode, in_shape: TensorShape) -> tuple[int, ...]:
    if node.op == "conv2d":
        kh, kw = node.kernel()
        return (kh, kw, in_shape.c, int(node.attrs["out_channels"]))
    if node.op == "dense":
        return (in_shape.h * in_shape.w * in_shape.c, int(node.attrs["units"]))
    raise GraphError(f"{node.op} carries no weights")


def node_shape(node: LayerNode, ins: list[TensorShape]) -> TensorShape:
    op = node.op
    if op == "input":
        raise AssertionError("handled by caller")
    x = ins[0]
    if op in ("conv2d", "maxpool"):
        kh, kw = node.kernel()
        s, p = int(node.attrs.get("stride", 1)), int(node.attrs.get("padding", 0))
        oh, ow = conv_out(x.h, kh, s, p), conv_out(x.w, kw, s, p)
        if oh <= 0 or ow <= 0:
            raise ShapeError(f"node {node.id}: kernel larger than padded input {x}")
        c = int(node.attrs["out_channels"]) if op == "conv2d" else x.c
        return TensorShape(x.n, oh, ow, c)
    if op == "dense":
        return TensorShape(x.n, 1, 1, int(node.attrs["units"]))
    if op == "relu":
        return x
    if op == "add":
        if ins[0] != ins[1]:
            raise ShapeError(f"add node {node.id}: operand shapes {ins[0]} and {ins[1]} differ")
        return x
    if op == "avgpool_global":
        return TensorShape(x.n, 1, 1, x.c)
    if op == "pad":
        p = int(node.attrs["padding"])
        return TensorShape(x.n, x.h + 2 * p, x.w + 2 * p, x.c)
    raise GraphError(f"no shape rule for {op}")


def infer_shapes(g: Graph, input_shape: TensorShape) -> Graph:
    """Return a copy of ``g`` with every ``out_shape`` filled in."""
    shapes: dict[int, TensorShape] = {}
    nodes = []
    for n in g.nodes:
        if n.op == "input":
            s = input_shape
        else:
            ins = [shapes[i] for i in n.inputs]
            s = node_shape(n, ins)
            if n.op in WEIGHTED_OPS and n.weights is not None:
                want = expected_weight_shape(n, ins[0])
                if n.weights.shape != want:
                    raise ShapeError(f"node {n.id}: weight shape {n.weights.shape}, expected {want}")
            if n.bias is not None and n.bias.shape != (s.c,):
                raise ShapeError(f"node {n.id}: bias shape {n.bias.shape}, expected ({s.c},)")
        shapes[n.id] = s
        nodes.append(dataclasses.replace(n, out_shape=s))
    return Graph(tuple(nodes), g.input_id, g.output_id)


def node_macs(g: Graph, n: LayerNode) -> int:
    if n.op == "conv2d":
        kh, kw = n.kernel()
        x, y = g.node(n.inputs[0]).out_shape, n.out_shape
        return y.h * y.w * y.c * kh * kw * x.c
    if n.op == "dense":
        x = g.node(n.inputs[0]).out_shape
        return x.h * x.w * x.c * n.out_shape.c
    return 0


def total_macs(g: Graph) -> int:
    return sum(node_macs(g, n) for n in g.nodes)
