"""ResNet20-for-CIFAR topology and synthetic weights."""

from __future__ import annotations

import numpy as np

from sysacc.nnir.graph import (
    Graph,
    LayerNode,
    TensorShape,
    WeightRef,
    expected_weight_shape,
    infer_shapes,
    node_shape,
)

CIFAR_SHAPE = TensorShape(1, 32, 32, 3)


class GraphBuilder:
    """Appends nodes in topological order and lays out weight refs contiguously."""

    def __init__(self, input_shape: TensorShape):
        self.nodes: list[LayerNode] = []
        self.shapes: dict[int, TensorShape] = {}
        self.offset = 0
        self.tensors = 0
        self.input_id = self._add(LayerNode(0, "input", name="image"), input_shape)

    def _add(self, node: LayerNode, shape: TensorShape) -> int:
        self.nodes.append(node)
        self.shapes[node.id] = shape
        return node.id

    def _ref(self, shape) -> WeightRef:
        ref = WeightRef(self.tensors, tuple(shape), self.offset)
        self.tensors += 1
        self.offset += ref.nbytes
        return ref

    def _node(self, op, inputs, attrs=None, name="", weighted=False) -> int:
        nid = len(self.nodes)
        node = LayerNode(nid, op, tuple(inputs), dict(attrs or {}), name=name)
        shape = node_shape(node, [self.shapes[i] for i in inputs])
        if weighted:
            w = self._ref(expected_weight_shape(node, self.shapes[inputs[0]]))
            b = self._ref((shape.c,))
            node = LayerNode(nid, op, node.inputs, node.attrs, weights=w, bias=b, name=name)
        return self._add(node, shape)

    def conv(self, x, out_c, k=3, stride=1, padding=None, name=""):
        if padding is None:
            padding = k // 2
        attrs = {"kernel": [k, k], "stride": stride, "padding": padding, "out_channels": out_c}
        return self._node("conv2d", [x], attrs, name, weighted=True)

    def dense(self, x, units, name=""):
        return self._node("dense", [x], {"units": units}, name, weighted=True)

    def relu(self, x, name=""):
        return self._node("relu", [x], name=name)

    def add(self, a, b, name=""):
        return self._node("add", [a, b], name=name)

    def avgpool(self, x, name=""):
        return self._node("avgpool_global", [x], name=name)

    def maxpool(self, x, k, stride, padding=0, name=""):
        return self._node("maxpool", [x], {"kernel": [k, k], "stride": stride, "padding": padding}, name)

    def pad(self, x, padding, name=""):
        return self._node("pad", [x], {"padding": padding}, name)

    def shape(self, x) -> TensorShape:
        return self.shapes[x]

    def build(self, output_id=None) -> Graph:
        out = self.nodes[-1].id if output_id is None else output_id
        g = Graph(tuple(self.nodes), self.input_id, out)
        return infer_shapes(g, self.shapes[self.input_id])


def build_resnet20(num_classes: int = 10, input_shape: TensorShape = CIFAR_SHAPE) -> Graph:
    """ResNet20 (v1) with 1x1 projection shortcuts at the two downsampling transitions."""
    if num_classes < 2:
        raise ValueError("num_classes must be >= 2")
    b = GraphBuilder(input_shape)
    x = b.relu(b.conv(b.input_id, 16, name="stem"), name="stem_relu")
    for stage, width in enumerate((16, 32, 64)):
        for block in range(3):
            tag = f"s{stage}b{block}"
            stride = 2 if stage > 0 and block == 0 else 1
            if stride != 1 or b.shape(x).c != width:
                shortcut = b.conv(x, width, k=1, stride=stride, padding=0, name=f"{tag}_proj")
            else:
                shortcut = x
            y = b.relu(b.conv(x, width, stride=stride, name=f"{tag}_conv1"), name=f"{tag}_relu1")
            y = b.conv(y, width, name=f"{tag}_conv2")
            x = b.relu(b.add(y, shortcut, name=f"{tag}_add"), name=f"{tag}_relu2")
    x = b.avgpool(x, name="pool")
    b.dense(x, num_classes, name="fc")
    return b.build()


def blob_size(g: Graph) -> int:
    end = 0
    for n in g.nodes:
        for ref in (n.weights, n.bias):
            if ref is not None:
                end = max(end, ref.offset + ref.nbytes)
    return end


def random_blob(g: Graph, seed: int = 0, grid_bits: int | None = 8) -> bytes:
    """Synthetic weights with variance-preserving scaling (He init), as little-endian float32.

    The second conv of each residual block is damped so the residual sum stays
    within the fixed-point range.  Values are rounded to multiples of
    ``2**-grid_bits`` (deployment-ready weights); pass ``None`` to keep raw draws.
    """
    rng = np.random.default_rng(seed)
    blob = np.zeros(blob_size(g) // 4, dtype="<f4")
    for n in g.nodes:
        if n.weights is None:
            continue
        fan_in = int(np.prod(n.weights.shape[:-1]))
        gain = 2.0 if n.op == "conv2d" else 1.0
        if n.name.endswith("conv2"):
            gain *= 0.25
        w = rng.normal(0.0, np.sqrt(gain / fan_in), n.weights.shape)
        if n.op == "dense":
            w *= 4.0  # spread the logits so top-1 is well separated
        blob[n.weights.offset // 4: n.weights.offset // 4 + w.size] = w.ravel()
        if n.bias is not None:
            bias = rng.normal(0.0, 0.05, n.bias.shape)
            blob[n.bias.offset // 4: n.bias.offset // 4 + bias.size] = bias
    if grid_bits is not None:
        blob = (np.rint(np.ldexp(blob, grid_bits)) / 2.0 ** grid_bits).astype("<f4")
    return blob.tobytes()
