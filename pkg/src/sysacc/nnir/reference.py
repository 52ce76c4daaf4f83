"""Float32 reference inference; the oracle for fixed-point execution."""

from __future__ import annotations

import numpy as np

from sysacc.nnir.graph import Graph, LayerNode, ShapeError
from sysacc.nnir.io import weight_array


def _pad(x, p, value=0.0):
    return np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)), constant_values=value)


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None, stride: int, padding: int) -> np.ndarray:
    """Direct convolution as a sum over kernel taps (NHWC input, HWIO weights)."""
    kh, kw, _, oc = w.shape
    xp = _pad(x, padding)
    n, hp, wp, _ = xp.shape
    oh, ow = (hp - kh) // stride + 1, (wp - kw) // stride + 1
    out = np.zeros((n, oh, ow, oc), dtype=np.float32)
    for dy in range(kh):
        for dx in range(kw):
            win = xp[:, dy: dy + stride * (oh - 1) + 1: stride, dx: dx + stride * (ow - 1) + 1: stride, :]
            out += win @ w[dy, dx]
    if b is not None:
        out += b
    return out


def maxpool(x, kh, kw, stride, padding):
    xp = _pad(x, padding, -np.inf)
    n, hp, wp, c = xp.shape
    oh, ow = (hp - kh) // stride + 1, (wp - kw) // stride + 1
    out = np.full((n, oh, ow, c), -np.inf, dtype=np.float32)
    for dy in range(kh):
        for dx in range(kw):
            out = np.maximum(out, xp[:, dy: dy + stride * (oh - 1) + 1: stride, dx: dx + stride * (ow - 1) + 1: stride, :])
    return out


def eval_node(n: LayerNode, ins: list[np.ndarray], blob: bytes) -> np.ndarray:
    op = n.op
    if op == "conv2d":
        w = weight_array(blob, n.weights)
        b = weight_array(blob, n.bias) if n.bias is not None else None
        return conv2d(ins[0], w, b, int(n.attrs.get("stride", 1)), int(n.attrs.get("padding", 0)))
    if op == "dense":
        x = ins[0].reshape(ins[0].shape[0], -1)
        y = x @ weight_array(blob, n.weights)
        if n.bias is not None:
            y = y + weight_array(blob, n.bias)
        return y.reshape(x.shape[0], 1, 1, -1).astype(np.float32)
    if op == "relu":
        return np.maximum(ins[0], 0.0)
    if op == "add":
        if ins[0].shape != ins[1].shape:
            raise ShapeError(f"add node {n.id}: {ins[0].shape} vs {ins[1].shape}")
        return ins[0] + ins[1]
    if op == "avgpool_global":
        return ins[0].mean(axis=(1, 2), keepdims=True, dtype=np.float32)
    if op == "maxpool":
        kh, kw = n.kernel()
        return maxpool(ins[0], kh, kw, int(n.attrs.get("stride", 1)), int(n.attrs.get("padding", 0)))
    if op == "pad":
        return _pad(ins[0], int(n.attrs["padding"]))
    raise ShapeError(f"cannot evaluate {op}")


def reference_forward(g: Graph, blob: bytes, x: np.ndarray, keep: bool = False):
    """Run the graph in float32. With ``keep`` return every node's output."""
    x = np.asarray(x, dtype=np.float32)
    if x.shape != g.input_shape.as_tuple():
        raise ShapeError(f"input shape {x.shape} does not match {g.input_shape}")
    vals = {g.input_id: x}
    for n in g.nodes:
        if n.op != "input":
            vals[n.id] = eval_node(n, [vals[i] for i in n.inputs], blob).astype(np.float32, copy=False)
    return vals if keep else vals[g.output_id]
