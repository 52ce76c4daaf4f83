"""Model manifest (JSON) + raw little-endian float32 weight blob."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from sysacc.nnir.graph import OPS, Graph, GraphError, LayerNode, TensorShape, WeightRef, infer_shapes

FORMAT = "sysacc-model"
VERSION = 1


class ModelFormatError(GraphError):
    pass


def _ref_to_json(ref: WeightRef | None):
    if ref is None:
        return None
    return {"tensor": ref.tensor, "shape": list(ref.shape), "offset": ref.offset, "dtype": ref.dtype}


def manifest_dict(g: Graph) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "input_shape": list(g.input_shape.as_tuple()),
        "input": g.input_id,
        "output": g.output_id,
        "nodes": [
            {
                "id": n.id,
                "op": n.op,
                "name": n.name,
                "inputs": list(n.inputs),
                "attrs": n.attrs,
                "weights": _ref_to_json(n.weights),
                "bias": _ref_to_json(n.bias),
            }
            for n in g.nodes
        ],
    }


def save_model(g: Graph, blob: bytes, manifest_path, blob_path) -> None:
    Path(manifest_path).write_text(json.dumps(manifest_dict(g), indent=1) + "\n")
    Path(blob_path).write_bytes(blob)


def _parse_ref(d, where) -> WeightRef | None:
    if d is None:
        return None
    try:
        return WeightRef(int(d["tensor"]), tuple(d["shape"]), int(d["offset"]), d.get("dtype", "float32"))
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"{where}: malformed weight reference ({e})") from None


def parse_manifest(d: dict) -> Graph:
    if not isinstance(d, dict) or d.get("format") != FORMAT:
        raise ModelFormatError(f"not a {FORMAT} manifest")
    if d.get("version") != VERSION:
        raise ModelFormatError(f"unsupported manifest version {d.get('version')!r}")
    nodes = []
    ids = set()
    try:
        for nd in d["nodes"]:
            where = f"node {nd.get('id')}"
            if nd["op"] not in OPS:
                raise ModelFormatError(f"{where}: unknown op {nd['op']!r}")
            for i in nd.get("inputs", []):
                if i not in ids:
                    raise ModelFormatError(f"{where}: dangling input reference {i}")
            nodes.append(LayerNode(
                int(nd["id"]), nd["op"], tuple(nd.get("inputs", [])), dict(nd.get("attrs") or {}),
                weights=_parse_ref(nd.get("weights"), where), bias=_parse_ref(nd.get("bias"), where),
                name=nd.get("name", ""),
            ))
            ids.add(int(nd["id"]))
        g = Graph(tuple(nodes), int(d["input"]), int(d["output"]))
        shape = TensorShape(*d["input_shape"])
    except ModelFormatError:
        raise
    except (KeyError, TypeError, GraphError) as e:
        raise ModelFormatError(f"malformed manifest: {e}") from None
    return infer_shapes(g, shape)


def check_blob(g: Graph, blob: bytes) -> None:
    for n in g.nodes:
        for ref in (n.weights, n.bias):
            if ref is not None and ref.offset + ref.nbytes > len(blob):
                raise ModelFormatError(
                    f"node {n.id}: weights [{ref.offset}, {ref.offset + ref.nbytes}) "
                    f"out of bounds for {len(blob)}-byte blob"
                )


def load_model(manifest_path, blob_path) -> tuple[Graph, bytes]:
    try:
        d = json.loads(Path(manifest_path).read_text())
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{manifest_path}: {e}") from None
    g = parse_manifest(d)
    blob = Path(blob_path).read_bytes()
    check_blob(g, blob)
    return g, blob


def weight_array(blob: bytes, ref: WeightRef) -> np.ndarray:
    if ref.offset + ref.nbytes > len(blob):
        raise ModelFormatError(f"weight tensor {ref.tensor} out of bounds")
    return np.frombuffer(blob, dtype="<f4", count=ref.numel, offset=ref.offset).reshape(ref.shape)
