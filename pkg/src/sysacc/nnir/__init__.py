from sysacc.nnir.graph import (
    EMPTY_GRAPH,
    OPS,
    Graph,
    GraphError,
    LayerNode,
    ShapeError,
    TensorShape,
    WeightRef,
    infer_shapes,
    node_macs,
    total_macs,
)
from sysacc.nnir.io import ModelFormatError, load_model, save_model, weight_array
from sysacc.nnir.reference import reference_forward
from sysacc.nnir.resnet import CIFAR_SHAPE, GraphBuilder, build_resnet20, random_blob

__all__ = [
    "CIFAR_SHAPE", "EMPTY_GRAPH", "OPS", "Graph", "GraphBuilder", "GraphError", "LayerNode",
    "ModelFormatError", "ShapeError", "TensorShape", "WeightRef", "build_resnet20", "infer_shapes",
    "load_model", "node_macs", "random_blob", "reference_forward", "save_model", "total_macs",
    "weight_array",
]
