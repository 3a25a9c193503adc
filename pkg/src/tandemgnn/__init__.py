"""Joint primary/auxiliary GCN training on an input graph and a
correlation-reconstructed graph, with an experiment harness for few-label and
edge-corruption benchmarks."""

from .autodiff import SparseMatrix, Tensor, backward, grad_check, zero_grad
from .graphs import (
    Graph,
    GraphFormatError,
    degree_vector,
    drop_edges,
    generate_sbm,
    load_graph,
    normalize_sym,
    renormalize,
    save_graph,
    sbm_fixture,
    subsample_labels,
)
from .losses import LossBreakdown, cross_entropy_masked, joint_loss, mincut_loss
from .model import (
    DualParams,
    ModelConfig,
    build_adjacency,
    cluster_assign,
    forward_dual,
    init_params,
    pearson_rows,
)
from .training import Mode, RunRecord, TrainConfig, TrainingDiverged, evaluate, train

__all__ = [
    "Graph",
    "GraphFormatError",
    "SparseMatrix",
    "Tensor",
    "backward",
    "grad_check",
    "zero_grad",
    "degree_vector",
    "drop_edges",
    "generate_sbm",
    "load_graph",
    "normalize_sym",
    "renormalize",
    "save_graph",
    "sbm_fixture",
    "subsample_labels",
    "LossBreakdown",
    "cross_entropy_masked",
    "joint_loss",
    "mincut_loss",
    "DualParams",
    "ModelConfig",
    "build_adjacency",
    "cluster_assign",
    "forward_dual",
    "init_params",
    "pearson_rows",
    "Mode",
    "RunRecord",
    "TrainConfig",
    "TrainingDiverged",
    "evaluate",
    "train",
]
