"""Loading and assembly of the Planetoid citation-network distribution.

A dataset named ``<name>`` consists of eight files in one directory:

  ind.<name>.x        pickled scipy sparse matrix, labeled-training features
  ind.<name>.y        pickled numpy one-hot array, labeled-training labels
  ind.<name>.tx / .ty pickled test features / one-hot labels
  ind.<name>.allx / .ally
                      features / labels of all non-test nodes
  ind.<name>.graph    pickled {node: [neighbor, ...]} dict
  ind.<name>.test.index
                      text file, one shuffled test-node index per line

The pickles are Python-2 era, so they load with latin1 encoding. Node order
is allx followed by the test block; the test.index file maps shuffled test
rows back to their graph positions. CiteSeer's test index has gaps (isolated
papers that appear in the graph but have no features); those rows are
zero-filled and carry class 0, and they never appear in any split mask.
"""

from __future__ import annotations

import os
import pickle
from dataclasses import dataclass

import numpy as np
import scipy.sparse


class DatasetError(ValueError):
    """Missing or inconsistent raw dataset files."""


_PICKLE_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")


@dataclass
class RawDataset:
    x: scipy.sparse.spmatrix
    y: np.ndarray
    tx: scipy.sparse.spmatrix
    ty: np.ndarray
    allx: scipy.sparse.spmatrix
    ally: np.ndarray
    graph: dict
    test_index: np.ndarray


@dataclass
class AssembledGraph:
    features: np.ndarray      # (n, d) float64
    labels: np.ndarray        # (n,) int64
    num_classes: int
    edges: np.ndarray         # (m, 2) int64, i < j, sorted, deduplicated
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray


def load_raw(input_dir: str, name: str) -> RawDataset:
    parts = {}
    for part in _PICKLE_PARTS:
        path = os.path.join(input_dir, f"ind.{name}.{part}")
        if not os.path.exists(path):
            raise DatasetError(f"missing raw file: {path}")
        with open(path, "rb") as fh:
            parts[part] = pickle.load(fh, encoding="latin1")
    index_path = os.path.join(input_dir, f"ind.{name}.test.index")
    if not os.path.exists(index_path):
        raise DatasetError(f"missing raw file: {index_path}")
    with open(index_path, encoding="utf-8") as fh:
        test_index = np.array([int(line) for line in fh.read().split()], dtype=np.int64)
    if test_index.size == 0:
        raise DatasetError(f"empty test index file: {index_path}")
    return RawDataset(test_index=test_index, **parts)


def _to_dense(matrix) -> np.ndarray:
    if scipy.sparse.issparse(matrix):
        return np.asarray(matrix.todense(), dtype=np.float64)
    return np.asarray(matrix, dtype=np.float64)


def assemble(raw: RawDataset) -> AssembledGraph:
    allx = _to_dense(raw.allx)
    tx = _to_dense(raw.tx)
    ally = np.asarray(raw.ally)
    ty = np.asarray(raw.ty)
    if allx.shape[1] != tx.shape[1]:
        raise DatasetError(
            f"feature dimension mismatch: allx has {allx.shape[1]}, tx has {tx.shape[1]}"
        )
    if ally.shape[1] != ty.shape[1]:
        raise DatasetError("label dimension mismatch between ally and ty")
    if allx.shape[0] != ally.shape[0] or tx.shape[0] != ty.shape[0]:
        raise DatasetError("feature/label row count mismatch")

    test_idx = raw.test_index
    lo, hi = int(test_idx.min()), int(test_idx.max())
    if lo != allx.shape[0]:
        raise DatasetError(
            f"test index starts at {lo}, expected {allx.shape[0]} (rows of allx)"
        )
    span = hi - lo + 1
    if np.unique(test_idx).size != test_idx.size:
        raise DatasetError("duplicate entries in test index")

    # zero-fill gaps in the test range (isolated nodes, e.g. CiteSeer);
    # the k-th row of tx belongs to graph position test_idx[k]
    tx_full = np.zeros((span, tx.shape[1]))
    ty_full = np.zeros((span, ty.shape[1]))
    tx_full[test_idx - lo] = tx
    ty_full[test_idx - lo] = ty

    features = np.vstack([allx, tx_full])
    onehot = np.vstack([ally, ty_full])
    n = features.shape[0]
    labels = onehot.argmax(axis=1).astype(np.int64)
    num_classes = onehot.shape[1]

    edge_set = set()
    for node, neighbors in raw.graph.items():
        for neighbor in neighbors:
            i, j = int(node), int(neighbor)
            if i == j:
                continue
            if not (0 <= i < n and 0 <= j < n):
                raise DatasetError(f"graph edge ({i}, {j}) outside node range 0..{n - 1}")
            edge_set.add((i, j) if i < j else (j, i))
    edges = np.array(sorted(edge_set), dtype=np.int64).reshape(-1, 2)

    n_train = raw.y.shape[0] if hasattr(raw.y, "shape") else len(raw.y)
    train_idx = np.arange(n_train, dtype=np.int64)
    val_idx = np.arange(n_train, n_train + 500, dtype=np.int64)
    if val_idx[-1] >= n:
        raise DatasetError("validation range exceeds node count")

    # the public split fixes 20 labeled nodes per class
    train_counts = np.bincount(labels[train_idx], minlength=num_classes)
    if not (train_counts == 20).all():
        raise DatasetError(
            f"train split is not 20 nodes per class: counts {train_counts.tolist()}"
        )
    if np.intersect1d(test_idx, train_idx).size or np.intersect1d(test_idx, val_idx).size:
        raise DatasetError("test index overlaps the train/validation ranges")

    return AssembledGraph(
        features=features, labels=labels, num_classes=num_classes, edges=edges,
        train_idx=train_idx, val_idx=val_idx, test_idx=np.sort(test_idx),
    )
