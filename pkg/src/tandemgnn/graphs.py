"""Graph data model, on-disk text format, normalization, corruption, and
synthetic graph generation.

On-disk format (UTF-8, LF line endings), one graph per file::

    graph <n> <d> <num_classes>
    features
    <n lines: d space-separated floats, one row per node>
    labels
    <n space-separated integers in [0, num_classes)>
    train
    <space-separated node indices (single line, may be empty)>
    val
    <space-separated node indices>
    test
    <space-separated node indices>
    edges
    <one "i j" pair per line with i < j, lexicographically sorted>

The adjacency is binary, symmetric, with no self-loops; each undirected edge
is listed once. Loader errors report the offending 1-based line number.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import SparseMatrix


class GraphFormatError(ValueError):
    """Malformed graph file; message names the offending line."""


@dataclass(frozen=True)
class Graph:
    """One learning instance: features, binary adjacency, labels, masks.

    Instances are immutable after construction (arrays are marked read-only)
    and safe to share across parallel runs.
    """

    n: int
    features: np.ndarray        # (n, d) float64
    adjacency: SparseMatrix     # binary, symmetric, zero diagonal
    labels: np.ndarray          # (n,) int64 in [0, num_classes)
    num_classes: int
    train_mask: np.ndarray      # (n,) bool, pairwise disjoint with val/test
    val_mask: np.ndarray
    test_mask: np.ndarray

    def __post_init__(self):
        for name in ("features", "labels", "train_mask", "val_mask", "test_mask"):
            arr = getattr(self, name)
            if arr.flags.writeable:
                arr = arr.copy()
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def num_edges(self) -> int:
        """Undirected edge count."""
        return self.adjacency.nnz // 2

    def edge_list(self) -> np.ndarray:
        """(m, 2) array of undirected edges with i < j, lexicographically sorted."""
        rows, cols, _ = self.adjacency.canonical()
        keep = rows < cols
        return np.column_stack([rows[keep], cols[keep]])


def validate_graph(g: Graph) -> None:
    """Raise ValueError if any Graph invariant is broken."""
    if g.features.shape[0] != g.n or g.labels.shape[0] != g.n:
        raise ValueError("feature/label row count does not match n")
    for name, mask in (("train", g.train_mask), ("val", g.val_mask), ("test", g.test_mask)):
        if mask.shape != (g.n,) or mask.dtype != np.bool_:
            raise ValueError(f"{name} mask must be a length-n boolean vector")
    overlap = (
        (g.train_mask & g.val_mask) | (g.train_mask & g.test_mask) | (g.val_mask & g.test_mask)
    )
    if overlap.any():
        raise ValueError(f"masks overlap at node {int(np.flatnonzero(overlap)[0])}")
    a = g.adjacency
    if a.n != g.n:
        raise ValueError("adjacency size does not match n")
    a.validate()
    if a.nnz:
        if (a.rows == a.cols).any():
            raise ValueError("adjacency has self-loops")
        if not np.all((a.weights == 0) | (a.weights == 1)):
            raise ValueError("adjacency entries must be 0/1")
    train_labels = g.labels[g.train_mask]
    if train_labels.size and ((train_labels < 0).any() or (train_labels >= g.num_classes).any()):
        raise ValueError("train-mask node has an out-of-range label")


def make_graph(features, edges, labels, num_classes, train_idx, val_idx, test_idx) -> Graph:
    """Assemble a Graph from an (m, 2) undirected edge array and mask index lists."""
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adjacency = SparseMatrix(n, rows, cols, np.ones(rows.size))
    masks = []
    for idx in (train_idx, val_idx, test_idx):
        m = np.zeros(n, dtype=bool)
        m[np.asarray(idx, dtype=np.int64)] = True
        masks.append(m)
    g = Graph(
        n=n,
        features=features,
        adjacency=adjacency,
        labels=np.asarray(labels, dtype=np.int64),
        num_classes=int(num_classes),
        train_mask=masks[0],
        val_mask=masks[1],
        test_mask=masks[2],
    )
    validate_graph(g)
    return g


def _fmt_float(x: float) -> str:
    return repr(float(x))


def save_graph(g: Graph, path) -> None:
    """Write the on-disk text format; output is byte-identical per graph."""
    lines = [f"graph {g.n} {g.num_features} {g.num_classes}", "features"]
    for row in g.features:
        lines.append(" ".join(_fmt_float(v) for v in row))
    lines.append("labels")
    lines.append(" ".join(str(int(v)) for v in g.labels))
    for name, mask in (("train", g.train_mask), ("val", g.val_mask), ("test", g.test_mask)):
        lines.append(name)
        lines.append(" ".join(str(i) for i in np.flatnonzero(mask)))
    lines.append("edges")
    for i, j in g.edge_list():
        lines.append(f"{i} {j}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_graph(path) -> Graph:
    """Parse the on-disk text format, validating every Graph invariant."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    def fail(lineno, msg):
        raise GraphFormatError(f"{path}:{lineno}: {msg}")

    def expect_keyword(lineno, word):
        if lineno > len(lines):
            fail(lineno, f"unexpected end of file, expected '{word}'")
        if lines[lineno - 1].strip() != word:
            fail(lineno, f"expected '{word}', got {lines[lineno - 1]!r}")

    if not lines:
        fail(1, "empty file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "graph":
        fail(1, "header must be 'graph <n> <d> <num_classes>'")
    try:
        n, d, c = int(head[1]), int(head[2]), int(head[3])
    except ValueError:
        fail(1, "header fields must be integers")
    if n < 1 or d < 1 or c < 1:
        fail(1, "header fields must be positive")

    expect_keyword(2, "features")
    features = np.empty((n, d))
    for i in range(n):
        lineno = 3 + i
        if lineno > len(lines):
            fail(lineno, "missing feature row")
        parts = lines[lineno - 1].split()
        if len(parts) != d:
            fail(lineno, f"expected {d} feature values, got {len(parts)}")
        try:
            features[i] = [float(p) for p in parts]
        except ValueError:
            fail(lineno, "non-numeric feature value")

    pos = 3 + n
    expect_keyword(pos, "labels")
    pos += 1
    parts = lines[pos - 1].split() if pos <= len(lines) else None
    if parts is None or len(parts) != n:
        fail(pos, f"expected {n} labels")
    try:
        labels = np.array([int(p) for p in parts], dtype=np.int64)
    except ValueError:
        fail(pos, "non-integer label")
    if (labels < 0).any() or (labels >= c).any():
        fail(pos, f"label out of range [0, {c})")
    pos += 1

    mask_idx = {}
    for name in ("train", "val", "test"):
        expect_keyword(pos, name)
        pos += 1
        if pos > len(lines):
            fail(pos, f"missing {name} index line")
        try:
            idx = np.array([int(p) for p in lines[pos - 1].split()], dtype=np.int64)
        except ValueError:
            fail(pos, f"non-integer {name} index")
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            fail(pos, f"{name} index out of range")
        if np.unique(idx).size != idx.size:
            fail(pos, f"duplicate {name} index")
        mask_idx[name] = idx
        pos += 1

    expect_keyword(pos, "edges")
    pos += 1
    edges = []
    for lineno in range(pos, len(lines) + 1):
        line = lines[lineno - 1].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            fail(lineno, "edge line must be 'i j'")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            fail(lineno, "non-integer edge endpoint")
        if not (0 <= i < n and 0 <= j < n):
            fail(lineno, "edge endpoint out of range")
        if i >= j:
            fail(lineno, "edges must satisfy i < j (no self-loops, one line per edge)")
        edges.append((i, j))

    try:
        return make_graph(
            features, np.array(edges, dtype=np.int64).reshape(-1, 2), labels, c,
            mask_idx["train"], mask_idx["val"], mask_idx["test"],
        )
    except ValueError as e:
        raise GraphFormatError(f"{path}: {e}") from e


def degree_vector(a: SparseMatrix) -> np.ndarray:
    """D_ii = sum_j A_ij as a dense vector."""
    return a.degrees()


def normalize_sym(a: SparseMatrix) -> SparseMatrix:
    """Symmetric normalization D^{-1/2} A D^{-1/2}.

    Rows/columns of isolated nodes (zero degree) stay zero.
    """
    if a.nnz and (a.weights < 0).any():
        raise ValueError("normalize_sym requires nonnegative weights")
    d = a.degrees()
    inv_sqrt = np.zeros_like(d)
    nz = d > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(d[nz])
    w = a.weights * inv_sqrt[a.rows] * inv_sqrt[a.cols]
    return SparseMatrix(a.n, a.rows, a.cols, w)


def renormalize(a: SparseMatrix) -> SparseMatrix:
    """Self-loop renormalization: D^{-1/2} (A + I) D^{-1/2} with unit loops,
    D the degree of A + I."""
    if a.nnz and (a.weights < 0).any():
        raise ValueError("renormalize requires nonnegative weights")
    loops = np.arange(a.n)
    rows = np.concatenate([a.rows, loops])
    cols = np.concatenate([a.cols, loops])
    weights = np.concatenate([a.weights, np.ones(a.n)])
    d = np.zeros(a.n)
    np.add.at(d, rows, weights)
    inv_sqrt = 1.0 / np.sqrt(d)  # d >= 1 thanks to the self-loops
    return SparseMatrix(a.n, rows, cols, weights * inv_sqrt[rows] * inv_sqrt[cols])


def drop_edges(g: Graph, rate: float, seed: int) -> Graph:
    """Remove exactly round(rate * |E|) undirected edges uniformly at random.

    Both directed entries of a dropped edge go together, so the result stays
    symmetric. Features, labels, and masks are unchanged.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"drop rate must be in [0, 1], got {rate}")
    edges = g.edge_list()
    m = edges.shape[0]
    n_drop = int(np.floor(rate * m + 0.5))
    rng = np.random.default_rng(seed)
    dropped = rng.choice(m, size=n_drop, replace=False)
    keep = np.ones(m, dtype=bool)
    keep[dropped] = False
    kept = edges[keep]
    rows = np.concatenate([kept[:, 0], kept[:, 1]])
    cols = np.concatenate([kept[:, 1], kept[:, 0]])
    adjacency = SparseMatrix(g.n, rows, cols, np.ones(rows.size))
    return Graph(
        n=g.n, features=g.features, adjacency=adjacency, labels=g.labels,
        num_classes=g.num_classes, train_mask=g.train_mask, val_mask=g.val_mask,
        test_mask=g.test_mask,
    )


def subsample_labels(g: Graph, per_class: int, seed: int) -> Graph:
    """Shrink the train mask to exactly ``per_class`` nodes per class, sampled
    uniformly from the current train mask. Val/test masks are unchanged."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    rng = np.random.default_rng(seed)
    new_train = np.zeros(g.n, dtype=bool)
    train_idx = np.flatnonzero(g.train_mask)
    for c in range(g.num_classes):
        candidates = train_idx[g.labels[train_idx] == c]
        if candidates.size < per_class:
            raise ValueError(
                f"class {c} has only {candidates.size} train nodes, need {per_class}"
            )
        chosen = rng.choice(candidates, size=per_class, replace=False)
        new_train[chosen] = True
    return Graph(
        n=g.n, features=g.features, adjacency=g.adjacency, labels=g.labels,
        num_classes=g.num_classes, train_mask=new_train, val_mask=g.val_mask,
        test_mask=g.test_mask,
    )


def generate_sbm(
    blocks: int,
    nodes_per_block: int,
    p_intra: float,
    q_inter: float,
    feature_dim: int,
    feature_noise: float,
    seed: int,
    train_per_class: int = 20,
    val_size: int = 80,
    test_size: int = 200,
) -> Graph:
    """Stochastic block model graph with Gaussian class features.

    Labels are block ids. Each class's feature mean is a random unit-norm
    direction; features add iid noise of scale ``feature_noise``. Masks are
    sampled disjointly: ``train_per_class`` per class, then ``val_size`` and
    ``test_size`` nodes from the remainder.
    """
    if not 0.0 <= q_inter <= p_intra <= 1.0:
        raise ValueError("need 0 <= q_inter <= p_intra <= 1")
    if blocks < 1 or nodes_per_block < 1 or feature_dim < 1:
        raise ValueError("blocks, nodes_per_block, feature_dim must be positive")
    n = blocks * nodes_per_block
    labels = np.repeat(np.arange(blocks), nodes_per_block)
    rng = np.random.default_rng(seed)

    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_intra, q_inter)
    present = rng.random(iu.size) < prob
    edges = np.column_stack([iu[present], ju[present]])

    means = rng.standard_normal((blocks, feature_dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    features = means[labels] + feature_noise * rng.standard_normal((n, feature_dim))

    train_idx = []
    for c in range(blocks):
        members = np.flatnonzero(labels == c)
        if members.size < train_per_class:
            raise ValueError(f"block {c} smaller than train_per_class")
        train_idx.append(rng.choice(members, size=train_per_class, replace=False))
    train_idx = np.sort(np.concatenate(train_idx))
    remaining = np.setdiff1d(np.arange(n), train_idx)
    if remaining.size < val_size + test_size:
        raise ValueError("val_size + test_size exceeds remaining nodes")
    picked = rng.choice(remaining, size=val_size + test_size, replace=False)
    val_idx = np.sort(picked[:val_size])
    test_idx = np.sort(picked[val_size:])

    return make_graph(features, edges, labels, blocks, train_idx, val_idx, test_idx)


def sbm_fixture(seed: int) -> Graph:
    """The default synthetic benchmark: 4 blocks x 100 nodes, sparse
    community structure at roughly citation-network density."""
    return generate_sbm(
        blocks=4, nodes_per_block=100, p_intra=0.05, q_inter=0.005,
        feature_dim=16, feature_noise=1.0, seed=seed,
        train_per_class=20, val_size=80, test_size=200,
    )
