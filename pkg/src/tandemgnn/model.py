"""Two-module node classification architecture.

A primary two-layer GCN encodes the input graph and feeds three heads: a
linear classifier, a soft cluster-assignment head, and (through the cluster
assignments) a reconstructed adjacency matrix of pairwise Pearson
correlations thresholded at ``alpha``. An auxiliary two-layer GCN then
propagates the primary embeddings over the reconstructed graph and classifies
them again.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import SparseMatrix, Tensor
from .graphs import Graph, renormalize


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    ``num_clusters`` must be at least the number of classes; ``alpha`` is the
    correlation threshold in (0, 1) controlling reconstructed-graph sparsity.
    ``detach_reconstruction`` treats the reconstructed adjacency as a
    per-iteration constant (default); turning it off differentiates the kept
    correlation weights.
    """

    num_clusters: int
    alpha: float = 0.7
    hidden_dim: int = 16
    embed_dim: int = 16
    aux_hidden_dim: int = 16
    aux_embed_dim: int = 16
    detach_reconstruction: bool = True
    elu_after_final_layer: bool = True

    def validate(self, num_classes: int) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.num_clusters < num_classes:
            raise ValueError(
                f"num_clusters ({self.num_clusters}) must be >= num_classes ({num_classes})"
            )
        for name in ("hidden_dim", "embed_dim", "aux_hidden_dim", "aux_embed_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass
class DualParams:
    """All learnable parameter groups.

    enc1/enc2 weight the primary encoder layers, cls_* the primary
    classifier, clus_* the cluster head, aux_enc* and aux_cls_* the auxiliary
    module. Biases are row vectors.
    """

    enc1: Tensor
    enc2: Tensor
    cls_w: Tensor
    cls_b: Tensor
    clus_w: Tensor
    clus_b: Tensor
    aux_enc1: Tensor
    aux_enc2: Tensor
    aux_cls_w: Tensor
    aux_cls_b: Tensor

    def primary_encoder(self):
        return [self.enc1, self.enc2]

    def primary_classifier(self):
        return [self.cls_w, self.cls_b]

    def cluster_head(self):
        return [self.clus_w, self.clus_b]

    def aux_encoder(self):
        return [self.aux_enc1, self.aux_enc2]

    def aux_classifier(self):
        return [self.aux_cls_w, self.aux_cls_b]

    def all(self):
        return (
            self.primary_encoder() + self.primary_classifier() + self.cluster_head()
            + self.aux_encoder() + self.aux_classifier()
        )


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(
    num_features: int, num_classes: int, config: ModelConfig, rng: np.random.Generator
) -> DualParams:
    """Glorot-uniform weights, zero biases. Draw order is fixed so a seeded
    generator reproduces parameters bit-identically."""
    config.validate(num_classes)
    h, d = config.hidden_dim, config.embed_dim
    ah, ad_ = config.aux_hidden_dim, config.aux_embed_dim
    k = config.num_clusters
    return DualParams(
        enc1=Tensor(glorot(rng, num_features, h), label="enc1"),
        enc2=Tensor(glorot(rng, h, d), label="enc2"),
        cls_w=Tensor(glorot(rng, d, num_classes), label="cls_w"),
        cls_b=Tensor(np.zeros((1, num_classes)), label="cls_b"),
        clus_w=Tensor(glorot(rng, d, k), label="clus_w"),
        clus_b=Tensor(np.zeros((1, k)), label="clus_b"),
        aux_enc1=Tensor(glorot(rng, d, ah), label="aux_enc1"),
        aux_enc2=Tensor(glorot(rng, ah, ad_), label="aux_enc2"),
        aux_cls_w=Tensor(glorot(rng, ad_, num_classes), label="aux_cls_w"),
        aux_cls_b=Tensor(np.zeros((1, num_classes)), label="aux_cls_b"),
    )


def _two_layer_gcn(x: Tensor, propagate, w1: Tensor, w2: Tensor, final_elu: bool) -> Tensor:
    out = ad.elu(propagate(ad.matmul(x, w1)))
    out = propagate(ad.matmul(out, w2))
    return ad.elu(out) if final_elu else out


def encode_primary(x: Tensor, a_hat: SparseMatrix, params: DualParams, config: ModelConfig) -> Tensor:
    """Two message-passing layers over the renormalized input adjacency."""
    return _two_layer_gcn(
        x, lambda t: ad.spmm(a_hat, t), params.enc1, params.enc2,
        config.elu_after_final_layer,
    )


def classify(h: Tensor, w: Tensor, b: Tensor):
    """Single fully connected layer with row softmax.

    Returns (probabilities, logits); losses consume the logits through a
    fused log-softmax, evaluation consumes the probabilities.
    """
    logits = ad.add(ad.matmul(h, w), b)
    return ad.softmax_rows(logits), logits


def cluster_assign(h: Tensor, params: DualParams) -> Tensor:
    """One-layer perceptron soft cluster assignment; rows sum to 1."""
    return ad.softmax_rows(ad.add(ad.matmul(h, params.clus_w), params.clus_b))


ZERO_VARIANCE_TOL = 1e-12


def pearson_rows(u, v, zero_variance_tol: float = ZERO_VARIANCE_TOL) -> float:
    """Pearson correlation of two vectors; 0 by convention when either
    vector's centered norm is below ``zero_variance_tol``."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    if u.size < 2:
        raise ValueError("vectors must have at least 2 entries")
    du = u - u.mean()
    dv = v - v.mean()
    nu = np.sqrt(np.dot(du, du))
    nv = np.sqrt(np.dot(dv, dv))
    if nu <= zero_variance_tol or nv <= zero_variance_tol:
        return 0.0
    return float(np.clip(np.dot(du, dv) / (nu * nv), -1.0, 1.0))


def correlation_edges(s_values: np.ndarray, alpha: float, block_size: int = 512):
    """Upper-triangle pairs (i < j) whose row correlation is >= alpha.

    Row means and norms are precomputed once; correlations are evaluated in
    row blocks so memory stays O(n * block_size) instead of O(n^2). Returns
    (rows, cols, weights) with weights capped at 1.0 to absorb rounding.
    """
    s = np.asarray(s_values, dtype=np.float64)
    n = s.shape[0]
    u = s - s.mean(axis=1, keepdims=True)
    nrm = np.sqrt(np.einsum("ij,ij->i", u, u))
    ok = nrm > ZERO_VARIANCE_TOL
    safe = np.where(ok, nrm, 1.0)
    rows_out, cols_out, w_out = [], [], []
    cols_idx = np.arange(n)
    for start in range(0, n, block_size):
        stop = min(start + block_size, n)
        r = (u[start:stop] @ u.T) / np.outer(safe[start:stop], safe)
        valid = ok[start:stop, None] & ok[None, :]
        upper = cols_idx[None, :] > np.arange(start, stop)[:, None]
        keep = valid & upper & (r >= alpha)
        bi, bj = np.nonzero(keep)
        rows_out.append(bi + start)
        cols_out.append(cols_idx[bj])
        w_out.append(np.minimum(r[bi, bj], 1.0))
    return (
        np.concatenate(rows_out) if rows_out else np.empty(0, dtype=np.int64),
        np.concatenate(cols_out) if cols_out else np.empty(0, dtype=np.int64),
        np.concatenate(w_out) if w_out else np.empty(0),
    )


def build_adjacency(s, alpha: float, block_size: int = 512) -> SparseMatrix:
    """Reconstructed adjacency: off-diagonal entry r(S_i, S_j) where the
    correlation reaches ``alpha`` (inclusive), diagonal fixed at 1.

    The result is a constant with respect to differentiation.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    s_values = s.data if isinstance(s, Tensor) else np.asarray(s, dtype=np.float64)
    n = s_values.shape[0]
    rows, cols, w = correlation_edges(s_values, alpha, block_size)
    diag = np.arange(n)
    return SparseMatrix(
        n,
        np.concatenate([rows, cols, diag]),
        np.concatenate([cols, rows, diag]),
        np.concatenate([w, w, np.ones(n)]),
    )


def encode_auxiliary(
    h: Tensor, a_sc: SparseMatrix, params: DualParams, config: ModelConfig
) -> Tensor:
    """Two GCN layers over the renormalized reconstructed adjacency,
    keeping its correlation weights."""
    a_hat = renormalize(a_sc)
    return _two_layer_gcn(
        h, lambda t: ad.spmm(a_hat, t), params.aux_enc1, params.aux_enc2,
        config.elu_after_final_layer,
    )


def classify_aux(h_aux: Tensor, params: DualParams):
    return classify(h_aux, params.aux_cls_w, params.aux_cls_b)


def _aux_encode_through_weights(
    h: Tensor, s: Tensor, params: DualParams, config: ModelConfig
):
    """Auxiliary encoding with gradients flowing through the kept correlation
    weights (edge selection itself stays non-differentiable).

    Rebuilds the renormalization in tensor ops: degrees include the constant
    diagonal weight 1 plus the added self-loop, matching
    ``renormalize(build_adjacency(...))`` on the same values.
    """
    n = h.shape[0]
    rows, cols, vals = correlation_edges(s.data, config.alpha)
    dir_rows = np.concatenate([rows, cols])
    dir_cols = np.concatenate([cols, rows])
    w = ad.pearson_pairs(s, dir_rows, dir_cols, values=np.concatenate([vals, vals]))
    deg = ad.add(ad.scatter_sum(w, dir_rows, n), 2.0)
    dinv = ad.power(deg, -0.5)
    coef = ad.mul(ad.mul(w, ad.gather_rows(dinv, dir_rows)), ad.gather_rows(dinv, dir_cols))
    self_coef = ad.mul(ad.power(deg, -1.0), 2.0)

    def propagate(t):
        return ad.add(
            ad.weighted_spmm(dir_rows, dir_cols, coef, t, n), ad.mul(t, self_coef)
        )

    h_aux = _two_layer_gcn(
        h, propagate, params.aux_enc1, params.aux_enc2, config.elu_after_final_layer
    )
    diag = np.arange(n)
    snapshot = SparseMatrix(
        n,
        np.concatenate([dir_rows, diag]),
        np.concatenate([dir_cols, diag]),
        np.concatenate([w.data[:, 0], np.ones(n)]),
    )
    return h_aux, snapshot


@dataclass
class DualForward:
    """Everything one forward pass produces, in computation order."""

    h: Tensor
    p: Tensor
    p_logits: Tensor
    s: Tensor
    a_sc: SparseMatrix
    h_aux: Tensor
    p_aux: Tensor
    p_aux_logits: Tensor


def forward_dual(
    x: Tensor, a_hat: SparseMatrix, params: DualParams, config: ModelConfig
) -> DualForward:
    """Full pass: encode, classify, cluster, reconstruct, encode and classify
    again on the reconstructed graph."""
    h = encode_primary(x, a_hat, params, config)
    p, p_logits = classify(h, params.cls_w, params.cls_b)
    s = cluster_assign(h, params)
    if config.detach_reconstruction:
        a_sc = build_adjacency(s.data, config.alpha)
        h_aux = encode_auxiliary(h, a_sc, params, config)
    else:
        h_aux, a_sc = _aux_encode_through_weights(h, s, params, config)
    p_aux, p_aux_logits = classify_aux(h_aux, params)
    return DualForward(
        h=h, p=p, p_logits=p_logits, s=s, a_sc=a_sc,
        h_aux=h_aux, p_aux=p_aux, p_aux_logits=p_aux_logits,
    )


def forward_inputs(g: Graph):
    """Constant tensors/matrices a training run derives from a graph once:
    feature tensor and renormalized adjacency."""
    return Tensor(np.asarray(g.features)), renormalize(g.adjacency)
