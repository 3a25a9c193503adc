"""Minimal reverse-mode automatic differentiation over dense 2-D float64 arrays.

The computation graph is built define-by-run: every operation returns a new
:class:`Tensor` holding its value, its parent tensors, and a closure that
routes upstream gradients to the parents. ``backward(loss)`` walks the graph
in reverse topological order and accumulates gradients into ``Tensor.grad``.

Sparse adjacency matrices (:class:`SparseMatrix`) participate in forward
computation as constants; gradients flow only through dense operands.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse


class Tensor:
    """Dense 2-D float64 array node in the computation graph.

    Leaves are created directly (``Tensor(data)``); interior nodes are created
    by the operations in this module. ``grad`` stays ``None`` until a backward
    pass touches the tensor, and accumulates across repeated backward calls
    until ``zero_grad`` resets it.
    """

    __slots__ = ("data", "grad", "label", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None, label=None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        if arr.ndim != 2:
            raise ValueError(f"Tensor must be 2-D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise FloatingPointError(
                f"non-finite values in tensor{' ' + label if label else ''}"
            )
        self.data = arr
        self.grad = None
        self.label = label
        self._parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        tag = f" label={self.label!r}" if self.label else ""
        return f"Tensor(shape={self.shape}{tag})"

    # ergonomic operators; all defer to the module-level ops
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


class SparseMatrix:
    """Square sparse matrix in coordinate form, symmetric by construction rules.

    Entry storage order is whatever the constructor received; the
    lexicographically sorted view used for equality and serialization is
    computed lazily (construction sits on the per-iteration hot path).
    Instances are constants with respect to differentiation: ops never
    produce gradients for them.
    """

    __slots__ = ("n", "rows", "cols", "weights", "_csr", "_canonical")

    def __init__(self, n, rows, cols, weights):
        self.n = int(n)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        if not (rows.shape == cols.shape == weights.shape) or rows.ndim != 1:
            raise ValueError("rows, cols, weights must be 1-D arrays of equal length")
        self.rows = rows
        self.cols = cols
        self.weights = weights
        self._csr = None
        self._canonical = None

    @classmethod
    def from_entries(cls, n, entries):
        """Build from an iterable of (row, col, weight) triples and validate."""
        entries = list(entries)
        if entries:
            rows, cols, weights = (np.array(x) for x in zip(*entries))
        else:
            rows = cols = weights = np.empty(0)
        m = cls(n, rows, cols, weights)
        m.validate()
        return m

    @property
    def nnz(self) -> int:
        return self.rows.size

    def canonical(self):
        """(rows, cols, weights) in lexicographic (row, col) order; cached."""
        if self._canonical is None:
            order = np.lexsort((self.cols, self.rows))
            self._canonical = (self.rows[order], self.cols[order], self.weights[order])
        return self._canonical

    def validate(self, nonnegative=True):
        """Check the invariants: in-range indices, no duplicates, symmetry, finite weights."""
        if self.nnz == 0:
            return
        if self.rows.min() < 0 or self.rows.max() >= self.n:
            raise ValueError("row index out of range")
        if self.cols.min() < 0 or self.cols.max() >= self.n:
            raise ValueError("col index out of range")
        if not np.isfinite(self.weights).all():
            raise ValueError("non-finite weight")
        if nonnegative and (self.weights < 0).any():
            raise ValueError("negative weight")
        rows, cols, weights = self.canonical()
        keys = rows * self.n + cols
        if np.unique(keys).size != keys.size:
            raise ValueError("duplicate (row, col) entry")
        # symmetry: the transposed entry set must be identical
        t_order = np.lexsort((rows, cols))
        if not (
            np.array_equal(cols[t_order], rows)
            and np.array_equal(rows[t_order], cols)
            and np.array_equal(weights[t_order], weights)
        ):
            raise ValueError("matrix is not symmetric")

    def to_csr(self) -> scipy.sparse.csr_matrix:
        # COO->CSR would silently sum duplicate entries; the no-duplicates
        # invariant makes the conversion faithful.
        if self._csr is None:
            self._csr = scipy.sparse.csr_matrix(
                (self.weights, (self.rows, self.cols)), shape=(self.n, self.n)
            )
        return self._csr

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.rows, self.cols] = self.weights
        return out

    def degrees(self) -> np.ndarray:
        """Row sums as a dense vector."""
        d = np.zeros(self.n)
        np.add.at(d, self.rows, self.weights)
        return d

    @classmethod
    def diagonal(cls, values):
        values = np.asarray(values, dtype=np.float64)
        idx = np.arange(values.size)
        return cls(values.size, idx, idx, values)

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        if self.n != other.n or self.nnz != other.nnz:
            return False
        a, b = self.canonical(), other.canonical()
        return all(np.array_equal(x, y) for x, y in zip(a, b))

    def __hash__(self):
        return id(self)

    def __repr__(self):
        return f"SparseMatrix(n={self.n}, nnz={self.nnz})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def bw(g, acc):
        acc(a, g @ b.data.T)
        acc(b, a.data.T @ g)

    return Tensor(a.data @ b.data, (a, b), bw)


def transpose(a: Tensor) -> Tensor:
    def bw(g, acc):
        acc(a, g.T)

    return Tensor(a.data.T, (a,), bw)


def add(a: Tensor, b) -> Tensor:
    """Elementwise sum; ``b`` may be a same-shape tensor, a (1, n) row to
    broadcast over rows (bias), or a scalar."""
    a = _as_tensor(a)
    if isinstance(b, (int, float)):
        def bw(g, acc):
            acc(a, g)

        return Tensor(a.data + b, (a,), bw)
    b = _as_tensor(b)
    if a.shape == b.shape:
        def bw(g, acc):
            acc(a, g)
            acc(b, g)

        return Tensor(a.data + b.data, (a, b), bw)
    if b.shape == (1, a.shape[1]):
        def bw(g, acc):
            acc(a, g)
            acc(b, g.sum(axis=0, keepdims=True))

        return Tensor(a.data + b.data, (a, b), bw)
    raise ValueError(f"add shape mismatch: {a.shape} + {b.shape}")


def sub(a: Tensor, b) -> Tensor:
    a = _as_tensor(a)
    if isinstance(b, (int, float)):
        return add(a, -b)
    b = _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"sub shape mismatch: {a.shape} - {b.shape}")

    def bw(g, acc):
        acc(a, g)
        acc(b, -g)

    return Tensor(a.data - b.data, (a, b), bw)


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product; ``b`` may be a scalar, a same-shape tensor, or an
    (m, 1) column to broadcast across columns."""
    a = _as_tensor(a)
    if isinstance(b, (int, float)):
        def bw(g, acc):
            acc(a, g * b)

        return Tensor(a.data * b, (a,), bw)
    b = _as_tensor(b)
    if a.shape == b.shape:
        def bw(g, acc):
            acc(a, g * b.data)
            acc(b, g * a.data)

        return Tensor(a.data * b.data, (a, b), bw)
    if b.shape == (a.shape[0], 1):
        def bw(g, acc):
            acc(a, g * b.data)
            acc(b, (g * a.data).sum(axis=1, keepdims=True))

        return Tensor(a.data * b.data, (a, b), bw)
    raise ValueError(f"mul shape mismatch: {a.shape} * {b.shape}")


def div(a: Tensor, b) -> Tensor:
    """Divide by a scalar: ``b`` is a python number or a (1, 1) tensor."""
    a = _as_tensor(a)
    if isinstance(b, (int, float)):
        return mul(a, 1.0 / b)
    b = _as_tensor(b)
    if b.shape != (1, 1):
        raise ValueError(f"div expects scalar divisor, got shape {b.shape}")
    s = b.data[0, 0]

    def bw(g, acc):
        acc(a, g / s)
        acc(b, np.array([[-(g * a.data).sum() / (s * s)]]))

    return Tensor(a.data / s, (a, b), bw)


def power(a: Tensor, exponent: float) -> Tensor:
    """Elementwise power for strictly positive tensors."""
    a = _as_tensor(a)
    if (a.data <= 0).any():
        raise ValueError("power requires strictly positive entries")
    out = a.data ** exponent

    def bw(g, acc):
        acc(a, g * exponent * a.data ** (exponent - 1.0))

    return Tensor(out, (a,), bw)


def total_sum(a: Tensor) -> Tensor:
    a = _as_tensor(a)

    def bw(g, acc):
        acc(a, np.full_like(a.data, g[0, 0]))

    return Tensor([[a.data.sum()]], (a,), bw)


def elu(a: Tensor) -> Tensor:
    """Exponential linear unit: x for x > 0, exp(x) - 1 otherwise.

    The derivative at exactly 0 is taken as 1 (continuous extension of the
    positive branch).
    """
    a = _as_tensor(a)
    out = np.where(a.data > 0, a.data, np.expm1(a.data))

    def bw(g, acc):
        acc(a, g * np.where(a.data >= 0, 1.0, np.exp(a.data)))

    return Tensor(out, (a,), bw)


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax, stabilized by subtracting each row's maximum."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def bw(g, acc):
        acc(a, out * (g - (g * out).sum(axis=1, keepdims=True)))

    return Tensor(out, (a,), bw)


def spmm(s: SparseMatrix, t: Tensor) -> Tensor:
    """Sparse @ dense product. The sparse operand is a constant: gradient
    flows to ``t`` only."""
    t = _as_tensor(t)
    if s.n != t.shape[0]:
        raise ValueError(f"spmm shape mismatch: {s.n}x{s.n} @ {t.shape}")
    csr = s.to_csr()
    out = csr @ t.data

    def bw(g, acc):
        # s is symmetric, so s.T @ g == s @ g
        acc(t, csr @ g)

    return Tensor(np.asarray(out), (t,), bw)


def trace_quadratic(s: Tensor, m: SparseMatrix) -> Tensor:
    """Scalar trace(S^T M S) for a symmetric sparse M; differentiable in S."""
    s = _as_tensor(s)
    if m.n != s.shape[0]:
        raise ValueError(f"trace_quadratic shape mismatch: {m.n}x{m.n} vs {s.shape}")
    ms = np.asarray(m.to_csr() @ s.data)
    val = np.vdot(s.data, ms)

    def bw(g, acc):
        # d/dS tr(S^T M S) = (M + M^T) S = 2 M S for symmetric M
        acc(s, g[0, 0] * 2.0 * ms)

    return Tensor([[val]], (s,), bw)


def frobenius_norm(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    n = float(np.sqrt((a.data * a.data).sum()))

    def bw(g, acc):
        if n > 0:
            acc(a, g[0, 0] * a.data / n)
        else:
            acc(a, np.zeros_like(a.data))

    return Tensor([[n]], (a,), bw)


def masked_cross_entropy(logits: Tensor, labels, mask) -> Tensor:
    """Sum over masked rows of -log softmax(logits)[i, labels[i]].

    Fused log-softmax keeps the value finite at extreme logits. ``labels`` is
    an integer vector, ``mask`` a boolean vector; both length N.
    """
    logits = _as_tensor(logits)
    labels = np.asarray(labels)
    mask = np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("empty mask in cross entropy")
    y = labels[idx]
    n_classes = logits.shape[1]
    if (y < 0).any() or (y >= n_classes).any():
        raise ValueError(f"label out of range [0, {n_classes})")
    z = logits.data[idx]
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    lse = m[:, 0] + np.log(e.sum(axis=1))
    val = (lse - z[np.arange(idx.size), y]).sum()

    def bw(g, acc):
        probs = e / e.sum(axis=1, keepdims=True)
        probs[np.arange(idx.size), y] -= 1.0
        full = np.zeros_like(logits.data)
        full[idx] = g[0, 0] * probs
        acc(logits, full)

    return Tensor([[val]], (logits,), bw)


def gather_rows(t: Tensor, idx) -> Tensor:
    """Select rows by integer index (rows may repeat)."""
    t = _as_tensor(t)
    idx = np.asarray(idx, dtype=np.int64)

    def bw(g, acc):
        full = np.zeros_like(t.data)
        np.add.at(full, idx, g)
        acc(t, full)

    return Tensor(t.data[idx], (t,), bw)


def scatter_sum(t: Tensor, idx, n: int) -> Tensor:
    """Sum rows of ``t`` into ``n`` output rows keyed by ``idx``."""
    t = _as_tensor(t)
    idx = np.asarray(idx, dtype=np.int64)
    out = np.zeros((n, t.shape[1]))
    np.add.at(out, idx, t.data)

    def bw(g, acc):
        acc(t, g[idx])

    return Tensor(out, (t,), bw)


def _coo(weights, rows, cols, n) -> scipy.sparse.csr_matrix:
    return scipy.sparse.csr_matrix((weights, (rows, cols)), shape=(n, n))


def pearson_pairs(
    s: Tensor, rows, cols, values=None, zero_variance_tol: float = 1e-12
) -> Tensor:
    """Pearson correlation of row pairs (rows[e], cols[e]) of ``s``, as an
    (E, 1) tensor differentiable in ``s``.

    Pairs where either row's centered norm falls below ``zero_variance_tol``
    get correlation 0 with zero gradient (the zero-variance convention).
    ``values``, when given, supplies already-computed correlations for the
    pairs (skipping the forward recomputation); the caller owns their
    consistency.
    """
    s = _as_tensor(s)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    n = s.shape[0]
    u = s.data - s.data.mean(axis=1, keepdims=True)
    nrm = np.sqrt(np.einsum("ij,ij->i", u, u))
    ok = (nrm[rows] > zero_variance_tol) & (nrm[cols] > zero_variance_tol)
    safe = np.where(nrm > zero_variance_tol, nrm, 1.0)
    z = u / safe[:, None]
    if values is None:
        r = np.where(ok, np.einsum("ij,ij->i", z[rows], z[cols]), 0.0)
    else:
        r = np.asarray(values, dtype=np.float64)

    def bw(g, acc):
        # dr/du_i = (z_j - r z_i)/|u_i|; the usual projection of the row mean
        # vanishes because standardized rows sum to zero. Scattering the
        # per-edge contributions is a pair of sparse products with z plus a
        # per-row diagonal correction.
        ge = g[:, 0] * ok
        grad = _coo(ge / safe[rows], rows, cols, n) @ z
        grad += _coo(ge / safe[cols], cols, rows, n) @ z
        diag = np.bincount(rows, weights=-ge * r / safe[rows], minlength=n)
        diag += np.bincount(cols, weights=-ge * r / safe[cols], minlength=n)
        grad += diag[:, None] * z
        acc(s, grad - grad.mean(axis=1, keepdims=True))

    return Tensor(r[:, None], (s,), bw)


def weighted_spmm(rows, cols, w: Tensor, x: Tensor, n: int) -> Tensor:
    """Product of a sparse matrix with differentiable entry weights and a
    dense tensor: out[rows[e]] += w[e] * x[cols[e]].

    Unlike :func:`spmm`, gradients flow to both ``w`` and ``x``.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    w, x = _as_tensor(w), _as_tensor(x)
    if w.shape != (rows.size, 1):
        raise ValueError(f"weights must be ({rows.size}, 1), got {w.shape}")
    out = _coo(w.data[:, 0], rows, cols, n) @ x.data

    def bw(g, acc):
        acc(w, np.einsum("ej,ej->e", g[rows], x.data[cols])[:, None])
        acc(x, _coo(w.data[:, 0], cols, rows, n) @ g)

    return Tensor(np.asarray(out), (w, x), bw)


def _toposort(root: Tensor):
    order, visited, stack = [], set(), [(root, iter(root._parents))]
    visited.add(id(root))
    while stack:
        node, parents = stack[-1]
        advanced = False
        for p in parents:
            if id(p) not in visited:
                visited.add(id(p))
                stack.append((p, iter(p._parents)))
                advanced = True
                break
        if not advanced:
            order.append(node)
            stack.pop()
    return order  # parents before children


def backward(loss: Tensor) -> None:
    """Accumulate dL/dt into ``t.grad`` for every tensor reachable from ``loss``.

    ``loss`` must be scalar. Each call accumulates a fresh pass into the
    existing ``grad`` buffers, so repeated calls without ``zero_grad`` add up.
    """
    if loss.shape != (1, 1):
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    order = _toposort(loss)
    flowing = {id(loss): np.ones((1, 1))}

    def acc(t, val):
        prev = flowing.get(id(t))
        flowing[id(t)] = val if prev is None else prev + val

    for node in reversed(order):
        g = flowing.pop(id(node), None)
        if g is None:
            continue
        if node.grad is None:
            node.grad = np.zeros_like(node.data)
        node.grad += g
        if node._backward is not None:
            node._backward(g, acc)


def zero_grad(tensors) -> None:
    for t in tensors:
        t.grad = None


def grad_check(f, params, step: float = 1e-3) -> float:
    """Max relative error between analytic gradients and central differences.

    ``f`` rebuilds and returns a scalar-loss graph over the leaf tensors in
    ``params``; it must be deterministic. Central differences use the given
    step; relative error is |analytic - numeric| / max(|analytic|, |numeric|,
    1e-8), maximized over every parameter entry. Existing grads are discarded.
    """
    zero_grad(params)
    backward(f())
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    for p, an in zip(params, analytic):
        flat = p.data.reshape(-1)
        aflat = an.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = f().item()
            flat[i] = orig - step
            f_minus = f().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            err = abs(aflat[i] - numeric) / max(abs(aflat[i]), abs(numeric), 1e-8)
            worst = max(worst, err)
    zero_grad(params)
    return worst
