"""The three training objectives and their joint sum.

Classification uses a summed (not averaged) masked cross entropy on each
module's logits. The cluster head is shaped by a relaxed min-cut loss: a
normalized cut ratio on the symmetrically normalized input adjacency plus an
orthogonality regularizer that penalizes degenerate assignments.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import SparseMatrix, Tensor

log = logging.getLogger(__name__)

# fp slack for the analytic bounds checked on every evaluation
_BOUND_EPS = 1e-9


def cross_entropy_masked(logits: Tensor, labels, mask) -> Tensor:
    """Sum of -log predicted-class probability over masked nodes.

    Raises ValueError on an empty mask or out-of-range labels.
    """
    return ad.masked_cross_entropy(logits, labels, mask)


def mincut_loss(s: Tensor, a_norm: SparseMatrix, degrees: np.ndarray) -> Tensor:
    """Relaxed min-cut clustering loss.

    ``a_norm`` is the symmetrically normalized input adjacency and
    ``degrees`` its row sums. The cut term -tr(S^T A S)/tr(S^T D S) lies in
    [-1, 0] and the orthogonality regularizer in [0, 2] for row-stochastic S;
    both bounds are checked on every call. A fully isolated graph (zero
    denominator) degrades to the regularizer alone with a logged warning.
    """
    degrees = np.asarray(degrees, dtype=np.float64)
    if degrees.shape != (a_norm.n,):
        raise ValueError("degrees must be the row sums of a_norm")
    k = s.shape[1]
    sts = ad.matmul(ad.transpose(s), s)
    sts_norm = ad.frobenius_norm(sts)
    if sts_norm.item() == 0.0:
        raise ValueError("zero Frobenius norm of S^T S in min-cut regularizer")
    target = np.eye(k) / np.sqrt(k)
    reg = ad.frobenius_norm(ad.sub(ad.div(sts, sts_norm), Tensor(target)))

    den = ad.trace_quadratic(s, SparseMatrix.diagonal(degrees))
    if den.item() == 0.0:
        log.warning("min-cut denominator tr(S^T D S) is zero; using regularizer only")
        _check_bounds(0.0, reg.item())
        return reg
    num = ad.trace_quadratic(s, a_norm)
    cut = ad.mul(ad.div(num, den), -1.0)
    _check_bounds(cut.item(), reg.item())
    return ad.add(cut, reg)


def _check_bounds(cut_value: float, reg_value: float) -> None:
    if not -1.0 - _BOUND_EPS <= cut_value <= _BOUND_EPS:
        raise ArithmeticError(f"min-cut cut term {cut_value} outside [-1, 0]")
    if not -_BOUND_EPS <= reg_value <= 2.0 + _BOUND_EPS:
        raise ArithmeticError(f"min-cut regularizer {reg_value} outside [0, 2]")


@dataclass(frozen=True)
class LossBreakdown:
    """Per-iteration scalar record; total uses the same additions in the same
    order as the differentiated objective."""

    l_ce: float
    l_ce_aux: float
    l_sc: float
    total: float


def joint_loss(
    l_ce: Tensor | None, l_ce_aux: Tensor | None, l_sc: Tensor | None
) -> tuple[Tensor, LossBreakdown]:
    """Sum the present components in fixed order; absent ones count as zero.

    Returns the differentiable total and a float breakdown whose ``total``
    equals the tensor's value exactly.
    """
    zero = Tensor([[0.0]])
    ce = l_ce if l_ce is not None else zero
    ce_aux = l_ce_aux if l_ce_aux is not None else zero
    sc = l_sc if l_sc is not None else zero
    total = ad.add(ad.add(ce, ce_aux), sc)
    breakdown = LossBreakdown(
        l_ce=ce.item(), l_ce_aux=ce_aux.item(), l_sc=sc.item(), total=total.item()
    )
    return total, breakdown
