"""Full-batch training loop: Adam with coupled L2 weight decay, a step
learning-rate schedule, per-mode loss gating, and final-epoch evaluation."""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import losses as L
from . import model as M
from .autodiff import Tensor
from .graphs import Graph, degree_vector, normalize_sym


class Mode(str, enum.Enum):
    """Which parameter groups train, and on which loss terms."""

    BASELINE = "baseline"                       # primary module, CE only
    DUAL = "dual"                               # everything, CE + aux CE + cluster
    PRIMARY_PLUS_CLUSTER = "primary_plus_cluster"    # no auxiliary module
    AUXILIARY_PLUS_CLUSTER = "auxiliary_plus_cluster"  # no primary classifier

    @classmethod
    def from_cli(cls, name: str) -> "Mode":
        try:
            return _CLI_MODES[name]
        except KeyError:
            raise ValueError(
                f"unknown mode {name!r}; expected one of {', '.join(_CLI_MODES)}"
            ) from None

    @property
    def cli_name(self) -> str:
        return {v: k for k, v in _CLI_MODES.items()}[self]


_CLI_MODES = {
    "gcn": Mode.BASELINE,
    "dual": Mode.DUAL,
    "prim-cluster": Mode.PRIMARY_PLUS_CLUSTER,
    "aux-cluster": Mode.AUXILIARY_PLUS_CLUSTER,
}


@dataclass
class TrainConfig:
    epochs: int = 500
    lr: float = 1e-2
    lr_decay: float = 0.5
    lr_step: int = 50
    weight_decay: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    mode: Mode = Mode.DUAL
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.lr_step < 1:
            raise ValueError("lr_step must be >= 1")


@dataclass
class RunRecord:
    """Everything one training run reports."""

    mode: Mode
    seed: int
    final_test_accuracy: float
    final_val_accuracy: float
    test_accuracy_primary: float | None
    test_accuracy_auxiliary: float | None
    epoch_losses: list[L.LossBreakdown] = field(repr=False, default_factory=list)
    wall_clock_seconds: float = 0.0


class TrainingDiverged(RuntimeError):
    """A forward pass produced non-finite values; the run is aborted."""


class AdamState:
    """First/second moment buffers per parameter plus the shared step count."""

    def __init__(self, params: list[Tensor]):
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0


def adam_step(
    params: list[Tensor], state: AdamState, lr: float, config: TrainConfig
) -> None:
    """One Adam update with bias correction from each parameter's ``grad``.

    L2 regularization is coupled: weight_decay * param is added to the raw
    gradient before the moment updates. Parameters with no gradient are
    treated as having a zero one (decay still applies).
    """
    state.t += 1
    bc1 = 1.0 - config.beta1 ** state.t
    bc2 = 1.0 - config.beta2 ** state.t
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if config.weight_decay:
            g = g + config.weight_decay * p.data
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + config.eps)


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Step schedule: lr * decay^(epoch // step)."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return config.lr * config.lr_decay ** (epoch // config.lr_step)


def evaluate(p_values: np.ndarray, labels, mask) -> float:
    """Fraction of masked nodes whose argmax prediction (ties to the lowest
    class index) matches the label."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty evaluation mask")
    predicted = np.argmax(p_values[mask], axis=1)
    return float(np.mean(predicted == np.asarray(labels)[mask]))


def trainable_params(params: M.DualParams, mode: Mode) -> list[Tensor]:
    if mode is Mode.BASELINE:
        return params.primary_encoder() + params.primary_classifier()
    if mode is Mode.PRIMARY_PLUS_CLUSTER:
        return params.primary_encoder() + params.primary_classifier() + params.cluster_head()
    if mode is Mode.AUXILIARY_PLUS_CLUSTER:
        return (
            params.primary_encoder() + params.cluster_head()
            + params.aux_encoder() + params.aux_classifier()
        )
    return params.all()


def _mode_forward(mode, x, a_hat, a_norm, a_norm_deg, g, params, config):
    """Forward pass and gated loss components for one mode.

    Returns (loss components tuple, primary probability values or None,
    auxiliary probability values or None).
    """
    if mode is Mode.BASELINE:
        h = M.encode_primary(x, a_hat, params, config)
        p, p_logits = M.classify(h, params.cls_w, params.cls_b)
        ce = L.cross_entropy_masked(p_logits, g.labels, g.train_mask)
        return (ce, None, None), p.data, None

    if mode is Mode.PRIMARY_PLUS_CLUSTER:
        h = M.encode_primary(x, a_hat, params, config)
        p, p_logits = M.classify(h, params.cls_w, params.cls_b)
        s = M.cluster_assign(h, params)
        ce = L.cross_entropy_masked(p_logits, g.labels, g.train_mask)
        sc = L.mincut_loss(s, a_norm, a_norm_deg)
        return (ce, None, sc), p.data, None

    out = M.forward_dual(x, a_hat, params, config)
    sc = L.mincut_loss(out.s, a_norm, a_norm_deg)
    ce_aux = L.cross_entropy_masked(out.p_aux_logits, g.labels, g.train_mask)
    if mode is Mode.AUXILIARY_PLUS_CLUSTER:
        return (None, ce_aux, sc), out.p.data, out.p_aux.data
    ce = L.cross_entropy_masked(out.p_logits, g.labels, g.train_mask)
    return (ce, ce_aux, sc), out.p.data, out.p_aux.data


def train(g: Graph, model_config: M.ModelConfig, train_config: TrainConfig) -> RunRecord:
    """Run the full training loop and evaluate the final-epoch model.

    Deterministic: (graph, configs, seed) fix every reported number. The
    reported test accuracy comes from the auxiliary classifier in dual and
    auxiliary modes, and from the primary classifier otherwise; whichever
    classifiers were trained are also reported separately.
    """
    train_config.validate()
    model_config.validate(g.num_classes)
    started = time.perf_counter()

    rng = np.random.default_rng(train_config.seed)
    params = M.init_params(g.num_features, g.num_classes, model_config, rng)
    x, a_hat = M.forward_inputs(g)
    a_norm = normalize_sym(g.adjacency)
    a_norm_deg = degree_vector(a_norm)
    mode = train_config.mode
    trainable = trainable_params(params, mode)
    state = AdamState(trainable)

    history: list[L.LossBreakdown] = []
    for epoch in range(train_config.epochs):
        try:
            components, _, _ = _mode_forward(
                mode, x, a_hat, a_norm, a_norm_deg, g, params, model_config
            )
            total, breakdown = L.joint_loss(*components)
            ad.zero_grad(trainable)
            ad.backward(total)
        except FloatingPointError as e:
            raise TrainingDiverged(
                f"non-finite values at epoch {epoch} (mode={mode.value}, "
                f"seed={train_config.seed}): {e}"
            ) from e
        adam_step(trainable, state, lr_at(epoch, train_config), train_config)
        history.append(breakdown)

    components, p_values, p_aux_values = _mode_forward(
        mode, x, a_hat, a_norm, a_norm_deg, g, params, model_config
    )
    reported = p_aux_values if mode in (Mode.DUAL, Mode.AUXILIARY_PLUS_CLUSTER) else p_values
    return RunRecord(
        mode=mode,
        seed=train_config.seed,
        final_test_accuracy=evaluate(reported, g.labels, g.test_mask),
        final_val_accuracy=evaluate(reported, g.labels, g.val_mask),
        test_accuracy_primary=(
            evaluate(p_values, g.labels, g.test_mask)
            if mode is not Mode.AUXILIARY_PLUS_CLUSTER
            else None
        ),
        test_accuracy_auxiliary=(
            evaluate(p_aux_values, g.labels, g.test_mask)
            if p_aux_values is not None
            else None
        ),
        epoch_losses=history,
        wall_clock_seconds=time.perf_counter() - started,
    )
