"""Experiment harness: sweep grids over label rates, edge-corruption rates,
cluster counts, and correlation thresholds; run the per-cell protocol with
hierarchically derived seeds; aggregate and emit results.

Seed derivation
---------------
Every random decision is keyed by SHA-256 over a canonical string of
(base_seed, labels_per_class, edge_drop, structure index[, repeat index]) plus
a role tag, truncated to 64 bits. Cell coordinates that do not influence the
randomness (mode, cluster count, threshold) are deliberately excluded: adding
grid points never perturbs other cells, baseline results are invariant to the
unused cluster parameters, and all modes see identical label subsets and
corrupted graphs, which pairs their comparisons.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .graphs import Graph, drop_edges, generate_sbm, load_graph, sbm_fixture, subsample_labels
from .model import ModelConfig
from .training import Mode, RunRecord, TrainConfig, train

SBM_DEFAULTS = dict(
    blocks=4, nodes_per_block=100, p_intra=0.05, q_inter=0.005,
    feature_dim=16, feature_noise=1.0, seed=0,
    train_per_class=20, val_size=80, test_size=200,
)

_SBM_KEY_TYPES = {
    "blocks": int, "nodes_per_block": int, "p_intra": float, "q_inter": float,
    "feature_dim": int, "feature_noise": float, "seed": int,
    "train_per_class": int, "val_size": int, "test_size": int,
}


def load_dataset(dataset: str) -> Graph:
    """A filesystem path, or ``sbm:default[,key=value,...]`` /
    ``sbm:key=value,...`` for a synthetic graph."""
    if not dataset.startswith("sbm:"):
        return load_graph(dataset)
    parts = dataset[len("sbm:"):].split(",")
    kwargs = {}
    start = 0
    if parts and parts[0] == "default":
        kwargs.update(SBM_DEFAULTS)
        start = 1
    for part in parts[start:]:
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"bad sbm dataset field {part!r}, expected key=value")
        key, value = part.split("=", 1)
        if key not in _SBM_KEY_TYPES:
            raise ValueError(f"unknown sbm dataset key {key!r}")
        kwargs[key] = _SBM_KEY_TYPES[key](value)
    if start == 0:
        missing = [k for k in ("blocks", "nodes_per_block", "p_intra", "q_inter", "feature_dim") if k not in kwargs]
        if missing:
            raise ValueError(f"sbm dataset spec missing keys: {', '.join(missing)}")
        kwargs = {**{k: v for k, v in SBM_DEFAULTS.items() if k not in ("blocks", "nodes_per_block", "p_intra", "q_inter", "feature_dim")}, **kwargs}
    return generate_sbm(**kwargs)


def derive_seed(base_seed: int, *, labels, edge_drop: float, structure: int,
                role: str, repeat: int | None = None) -> int:
    """Deterministic 64-bit seed from the structural coordinates (documented
    in the module docstring)."""
    text = (
        f"base={base_seed}|labels={'full' if labels is None else labels}"
        f"|drop={edge_drop!r}|structure={structure}|role={role}"
    )
    if repeat is not None:
        text += f"|repeat={repeat}"
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class ExperimentSpec:
    """One harness invocation: a grid of cells plus the shared protocol."""

    dataset: str = "sbm:default"
    mode: Mode = Mode.DUAL
    labels_per_class: list = field(default_factory=list)   # empty = full split
    edge_drop_rates: list = field(default_factory=list)    # empty = no corruption
    k_over_c: list = field(default_factory=lambda: [10])
    alphas: list = field(default_factory=lambda: [0.7])
    n_structures: int = 10
    n_repeats: int = 5
    base_seed: int = 0
    epochs: int = 500
    lr: float = 1e-2
    lr_decay: float = 0.5
    lr_step: int = 50
    weight_decay: float = 1e-3
    hidden_dim: int = 16
    embed_dim: int = 16
    aux_hidden_dim: int = 16
    aux_embed_dim: int = 16
    detach_reconstruction: bool = True
    elu_after_final_layer: bool = True

    def validate(self) -> None:
        for m in self.labels_per_class:
            if m is not None and m < 1:
                raise ValueError("labels_per_class entries must be >= 1")
        for p in self.edge_drop_rates:
            if not 0.0 <= p <= 1.0:
                raise ValueError("edge drop rates must be in [0, 1]")
        for k in self.k_over_c:
            if k < 1:
                raise ValueError("k_over_c entries must be >= 1")
        for a in self.alphas:
            if not 0.0 < a < 1.0:
                raise ValueError("alpha values must be in (0, 1)")
        if self.n_structures < 1 or self.n_repeats < 1:
            raise ValueError("n_structures and n_repeats must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def cells(self):
        labels = self.labels_per_class or [None]
        drops = self.edge_drop_rates or [0.0]
        return list(itertools.product(labels, drops, self.k_over_c, self.alphas))

    def model_config(self, k_mult: int, alpha: float, num_classes: int) -> ModelConfig:
        return ModelConfig(
            num_clusters=k_mult * num_classes,
            alpha=alpha,
            hidden_dim=self.hidden_dim,
            embed_dim=self.embed_dim,
            aux_hidden_dim=self.aux_hidden_dim,
            aux_embed_dim=self.aux_embed_dim,
            detach_reconstruction=self.detach_reconstruction,
            elu_after_final_layer=self.elu_after_final_layer,
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, lr=self.lr, lr_decay=self.lr_decay,
            lr_step=self.lr_step, weight_decay=self.weight_decay,
            mode=self.mode, seed=seed,
        )


@dataclass
class CellResult:
    labels_per_class: object
    edge_drop: float
    num_clusters: int
    alpha: float
    records: list
    mean_acc: float
    std_acc: float


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    cells: list


def aggregate(values) -> tuple[float, float]:
    """Arithmetic mean and population standard deviation."""
    values = np.asarray(list(values), dtype=np.float64)
    if values.size == 0:
        raise ValueError("aggregate of empty input")
    return float(values.mean()), float(values.std())


def _has_structural_randomness(g: Graph, labels, drop: float) -> bool:
    if drop > 0.0:
        return True
    if labels is None:
        return False
    train_idx = np.flatnonzero(g.train_mask)
    counts = np.bincount(g.labels[train_idx], minlength=g.num_classes)
    return bool((counts[counts > 0] > labels).any())


def make_structure(g: Graph, labels, drop: float, structure: int, base_seed: int) -> Graph:
    """The i-th structural variant: corrupted edges and/or subsampled labels,
    both derived from the same structure index (paired across cells)."""
    out = g
    if drop > 0.0:
        out = drop_edges(out, drop, derive_seed(
            base_seed, labels=labels, edge_drop=drop, structure=structure, role="drop"))
    if labels is not None:
        out = subsample_labels(out, labels, derive_seed(
            base_seed, labels=labels, edge_drop=drop, structure=structure, role="subsample"))
    return out


_worker_graph: Graph | None = None
_worker_spec: ExperimentSpec | None = None


def _worker_init(graph: Graph, spec: ExperimentSpec) -> None:
    global _worker_graph, _worker_spec
    _worker_graph = graph
    _worker_spec = spec


def _run_one(task):
    labels, drop, k_mult, alpha, structure, repeat = task
    spec, g = _worker_spec, _worker_graph
    variant = make_structure(g, labels, drop, structure, spec.base_seed)
    seed = derive_seed(spec.base_seed, labels=labels, edge_drop=drop,
                       structure=structure, role="train", repeat=repeat)
    record = train(
        variant,
        spec.model_config(k_mult, alpha, g.num_classes),
        spec.train_config(seed),
    )
    return task, record


def run_experiment(spec: ExperimentSpec, graph: Graph | None = None,
                   workers: int = 1, progress=None) -> ExperimentResult:
    """Run every cell of the grid; deterministic for a fixed spec.

    ``graph`` overrides dataset loading (the caller supplies the instance).
    ``progress``, when given, is called with (done, total) after each run.
    """
    spec.validate()
    if graph is None:
        graph = load_dataset(spec.dataset)

    tasks = []
    cell_keys = spec.cells()
    for labels, drop, k_mult, alpha in cell_keys:
        n_struct = spec.n_structures if _has_structural_randomness(graph, labels, drop) else 1
        for structure in range(n_struct):
            for repeat in range(spec.n_repeats):
                tasks.append((labels, drop, k_mult, alpha, structure, repeat))

    outcomes = {}
    done = 0
    if workers <= 1:
        _worker_init(graph, spec)
        for task in tasks:
            key, record = _run_one(task)
            outcomes[key] = record
            done += 1
            if progress:
                progress(done, len(tasks))
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_worker_init, initargs=(graph, spec)
        ) as pool:
            for key, record in pool.map(_run_one, tasks, chunksize=1):
                outcomes[key] = record
                done += 1
                if progress:
                    progress(done, len(tasks))

    cells = []
    for labels, drop, k_mult, alpha in cell_keys:
        records = [
            outcomes[key] for key in sorted(
                (k for k in outcomes if k[:4] == (labels, drop, k_mult, alpha)),
                key=lambda k: (k[4], k[5]),
            )
        ]
        accs = [r.final_test_accuracy for r in records]
        mean, std = aggregate(accs)
        cells.append(CellResult(
            labels_per_class=labels, edge_drop=drop,
            num_clusters=k_mult * graph.num_classes, alpha=alpha,
            records=records, mean_acc=mean, std_acc=std,
        ))
    return ExperimentResult(spec=spec, cells=cells)


CSV_HEADER = "mode,labels_per_class,edge_drop,K,alpha,runs,mean_acc,std_acc"


def _csv_rows(result: ExperimentResult):
    rows = [CSV_HEADER]
    for c in result.cells:
        labels = "full" if c.labels_per_class is None else str(c.labels_per_class)
        rows.append(",".join([
            result.spec.mode.cli_name, labels, repr(float(c.edge_drop)),
            str(c.num_clusters), repr(float(c.alpha)), str(len(c.records)),
            repr(c.mean_acc), repr(c.std_acc),
        ]))
    return rows


def results_to_csv(result: ExperimentResult) -> str:
    return "\n".join(_csv_rows(result)) + "\n"


def _record_dict(r: RunRecord) -> dict:
    # wall-clock time is deliberately omitted so emitted files are
    # byte-identical across re-runs
    return {
        "mode": r.mode.value,
        "seed": r.seed,
        "final_test_accuracy": r.final_test_accuracy,
        "final_val_accuracy": r.final_val_accuracy,
        "test_accuracy_primary": r.test_accuracy_primary,
        "test_accuracy_auxiliary": r.test_accuracy_auxiliary,
        "epoch_losses": [[b.l_ce, b.l_ce_aux, b.l_sc, b.total] for b in r.epoch_losses],
    }


def results_to_json(result: ExperimentResult) -> str:
    spec_dict = asdict(result.spec)
    spec_dict["mode"] = result.spec.mode.value
    payload = {
        "spec": spec_dict,
        "cells": [
            {
                "labels_per_class": c.labels_per_class,
                "edge_drop": c.edge_drop,
                "K": c.num_clusters,
                "alpha": c.alpha,
                "runs": len(c.records),
                "mean_acc": c.mean_acc,
                "std_acc": c.std_acc,
                "records": [_record_dict(r) for r in c.records],
            }
            for c in result.cells
        ],
    }
    return json.dumps(payload, indent=1)


def load_results_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def emit_results(result: ExperimentResult, out_dir, fmt: str = "csv",
                 figures: bool = True) -> list:
    """Write results.<fmt>, the per-axis plot-data files, and (by default)
    rendered figures; returns the written paths."""
    from . import reporting  # matplotlib import stays off the training path

    import os
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    target = os.path.join(out_dir, f"results.{fmt}")
    text = results_to_csv(result) if fmt == "csv" else results_to_json(result)
    with open(target, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    paths.append(target)
    paths.extend(reporting.write_plot_data(result, out_dir))
    if figures:
        paths.extend(reporting.render_figures(result, out_dir))
    return paths
