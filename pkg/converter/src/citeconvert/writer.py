"""Emission of the plain-text graph format consumed by the training engine.

Layout (UTF-8, LF line endings)::

    graph <n> <d> <num_classes>
    features
    <n rows of d space-separated floats>
    labels
    <n space-separated integers>
    train
    <space-separated node indices>
    val
    <space-separated node indices>
    test
    <space-separated node indices>
    edges
    <one "i j" line per undirected edge, i < j, sorted>

Floats are written with repr so the round trip is exact and re-running the
converter yields byte-identical output.
"""

from __future__ import annotations

from .planetoid import AssembledGraph


def write_graph(g: AssembledGraph, output_path: str) -> None:
    n, d = g.features.shape
    lines = [f"graph {n} {d} {g.num_classes}", "features"]
    for row in g.features:
        lines.append(" ".join(repr(float(v)) for v in row))
    lines.append("labels")
    lines.append(" ".join(str(int(v)) for v in g.labels))
    for name, idx in (("train", g.train_idx), ("val", g.val_idx), ("test", g.test_idx)):
        lines.append(name)
        lines.append(" ".join(str(int(i)) for i in idx))
    lines.append("edges")
    for i, j in g.edges:
        lines.append(f"{i} {j}")
    with open(output_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
