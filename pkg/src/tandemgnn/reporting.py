"""Result emission for plotting: delimited plot-data files (one per swept
axis) and matplotlib renderings of the same curves."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .experiments import ExperimentResult

AXES = ("labels_per_class", "edge_drop", "k_over_c", "alpha")


def _cell_coords(result: ExperimentResult):
    """(labels, drop, k_over_c, alpha) per cell, in cell order."""
    return result.spec.cells()


def _axis_label(axis: str) -> str:
    return {
        "labels_per_class": "labeled nodes per class",
        "edge_drop": "edge corruption rate",
        "k_over_c": "clusters per class (K/C)",
        "alpha": "correlation threshold",
    }[axis]


def _fmt(value) -> str:
    if value is None:
        return "full"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_plot_data(result: ExperimentResult, out_dir) -> list:
    """One CSV per axis that takes at least two distinct values: the other
    coordinates, then x/y/err columns (mean accuracy and population std)."""
    os.makedirs(out_dir, exist_ok=True)
    coords = _cell_coords(result)
    paths = []
    for axis_idx, axis in enumerate(AXES):
        values = {c[axis_idx] for c in coords}
        if len(values) < 2:
            continue
        others = [a for i, a in enumerate(AXES) if i != axis_idx]
        lines = [",".join(others + ["x", "y", "err"])]
        for coord, cell in zip(coords, result.cells):
            fixed = [_fmt(coord[i]) for i in range(4) if i != axis_idx]
            lines.append(",".join(
                fixed + [_fmt(coord[axis_idx]), repr(cell.mean_acc), repr(cell.std_acc)]
            ))
        path = os.path.join(out_dir, f"plotdata_{axis}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def render_figures(result: ExperimentResult, out_dir, dpi: int = 150) -> list:
    """Errorbar PNG per swept axis, one line per combination of the remaining
    coordinates. Points without a numeric x (the full-label split) are drawn
    at the maximum labeled count present, annotated in the legend."""
    os.makedirs(out_dir, exist_ok=True)
    coords = _cell_coords(result)
    mode = result.spec.mode.cli_name
    paths = []
    for axis_idx, axis in enumerate(AXES):
        values = {c[axis_idx] for c in coords}
        if len(values) < 2:
            continue
        groups = {}
        for coord, cell in zip(coords, result.cells):
            key = tuple(coord[i] for i in range(4) if i != axis_idx)
            groups.setdefault(key, []).append((coord[axis_idx], cell.mean_acc, cell.std_acc))

        fig, ax = plt.subplots(figsize=(5.2, 3.6))
        numeric = sorted(v for v in values if v is not None)
        full_x = (numeric[-1] * 1.25 if numeric else 1.0)
        for key, points in sorted(groups.items(), key=str):
            xs, ys, errs = [], [], []
            for x, y, e in points:
                xs.append(full_x if x is None else x)
                ys.append(y)
                errs.append(e)
            order = sorted(range(len(xs)), key=lambda i: xs[i])
            label = mode
            extras = [
                f"{a}={_fmt(v)}"
                for a, v in zip((a for i, a in enumerate(AXES) if i != axis_idx), key)
                if len({c[AXES.index(a)] for c in coords}) > 1
            ]
            if extras:
                label += " (" + ", ".join(extras) + ")"
            ax.errorbar(
                [xs[i] for i in order], [ys[i] for i in order],
                yerr=[errs[i] for i in order], marker="o", capsize=3, label=label,
            )
        if None in values:
            ax.axvline(full_x, color="gray", lw=0.5, ls=":")
            ax.annotate("full", (full_x, ax.get_ylim()[0]), fontsize=8, color="gray")
        ax.set_xlabel(_axis_label(axis))
        ax.set_ylabel("mean test accuracy")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(out_dir, f"fig_accuracy_vs_{axis}.png")
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        paths.append(path)
    return paths
