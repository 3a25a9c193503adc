"""Command-line entry points.

``run`` sweeps an experiment grid and writes results (CSV or JSON), plot-data
files, and rendered figures into the output directory. ``plot`` re-renders
plot data and figures from a previously written results.json.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import ExperimentSpec, emit_results, run_experiment
from .training import Mode, TrainingDiverged


def _parse_list(text, cast):
    if text is None or text == "":
        return []
    return [cast(part) for part in text.split(",") if part != ""]


def _build_run_parser(sub):
    p = sub.add_parser("run", help="run an experiment grid")
    p.add_argument("--config", help="JSON file whose keys mirror the flags below")
    p.add_argument("--dataset", default=None, help="graph file path or sbm:... spec")
    p.add_argument("--mode", default=None, choices=["gcn", "dual", "prim-cluster", "aux-cluster"])
    p.add_argument("--labels", default=None, help="comma list of labeled nodes per class; omit for the full split")
    p.add_argument("--edge-drop", default=None, help="comma list of edge corruption rates")
    p.add_argument("--k-mult", default=None, help="comma list of cluster-count multipliers (K = mult * classes)")
    p.add_argument("--alpha", default=None, help="comma list of correlation thresholds")
    p.add_argument("--structures", type=int, default=None, help="random structures per cell (default 10)")
    p.add_argument("--repeats", type=int, default=None, help="training repeats per structure (default 5)")
    p.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    p.add_argument("--epochs", type=int, default=None, help="training epochs (default 500)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", default=None, choices=["csv", "json"])
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.add_argument("--quiet", action="store_true")
    return p


_FLAG_TO_SPEC = {
    "dataset": ("dataset", str),
    "mode": ("mode", None),
    "labels": ("labels_per_class", int),
    "edge_drop": ("edge_drop_rates", float),
    "k_mult": ("k_over_c", int),
    "alpha": ("alphas", float),
    "structures": ("n_structures", int),
    "repeats": ("n_repeats", int),
    "seed": ("base_seed", int),
    "epochs": ("epochs", int),
}


def _spec_from_args(args) -> tuple[ExperimentSpec, str]:
    settings = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            settings.update(json.load(fh))
    for flag, (field, cast) in _FLAG_TO_SPEC.items():
        value = getattr(args, flag)
        if value is None:
            continue
        if flag in ("labels", "edge_drop", "k_mult", "alpha") and isinstance(value, str):
            value = _parse_list(value, cast)
        settings[field] = value
    config_fmt = settings.pop("format", None)
    fmt = args.format or config_fmt or "csv"
    spec = ExperimentSpec()
    for key, value in settings.items():
        if not hasattr(spec, key):
            raise ValueError(f"unknown config key {key!r}")
        setattr(spec, key, value)
    if isinstance(spec.mode, str):
        spec.mode = Mode.from_cli(spec.mode)
    return spec, fmt


def _cmd_run(args) -> int:
    spec, fmt = _spec_from_args(args)

    def progress(done, total):
        if not args.quiet:
            print(f"\r{done}/{total} runs", end="", file=sys.stderr, flush=True)

    result = run_experiment(spec, workers=args.workers, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
    paths = emit_results(result, args.out, fmt=fmt, figures=not args.no_figures)
    for cell in result.cells:
        labels = "full" if cell.labels_per_class is None else cell.labels_per_class
        print(
            f"mode={spec.mode.cli_name} labels={labels} drop={cell.edge_drop} "
            f"K={cell.num_clusters} alpha={cell.alpha}: "
            f"acc {cell.mean_acc:.4f} +- {cell.std_acc:.4f} over {len(cell.records)} runs"
        )
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_plot(args) -> int:
    from . import reporting
    from .experiments import CellResult, ExperimentResult, load_results_json

    payload = load_results_json(args.results)
    spec_dict = dict(payload["spec"])
    spec_dict["mode"] = Mode(spec_dict["mode"])
    spec = ExperimentSpec(**spec_dict)
    cells = [
        CellResult(
            labels_per_class=c["labels_per_class"], edge_drop=c["edge_drop"],
            num_clusters=c["K"], alpha=c["alpha"], records=[],
            mean_acc=c["mean_acc"], std_acc=c["std_acc"],
        )
        for c in payload["cells"]
    ]
    result = ExperimentResult(spec=spec, cells=cells)
    paths = reporting.write_plot_data(result, args.out)
    paths += reporting.render_figures(result, args.out)
    for path in paths:
        print(f"wrote {path}")
    if not paths:
        print("nothing to plot: no axis takes more than one value", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tandemgnn",
        description="Experiment harness for joint primary/auxiliary GCN training",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _build_run_parser(sub)
    p_plot = sub.add_parser("plot", help="re-render plots from a results.json")
    p_plot.add_argument("--results", required=True, help="path to results.json")
    p_plot.add_argument("--out", required=True, help="output directory")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_plot(args)
    except (ValueError, OSError, TrainingDiverged) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
