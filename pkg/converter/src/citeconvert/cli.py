"""``convert`` command: Planetoid raw files in, one text graph file out."""

from __future__ import annotations

import argparse
import sys

from .planetoid import DatasetError, assemble, load_raw
from .writer import write_graph


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="convert",
        description="Convert a Planetoid citation dataset to the text graph format",
    )
    parser.add_argument("--input", required=True, help="directory holding the ind.<name>.* files")
    parser.add_argument("--name", required=True, choices=["cora", "citeseer"])
    parser.add_argument("--output", required=True, help="output file path")
    args = parser.parse_args(argv)

    try:
        raw = load_raw(args.input, args.name)
        graph = assemble(raw)
        write_graph(graph, args.output)
    except DatasetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(
        f"wrote {args.output}: {graph.features.shape[0]} nodes, "
        f"{graph.features.shape[1]} features, {graph.num_classes} classes, "
        f"{graph.edges.shape[0]} edges, train/val/test = "
        f"{graph.train_idx.size}/{graph.val_idx.size}/{graph.test_idx.size}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
