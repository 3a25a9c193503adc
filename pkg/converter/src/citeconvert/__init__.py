"""Converter from the Planetoid citation-network distribution to the
plain-text graph format used by the training engine."""

from .planetoid import AssembledGraph, DatasetError, RawDataset, assemble, load_raw
from .writer import write_graph

__all__ = [
    "AssembledGraph",
    "DatasetError",
    "RawDataset",
    "assemble",
    "load_raw",
    "write_graph",
]
