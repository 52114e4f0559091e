"""Sparse Tucker decomposition (HOOI) over simulated ranks."""

import json

from ._core import (
    ConfigError,
    DomainError,
    IoError,
    ParseError,
    Scheme,
    ShapeError,
    SparseTensor,
    build_scheme,
    decompose,
    grid_factorize,
    oracle_fit,
    parse_tns,
    read_tns,
)
from ._core import metrics_json as _metrics_json


def metrics(tensor, scheme, core):
    """Static distribution metrics as a dict (same layout as the CLI report)."""
    if isinstance(core, int):
        core = [core] * tensor.order
    return json.loads(_metrics_json(tensor, scheme, list(core)))


__all__ = [
    "ConfigError",
    "DomainError",
    "IoError",
    "ParseError",
    "Scheme",
    "ShapeError",
    "SparseTensor",
    "build_scheme",
    "decompose",
    "grid_factorize",
    "metrics",
    "oracle_fit",
    "parse_tns",
    "read_tns",
]
