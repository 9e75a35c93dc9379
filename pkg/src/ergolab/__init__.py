"""Exact finite-cell laboratory for mixing, rigidity, spectral and entropy diagnostics."""

from .cellsys import (
    CellAutomorphism,
    CellCapError,
    CellFunction,
    CellSet,
    CellSpace,
    DenseFamily,
    SkewSystem,
    apply_set,
    build_skew,
    compose,
    conjugate,
    direct_product,
    halmos_distance,
    inverse,
    power,
)
from .seqentropy import Partition, SequenceFamily, h_j, partition_entropy, refine
from .zoo import build, canonical_family, parse_descriptor

__version__ = "0.1.0"

__all__ = [
    "CellAutomorphism",
    "CellCapError",
    "CellFunction",
    "CellSet",
    "CellSpace",
    "DenseFamily",
    "Partition",
    "SequenceFamily",
    "SkewSystem",
    "apply_set",
    "build",
    "build_skew",
    "canonical_family",
    "compose",
    "conjugate",
    "direct_product",
    "h_j",
    "halmos_distance",
    "inverse",
    "parse_descriptor",
    "partition_entropy",
    "power",
    "refine",
]
