"""Executable combinatorics for deletion-channel trace reconstruction.

Exact trace distributions for the padded-defect string pair, statistical
distances between them, lower-bound scaling studies, and the k-deck
distinguisher for pairs that essentially always differ.
"""

from tracelab.core import (
    BitString,
    EadPair,
    PaddedPair,
    contiguous_01_count,
    is_ead_pair,
    make_padded_pair,
    subsequence_count_oracle,
)

__version__ = "0.1.0"

__all__ = [
    "BitString",
    "EadPair",
    "PaddedPair",
    "contiguous_01_count",
    "is_ead_pair",
    "make_padded_pair",
    "subsequence_count_oracle",
    "__version__",
]
