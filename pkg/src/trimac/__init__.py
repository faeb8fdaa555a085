"""Toolkit for correlated-source transmission over a three-user MAC.

Evaluates the cooperative-common-part achievability conditions and their
linear-code-augmented extension, and simulates the dithered linear coding
construction at finite blocklength.
"""

__version__ = "0.1.0"

from .probability import (
    Alphabet,
    CondPmf,
    JointPmf,
    ProbabilityError,
    binary_entropy,
    inverse_binary_entropy,
)
from .models import (
    MacChannel,
    NoiseSpec,
    SourceTriple,
    example2_channel,
    example2_source,
    table_channel,
    table_source,
)

__all__ = [
    "Alphabet",
    "CondPmf",
    "JointPmf",
    "ProbabilityError",
    "binary_entropy",
    "inverse_binary_entropy",
    "MacChannel",
    "NoiseSpec",
    "SourceTriple",
    "example2_channel",
    "example2_source",
    "table_channel",
    "table_source",
]
