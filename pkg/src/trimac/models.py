"""Source triples and memoryless MAC kernels.

The benchmark family: binary sources with S1 independent of S3 and
S2 = S1 xor S3 (so S3 = S1 xor S2 almost surely), and the four-ary-output
channel Y = (X1 xor X2) +4 X3 +4 N with N supported on {0, 1, 2}.
Generic table-driven sources/channels go through the same validated types.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np

from .probability import Alphabet, CondPmf, JointPmf, ProbabilityError

SOURCE_AXES = ("S1", "S2", "S3")
INPUT_AXES = ("X1", "X2", "X3")
OUTPUT_AXIS = "Y"


class ModelError(ProbabilityError):
    """Invalid source/channel parameterization."""


@dataclass(frozen=True)
class SourceTriple:
    """Joint law of the three per-letter sources, axes named S1, S2, S3."""

    joint: JointPmf

    def __post_init__(self):
        if self.joint.names != SOURCE_AXES:
            raise ModelError(f"source axes must be {SOURCE_AXES}, got {self.joint.names}")

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.joint.axes)


@dataclass(frozen=True)
class MacChannel:
    """Memoryless kernel p(y | x1, x2, x3), given axes X1, X2, X3, target Y."""

    kernel: CondPmf

    def __post_init__(self):
        if self.kernel.given_names != INPUT_AXES:
            raise ModelError(f"channel inputs must be {INPUT_AXES}")
        if self.kernel.target_names != (OUTPUT_AXIS,):
            raise ModelError(f"channel output must be {OUTPUT_AXIS!r}")

    @property
    def input_sizes(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.kernel.given_axes)

    @property
    def output_size(self) -> int:
        return self.kernel.target_axes[0].size


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise over Z4 with pmf (1/2 - delta, 1/2, delta, 0)."""

    delta: float

    def __post_init__(self):
        if not 0.0 <= self.delta <= 0.5:
            raise ModelError(f"delta must lie in [0, 1/2], got {self.delta}")
        if self.delta == 0.25:
            raise ModelError(
                "delta = 1/4 is rejected: the uniform-output characterization "
                "degenerates there and downstream checks lose meaning"
            )

    @property
    def pmf(self) -> np.ndarray:
        return np.array([0.5 - self.delta, 0.5, self.delta, 0.0])

    def entropy(self) -> float:
        from .probability import entropy_of

        return entropy_of(self.pmf)


def example2_source(sigma: float, gamma: float) -> SourceTriple:
    """S1 ~ Be(sigma), S3 ~ Be(gamma) independent, S2 = S1 xor S3."""
    if not 0.0 <= sigma <= 1.0:
        raise ModelError(f"sigma out of range: {sigma}")
    if not 0.0 <= gamma <= 1.0:
        raise ModelError(f"gamma out of range: {gamma}")
    table = np.zeros((2, 2, 2))
    p1 = np.array([1.0 - sigma, sigma])
    p3 = np.array([1.0 - gamma, gamma])
    for s1 in (0, 1):
        for s3 in (0, 1):
            table[s1, s1 ^ s3, s3] = p1[s1] * p3[s3]
    axes = tuple(Alphabet(n, 2) for n in SOURCE_AXES)
    return SourceTriple(JointPmf(axes, table))


def example2_channel(noise: NoiseSpec | float) -> MacChannel:
    """Binary-input MAC with Y = (X1 xor X2) +4 X3 +4 N over Z4."""
    if not isinstance(noise, NoiseSpec):
        noise = NoiseSpec(float(noise))
    npmf = noise.pmf
    table = np.zeros((2, 2, 2, 4))
    for x1 in (0, 1):
        for x2 in (0, 1):
            for x3 in (0, 1):
                base = ((x1 ^ x2) + x3) % 4
                for y in range(4):
                    table[x1, x2, x3, y] = npmf[(y - base) % 4]
    given = tuple(Alphabet(n, 2) for n in INPUT_AXES)
    target = (Alphabet(OUTPUT_AXIS, 4),)
    return MacChannel(CondPmf(given, target, table))


def table_source(sizes: Sequence[int], pmf) -> SourceTriple:
    """Source triple from an explicit dense table (axis order S1, S2, S3)."""
    if len(sizes) != 3:
        raise ModelError("a source triple needs exactly three alphabets")
    arr = np.asarray(pmf, dtype=float).reshape(tuple(int(s) for s in sizes))
    axes = tuple(Alphabet(n, int(s)) for n, s in zip(SOURCE_AXES, sizes))
    return SourceTriple(JointPmf(axes, arr))


def table_channel(input_sizes: Sequence[int], output_size: int, kernel) -> MacChannel:
    """Channel from an explicit dense kernel (axis order X1, X2, X3; Y)."""
    if len(input_sizes) != 3:
        raise ModelError("a MAC kernel needs exactly three input alphabets")
    shape = tuple(int(s) for s in input_sizes) + (int(output_size),)
    arr = np.asarray(kernel, dtype=float).reshape(shape)
    given = tuple(Alphabet(n, int(s)) for n, s in zip(INPUT_AXES, input_sizes))
    target = (Alphabet(OUTPUT_AXIS, int(output_size)),)
    return MacChannel(CondPmf(given, target, arr))


# -- JSON config schema --------------------------------------------------------
#
# {"source": {"type": "example2", "sigma": 0.1, "gamma": 0.3}
#            | {"type": "table", "alphabets": [2, 2, 2], "pmf": [...]},
#  "channel": {"type": "example2", "delta": 0.125}
#            | {"type": "table", "alphabets": [2, 2, 2, 4], "kernel": [...]}}
#
# Probabilities may be doubles or decimal strings ("0.63", "1/8"); tables are
# flat lists in row-major order over the documented axis order.


def _num(x: Any) -> float:
    if isinstance(x, str):
        return float(Fraction(x))
    return float(x)


def _numlist(xs: Any) -> list[float]:
    if not isinstance(xs, (list, tuple)):
        raise ModelError(f"expected a list of probabilities, got {type(xs).__name__}")
    return [_num(x) for x in xs]


def parse_source(spec: Mapping[str, Any]) -> SourceTriple:
    kind = spec.get("type")
    if kind == "example2":
        return example2_source(_num(spec["sigma"]), _num(spec["gamma"]))
    if kind == "table":
        return table_source(spec["alphabets"], _numlist(spec["pmf"]))
    raise ModelError(f"unknown source type: {kind!r}")


def parse_channel(spec: Mapping[str, Any]) -> MacChannel:
    kind = spec.get("type")
    if kind == "example2":
        return example2_channel(_num(spec["delta"]))
    if kind == "table":
        sizes = spec["alphabets"]
        if len(sizes) != 4:
            raise ModelError("table channel needs [x1, x2, x3, y] alphabet sizes")
        return table_channel(sizes[:3], sizes[3], _numlist(spec["kernel"]))
    raise ModelError(f"unknown channel type: {kind!r}")


def parse_config(text: str) -> tuple[SourceTriple, MacChannel, dict]:
    """Parse a JSON config into validated model objects plus the echo dict."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError(f"config is not valid JSON: {e}") from e
    if "source" not in raw or "channel" not in raw:
        raise ModelError("config must have 'source' and 'channel' sections")
    source = parse_source(raw["source"])
    channel = parse_channel(raw["channel"])
    return source, channel, echo_config(source, channel)


def echo_config(source: SourceTriple, channel: MacChannel) -> dict:
    """Canonical table-form dict for round-tripping a parsed config."""
    return {
        "source": {
            "type": "table",
            "alphabets": list(source.sizes),
            "pmf": [float(v) for v in source.joint.values.ravel()],
        },
        "channel": {
            "type": "table",
            "alphabets": list(channel.input_sizes) + [channel.output_size],
            "kernel": [float(v) for v in channel.kernel.values.ravel()],
        },
    }
