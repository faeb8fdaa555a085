"""Exact finite-probability algebra over named axes.

Joint PMFs are dense numpy arrays whose dimensions carry names (Alphabet
labels).  All set-valued operations match axes by name, never by position,
because the inequality families downstream permute the roles of the users.
Entropies are in bits throughout, with the convention 0*log(0) = 0.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

NORM_TOL = 1e-12
CLAMP_TOL = 1e-12
MAX_AXIS_SIZE = 16
_LETTERS = string.ascii_letters


class ProbabilityError(ValueError):
    """Invalid distribution, axis mismatch, or domain violation."""


@dataclass(frozen=True)
class Alphabet:
    """A named finite alphabet: `name` identifies the axis, `size` its cardinality."""

    name: str
    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ProbabilityError(f"alphabet {self.name!r} must have size >= 1")
        if self.size > MAX_AXIS_SIZE:
            raise ProbabilityError(
                f"alphabet {self.name!r} exceeds per-axis cap {MAX_AXIS_SIZE}"
            )
        if self.labels is not None:
            if len(self.labels) != self.size:
                raise ProbabilityError(f"labels of {self.name!r} must match size")
            if len(set(self.labels)) != self.size:
                raise ProbabilityError(f"labels of {self.name!r} must be distinct")


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(np.asarray(arr, dtype=float))
    out.setflags(write=False)
    return out


def _names(axes: Sequence[Alphabet]) -> tuple[str, ...]:
    return tuple(a.name for a in axes)


@dataclass(frozen=True)
class JointPmf:
    """Dense joint PMF over an ordered tuple of named alphabets."""

    axes: tuple[Alphabet, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        vals = _as_readonly(self.values)
        object.__setattr__(self, "values", vals)
        names = _names(self.axes)
        if len(set(names)) != len(names):
            raise ProbabilityError(f"duplicate axis names: {names}")
        shape = tuple(a.size for a in self.axes)
        if vals.shape != shape:
            raise ProbabilityError(f"values shape {vals.shape} != axes shape {shape}")
        if vals.size and vals.min() < -NORM_TOL:
            raise ProbabilityError("negative probability entry")
        total = float(vals.sum())
        if abs(total - 1.0) > 1e-10:
            raise ProbabilityError(f"probabilities sum to {total}, expected 1")

    # -- axis bookkeeping ---------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return _names(self.axes)

    def axis(self, name: str) -> Alphabet:
        for a in self.axes:
            if a.name == name:
                return a
        raise ProbabilityError(f"unknown axis {name!r}; have {self.names}")

    def _positions(self, names: Iterable[str]) -> list[int]:
        index = {a.name: i for i, a in enumerate(self.axes)}
        out = []
        for n in names:
            if n not in index:
                raise ProbabilityError(f"unknown axis {n!r}; have {self.names}")
            out.append(index[n])
        return out

    # -- core operations ----------------------------------------------------

    def marginalize(self, keep: Iterable[str]) -> "JointPmf":
        """Sum out all axes not named in `keep`, preserving original axis order."""
        keep = set(keep)
        self._positions(keep)  # validate names
        kept = [a for a in self.axes if a.name in keep]
        drop = tuple(i for i, a in enumerate(self.axes) if a.name not in keep)
        vals = self.values.sum(axis=drop) if drop else self.values
        return JointPmf(tuple(kept), vals)

    def compose(self, k: "CondPmf") -> "JointPmf":
        """Chain a conditional onto this joint: p(a, b) = p(a) * k(b | a restricted)."""
        given = _names(k.given_axes)
        new = _names(k.target_axes)
        collision = set(new) & set(self.names)
        if collision:
            raise ProbabilityError(f"axis collision on compose: {sorted(collision)}")
        for g in k.given_axes:
            if g.size != self.axis(g.name).size:
                raise ProbabilityError(
                    f"size mismatch on {g.name!r}: {g.size} vs {self.axis(g.name).size}"
                )
        letters = {n: _LETTERS[i] for i, n in enumerate(self.names)}
        for j, n in enumerate(new):
            letters[n] = _LETTERS[len(self.names) + j]
        j_sub = "".join(letters[n] for n in self.names)
        k_sub = "".join(letters[n] for n in given + new)
        out = np.einsum(f"{j_sub},{k_sub}->{j_sub}{''.join(letters[n] for n in new)}",
                        self.values, k.values)
        return JointPmf(self.axes + k.target_axes, out)

    def attach_function(
        self,
        src: Iterable[str],
        f: Callable[..., int],
        new_axis: Alphabet,
    ) -> "JointPmf":
        """Attach a new axis that is a deterministic function of the `src` axes.

        `f` receives one symbol index per src axis (in the order given) and must
        return a value in range(new_axis.size) for every combination.
        """
        src = list(src)
        if new_axis.name in self.names:
            raise ProbabilityError(f"axis collision: {new_axis.name!r}")
        src_alpha = [self.axis(n) for n in src]
        table = np.zeros([a.size for a in src_alpha] + [new_axis.size], dtype=float)
        for combo in np.ndindex(*(a.size for a in src_alpha)):
            w = f(*combo)
            if not (isinstance(w, (int, np.integer)) and 0 <= w < new_axis.size):
                raise ProbabilityError(
                    f"map not total into {new_axis.name!r}: f{combo} = {w!r}"
                )
            table[combo + (int(w),)] = 1.0
        cond = CondPmf(tuple(src_alpha), (new_axis,), table)
        return self.compose(cond)

    def restrict_order(self, names: Sequence[str]) -> np.ndarray:
        """Values of the marginal over `names`, with axes permuted into that order."""
        m = self.marginalize(names)
        perm = m._positions(names)
        return np.transpose(m.values, perm)

    # -- information measures -------------------------------------------------

    def entropy(self, over: Iterable[str] | None = None) -> float:
        """Shannon entropy (bits) of the marginal over `over` (all axes if None)."""
        vals = self.values if over is None else self.marginalize(over).values
        return _entropy_bits(vals)

    def conditional_entropy(self, a: Iterable[str], c: Iterable[str]) -> float:
        """H(A | C) = H(A, C) - H(C), nonnegative up to accumulation error."""
        a, c = set(a), set(c)
        if a & c:
            raise ProbabilityError(f"overlapping sets: {sorted(a & c)}")
        return _clamp(self.entropy(a | c) - (self.entropy(c) if c else 0.0))

    def mutual_information(
        self,
        a: Iterable[str],
        b: Iterable[str],
        c: Iterable[str] = (),
    ) -> float:
        """I(A; B | C) in bits, clamped to 0 when within -1e-12 of zero."""
        a, b, c = set(a), set(b), set(c)
        for x, y in (((a), (b)), ((a), (c)), ((b), (c))):
            if x & y:
                raise ProbabilityError(f"overlapping sets: {sorted(x & y)}")
        if not a or not b:
            return 0.0
        h_ac = self.entropy(a | c)
        h_bc = self.entropy(b | c)
        h_abc = self.entropy(a | b | c)
        h_c = self.entropy(c) if c else 0.0
        return _clamp(h_ac + h_bc - h_abc - h_c)


@dataclass(frozen=True)
class CondPmf:
    """Conditional PMF: one distribution over target_axes per given_axes cell."""

    given_axes: tuple[Alphabet, ...]
    target_axes: tuple[Alphabet, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "given_axes", tuple(self.given_axes))
        object.__setattr__(self, "target_axes", tuple(self.target_axes))
        vals = _as_readonly(self.values)
        object.__setattr__(self, "values", vals)
        names = _names(self.given_axes) + _names(self.target_axes)
        if len(set(names)) != len(names):
            raise ProbabilityError(f"duplicate axis names: {names}")
        shape = tuple(a.size for a in self.given_axes) + tuple(
            a.size for a in self.target_axes
        )
        if vals.shape != shape:
            raise ProbabilityError(f"values shape {vals.shape} != expected {shape}")
        if vals.size and vals.min() < -NORM_TOL:
            raise ProbabilityError("negative probability entry")
        tgt_axes = tuple(range(len(self.given_axes), len(shape)))
        sums = vals.sum(axis=tgt_axes) if tgt_axes else vals
        if not np.allclose(sums, 1.0, atol=1e-10, rtol=0.0):
            bad = float(np.abs(np.asarray(sums) - 1.0).max())
            raise ProbabilityError(f"conditional slice off by {bad} from 1")

    @property
    def given_names(self) -> tuple[str, ...]:
        return _names(self.given_axes)

    @property
    def target_names(self) -> tuple[str, ...]:
        return _names(self.target_axes)


def independent(axis: Alphabet, pmf: np.ndarray) -> CondPmf:
    """A conditional with no conditioning: a free marginal to compose in."""
    return CondPmf((), (axis,), np.asarray(pmf, dtype=float))


def joint_from_array(names_sizes: Sequence[tuple[str, int]], values) -> JointPmf:
    axes = tuple(Alphabet(n, s) for n, s in names_sizes)
    return JointPmf(axes, np.asarray(values, dtype=float))


# -- scalar entropy helpers ----------------------------------------------------


def _clamp(x: float) -> float:
    if -CLAMP_TOL <= x < 0.0:
        return 0.0
    return x


def _entropy_bits(vals: np.ndarray) -> float:
    v = np.asarray(vals, dtype=float).ravel()
    v = v[v > 0.0]
    if v.size == 0:
        return 0.0
    return _clamp(float(-(v * np.log2(v)).sum()))


def entropy_of(pmf) -> float:
    """Entropy in bits of a bare probability vector (0 log 0 = 0)."""
    return _entropy_bits(np.asarray(pmf, dtype=float))


def binary_entropy(p: float) -> float:
    """h(p) = -p log2 p - (1-p) log2 (1-p), in bits."""
    if not 0.0 <= p <= 1.0:
        raise ProbabilityError(f"binary_entropy domain violation: {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p))


def inverse_binary_entropy(y: float, tol: float = 1e-12) -> float:
    """The unique p in [0, 1/2] with h(p) = y, found by bisection.

    Returns the lower branch; the upper branch is 1 minus the result.
    """
    if not 0.0 <= y <= 1.0:
        raise ProbabilityError(f"inverse_binary_entropy domain violation: {y}")
    if y == 0.0:
        return 0.0
    if y == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
