"""Common-part extraction for source triples.

Univariate common parts come from connected components of the support graph:
two symbols are linked when they co-occur with positive probability, and the
component index is the finest variable computable from every member alone.
Additive common parts over a prime field are found by exhaustive search over
per-letter maps, deduplicated up to affine equivalence.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .models import SourceTriple
from .probability import Alphabet, JointPmf, ProbabilityError

DEFAULT_SEARCH_CAP = 6


class CommonPartError(ProbabilityError):
    pass


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    return all(q % d for d in range(2, int(q**0.5) + 1))


@dataclass(frozen=True)
class CommonPart:
    """A univariate common part: per-member symbol -> component label maps."""

    members: tuple[str, ...]
    k: int
    maps: dict[str, tuple[int, ...]]

    def map_for(self, member: str) -> tuple[int, ...]:
        return self.maps[member]


@dataclass(frozen=True)
class QAdditivePart:
    """Maps t_i into F_q with t3(S3) = t1(S1) + t2(S2) mod q almost surely."""

    q: int
    maps: tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]

    def violation_probability(self, source: SourceTriple) -> float:
        j = source.joint.values
        t1, t2, t3 = self.maps
        total = 0.0
        for (s1, s2, s3), p in np.ndenumerate(j):
            if p > 0 and t3[s3] != (t1[s1] + t2[s2]) % self.q:
                total += p
        return total


@dataclass(frozen=True)
class CommonPartDecomposition:
    """All four univariate parts of a triple, keyed '12', '13', '23', '123'."""

    parts: dict[str, CommonPart]

    def __getitem__(self, key: str) -> CommonPart:
        return self.parts[key]

    @property
    def pair_keys(self) -> tuple[str, ...]:
        return ("12", "13", "23")


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def univariate_common_part(joint: JointPmf, members: Sequence[str]) -> CommonPart:
    """Maximal common part of the named axes via support-graph components.

    Symbols with zero marginal probability receive label 0; they never
    constrain the almost-sure equality.
    """
    members = tuple(members)
    if len(members) < 2:
        raise CommonPartError("a common part needs at least two members")
    marg = joint.marginalize(members)
    vals = marg.restrict_order(members)
    if not np.any(vals > 0):
        raise CommonPartError("empty support")
    sizes = [joint.axis(m).size for m in members]
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    uf = _UnionFind(int(sum(sizes)))
    for combo in zip(*np.nonzero(vals > 0)):
        nodes = [int(offsets[j] + combo[j]) for j in range(len(members))]
        for a, b in zip(nodes, nodes[1:]):
            uf.union(a, b)
    # Components are numbered by first appearance over positive-probability
    # symbols, scanning members in order and symbols in order.
    marginals = [vals.sum(axis=tuple(i for i in range(len(members)) if i != j))
                 for j in range(len(members))]
    label_of_root: dict[int, int] = {}
    for j, m in enumerate(members):
        for s in range(sizes[j]):
            if marginals[j][s] > 0:
                root = uf.find(int(offsets[j] + s))
                if root not in label_of_root:
                    label_of_root[root] = len(label_of_root)
    k = len(label_of_root)
    maps: dict[str, tuple[int, ...]] = {}
    for j, m in enumerate(members):
        lab = []
        for s in range(sizes[j]):
            if marginals[j][s] > 0:
                lab.append(label_of_root[uf.find(int(offsets[j] + s))])
            else:
                lab.append(0)
        maps[m] = tuple(lab)
    return CommonPart(members, k, maps)


def decompose(source: SourceTriple) -> CommonPartDecomposition:
    """Univariate parts of every pair and of the full triple."""
    j = source.joint
    parts = {
        "12": univariate_common_part(j, ("S1", "S2")),
        "13": univariate_common_part(j, ("S1", "S3")),
        "23": univariate_common_part(j, ("S2", "S3")),
        "123": univariate_common_part(j, ("S1", "S2", "S3")),
    }
    return CommonPartDecomposition(parts)


def _nontrivial(t: Sequence[int], marginal: np.ndarray) -> bool:
    seen = {t[s] for s in range(len(t)) if marginal[s] > 0}
    return len(seen) >= 2


def _canonical_key(
    maps: tuple[tuple[int, ...], ...],
    q: int,
    pos_masks: Sequence[np.ndarray],
) -> tuple:
    """Lexicographic minimum over affine relabelings a*t + c_i, c3 = c1 + c2."""
    best = None
    for a in range(1, q):
        for c1 in range(q):
            for c2 in range(q):
                cs = (c1, c2, (c1 + c2) % q)
                key = tuple(
                    tuple(
                        (a * maps[i][s] + cs[i]) % q
                        for s in range(len(maps[i]))
                        if pos_masks[i][s]
                    )
                    for i in range(3)
                )
                if best is None or key < best:
                    best = key
    return best


def find_q_additive_parts(
    source: SourceTriple,
    q: int,
    cap: int = DEFAULT_SEARCH_CAP,
) -> list[QAdditivePart]:
    """All q-additive common parts up to affine equivalence.

    Exhausts t1 over F_q^{|S1|}; for each t1, t2 and t3 are forced on the
    support up to one additive constant per connected component of the
    (S2, S3) co-occurrence graph, which is enumerated.
    """
    if not _is_prime(q):
        raise CommonPartError(f"q must be prime, got {q}")
    sizes = source.sizes
    if max(sizes) > cap:
        raise CommonPartError(f"alphabet sizes {sizes} exceed search cap {cap}")
    vals = source.joint.values
    support = [tuple(int(v) for v in idx) for idx in zip(*np.nonzero(vals > 0))]
    n1, n2, n3 = sizes
    pos = [
        np.asarray(vals.sum(axis=(1, 2)) > 0),
        np.asarray(vals.sum(axis=(0, 2)) > 0),
        np.asarray(vals.sum(axis=(0, 1)) > 0),
    ]

    # Nodes of the propagation graph: t2-symbols then t3-symbols.
    def node2(s2):
        return s2

    def node3(s3):
        return n2 + s3

    adj: dict[int, list[tuple[int, int, int]]] = {i: [] for i in range(n2 + n3)}
    for s1, s2, s3 in support:
        # t3[s3] - t2[s2] = t1[s1]  (mod q)
        adj[node2(s2)].append((node3(s3), +1, s1))
        adj[node3(s3)].append((node2(s2), -1, s1))

    marginals = [vals.sum(axis=tuple(j for j in range(3) if j != i)) for i in range(3)]
    out: list[QAdditivePart] = []
    seen: set[tuple] = set()
    for t1 in product(range(q), repeat=n1):
        # Propagate offsets relative to a zero root in each component.
        val = [None] * (n2 + n3)
        components: list[list[int]] = []
        consistent = True
        for start in range(n2 + n3):
            if val[start] is not None or not adj[start]:
                continue
            comp = [start]
            val[start] = 0
            stack = [start]
            while stack:
                u = stack.pop()
                for v, sign, s1 in adj[u]:
                    # edge from t2-node to t3-node carries t3 = t2 + t1[s1]
                    want = (val[u] + sign * t1[s1]) % q
                    if val[v] is None:
                        val[v] = want
                        comp.append(v)
                        stack.append(v)
                    elif val[v] != want:
                        consistent = False
            components.append(comp)
        if not consistent:
            continue
        for shifts in product(range(q), repeat=len(components)):
            t2 = [0] * n2
            t3 = [0] * n3
            for comp, c in zip(components, shifts):
                for node in comp:
                    v = (val[node] + c) % q
                    if node < n2:
                        t2[node] = v
                    else:
                        t3[node - n2] = v
            maps = (tuple(t1), tuple(t2), tuple(t3))
            if not all(_nontrivial(maps[i], marginals[i]) for i in range(3)):
                continue
            key = _canonical_key(maps, q, pos)
            if key in seen:
                continue
            seen.add(key)
            out.append(QAdditivePart(q, maps))
    out.sort(key=lambda p: _canonical_key(p.maps, q, pos))
    return out


def attach_part(joint: JointPmf, part: CommonPart, axis_name: str) -> JointPmf:
    """Attach a common part as a new axis, computed from its first member."""
    member = part.members[0]
    table = part.maps[member]
    size = max(part.k, 1)
    return joint.attach_function((member,), lambda s: table[s],
                                 Alphabet(axis_name, size))
