"""Scheme assembly and evaluation of the achievability inequality families.

Builds the full per-letter joint over sources, common parts, auxiliaries,
field-valued codeword symbols, channel inputs and output, then walks every
sufficient-condition inequality: the two-user cooperative scheme, its
three-user extension, and the linear-code-augmented family with additive
parts (T axes) and uniform dither pairs (V axes, V3 = V1 + V2 mod q).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from itertools import chain, combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .common_parts import (
    CommonPartDecomposition,
    QAdditivePart,
    decompose,
    univariate_common_part,
)
from .models import MacChannel, NoiseSpec, SourceTriple
from .probability import (
    Alphabet,
    CondPmf,
    JointPmf,
    ProbabilityError,
    binary_entropy,
    independent,
)

SAT_TOL = 1e-9

PAIR_KEYS = ("12", "13", "23")
ROLE_PAIRS = ((1, 2, 3), (1, 3, 2), (2, 3, 1))  # (i, j, k) with {i,j} a pair


def subsets(items: Sequence) -> list[tuple]:
    """All subsets in deterministic (size, lexicographic) order."""
    return list(chain.from_iterable(combinations(items, r) for r in range(len(items) + 1)))


def _clamp_nonneg(val: float, what: str) -> float:
    # Both quantities are nonnegative in exact arithmetic; composition chains
    # leave float noise well below 1e-9.
    if val >= 0.0:
        return val
    if val > -1e-9:
        return 0.0
    raise ProbabilityError(f"{what} came out {val}; joint is inconsistent")


def pair_key(a: int, b: int) -> str:
    return "".join(str(x) for x in sorted((a, b)))


# -- report -----------------------------------------------------------------


@dataclass(frozen=True)
class RegionEntry:
    family: str
    roles: tuple[int, ...]
    a_set: tuple[int, ...]
    b_set: tuple[str, ...]
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def satisfied(self, tol: float = SAT_TOL) -> bool:
        return self.slack >= -tol


@dataclass(frozen=True)
class RegionReport:
    kind: str
    entries: tuple[RegionEntry, ...]

    def min_slack(self) -> float:
        return min(e.slack for e in self.entries)

    def all_satisfied(self, tol: float = SAT_TOL) -> bool:
        return all(e.satisfied(tol) for e in self.entries)

    def find(self, family: str, roles=None, a_set=None, b_set=None) -> list[RegionEntry]:
        out = []
        for e in self.entries:
            if e.family != family:
                continue
            if roles is not None and e.roles != tuple(roles):
                continue
            if a_set is not None and e.a_set != tuple(a_set):
                continue
            if b_set is not None and e.b_set != tuple(b_set):
                continue
            out.append(e)
        return out

    def to_csv(self, fileobj=None) -> str:
        """Serialize with fixed columns; returns the CSV text."""
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["family", "roles", "A", "B", "lhs_bits", "rhs_bits",
                    "slack_bits", "satisfied"])
        for e in self.entries:
            w.writerow([
                e.family,
                "".join(str(r) for r in e.roles),
                "".join(str(a) for a in e.a_set),
                "+".join(e.b_set),
                f"{e.lhs:.12g}",
                f"{e.rhs:.12g}",
                f"{e.slack:.12g}",
                int(e.satisfied()),
            ])
        text = buf.getvalue()
        if fileobj is not None:
            fileobj.write(text)
        return text


# -- entropy cache over one assembled joint ----------------------------------


class _Evaluator:
    """Memoized marginal entropies over a fixed joint; set-valued queries.

    Singleton axes are squeezed away up front: conditioning on a constant is
    a no-op, and dropping them cuts the dimension count of every reduction.
    """

    def __init__(self, joint: JointPmf, absent_ok: Iterable[str] = ()):
        keep_names = [a.name for a in joint.axes if a.size > 1]
        squeezed = set(joint.names) - set(keep_names)
        self.values = joint.values.reshape([a.size for a in joint.axes if a.size > 1])
        self.names = set(keep_names)
        self.absent_ok = set(absent_ok) | squeezed
        self._H: dict[frozenset, float] = {}
        self._pos = {n: i for i, n in enumerate(keep_names)}

    def _filter(self, names: Iterable[str]) -> frozenset:
        out = set()
        for n in names:
            if n in self.names:
                out.add(n)
            elif n not in self.absent_ok:
                raise ProbabilityError(f"missing axis {n!r} in assembled joint")
        return frozenset(out)

    def H(self, names: Iterable[str]) -> float:
        key = self._filter(names)
        got = self._H.get(key)
        if got is None:
            drop = tuple(i for n, i in self._pos.items() if n not in key)
            vals = self.values.sum(axis=drop) if drop else self.values
            v = vals.ravel()
            v = v[v > 0.0]
            got = max(float(-(v * np.log2(v)).sum()), 0.0) if v.size else 0.0
            self._H[key] = got
        return got

    def cond_H(self, a: Iterable[str], c: Iterable[str]) -> float:
        a, c = set(a), set(c)
        return _clamp_nonneg(self.H(a | c) - self.H(c), "conditional entropy")

    def cmi(self, a: Iterable[str], b: Iterable[str], c: Iterable[str]) -> float:
        a, b, c = set(a), set(b), set(c)
        val = self.H(a | c) + self.H(b | c) - self.H(a | b | c) - self.H(c)
        return _clamp_nonneg(val, "conditional mutual information")


# -- scheme distributions -----------------------------------------------------


@dataclass(frozen=True)
class SchemeDistributions:
    """Free distributions of the layered scheme.

    `u123` is the inner-layer pmf; `u_pair[b]` has shape (k_b, |U123|, |U_b|);
    `x_tables[i]` has shape (|S_i|, |U123|, |U_ij|, |U_ik|, q_v, |X_i|) with the
    pair axes in increasing other-index order.  The dither block is fixed
    internally: (V1, V2) uniform over F_q^2 and V3 = V1 + V2 mod q.
    """

    q: int
    u123: np.ndarray
    u_pair: Mapping[str, np.ndarray]
    x_tables: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.q < 1:
            raise ProbabilityError(f"field order must be >= 1, got {self.q}")
        object.__setattr__(self, "u123", np.asarray(self.u123, dtype=float))
        object.__setattr__(self, "u_pair",
                           {k: np.asarray(v, dtype=float) for k, v in self.u_pair.items()})
        object.__setattr__(self, "x_tables",
                           tuple(np.asarray(t, dtype=float) for t in self.x_tables))

    @property
    def u_sizes(self) -> dict[str, int]:
        d = {"123": int(self.u123.shape[0])}
        for b in PAIR_KEYS:
            d[b] = int(self.u_pair[b].shape[-1])
        return d

    def x_size(self, i: int) -> int:
        return int(self.x_tables[i - 1].shape[-1])


def _pair_axes_for(i: int) -> tuple[str, str]:
    others = sorted(set((1, 2, 3)) - {i})
    return pair_key(i, others[0]), pair_key(i, others[1])


def make_scheme(
    parts: CommonPartDecomposition,
    source_sizes: Sequence[int],
    x_sizes: Sequence[int],
    q: int = 2,
    u_sizes: Mapping[str, int] | None = None,
    x_equals_v: bool = True,
    rng: np.random.Generator | None = None,
) -> SchemeDistributions:
    """Build a scheme template: uniform auxiliaries, X_i = V_i or random tables."""
    u_sizes = dict(u_sizes or {})
    m123 = int(u_sizes.get("123", 1))
    u123 = np.full(m123, 1.0 / m123)
    u_pair = {}
    for b in PAIR_KEYS:
        mb = int(u_sizes.get(b, 1))
        kb = max(parts[b].k, 1)
        if rng is None:
            tab = np.full((kb, m123, mb), 1.0 / mb)
        else:
            tab = rng.random((kb, m123, mb))
            tab /= tab.sum(axis=-1, keepdims=True)
        u_pair[b] = tab
    x_tables = []
    for i in (1, 2, 3):
        b1, b2 = _pair_axes_for(i)
        shape = (source_sizes[i - 1], m123, int(u_sizes.get(b1, 1)),
                 int(u_sizes.get(b2, 1)), max(q, 1), x_sizes[i - 1])
        if x_equals_v:
            if x_sizes[i - 1] < max(q, 1):
                raise ProbabilityError(
                    f"X{i} alphabet smaller than field order; cannot set X=V")
            tab = np.zeros(shape)
            for v in range(max(q, 1)):
                tab[..., v, v] = 1.0
        elif rng is not None:
            tab = rng.random(shape)
            tab /= tab.sum(axis=-1, keepdims=True)
        else:
            tab = np.full(shape, 1.0 / x_sizes[i - 1])
        x_tables.append(tab)
    return SchemeDistributions(q, u123, u_pair, tuple(x_tables))


# -- assembly -----------------------------------------------------------------

W_AXES = ("W12", "W13", "W23", "W123")
T_AXES = ("T1", "T2", "T3")
V_AXES = ("V1", "V2", "V3")


def assemble_joint(
    source: SourceTriple,
    channel: MacChannel,
    scheme: SchemeDistributions,
    parts: CommonPartDecomposition | None = None,
    qpart: QAdditivePart | None = None,
) -> JointPmf:
    """Chain the full factorization into one joint PMF.

    Order: p(s) -> W axes -> T axes -> p(u123) -> p(u_b | w_b, u123) ->
    uniform (V1, V2) with V3 forced -> p(x_i | s_i, u123, u_ij, u_ik, v_i) ->
    channel.  When `qpart` is None the T axes are singletons; when q == 1 the
    V axes are singletons (the degenerate reduction to the unaugmented scheme).
    """
    if parts is None:
        parts = decompose(source)
    j = source.joint
    # common-part axes, each a deterministic per-letter function of one source
    for key, name in (("12", "W12"), ("13", "W13"), ("23", "W23"), ("123", "W123")):
        part = parts[key]
        member = part.members[0]
        table = part.maps[member]
        j = j.attach_function((member,), lambda s, t=table: t[s],
                              Alphabet(name, max(part.k, 1)))
    # additive part axes
    q = scheme.q
    if qpart is not None:
        if qpart.q != q and q != 1:
            raise ProbabilityError(f"additive part over F_{qpart.q} but scheme q={q}")
        for i, name in enumerate(T_AXES):
            tmap = qpart.maps[i]
            j = j.attach_function((f"S{i+1}",), lambda s, t=tmap: t[s],
                                  Alphabet(name, qpart.q))
    else:
        for i, name in enumerate(T_AXES):
            j = j.attach_function((f"S{i+1}",), lambda s: 0, Alphabet(name, 1))
    # auxiliaries
    j = j.compose(independent(Alphabet("U123", scheme.u123.shape[0]), scheme.u123))
    for b in PAIR_KEYS:
        tab = scheme.u_pair[b]
        kb = max(parts[b].k, 1)
        if tab.shape[0] != kb:
            raise ProbabilityError(
                f"u_pair[{b}] keyed on {tab.shape[0]} part values, source has {kb}")
        cond = CondPmf(
            (Alphabet(f"W{b}", kb), Alphabet("U123", tab.shape[1])),
            (Alphabet(f"U{b}", tab.shape[2]),),
            tab,
        )
        j = j.compose(cond)
    # dither block: uniform pair, third forced
    qv = max(q, 1)
    j = j.compose(independent(Alphabet("V1", qv), np.full(qv, 1.0 / qv)))
    j = j.compose(independent(Alphabet("V2", qv), np.full(qv, 1.0 / qv)))
    j = j.attach_function(("V1", "V2"), lambda a, b: (a + b) % qv, Alphabet("V3", qv))
    # encoder maps
    for i in (1, 2, 3):
        b1, b2 = _pair_axes_for(i)
        tab = scheme.x_tables[i - 1]
        cond = CondPmf(
            (
                Alphabet(f"S{i}", tab.shape[0]),
                Alphabet("U123", tab.shape[1]),
                Alphabet(f"U{b1}", tab.shape[2]),
                Alphabet(f"U{b2}", tab.shape[3]),
                Alphabet(f"V{i}", tab.shape[4]),
            ),
            (Alphabet(f"X{i}", tab.shape[5]),),
            tab,
        )
        j = j.compose(cond)
    j = j.compose(channel.kernel)
    total = float(j.values.sum())
    if abs(total - 1.0) > 1e-10:
        raise ProbabilityError(f"assembled joint off normalization by {total - 1.0}")
    return j


# -- inequality families --------------------------------------------------------


def _w_set(b_set: Iterable[str]) -> set[str]:
    return {f"W{b}" for b in b_set}


def _u_set(b_set: Iterable[str]) -> set[str]:
    return {f"U{b}" for b in b_set}


def _t_set(a_set: Iterable[int]) -> set[str]:
    return {f"T{a}" for a in a_set}


def _v_set(a_set: Iterable[int]) -> set[str]:
    return {f"V{a}" for a in a_set}


ALL_U = {"U123", "U12", "U13", "U23"}


def eval_prop1(joint: JointPmf) -> RegionReport:
    """The three-user cooperative-scheme family: 3 + 24 + 8 + 1 entries."""
    ev = _Evaluator(joint, absent_ok=set(T_AXES) | set(V_AXES))
    entries = []
    for i in (1, 2, 3):
        jj, kk = sorted(set((1, 2, 3)) - {i})
        lhs = ev.cond_H({f"S{i}"}, {f"S{jj}", f"S{kk}"})
        cond = {f"S{jj}", f"S{kk}", f"X{jj}", f"X{kk}"} | ALL_U
        rhs = ev.cmi({f"X{i}"}, {"Y"}, cond)
        entries.append(RegionEntry("single", (i,), (), (), lhs, rhs))
    for (i, jj, kk) in ROLE_PAIRS:
        for b_set in subsets(PAIR_KEYS):
            lhs = ev.cond_H({f"S{i}", f"S{jj}"}, {f"S{kk}"} | _w_set(b_set))
            cond = ({f"S{kk}", "U123", f"U{pair_key(i, kk)}", f"U{pair_key(jj, kk)}",
                     f"X{kk}"} | _w_set(b_set) | _u_set(b_set))
            rhs = ev.cmi({f"X{i}", f"X{jj}"}, {"Y"}, cond)
            entries.append(RegionEntry("pair", (i, jj, kk), (), b_set, lhs, rhs))
    for b_set in subsets(PAIR_KEYS):
        lhs = ev.cond_H({"S1", "S2", "S3"}, {"W123"} | _w_set(b_set))
        cond = {"W123", "U123"} | _w_set(b_set) | _u_set(b_set)
        rhs = ev.cmi({"X1", "X2", "X3"}, {"Y"}, cond)
        entries.append(RegionEntry("triple", (1, 2, 3), (), b_set, lhs, rhs))
    lhs = ev.H({"S1", "S2", "S3"})
    rhs = ev.cmi({"X1", "X2", "X3"}, {"Y"}, set())
    entries.append(RegionEntry("total", (1, 2, 3), (), (), lhs, rhs))
    return RegionReport("prop1", tuple(entries))


def eval_thm1(joint: JointPmf) -> RegionReport:
    """The linear-code-augmented family: 3 + 192 + 64 + 8 entries."""
    ev = _Evaluator(joint)
    entries = []
    a_subsets = subsets((1, 2, 3))
    b_subsets = subsets(PAIR_KEYS)
    for i in (1, 2, 3):
        jj, kk = sorted(set((1, 2, 3)) - {i})
        lhs = ev.cond_H({f"S{i}"}, {f"S{jj}", f"S{kk}"})
        cond = ({f"S{jj}", f"S{kk}", f"X{jj}", f"X{kk}", "V1", "V2", "V3"} | ALL_U)
        rhs = ev.cmi({f"X{i}"}, {"Y"}, cond)
        entries.append(RegionEntry("single", (i,), (), (), lhs, rhs))
    for (i, jj, kk) in ROLE_PAIRS:
        for b_set in b_subsets:
            for a_set in a_subsets:
                lhs = ev.cond_H({f"S{i}", f"S{jj}"},
                                {f"S{kk}"} | _w_set(b_set) | _t_set(a_set))
                cond = ({f"S{kk}", "U123", f"U{pair_key(i, kk)}",
                         f"U{pair_key(jj, kk)}", f"V{kk}", f"X{kk}"}
                        | _w_set(b_set) | _u_set(b_set)
                        | _t_set(a_set) | _v_set(a_set))
                rhs = ev.cmi({f"X{i}", f"X{jj}"}, {"Y"}, cond)
                entries.append(RegionEntry("pair", (i, jj, kk), a_set, b_set, lhs, rhs))
    for b_set in b_subsets:
        for a_set in a_subsets:
            lhs = ev.cond_H({"S1", "S2", "S3"},
                            {"W123"} | _w_set(b_set) | _t_set(a_set))
            cond = ({"W123", "U123"} | _w_set(b_set) | _u_set(b_set)
                    | _t_set(a_set) | _v_set(a_set))
            rhs = ev.cmi({"X1", "X2", "X3"}, {"Y"}, cond)
            entries.append(RegionEntry("triple", (1, 2, 3), a_set, b_set, lhs, rhs))
    for a_set in a_subsets:
        lhs = ev.cond_H({"S1", "S2", "S3"}, _t_set(a_set))
        rhs = ev.cmi({"X1", "X2", "X3"}, {"Y"}, _t_set(a_set) | _v_set(a_set))
        entries.append(RegionEntry("total", (1, 2, 3), a_set, (), lhs, rhs))
    return RegionReport("thm1", tuple(entries))


# -- two-user calibration family ------------------------------------------------


def eval_two_user_ces(
    source: JointPmf,
    channel: CondPmf,
    p_u: np.ndarray,
    x1_table: np.ndarray,
    x2_table: np.ndarray,
) -> RegionReport:
    """The two-user cooperative family: four inequalities.

    `source` is a joint over (S1, S2); `channel` maps (X1, X2) to Y;
    `x?_table[s, u, x]` are the encoder conditionals.
    """
    if set(source.names) != {"S1", "S2"}:
        raise ProbabilityError("two-user source must have axes S1, S2")
    part = univariate_common_part(source, ("S1", "S2"))
    j = source
    table = part.maps["S1"]
    j = j.attach_function(("S1",), lambda s: table[s], Alphabet("W", max(part.k, 1)))
    p_u = np.asarray(p_u, dtype=float)
    j = j.compose(independent(Alphabet("U", p_u.shape[0]), p_u))
    for i, tab in ((1, np.asarray(x1_table, float)), (2, np.asarray(x2_table, float))):
        cond = CondPmf(
            (Alphabet(f"S{i}", tab.shape[0]), Alphabet("U", tab.shape[1])),
            (Alphabet(f"X{i}", tab.shape[2]),),
            tab,
        )
        j = j.compose(cond)
    j = j.compose(channel)
    ev = _Evaluator(j)
    entries = [
        RegionEntry("single", (1,), (), (),
                    ev.cond_H({"S1"}, {"S2"}),
                    ev.cmi({"X1"}, {"Y"}, {"X2", "S2", "U"})),
        RegionEntry("single", (2,), (), (),
                    ev.cond_H({"S2"}, {"S1"}),
                    ev.cmi({"X2"}, {"Y"}, {"X1", "S1", "U"})),
        RegionEntry("pair", (1, 2), (), (),
                    ev.cond_H({"S1", "S2"}, {"W"}),
                    ev.cmi({"X1", "X2"}, {"Y"}, {"W", "U"})),
        RegionEntry("total", (1, 2), (), (),
                    ev.H({"S1", "S2"}),
                    ev.cmi({"X1", "X2"}, {"Y"}, set())),
    ]
    return RegionReport("two-user", tuple(entries))


# -- benchmark-channel reductions ------------------------------------------------


def identity_qpart(q: int = 2) -> QAdditivePart:
    """T_i = S_i for binary parity sources (S3 = S1 + S2 mod q on {0,1})."""
    ident = tuple(range(2))
    return QAdditivePart(q, (ident, ident, ident))


def x_equals_v_tables(q: int = 2) -> tuple[np.ndarray, ...]:
    """Per-encoder conditionals p(x | s, v) that copy the dithered symbol."""
    tab = np.zeros((2, q, q))
    for v in range(q):
        tab[:, v, v] = 1.0
    return (tab.copy(), tab.copy(), tab.copy())


def reduced_scheme(
    parts: CommonPartDecomposition,
    x_sv_tables: Sequence[np.ndarray],
    q: int = 2,
) -> SchemeDistributions:
    """Degenerate-auxiliary scheme whose encoders see only (S_i, V_i)."""
    x_tables = []
    for tab in x_sv_tables:
        tab = np.asarray(tab, dtype=float)
        x_tables.append(tab[:, None, None, None, :, :])
    u_pair = {b: np.ones((max(parts[b].k, 1), 1, 1)) for b in PAIR_KEYS}
    return SchemeDistributions(q, np.array([1.0]), u_pair, tuple(x_tables))


def reduced_example2_report(
    sigma: float,
    gamma: float,
    delta: float,
    x_sv_tables: Sequence[np.ndarray] | None = None,
) -> RegionReport:
    """The four simplified inequalities for the benchmark source and channel.

    Left sides are the closed forms {h(gamma), h(sigma),
    h(gamma)+h(sigma)-h(sigma*gamma), h(gamma)+h(sigma)} with a*b the binary
    convolution; right sides are evaluated exactly on the assembled joint with
    T_i = S_i, q = 2, and degenerate auxiliaries.
    """
    from .models import example2_channel, example2_source

    source = example2_source(sigma, gamma)
    channel = example2_channel(NoiseSpec(delta))
    if x_sv_tables is None:
        x_sv_tables = x_equals_v_tables(2)
    parts = decompose(source)
    scheme = reduced_scheme(parts, x_sv_tables, q=2)
    joint = assemble_joint(source, channel, scheme, parts, identity_qpart(2))
    ev = _Evaluator(joint)
    conv = sigma * (1 - gamma) + gamma * (1 - sigma)
    hs, hg, hc = binary_entropy(sigma), binary_entropy(gamma), binary_entropy(conv)
    entries = [
        RegionEntry("reduced", (2, 3, 1), (), (), hg,
                    ev.cmi({"X2", "X3"}, {"Y"}, {"X1", "S1", "V1"})),
        RegionEntry("reduced", (1, 2, 3), (), (), hs,
                    ev.cmi({"X1", "X2"}, {"Y"}, {"X3", "S3", "V3"})),
        RegionEntry("reduced", (1, 3, 2), (), (), hg + hs - hc,
                    ev.cmi({"X1", "X3"}, {"Y"}, {"X2", "S2", "V2"})),
        RegionEntry("reduced", (1, 2, 3), (), (), hg + hs,
                    ev.cmi({"X1", "X2", "X3"}, {"Y"}, set())),
    ]
    return RegionReport("reduced", tuple(entries))


def ces_outer_objective(
    source: SourceTriple,
    channel: MacChannel,
    x_tables: Sequence[np.ndarray],
) -> float:
    """I(X1 X2 X3; Y) under the product factorization p(s) prod_i p(x_i|s_i)."""
    j = source.joint
    for i, tab in enumerate(x_tables, start=1):
        tab = np.asarray(tab, dtype=float)
        cond = CondPmf(
            (Alphabet(f"S{i}", tab.shape[0]),),
            (Alphabet(f"X{i}", tab.shape[1]),),
            tab,
        )
        j = j.compose(cond)
    j = j.compose(channel.kernel)
    return j.mutual_information({"X1", "X2", "X3"}, {"Y"})


@dataclass(frozen=True)
class UniformOutputWitness:
    is_uniform: bool
    q_vector: tuple[float, float, float]
    violation: float


def uniform_output_witness(
    joint: JointPmf,
    delta: float,
    tol: float = 1e-9,
) -> UniformOutputWitness:
    """Check the exact uniform-output characterization for the benchmark channel.

    Computes q(i) = P((X1 xor X2) +4 X3 = i); the output is uniform iff
    q(1) = 0 and q(0) = q(2) = 1/2 (valid only away from delta = 1/4, which
    is rejected).
    """
    NoiseSpec(delta)  # validates the delta != 1/4 constraint
    px = joint.restrict_order(("X1", "X2", "X3"))
    qv = [0.0, 0.0, 0.0]
    for (x1, x2, x3), p in np.ndenumerate(px):
        qv[((x1 ^ x2) + x3) % 4] += float(p)
    py = joint.restrict_order(("Y",))
    violation = float(np.abs(py - 0.25).max())
    is_uniform = abs(qv[1]) <= tol and abs(qv[0] - 0.5) <= tol and abs(qv[2] - 0.5) <= tol
    return UniformOutputWitness(is_uniform, (qv[0], qv[1], qv[2]), violation)
