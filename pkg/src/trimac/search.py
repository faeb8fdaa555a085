"""Optimization over free scheme distributions.

Everything here is grid-constrained coordinate ascent with deterministic
tie-breaking (first index wins), seeded restarts, and a coarse-to-fine step
chain so that halving the requested step can never decrease the best value.
No claim of global optimality is made anywhere; results are exact
re-evaluations of explicit witnesses.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .models import MacChannel, NoiseSpec, SourceTriple
from .probability import ProbabilityError, binary_entropy, inverse_binary_entropy
from .regions import (
    RegionReport,
    SchemeDistributions,
    assemble_joint,
    eval_thm1,
    make_scheme,
    x_equals_v_tables,
)
from .common_parts import decompose, find_q_additive_parts


@dataclass(frozen=True)
class GridSpec:
    step: float = 1 / 64
    restarts: int = 32
    max_iters: int = 500
    tol: float = 1e-9
    seed: int = 2024

    def __post_init__(self):
        if not 0.0 < self.step <= 0.5:
            raise ProbabilityError(f"step must be in (0, 1/2], got {self.step}")
        if self.restarts < 0 or self.max_iters < 1:
            raise ProbabilityError("restart/iteration counts must be positive")


@dataclass(frozen=True)
class SearchResult:
    best_value: float
    tables: tuple
    trace: tuple[float, ...]
    report: RegionReport | None = None


def gamma_star(delta: float) -> float:
    """The boundary parameter: the p in [0, 1/2] with h(p) = 2 - H(N_delta)."""
    noise = NoiseSpec(delta)
    target = 2.0 - noise.entropy()
    assert 0.0 <= target <= 1.0, "2 - H(N) must lie in [0, 1] by construction"
    return inverse_binary_entropy(target, tol=1e-12)


# -- generic row-wise coordinate ascent ----------------------------------------


def _step_chain(step: float) -> list[float]:
    """Requested step, preceded by its repeated doublings up to >= 1/8."""
    levels = [step]
    while levels[-1] < 0.125:
        levels.append(levels[-1] * 2)
    return list(reversed(levels))


def _simplex_grid(dim: int, step: float) -> np.ndarray:
    """All pmfs of length `dim` on the step grid, lexicographic order."""
    m = max(int(round(1.0 / step)), 1)
    if dim == 1:
        return np.ones((1, 1))
    if dim == 2:
        ks = np.arange(m + 1)
        return np.stack([1.0 - ks / m, ks / m], axis=1)
    pts = []
    for combo in product(range(m + 1), repeat=dim - 1):
        if sum(combo) <= m:
            rest = m - sum(combo)
            pts.append([c / m for c in combo] + [rest / m])
    return np.asarray(pts)


def _snap_rows(rows: list[np.ndarray], step: float) -> list[np.ndarray]:
    """Round each pmf row onto the step grid, renormalizing exactly."""
    m = max(int(round(1.0 / step)), 1)
    out = []
    for r in rows:
        k = np.floor(np.asarray(r) * m + 0.5).astype(int)
        k = np.maximum(k, 0)
        # repair the total to m by adjusting the largest coordinate
        diff = m - int(k.sum())
        k[int(np.argmax(k))] += diff
        if k.min() < 0:  # pathological rounding; fall back to point mass
            k = np.zeros_like(k)
            k[int(np.argmax(r))] = m
        out.append(k / m)
    return out


def _coordinate_ascent(
    objective: Callable[[list[np.ndarray]], float],
    rows: list[np.ndarray],
    step: float,
    max_iters: int,
) -> tuple[float, list[np.ndarray]]:
    """Exhaustive single-row updates until a full sweep makes no strict gain."""
    rows = [np.asarray(r, dtype=float) for r in rows]
    best = objective(rows)
    grids = {len(r): _simplex_grid(len(r), step) for r in rows}
    for _ in range(max_iters):
        improved = False
        for ri in range(len(rows)):
            grid = grids[len(rows[ri])]
            vals = np.empty(len(grid))
            saved = rows[ri]
            for gi in range(len(grid)):
                rows[ri] = grid[gi]
                vals[gi] = objective(rows)
            gi = int(np.argmax(vals))
            if vals[gi] > best + 1e-15:
                best = float(vals[gi])
                rows[ri] = grid[gi].copy()
                improved = True
            else:
                rows[ri] = saved
        if not improved:
            break
    return best, rows


def _chained_search(
    objective: Callable[[list[np.ndarray]], float],
    starts: list[list[np.ndarray]],
    grid: GridSpec,
) -> tuple[float, list[np.ndarray], list[float]]:
    best_v, best_rows = -np.inf, None
    trace = []
    chain = _step_chain(grid.step)
    for rows0 in starts:
        rows = [np.asarray(r, dtype=float) for r in rows0]
        v = -np.inf
        for h in chain:
            rows = _snap_rows(rows, h)
            v, rows = _coordinate_ascent(objective, rows, h, grid.max_iters)
        trace.append(v)
        if v > best_v:
            best_v, best_rows = v, [r.copy() for r in rows]
    return best_v, best_rows, trace


def _random_rows(shapes: Sequence[int], rng: np.random.Generator) -> list[np.ndarray]:
    rows = []
    for dim in shapes:
        r = rng.random(dim)
        rows.append(r / r.sum())
    return rows


# -- outer bound for the unaugmented product-form scheme -------------------------


def maximize_ces_outer(
    source: SourceTriple,
    channel: MacChannel,
    grid: GridSpec | None = None,
) -> SearchResult:
    """Maximize I(X1 X2 X3; Y) over product conditionals p(x_i | s_i).

    Free rows: one pmf over X_i per source letter, 3 * |S_i| rows in total.
    The value is the necessary-condition ceiling for the unaugmented scheme
    on sources with no common part; the report states an observed grid value,
    never a proved optimum.
    """
    grid = grid or GridSpec()
    ps = source.joint.values
    K = channel.kernel.values
    x_sizes = channel.input_sizes
    s_sizes = source.sizes
    logK = np.where(K > 0, np.log2(np.where(K > 0, K, 1.0)), 0.0)
    row_H = -(K * logK).sum(axis=-1)  # H(Y | x1 x2 x3)

    row_shapes = []
    for i in range(3):
        row_shapes.extend([x_sizes[i]] * s_sizes[i])

    def unpack(rows: list[np.ndarray]) -> list[np.ndarray]:
        tabs, at = [], 0
        for i in range(3):
            tabs.append(np.stack(rows[at: at + s_sizes[i]]))
            at += s_sizes[i]
        return tabs

    def objective(rows: list[np.ndarray]) -> float:
        t1, t2, t3 = unpack(rows)
        px = np.einsum("abc,aA,bB,cC->ABC", ps, t1, t2, t3)
        py = np.einsum("ABC,ABCy->y", px, K)
        nz = py[py > 0]
        h_y = float(-(nz * np.log2(nz)).sum())
        return h_y - float((px * row_H).sum())

    rng = np.random.default_rng(grid.seed)
    starts = []
    # canonical: identity-like (x = s mod |X|) and maximum-entropy rows
    ident = []
    for i in range(3):
        for s in range(s_sizes[i]):
            row = np.zeros(x_sizes[i])
            row[s % x_sizes[i]] = 1.0
            ident.append(row)
    starts.append(ident)
    starts.append([np.full(d, 1.0 / d) for d in row_shapes])
    for _ in range(grid.restarts):
        starts.append(_random_rows(row_shapes, rng))
    best_v, best_rows, trace = _chained_search(objective, starts, grid)
    tables = tuple(unpack(best_rows))
    final = objective(best_rows)
    return SearchResult(final, tables, tuple(trace))


# -- feasibility of the augmented conditions --------------------------------------


def _scheme_rows(scheme: SchemeDistributions) -> tuple[list[np.ndarray], Callable]:
    """Flatten a scheme's free tables into pmf rows plus a rebuild closure."""
    rows: list[np.ndarray] = []
    specs: list[tuple] = []
    u123 = scheme.u123
    if u123.shape[0] > 1:
        specs.append(("u123", None))
        rows.append(u123.copy())
    for b, tab in scheme.u_pair.items():
        if tab.shape[-1] > 1:
            for idx in np.ndindex(tab.shape[:-1]):
                specs.append(("u_pair", (b, idx)))
                rows.append(tab[idx].copy())
    for i, tab in enumerate(scheme.x_tables):
        if tab.shape[-1] > 1:
            for idx in np.ndindex(tab.shape[:-1]):
                specs.append(("x", (i, idx)))
                rows.append(tab[idx].copy())

    def rebuild(rs: list[np.ndarray]) -> SchemeDistributions:
        u123_new = scheme.u123.copy()
        u_pair_new = {b: t.copy() for b, t in scheme.u_pair.items()}
        x_new = [t.copy() for t in scheme.x_tables]
        for (kind, key), row in zip(specs, rs):
            if kind == "u123":
                u123_new = np.asarray(row)
            elif kind == "u_pair":
                b, idx = key
                u_pair_new[b][idx] = row
            else:
                i, idx = key
                x_new[i][idx] = row
        return SchemeDistributions(scheme.q, u123_new, u_pair_new, tuple(x_new))

    return rows, rebuild


def feasibility_search_thm1(
    source: SourceTriple,
    channel: MacChannel,
    q: int = 2,
    u_sizes: dict | None = None,
    grid: GridSpec | None = None,
    x_init: Sequence[np.ndarray] | None = None,
) -> SearchResult:
    """Maximize the minimum slack of the augmented family over free tables.

    The dither block stays uniform; the additive part is the first one found
    over F_q (pure dither with singleton T axes when none exists).  A best
    value >= 0 certifies feasibility because the witness is re-evaluated
    exactly at the end.
    """
    grid = grid or GridSpec()
    parts = decompose(source)
    qparts = find_q_additive_parts(source, q) if q > 1 else []
    qpart = qparts[0] if qparts else None
    copyable = all(s >= q for s in channel.input_sizes)
    template = make_scheme(parts, source.sizes, channel.input_sizes, q=q,
                           u_sizes=u_sizes, x_equals_v=copyable)
    if x_init is not None:
        x_tables = []
        for i, tab in enumerate(x_init):
            tab = np.asarray(tab, dtype=float)
            if tab.ndim == 3:  # (s, v, x) convenience form
                full = np.broadcast_to(
                    tab[:, None, None, None, :, :],
                    template.x_tables[i].shape).copy()
            else:
                full = tab
            x_tables.append(full)
        template = SchemeDistributions(q, template.u123, template.u_pair,
                                       tuple(x_tables))
    rows0, rebuild = _scheme_rows(template)

    def objective(rows: list[np.ndarray]) -> float:
        scheme = rebuild(rows)
        joint = assemble_joint(source, channel, scheme, parts, qpart)
        return eval_thm1(joint).min_slack()

    rng = np.random.default_rng(grid.seed)
    starts = [rows0]
    shapes = [len(r) for r in rows0]
    for _ in range(grid.restarts):
        starts.append(_random_rows(shapes, rng))
    best_v, best_rows, trace = _chained_search(objective, starts, grid)
    scheme = rebuild(best_rows)
    joint = assemble_joint(source, channel, scheme, parts, qpart)
    report = eval_thm1(joint)
    return SearchResult(report.min_slack(), (scheme,), tuple(trace), report)


# -- sweep ------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    delta: float
    sigma: float
    gamma: float
    lhs_sum_bits: float
    ces_ceiling_bits: float
    thm1_min_slack_bits: float
    improved: bool


def improvement_sweep(
    delta: float,
    sigma_grid: Sequence[float],
    gamma_grid: Sequence[float],
    grid: GridSpec | None = None,
    thm1_grid: GridSpec | None = None,
) -> list[SweepRow]:
    """Tabulate the necessary-condition ceiling against augmented feasibility.

    A row is flagged improved when the augmented scheme is feasible at the
    point while h(gamma) + h(sigma) exceeds the observed product-form ceiling.
    """
    from .models import example2_channel, example2_source

    grid = grid or GridSpec()
    thm1_grid = thm1_grid or GridSpec(step=1 / 16, restarts=2, seed=grid.seed)
    channel = example2_channel(NoiseSpec(delta))
    rows = []
    for sigma in sigma_grid:
        for gamma in gamma_grid:
            source = example2_source(sigma, gamma)
            lhs = binary_entropy(sigma) + binary_entropy(gamma)
            ceiling = maximize_ces_outer(source, channel, grid).best_value
            feas = feasibility_search_thm1(source, channel, q=2, grid=thm1_grid,
                                           x_init=x_equals_v_tables(2))
            improved = feas.best_value >= -grid.tol and lhs > ceiling + grid.tol
            rows.append(SweepRow(delta, sigma, gamma, lhs, ceiling,
                                 feas.best_value, improved))
    return rows


def sweep_to_csv(rows: Sequence[SweepRow], fileobj=None) -> str:
    import csv as _csv
    import io as _io

    buf = _io.StringIO()
    w = _csv.writer(buf)
    w.writerow(["delta", "sigma", "gamma", "lhs_sum_bits", "ces_ceiling_bits",
                "thm1_min_slack_bits", "improved_flag"])
    for r in rows:
        w.writerow([r.delta, r.sigma, r.gamma, f"{r.lhs_sum_bits:.12g}",
                    f"{r.ces_ceiling_bits:.12g}", f"{r.thm1_min_slack_bits:.12g}",
                    int(r.improved)])
    text = buf.getvalue()
    if fileobj is not None:
        fileobj.write(text)
    return text
