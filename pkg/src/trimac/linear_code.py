"""Finite-blocklength simulation of the dithered linear coding construction.

Per trial a fresh generator matrix and dither pair are drawn (quenched
ensemble average), the parity-structured source block is encoded as
v_i = s_i G + b_i over F_q, mapped to channel inputs, and decoded with an
exact MAP rule over the (s1, s3) candidate grid with s2 forced by the parity
constraint.  Randomness is counter-based: trial t uses the Philox stream
keyed by (seed, t), so results do not depend on execution order.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .models import NoiseSpec, example2_channel
from .probability import ProbabilityError

WILSON_Z = 1.959963984540054  # two-sided 95%
DEFAULT_ENUM_CAP = 2 ** 24
LEMMA4_DEFAULT_CAP = 4096


class SimError(ProbabilityError):
    pass


def _check_prime(q: int):
    if q < 2 or any(q % d == 0 for d in range(2, int(q**0.5) + 1)):
        raise SimError(f"field order must be prime, got {q}")


@dataclass(frozen=True)
class LinearEncoder:
    """Shared random linear code with per-user dithers, b3 = b1 + b2 mod q."""

    q: int
    n: int
    G: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        _check_prime(self.q)
        G = np.asarray(self.G, dtype=np.int64)
        bs = [np.asarray(b, dtype=np.int64) for b in (self.b1, self.b2, self.b3)]
        object.__setattr__(self, "G", G)
        for name, b in zip(("b1", "b2", "b3"), bs):
            object.__setattr__(self, name, b)
        if G.shape != (self.n, self.n):
            raise SimError(f"G must be {self.n}x{self.n}, got {G.shape}")
        for b in bs:
            if b.shape != (self.n,):
                raise SimError("dither vectors must have length n")
        for arr in (G, *bs):
            if arr.size and (arr.min() < 0 or arr.max() >= self.q):
                raise SimError("matrix/dither entries must lie in [0, q)")
        if not np.array_equal(bs[2], (bs[0] + bs[1]) % self.q):
            raise SimError("b3 must equal b1 + b2 mod q")

    @classmethod
    def random(cls, q: int, n: int, rng: np.random.Generator) -> "LinearEncoder":
        G = rng.integers(0, q, size=(n, n))
        b1 = rng.integers(0, q, size=n)
        b2 = rng.integers(0, q, size=n)
        return cls(q, n, G, b1, b2, (b1 + b2) % q)

    def dither(self, i: int) -> np.ndarray:
        return (self.b1, self.b2, self.b3)[i - 1]

    def encode(self, s: np.ndarray, i: int) -> np.ndarray:
        """v_i = s G + b_i over F_q for user i in {1, 2, 3}."""
        if i not in (1, 2, 3):
            raise SimError(f"user index must be 1, 2 or 3, got {i}")
        s = np.asarray(s, dtype=np.int64)
        if s.shape != (self.n,):
            raise SimError(f"source block must have length {self.n}")
        if s.size and (s.min() < 0 or s.max() >= self.q):
            raise SimError("source symbols must lie in [0, q)")
        return (s @ self.G + self.dither(i)) % self.q


@dataclass(frozen=True)
class SimConfig:
    n: int
    q: int = 2
    delta: float = 0.0
    sigma: float = 0.0
    gamma: float = 0.11
    trials: int = 1000
    seed: int = 7
    decoder: str = "map"
    x_table: np.ndarray | None = None  # (q, q, 2): p(x | s, v); None means X = V
    enum_cap: int = DEFAULT_ENUM_CAP
    fixed_code: bool = False

    def __post_init__(self):
        _check_prime(self.q)
        NoiseSpec(self.delta)
        if self.n < 1 or self.trials < 1:
            raise SimError("n and trials must be >= 1")
        if not (0.0 <= self.sigma <= 1.0 and 0.0 <= self.gamma <= 1.0):
            raise SimError("sigma, gamma must lie in [0, 1]")
        if self.decoder != "map":
            raise SimError(f"unsupported decoder {self.decoder!r}")
        if self.q ** (2 * self.n) > self.enum_cap:
            raise SimError(
                f"candidate space q^(2n) = {self.q ** (2 * self.n)} exceeds "
                f"enumeration cap {self.enum_cap}")
        if self.x_table is None:
            if self.q != 2:
                raise SimError("default X = V needs q = 2 on the binary channel")
        else:
            tab = np.asarray(self.x_table, dtype=float)
            if tab.shape != (self.q, self.q, 2):
                raise SimError(f"x_table must have shape (q, q, 2), got {tab.shape}")
            if tab.min() < 0 or not np.allclose(tab.sum(axis=-1), 1.0, atol=1e-10):
                raise SimError("x_table rows must be pmfs")
            object.__setattr__(self, "x_table", tab)


@dataclass(frozen=True)
class SimResult:
    n: int
    q: int
    delta: float
    sigma: float
    gamma: float
    trials: int
    errors: int
    case_counts: tuple[int, int, int, int]
    seed: int
    linearity_violations: int = 0

    @property
    def p_e_hat(self) -> float:
        return self.errors / self.trials

    def wilson_interval(self) -> tuple[float, float]:
        z, nt, p = WILSON_Z, self.trials, self.p_e_hat
        denom = 1.0 + z * z / nt
        center = (p + z * z / (2 * nt)) / denom
        half = z * np.sqrt(p * (1 - p) / nt + z * z / (4 * nt * nt)) / denom
        return max(center - half, 0.0), min(center + half, 1.0)

    @staticmethod
    def csv_header() -> list[str]:
        return ["n", "q", "delta", "sigma", "gamma", "trials", "errors",
                "p_e_hat", "ci_lo", "ci_hi", "case1", "case2", "case3", "case4",
                "seed"]

    def csv_row(self) -> list:
        lo, hi = self.wilson_interval()
        return [self.n, self.q, self.delta, self.sigma, self.gamma, self.trials,
                self.errors, f"{self.p_e_hat:.8g}", f"{lo:.8g}", f"{hi:.8g}",
                *self.case_counts, self.seed]


@dataclass(frozen=True)
class EmpiricalType:
    """Per-letter counts of a sequence tuple against a reference law."""

    counts: np.ndarray
    n: int
    distance: float


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based substream for one trial; order-independent."""
    key = np.array([seed & (2**64 - 1), trial & (2**64 - 1)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def copy_maps(n: int, q: int) -> np.ndarray:
    """Realized per-letter maps for the deterministic X = V encoder."""
    m = np.zeros((n, q, q), dtype=np.int64)
    m[:] = np.arange(q)[None, None, :]
    return m


def realize_letter_maps(n: int, x_table: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample one channel-input symbol per (letter, s, v) cell from the table."""
    q = x_table.shape[0]
    cdf = np.cumsum(x_table, axis=-1)
    u = rng.random((n, q, q))
    return (u[..., None] >= cdf[None, :, :, :-1]).sum(axis=-1).astype(np.int64)


def channel_map(
    s: np.ndarray,
    v: np.ndarray,
    x_table: np.ndarray | None,
    rng: np.random.Generator,
) -> np.ndarray:
    """Map one (source, codeword) block to channel inputs, letterwise."""
    s = np.asarray(s, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    if x_table is None:
        return v.copy()
    maps = realize_letter_maps(len(s), np.asarray(x_table, float), rng)
    return maps[np.arange(len(s)), s, v]


def _sequences(symbols: np.ndarray, n: int) -> np.ndarray:
    """All length-n sequences over the given symbols, lexicographic order."""
    m = len(symbols)
    total = m ** n
    idx = np.arange(total)
    out = np.empty((total, n), dtype=np.int64)
    for t in range(n - 1, -1, -1):
        out[:, t] = symbols[idx % m]
        idx //= m
    return out


def _log_priors(q: int, sigma: float, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    p1 = np.zeros(q)
    p1[0], p1[1 % q] = 1.0 - sigma, sigma
    p3 = np.zeros(q)
    p3[0], p3[1 % q] = 1.0 - gamma, gamma
    return p1, p3


def _log_kernel(channel) -> np.ndarray:
    """Log-likelihood table from a delta value or a generic MAC kernel."""
    if hasattr(channel, "kernel"):
        kernel = channel.kernel.values
    elif isinstance(channel, np.ndarray):
        kernel = channel
    else:
        kernel = example2_channel(NoiseSpec(float(channel))).kernel.values
    return np.where(kernel > 0, np.log(np.where(kernel > 0, kernel, 1.0)), -np.inf)


def map_decode(
    y: np.ndarray,
    enc: LinearEncoder,
    sigma: float,
    gamma: float,
    channel,
    x_maps: Sequence[np.ndarray] | None = None,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact MAP over candidate pairs (s1, s3), s2 forced to (s3 - s1) mod q.

    `channel` is a noise parameter for the benchmark channel, a MacChannel,
    or a raw kernel array p(y | x1, x2, x3).  Candidates with zero prior are
    pruned up front (they can never beat the transmitted block, whose prior
    is positive).  Ties break to the first candidate in the (s1-major,
    s3-minor) lexicographic enumeration.
    """
    q, n = enc.q, enc.n
    if q ** (2 * n) > enum_cap:
        raise SimError(f"q^(2n) = {q ** (2 * n)} exceeds enumeration cap {enum_cap}")
    y = np.asarray(y, dtype=np.int64)
    logK = _log_kernel(channel)
    prior1, prior3 = _log_priors(q, sigma, gamma)
    if x_maps is None:
        x_maps = [copy_maps(n, q)] * 3
    sup1 = np.flatnonzero(prior1 > 0)
    sup3 = np.flatnonzero(prior3 > 0)
    with np.errstate(divide="ignore"):
        lp1 = np.where(prior1 > 0, np.log(np.where(prior1 > 0, prior1, 1.0)), -np.inf)
        lp3 = np.where(prior3 > 0, np.log(np.where(prior3 > 0, prior3, 1.0)), -np.inf)
    c1 = _sequences(sup1, n)
    c3 = _sequences(sup3, n)
    v1 = (c1 @ enc.G + enc.b1) % q
    v3 = (c3 @ enc.G + enc.b3) % q
    tt = np.arange(n)
    x1 = x_maps[0][tt[None, :], c1, v1]
    x3 = x_maps[2][tt[None, :], c3, v3]
    logp1 = lp1[c1].sum(axis=1)
    logp3 = lp3[c3].sum(axis=1)
    m1, m3 = len(c1), len(c3)
    best_val = -np.inf
    best_flat = -1
    chunk = max(1, (1 << 22) // max(m3 * n, 1))
    for lo in range(0, m1, chunk):
        hi = min(lo + chunk, m1)
        s2 = (c3[None, :, :] - c1[lo:hi, None, :]) % q
        v2 = (v3[None, :, :] - v1[lo:hi, None, :]) % q
        x2 = x_maps[1][tt[None, None, :], s2, v2]
        ll = logK[x1[lo:hi, None, :], x2, x3[None, :, :], y[None, None, :]].sum(axis=-1)
        score = ll + logp1[lo:hi, None] + logp3[None, :]
        flat = int(np.argmax(score))
        val = float(score.ravel()[flat])
        if val > best_val:
            best_val = val
            best_flat = lo * m3 + flat
    i1, i3 = divmod(best_flat, m3)
    s1 = c1[i1]
    s3 = c3[i3]
    return s1, (s3 - s1) % q, s3


@dataclass(frozen=True)
class _TrialOutcome:
    error: bool
    case: int  # 0 when correct, else 1..4
    linearity_ok: bool


def _classify(decoded, truth, q: int) -> int:
    d1 = not np.array_equal(decoded[0], truth[0])
    d2 = not np.array_equal(decoded[1], truth[1])
    d3 = not np.array_equal(decoded[2], truth[2])
    if not (d1 or d2 or d3):
        return 0
    if d1 and not d2:
        return 1
    if d2 and not d1:
        return 2
    if d1 and d2 and not d3:
        return 3
    return 4


def _run_trial(cfg: SimConfig, enc: LinearEncoder, rng: np.random.Generator,
               noise_cdf: np.ndarray, kernel: np.ndarray,
               default_maps: np.ndarray) -> _TrialOutcome:
    n, q = cfg.n, cfg.q
    s1 = (rng.random(n) < cfg.sigma).astype(np.int64)
    s3 = (rng.random(n) < cfg.gamma).astype(np.int64)
    s2 = (s3 - s1) % q
    v1 = enc.encode(s1, 1)
    v2 = enc.encode(s2, 2)
    v3 = enc.encode(s3, 3)
    linearity_ok = bool(np.array_equal((v1 + v2) % q, v3))
    if cfg.x_table is None:
        x_maps = [default_maps] * 3
    else:
        x_maps = [realize_letter_maps(n, cfg.x_table, rng) for _ in range(3)]
    tt = np.arange(n)
    x1 = x_maps[0][tt, s1, v1]
    x2 = x_maps[1][tt, s2, v2]
    x3 = x_maps[2][tt, s3, v3]
    noise = np.searchsorted(noise_cdf, rng.random(n), side="right")
    y = ((x1 ^ x2) + x3 + noise) % 4
    decoded = map_decode(y, enc, cfg.sigma, cfg.gamma, kernel,
                         x_maps=x_maps, enum_cap=cfg.enum_cap)
    case = _classify(decoded, (s1, s2, s3), q)
    return _TrialOutcome(case != 0, case, linearity_ok)


def monte_carlo(cfg: SimConfig) -> SimResult:
    """Quenched-average block error estimate: fresh code and dither per trial."""
    noise_cdf = np.cumsum(NoiseSpec(cfg.delta).pmf)
    kernel = example2_channel(NoiseSpec(cfg.delta)).kernel.values
    default_maps = copy_maps(cfg.n, cfg.q)
    fixed_enc = None
    if cfg.fixed_code:
        fixed_enc = LinearEncoder.random(cfg.q, cfg.n,
                                         trial_rng(cfg.seed, 2**64 - 1))
    errors = 0
    cases = [0, 0, 0, 0]
    linearity_violations = 0
    for t in range(cfg.trials):
        rng = trial_rng(cfg.seed, t)
        enc = fixed_enc or LinearEncoder.random(cfg.q, cfg.n, rng)
        out = _run_trial(cfg, enc, rng, noise_cdf, kernel, default_maps)
        if not out.linearity_ok:
            linearity_violations += 1
        if out.error:
            errors += 1
            cases[out.case - 1] += 1
    return SimResult(cfg.n, cfg.q, cfg.delta, cfg.sigma, cfg.gamma, cfg.trials,
                     errors, tuple(cases), cfg.seed, linearity_violations)


# -- exact enumeration of the generator-matrix statistics -------------------------


@dataclass(frozen=True)
class Lemma4Report:
    n: int
    q: int
    classes_checked: int
    mismatches: tuple

    @property
    def passed(self) -> bool:
        return not self.mismatches


def lemma4_verify(n: int, q: int, cap: int = LEMMA4_DEFAULT_CAP) -> Lemma4Report:
    """Exhaustively check P{s_j G = v_j, j=1,2} against the three-case formula.

    Enumerates all q^(n*n) matrices; for every pair (s1, s2) != (0, 0) and
    every (v1, v2), the count of matching matrices must equal the formula as
    an exact rational: q^-n 1{v_j = 0} when the other s is zero, q^-n
    1{v1 = v2} when s1 = s2 != 0, and q^-2n otherwise.
    """
    _check_prime(q)
    total = q ** (n * n)
    if total > cap:
        raise SimError(f"q^(n^2) = {total} exceeds enumeration cap {cap}")
    qn = q ** n
    vecs = _sequences(np.arange(q), n)  # (qn, n), index = base-q integer
    powers = q ** np.arange(n - 1, -1, -1)
    mats = _sequences(np.arange(q), n * n).reshape(total, n, n)
    # img[g, s] = integer index of vecs[s] @ mats[g] mod q
    img = np.einsum("sn,gnm->gsm", vecs, mats) % q
    img_idx = img @ powers  # (total, qn)
    mismatches = []
    classes = 0
    for i1 in range(qn):
        for i2 in range(qn):
            if i1 == 0 and i2 == 0:
                continue
            counts = np.zeros((qn, qn), dtype=np.int64)
            np.add.at(counts, (img_idx[:, i1], img_idx[:, i2]), 1)
            for v1 in range(qn):
                for v2 in range(qn):
                    got = Fraction(int(counts[v1, v2]), total)
                    if i1 == 0:
                        want = Fraction(1, qn) if v1 == 0 else Fraction(0)
                    elif i2 == 0:
                        want = Fraction(1, qn) if v2 == 0 else Fraction(0)
                    elif i1 == i2:
                        want = Fraction(1, qn) if v1 == v2 else Fraction(0)
                    else:
                        want = Fraction(1, qn * qn)
                    classes += 1
                    if got != want:
                        mismatches.append((i1, i2, v1, v2, got, want))
    return Lemma4Report(n, q, classes, tuple(mismatches))


# -- empirical joint-type diagnostics ---------------------------------------------


@dataclass(frozen=True)
class Lemma3Report:
    tol: float
    rows: tuple  # (n, trials, fraction_within, mean_distance)


def _reference_law(cfg: SimConfig) -> np.ndarray:
    """Single-letter law of (s1, s2, s3, v1, v2, v3, x1, x2, x3)."""
    q = cfg.q
    p1, p3 = _log_priors(q, cfg.sigma, cfg.gamma)
    if cfg.x_table is None:  # X = V; SimConfig guarantees q = 2 here
        xt = np.zeros((q, q, 2))
        for v in range(q):
            xt[:, v, v] = 1.0
    else:
        xt = cfg.x_table
    ref = np.zeros((q, q, q, q, q, q, 2, 2, 2))
    for s1 in range(q):
        for s3 in range(q):
            ps = p1[s1] * p3[s3]
            if ps == 0:
                continue
            s2 = (s3 - s1) % q
            for v1 in range(q):
                for v2 in range(q):
                    v3 = (v1 + v2) % q
                    pv = ps / (q * q)
                    for x1 in range(2):
                        for x2 in range(2):
                            for x3 in range(2):
                                ref[s1, s2, s3, v1, v2, v3, x1, x2, x3] = (
                                    pv * xt[s1, v1, x1] * xt[s2, v2, x2]
                                    * xt[s3, v3, x3])
    return ref


def lemma3_check(cfg: SimConfig, tol: float = 0.05,
                 n_values: Sequence[int] | None = None) -> Lemma3Report:
    """Fraction of trials whose empirical per-letter type is within `tol`
    (L-infinity) of the single-letter law of (sources, codewords, inputs).

    No decoding happens here, so the blocklengths may exceed the decoder's
    enumeration cap.
    """
    n_values = list(n_values) if n_values is not None else [cfg.n]
    ref = _reference_law(cfg).ravel()
    q = cfg.q
    rows = []
    for n in n_values:
        within = 0
        dists = []
        for t in range(cfg.trials):
            rng = trial_rng(cfg.seed, t)
            enc = LinearEncoder.random(q, n, rng)
            s1 = (rng.random(n) < cfg.sigma).astype(np.int64)
            s3 = (rng.random(n) < cfg.gamma).astype(np.int64)
            s2 = (s3 - s1) % q
            v1, v2, v3 = enc.encode(s1, 1), enc.encode(s2, 2), enc.encode(s3, 3)
            if cfg.x_table is None:
                x_maps = [copy_maps(n, q)] * 3
            else:
                x_maps = [realize_letter_maps(n, cfg.x_table, rng) for _ in range(3)]
            tt = np.arange(n)
            x1 = x_maps[0][tt, s1, v1]
            x2 = x_maps[1][tt, s2, v2]
            x3 = x_maps[2][tt, s3, v3]
            flat = (((((((s1 * q + s2) * q + s3) * q + v1) * q + v2) * q + v3)
                     * 2 + x1) * 2 + x2) * 2 + x3
            counts = np.bincount(flat, minlength=ref.size)
            etype = EmpiricalType(counts, n, float(np.abs(counts / n - ref).max()))
            dists.append(etype.distance)
            if etype.distance <= tol:
                within += 1
        rows.append((n, cfg.trials, within / cfg.trials, float(np.mean(dists))))
    return Lemma3Report(tol, tuple(rows))
