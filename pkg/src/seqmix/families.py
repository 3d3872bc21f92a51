"""Two example classes with positive minimax loss.

*Typical sequences.* The class of Dirac measures on binary sequences whose
frequency of ones tends to ``p*`` is predicted by a countable mixture: for
every horizon ``n_j = 2^j`` and band ``eps_l = 2^-l`` each length-``n_j``
string with frequency within the band is a representative carrying weight
``w_l w_j / |S_j^l|``. Representatives are never enumerated; a prefix's
probability only needs the number of compatible representatives, which is a
sum of binomial coefficients in exact integer arithmetic.

*Change points.* Piecewise i.i.d. Bernoulli data whose change frequency is
bounded by ``alpha``, and :class:`SwitchingKT`, a Bayesian predictor with a
Bernoulli(``alpha_hat``) prior on change times and a KT estimator inside
each segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from seqmix import csvio
from seqmix.errors import InputError
from seqmix.measures import ProcessMeasure, as_seq, log2_weight, logsumexp2

TRACE_COLUMNS = ("t", "symbol", "is_change", "theta")
CURVE_COLUMNS = ("n", "per_symbol_bits")


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**9)


# ---------------------------------------------------------------------------
# typical sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypicalMixtureSpec:
    p_star: Fraction = Fraction(1, 3)
    J: int = 12
    L: int = 6
    j_min: int = 1
    l_min: int = 1

    def __post_init__(self):
        object.__setattr__(self, "p_star", _frac(self.p_star))
        if not 0 <= self.p_star <= 1:
            raise InputError("p* must lie in [0, 1]")
        if self.J < self.j_min or self.L < self.l_min or self.j_min < 1 or self.l_min < 1:
            raise InputError("need 1 <= j_min <= J and 1 <= l_min <= L")

    def horizon(self, j: int) -> int:
        return 2**j

    def eps(self, l: int) -> Fraction:
        return Fraction(1, 2**l)

    @property
    def max_horizon(self) -> int:
        return self.horizon(self.J)


@lru_cache(maxsize=65536)
def _count(ones: int, length: int, n_j: int, eps: Fraction, p_star: Fraction) -> int:
    lo = max(math.ceil(n_j * (p_star - eps)), ones)
    hi = min(math.floor(n_j * (p_star + eps)), ones + n_j - length)
    if lo > hi:
        return 0
    r = n_j - length
    k = lo - ones
    term = math.comb(r, k)
    total = term
    for kk in range(k, hi - ones):
        term = term * (r - kk) // (kk + 1)
        total += term
    return total


def count_extensions(ones: int, length: int, n_j: int, eps, p_star=Fraction(1, 3)) -> int:
    """Number of binary strings of length ``n_j`` extending a prefix of ``length``
    symbols with ``ones`` ones, whose frequency of ones is within ``eps`` of ``p_star``."""
    if not 0 <= ones <= length <= n_j:
        raise InputError(f"need 0 <= ones <= length <= n_j, got {ones}, {length}, {n_j}")
    return _count(int(ones), int(length), int(n_j), _frac(eps), _frac(p_star))


def _typical_terms(spec: TypicalMixtureSpec, ones: int, length: int) -> list[float]:
    terms = []
    for j in range(spec.j_min, spec.J + 1):
        n_j = spec.horizon(j)
        if n_j < length:
            continue
        for l in range(spec.l_min, spec.L + 1):
            eps = spec.eps(l)
            size = _count(0, 0, n_j, eps, spec.p_star)
            if size == 0:
                continue
            c = _count(ones, length, n_j, eps, spec.p_star)
            if c:
                terms.append(log2_weight(l) + log2_weight(j) + math.log2(c) - math.log2(size))
    return terms


def typical_mixture_log_prob(spec: TypicalMixtureSpec, prefix) -> float:
    """log2 probability of ``prefix`` under the truncated representative mixture.

    ``-inf`` when no representative in the truncation is compatible.
    """
    x = as_seq(prefix, 2)
    if x.size > spec.max_horizon:
        raise InputError(f"prefix longer than the largest horizon {spec.max_horizon}")
    terms = _typical_terms(spec, int(x.sum()), int(x.size))
    return float(logsumexp2(terms)) if terms else -math.inf


def typical_loss_curve(spec: TypicalMixtureSpec, seq, checkpoints: Sequence[int]) -> list[tuple[int, float]]:
    """Per-symbol code length ``-(1/n) log2 P(x_1..x_n)`` at each checkpoint."""
    x = as_seq(seq, 2)
    ones = np.concatenate([[0], np.cumsum(x)])
    out = []
    for n in checkpoints:
        if not 1 <= n <= x.size:
            raise InputError(f"checkpoint {n} outside 1..{x.size}")
        if n > spec.max_horizon:
            out.append((n, math.inf))
            continue
        terms = _typical_terms(spec, int(ones[n]), int(n))
        out.append((n, -float(logsumexp2(terms)) / n if terms else math.inf))
    return out


def bernoulli_code_length(seq, p: float) -> float:
    """``-log2`` of the i.i.d. Bernoulli(``p``) probability of ``seq``."""
    x = as_seq(seq, 2)
    ones = int(x.sum())
    zeros = x.size - ones
    with np.errstate(divide="ignore"):
        bits = 0.0
        if ones:
            bits -= ones * math.log2(p) if p > 0 else -math.inf
        if zeros:
            bits -= zeros * math.log2(1 - p) if p < 1 else -math.inf
    return bits


def periodic(pattern: Sequence[int], n: int) -> np.ndarray:
    pattern = np.asarray(pattern, dtype=np.int64)
    return np.resize(pattern, n)


def binary_entropy(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


# ---------------------------------------------------------------------------
# change points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChangePointSpec:
    alpha: float
    n: int
    thetas: tuple[float, ...] | None = None   # adversarial segment parameters, cycled
    change_every: int | None = None           # fixed change grid instead of random times

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise InputError("alpha must lie in [0, 1)")
        if self.n < 1:
            raise InputError("horizon must be positive")
        if self.thetas is not None:
            object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
            if not self.thetas or any(not 0 <= t <= 1 for t in self.thetas):
                raise InputError("segment parameters must lie in [0, 1]")
        if self.change_every is not None and self.change_every < 1:
            raise InputError("change grid spacing must be positive")

    @property
    def max_changes(self) -> int:
        return int(math.floor(self.alpha * self.n))


@dataclass(frozen=True)
class ChangePointTrace:
    seq: np.ndarray
    change_times: np.ndarray   # 0-based positions where a new segment starts (0 excluded)
    thetas: np.ndarray         # one parameter per segment
    rejected: int              # change draws dropped to respect the frequency bound

    @property
    def segment_bounds(self) -> list[tuple[int, int]]:
        edges = [0, *self.change_times.tolist(), self.seq.size]
        return list(zip(edges[:-1], edges[1:]))

    def theta_at(self) -> np.ndarray:
        out = np.empty(self.seq.size)
        for (a, b), th in zip(self.segment_bounds, self.thetas):
            out[a:b] = th
        return out

    def rows(self):
        is_change = np.zeros(self.seq.size, dtype=bool)
        is_change[self.change_times] = True
        theta = self.theta_at()
        for t in range(self.seq.size):
            yield (t, int(self.seq[t]), bool(is_change[t]), float(theta[t]))

    def write_csv(self, path):
        return csvio.write(path, TRACE_COLUMNS, self.rows())


def gen_changepoint(spec: ChangePointSpec, seed: int) -> ChangePointTrace:
    """Piecewise i.i.d. Bernoulli data with at most ``floor(alpha n)`` changes."""
    rng = np.random.default_rng(seed)
    n = spec.n
    rejected = 0
    if spec.change_every is not None:
        times = np.arange(spec.change_every, n, spec.change_every)
    else:
        draws = np.flatnonzero(rng.random(n - 1) < spec.alpha) + 1
        times = draws[: spec.max_changes]
        rejected = int(draws.size - times.size)
    segments = times.size + 1
    if spec.thetas is not None:
        thetas = np.resize(np.asarray(spec.thetas), segments)
    else:
        thetas = rng.uniform(0.0, 1.0, size=segments)
    edges = [0, *times.tolist(), n]
    seq = np.empty(n, dtype=np.int64)
    for s, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        seq[a:b] = rng.random(b - a) < thetas[s]
    return ChangePointTrace(seq, times.astype(np.int64), thetas, rejected)


class SwitchingKT(ProcessMeasure):
    """Bayesian mixture over change-time sequences with a KT estimator per segment.

    Before each symbol a new segment starts with probability ``alpha_hat``;
    the state of a stream is the joint weight of every candidate start of the
    current segment together with that candidate's symbol counts.
    """

    def __init__(self, alpha_hat: float, A: int = 2):
        if not 0 < alpha_hat < 1:
            raise InputError("alpha_hat must lie in (0, 1)")
        super().__init__(A)
        self.alpha_hat = float(alpha_hat)
        self._log_stay = math.log2(1 - alpha_hat)
        self._log_switch = math.log2(alpha_hat)

    @property
    def tag(self) -> str:
        return f"switching-kt({self.alpha_hat:.6g})"

    def init_state(self, m):
        return (np.zeros((m, 1)), np.zeros((m, 1, self.A)))

    def _kt(self, counts):
        return (counts + 0.5) / (counts.sum(axis=-1, keepdims=True) + self.A / 2.0)

    def posterior(self, state) -> np.ndarray:
        logw, _ = state
        return np.exp2(logw - logsumexp2(logw, axis=1)[:, None])

    def predict(self, state):
        _, counts = state
        return np.einsum("ms,msa->ma", self.posterior(state), self._kt(counts))

    def update(self, state, symbols):
        logw, counts = state
        m = logw.shape[0]
        rows = np.arange(m)
        symbols = np.asarray(symbols)
        logw = logw + np.log2(self._kt(counts)[rows, :, symbols])
        counts = counts.copy()
        counts[rows, :, symbols] += 1.0
        total = logsumexp2(logw, axis=1)
        logw = np.hstack([logw - total[:, None] + self._log_stay, np.full((m, 1), self._log_switch)])
        counts = np.concatenate([counts, np.zeros((m, 1, self.A))], axis=1)
        return (logw, counts)

    def code_lengths(self, seq) -> np.ndarray:
        """Cumulative ``-log2 P(x_1..x_t)`` for ``t = 1..n``; O(t) work per symbol."""
        x = as_seq(seq, self.A)
        n = x.size
        logw = np.full(n + 1, -np.inf)
        counts = np.zeros((n + 1, self.A))
        logw[0] = 0.0
        out = np.empty(n)
        bits = 0.0
        for t in range(n):
            live = slice(0, t + 1)
            w = logw[live]
            w = w - float(logsumexp2(w))
            c = counts[live]
            kt = (c[:, x[t]] + 0.5) / (c.sum(axis=1) + self.A / 2.0)
            p = float(np.exp2(w) @ kt)
            bits -= math.log2(p)
            out[t] = bits
            logw[live] = w + np.log2(kt) - math.log2(p) + self._log_stay
            counts[live, x[t]] += 1.0
            logw[t + 1] = self._log_switch
        return out


def switching_kt_cond(predictor: SwitchingKT, prefix) -> np.ndarray:
    """Next-symbol distribution of the switching predictor after ``prefix``."""
    return predictor.cond_dist(prefix)


def kt_code_lengths(seq, change_times: Sequence[int] = (), A: int = 2) -> np.ndarray:
    """Cumulative KT code length, restarting the counts at each given change time."""
    x = as_seq(seq, A)
    restarts = set(int(t) for t in change_times)
    counts = np.zeros(A)
    out = np.empty(x.size)
    bits = 0.0
    for t, s in enumerate(x):
        if t in restarts:
            counts[:] = 0.0
        bits -= math.log2((counts[s] + 0.5) / (counts.sum() + A / 2.0))
        counts[s] += 1.0
        out[t] = bits
    return out


def switch_budget(changes: int, n: int, alpha_hat: float) -> float:
    """Per-symbol coding cost of the change-time prior for a path with ``changes`` switches."""
    return (changes * math.log2(1 / alpha_hat) + n * math.log2(1 / (1 - alpha_hat))) / n


def changepoint_value(alpha: float) -> float:
    """``alpha (1 - log2(alpha) / 2)`` bits per symbol."""
    if not 0 < alpha < 1:
        raise InputError("alpha must lie in (0, 1)")
    return alpha * (1 - 0.5 * math.log2(alpha))


def write_curve_csv(path, curve: Sequence[tuple[int, float]]):
    return csvio.write(path, CURVE_COLUMNS, curve)
