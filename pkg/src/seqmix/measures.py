"""Process measures over a finite alphabet.

Every predictor and environment model in seqmix is a :class:`ProcessMeasure`.
A measure is an immutable object that drives a *batched state machine*:
``init_state(m)`` creates the state of ``m`` independent streams,
``predict(state)`` returns the ``(m, A)`` matrix of next-symbol conditionals
and ``update(state, symbols)`` returns the state after one more symbol.
Sequence probabilities are products of conditionals, so consistency
``mu(x) = sum_a mu(x a)`` holds by construction.

All probabilities of sequences are carried as base-2 logarithms.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Iterable, Sequence

import numpy as np

from seqmix.errors import DegenerateConditioningError, InputError

LogProb = float
State = Any


# ---------------------------------------------------------------------------
# log-domain helpers
# ---------------------------------------------------------------------------


def log2p(p):
    """``log2`` that maps 0 to ``-inf`` without warnings."""
    with np.errstate(divide="ignore"):
        return np.log2(p)


def logsumexp2(a, axis=None):
    """Base-2 log-sum-exp; rows that are entirely ``-inf`` give ``-inf``."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.float64(-np.inf) if axis is None else np.full(np.delete(a.shape, axis), -np.inf)
    mx = np.max(a, axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log2(np.sum(np.exp2(a - mx), axis=axis, keepdims=True)) + mx
    if axis is None:
        return out.reshape(())[()]
    return np.squeeze(out, axis=axis)


def take_state(state: State, idx) -> State:
    """Select stream rows ``idx`` from a (possibly nested) batched state."""
    if isinstance(state, tuple):
        return tuple(take_state(s, idx) for s in state)
    return state[idx]


# ---------------------------------------------------------------------------
# alphabet and sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self):
        if not isinstance(self.size, (int, np.integer)) or not 2 <= self.size <= 256:
            raise InputError(f"alphabet size must be an integer in [2, 256], got {self.size!r}")

    @property
    def M(self) -> float:
        """Bits per symbol, ``log2 |X|``."""
        return math.log2(self.size)


def as_seq(x, A: int) -> np.ndarray:
    """Coerce ``x`` (digit string or integer iterable) to a validated 1-D symbol array."""
    if isinstance(x, str):
        try:
            arr = np.fromiter((int(c, 36) for c in x), dtype=np.int64, count=len(x))
        except ValueError as exc:
            raise InputError(f"cannot parse sequence {x!r}") from exc
    else:
        arr = np.asarray(list(x) if not isinstance(x, np.ndarray) else x, dtype=np.int64).reshape(-1)
    if arr.size and (arr.min() < 0 or arr.max() >= A):
        raise InputError(f"symbol out of range for alphabet of size {A}: {arr.tolist()}")
    return arr


def as_batch(seqs, A: int) -> np.ndarray:
    arr = np.asarray(seqs, dtype=np.int64)
    if arr.ndim != 2:
        raise InputError("a batch of sequences must be a 2-D array")
    if arr.size and (arr.min() < 0 or arr.max() >= A):
        raise InputError(f"symbol out of range for alphabet of size {A}")
    return arr


# ---------------------------------------------------------------------------
# the abstraction
# ---------------------------------------------------------------------------


class ProcessMeasure(ABC):
    """A probability measure on one-way infinite sequences, queried by conditionals."""

    #: True when the conditionals depend on the prefix only through symbol counts.
    count_sufficient = False

    def __init__(self, A: int):
        self.alphabet = Alphabet(int(A))

    @property
    def A(self) -> int:
        return self.alphabet.size

    @property
    @abstractmethod
    def tag(self) -> str:
        """Human-readable identity."""

    @abstractmethod
    def init_state(self, m: int) -> State: ...

    @abstractmethod
    def predict(self, state: State) -> np.ndarray:
        """``(m, A)`` conditional next-symbol distributions."""

    @abstractmethod
    def update(self, state: State, symbols: np.ndarray) -> State:
        """State after appending ``symbols`` (shape ``(m,)``); never mutates ``state``."""

    def __repr__(self):
        return f"<{type(self).__name__} {self.tag}>"

    # derived operations -------------------------------------------------

    def scan(self, seqs: np.ndarray) -> tuple[State, np.ndarray]:
        """Consume a batch of equal-length sequences; return final state and log2 probs."""
        seqs = as_batch(seqs, self.A)
        m, n = seqs.shape
        state = self.init_state(m)
        logp = np.zeros(m)
        rows = np.arange(m)
        for t in range(n):
            p = self.predict(state)
            logp = logp + log2p(p[rows, seqs[:, t]])
            state = self.update(state, seqs[:, t])
        return state, logp

    def cond_dist(self, prefix) -> np.ndarray:
        x = as_seq(prefix, self.A)
        state, _ = self.scan(x[None, :])
        return self.predict(state)[0]

    def log_prob(self, x) -> LogProb:
        x = as_seq(x, self.A)
        return float(self.scan(x[None, :])[1][0])

    def log_prob_batch(self, seqs) -> np.ndarray:
        return self.scan(seqs)[1]

    def sample(self, m: int, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``m`` sequences of length ``n``; return them with their log2 probabilities."""
        seqs = np.zeros((m, n), dtype=np.int64)
        state = self.init_state(m)
        logp = np.zeros(m)
        rows = np.arange(m)
        for t in range(n):
            p = self.predict(state)
            sym = _draw(p, rng)
            seqs[:, t] = sym
            logp = logp + log2p(p[rows, sym])
            state = self.update(state, sym)
        return seqs, logp


def _draw(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = 1.0 - rng.random(p.shape[0])  # (0, 1]
    cum = np.cumsum(p, axis=1)
    sym = np.sum(cum < u[:, None], axis=1)
    # rounding can push past the last positive symbol
    last_pos = p.shape[1] - 1 - np.argmax(p[:, ::-1] > 0, axis=1)
    return np.minimum(sym, last_pos)


def log_prob(m: ProcessMeasure, x) -> LogProb:
    """``log2 m(x_1..x_n)``; the empty sequence has log-probability 0."""
    return m.log_prob(x)


# ---------------------------------------------------------------------------
# concrete families
# ---------------------------------------------------------------------------


def _prob_vector(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size < 2 or np.any(v < 0) or not np.all(np.isfinite(v)):
        raise InputError(f"{name} must be a non-negative probability vector, got {v.tolist()}")
    s = v.sum()
    if abs(s - 1.0) > 1e-9:
        raise InputError(f"{name} must sum to 1, sums to {s}")
    v = v / s
    v.flags.writeable = False
    return v


class IIDCategorical(ProcessMeasure):
    count_sufficient = True

    def __init__(self, theta: Sequence[float]):
        theta = _prob_vector(theta, "theta")
        super().__init__(theta.size)
        self.theta = theta

    @property
    def tag(self) -> str:
        if self.A == 2:
            return f"bern({self.theta[1]:.6g})"
        return "iid(" + ",".join(f"{t:.6g}" for t in self.theta) + ")"

    def init_state(self, m):
        return np.zeros((m, 0))

    def predict(self, state):
        return np.broadcast_to(self.theta, (state.shape[0], self.A))

    def update(self, state, symbols):
        return state

    def cond_from_counts(self, counts: np.ndarray) -> np.ndarray:
        counts = np.asarray(counts)
        return np.broadcast_to(self.theta, counts.shape)


class UniformIID(IIDCategorical):
    """The i.i.d. measure with equal symbol probabilities."""

    def __init__(self, A: int = 2):
        Alphabet(A)
        super().__init__(np.full(A, 1.0 / A))

    @property
    def tag(self) -> str:
        return f"uniform({self.A})"


def bernoulli(p: float) -> IIDCategorical:
    """Binary i.i.d. measure with probability ``p`` of symbol 1."""
    if not 0.0 <= p <= 1.0:
        raise InputError(f"Bernoulli parameter must lie in [0, 1], got {p}")
    return IIDCategorical([1.0 - p, p])


class MarkovChain(ProcessMeasure):
    def __init__(self, initial: Sequence[float], transition):
        initial = _prob_vector(initial, "initial distribution")
        P = np.asarray(transition, dtype=float)
        if P.shape != (initial.size, initial.size):
            raise InputError(f"transition matrix must be {initial.size}x{initial.size}")
        P = np.vstack([_prob_vector(row, "transition row") for row in P])
        P.flags.writeable = False
        super().__init__(initial.size)
        self.initial = initial
        self.transition = P

    @property
    def tag(self) -> str:
        rows = ";".join(",".join(f"{p:.4g}" for p in row) for row in self.transition)
        return f"markov[{rows}]"

    def init_state(self, m):
        return np.full(m, -1, dtype=np.int64)

    def predict(self, state):
        out = self.transition[np.maximum(state, 0)]
        fresh = state < 0
        if fresh.any():
            out = out.copy()
            out[fresh] = self.initial
        return out

    def update(self, state, symbols):
        return np.asarray(symbols, dtype=np.int64).copy()


class KTEstimator(ProcessMeasure):
    """Add-1/2 estimator: next-symbol probability ``(count_a + 1/2) / (t + A/2)``."""

    count_sufficient = True

    def __init__(self, A: int = 2):
        super().__init__(A)

    @property
    def tag(self) -> str:
        return f"kt({self.A})"

    def init_state(self, m):
        return np.zeros((m, self.A))

    def cond_from_counts(self, counts: np.ndarray) -> np.ndarray:
        counts = np.asarray(counts, dtype=float)
        return (counts + 0.5) / (counts.sum(axis=-1, keepdims=True) + self.A / 2.0)

    def predict(self, state):
        return self.cond_from_counts(state)

    def update(self, state, symbols):
        out = state.copy()
        out[np.arange(state.shape[0]), symbols] += 1.0
        return out


class Dirac(ProcessMeasure):
    """Point mass on the eventually periodic sequence ``prefix + period period ...``.

    After a prefix that leaves the support the conditional is uniform.
    """

    def __init__(self, prefix: Sequence[int] = (), period: Sequence[int] = (0,), A: int = 2):
        super().__init__(A)
        self.prefix = tuple(int(s) for s in as_seq(list(prefix), A))
        self.period = tuple(int(s) for s in as_seq(list(period), A))
        if not self.period:
            raise InputError("Dirac period must be non-empty")

    @property
    def tag(self) -> str:
        pre = "".join(map(str, self.prefix)) if self.A <= 10 else ",".join(map(str, self.prefix))
        per = "".join(map(str, self.period)) if self.A <= 10 else ",".join(map(str, self.period))
        return f"dirac({pre}({per}))"

    def symbol_at(self, t: int) -> int:
        """Symbol at 0-based position ``t`` of the supporting sequence."""
        if t < len(self.prefix):
            return self.prefix[t]
        return self.period[(t - len(self.prefix)) % len(self.period)]

    def _symbols_at(self, t: np.ndarray) -> np.ndarray:
        pre = np.asarray(self.prefix + (0,), dtype=np.int64)
        per = np.asarray(self.period, dtype=np.int64)
        npre = len(self.prefix)
        tail = per[np.maximum(t - npre, 0) % per.size]
        return np.where(t < npre, pre[np.minimum(t, npre)], tail)

    def path(self, n: int) -> np.ndarray:
        return self._symbols_at(np.arange(n))

    def init_state(self, m):
        return (np.ones(m, dtype=bool), np.zeros(m, dtype=np.int64))

    def predict(self, state):
        alive, t = state
        out = np.full((alive.shape[0], self.A), 1.0 / self.A)
        rows = np.flatnonzero(alive)
        out[rows] = 0.0
        out[rows, self._symbols_at(t[rows])] = 1.0
        return out

    def update(self, state, symbols):
        alive, t = state
        return (alive & (np.asarray(symbols) == self._symbols_at(t)), t + 1)


# ---------------------------------------------------------------------------
# finite mixtures
# ---------------------------------------------------------------------------


class FiniteMixture(ProcessMeasure):
    """``sum_k w_k mu_k`` with predictions by posterior-weighted averaging."""

    def __init__(self, components: Iterable[tuple[float, ProcessMeasure]], tag: str | None = None):
        comps = list(components)
        if not comps:
            raise InputError("a mixture needs at least one component")
        A = comps[0][1].A
        for w, mu in comps:
            if not isinstance(mu, ProcessMeasure):
                raise InputError(f"mixture component {mu!r} is not a ProcessMeasure")
            if mu.A != A:
                raise InputError("mixture components must share one alphabet")
            if not (w > 0 and math.isfinite(w)):
                raise InputError(f"mixture weights must be positive, got {w}")
        super().__init__(A)
        w = np.array([float(c[0]) for c in comps])
        w = w / w.sum()
        w.flags.writeable = False
        self.weights = w
        self.components = tuple(c[1] for c in comps)
        self._log_weights = log2p(w)
        self._tag = tag

    @property
    def tag(self) -> str:
        if self._tag:
            return self._tag
        inner = " + ".join(f"{w:.4g}*{mu.tag}" for w, mu in zip(self.weights, self.components))
        return f"mix[{inner}]"

    def init_state(self, m):
        comp_states = tuple(mu.init_state(m) for mu in self.components)
        return (comp_states, np.broadcast_to(self._log_weights, (m, len(self.components))).copy())

    def _posterior(self, logpost):
        mx = np.max(logpost, axis=1, keepdims=True)
        dead = ~np.isfinite(mx[:, 0])
        post = np.exp2(logpost - np.where(np.isfinite(mx), mx, 0.0))
        post /= np.where(dead[:, None], 1.0, post.sum(axis=1, keepdims=True))
        return post, dead

    def predict(self, state):
        comp_states, logpost = state
        post, dead = self._posterior(logpost)
        preds = np.stack([mu.predict(s) for mu, s in zip(self.components, comp_states)], axis=1)
        out = np.einsum("mk,mka->ma", post, preds)
        if dead.any():
            out[dead] = 1.0 / self.A
        return out

    def update(self, state, symbols):
        comp_states, logpost = state
        rows = np.arange(logpost.shape[0])
        new_logpost = logpost.copy()
        new_states = []
        for k, (mu, s) in enumerate(zip(self.components, comp_states)):
            new_logpost[:, k] += log2p(mu.predict(s)[rows, symbols])
            new_states.append(mu.update(s, symbols))
        return (tuple(new_states), new_logpost)


def posterior_weights(mix: FiniteMixture, prefix) -> np.ndarray:
    """Posterior over mixture components after observing ``prefix``."""
    x = as_seq(prefix, mix.A)
    logs = mix._log_weights + np.array([mu.log_prob(x) for mu in mix.components])
    total = logsumexp2(logs)
    if not np.isfinite(total):
        raise DegenerateConditioningError(f"prefix has probability zero under every component of {mix.tag}")
    return np.exp2(logs - total)


def mix_with_uniform(m: ProcessMeasure) -> FiniteMixture:
    """``(m + p) / 2`` with ``p`` uniform i.i.d., so ``-log2 nu(x) <= n log2 A + 1``."""
    return FiniteMixture([(0.5, m), (0.5, UniformIID(m.A))], tag=f"smooth[{m.tag}]")


# ---------------------------------------------------------------------------
# weight schedule
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def schedule_normalizer() -> float:
    """``w`` such that ``sum_{k>=1} w / ((k+1) log2^2 (k+1)) = 1``.

    Partial sum to ``N`` plus an Euler-Maclaurin tail.
    """
    N = 10_000
    k = np.arange(2, N, dtype=float)
    head = math.fsum(1.0 / (k * np.log2(k) ** 2))
    ln2sq = math.log(2.0) ** 2
    lnN = math.log(N)
    f = ln2sq / (N * lnN**2)
    fprime = -ln2sq * (lnN + 2.0) / (N**2 * lnN**3)
    tail = ln2sq / lnN + f / 2.0 - fprime / 12.0
    return 1.0 / (head + tail)


def weight(k: int) -> float:
    """Summable prior weight ``w / ((k+1) log2^2(k+1))`` for ``k >= 1``."""
    if k < 1:
        raise InputError(f"weight index must be >= 1, got {k}")
    return schedule_normalizer() / ((k + 1) * math.log2(k + 1) ** 2)


def log2_weight(k: int) -> float:
    if k < 1:
        raise InputError(f"weight index must be >= 1, got {k}")
    return math.log2(schedule_normalizer()) - math.log2(k + 1) - 2.0 * math.log2(math.log2(k + 1))


# ---------------------------------------------------------------------------
# seeded random classes (fixtures for experiments and tests)
# ---------------------------------------------------------------------------


def random_measure(kind: str, rng: np.random.Generator, A: int = 2) -> ProcessMeasure:
    if kind == "bernoulli":
        if A != 2:
            raise InputError("bernoulli classes are binary")
        return bernoulli(float(np.round(rng.uniform(0.02, 0.98), 6)))
    if kind == "iid":
        return IIDCategorical(rng.dirichlet(np.ones(A)))
    if kind == "markov":
        return MarkovChain(rng.dirichlet(np.ones(A)), rng.dirichlet(np.ones(A), size=A))
    if kind == "dirac":
        prefix = rng.integers(0, A, size=rng.integers(0, 4))
        period = rng.integers(0, A, size=rng.integers(1, 4))
        return Dirac(prefix.tolist(), period.tolist(), A)
    if kind == "mixed":
        return random_measure(str(rng.choice(["iid", "markov", "dirac"])), rng, A)
    raise InputError(f"unknown random measure kind {kind!r}")


def random_class(kind: str, size: int, seed: int, A: int = 2) -> list[ProcessMeasure]:
    """A reproducible finite class of ``size`` measures."""
    rng = np.random.default_rng(seed)
    return [random_measure(kind, rng, A) for _ in range(size)]
