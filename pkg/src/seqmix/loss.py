"""Expected cumulative KL loss ``d_n(mu, rho)`` and derived quantities, in bits.

``d_n(mu, rho) = sum_x mu(x) log2(mu(x) / rho(x))`` over ``x`` in ``X^n``. Three
routes compute it: exhaustive enumeration (``exact_dn``), a sufficient-statistic
recursion for i.i.d. ``mu`` against count-based ``rho`` (``dp_dn_iid``), and
seeded Monte Carlo (``mc_dn``).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from seqmix import csvio
from seqmix.enumeration import DEFAULT_CAP, enumerate_sequences
from seqmix.errors import CapacityError, ContractError, InputError
from seqmix.measures import IIDCategorical, ProcessMeasure, log2p

LOSS_COLUMNS = ("mu", "rho", "method", "n", "dn_bits", "per_symbol", "stderr", "samples", "seed")
REGRET_COLUMNS = ("env", "reference", "rho", "n", "dn_rho_bits", "dn_reference_bits", "regret_bits")

# rounding tolerance below which a negative KL sum is reported as 0
_GIBBS_SLACK = 1e-9


@dataclass(frozen=True)
class LossReport:
    n: int
    dn: float
    method: str
    stderr: float = float("nan")
    samples: int | None = None
    seed: int | None = None
    witness: tuple[int, ...] | None = None
    mu: str = ""
    rho: str = ""

    @property
    def per_symbol(self) -> float:
        return self.dn / self.n if self.n else 0.0

    def row(self) -> tuple:
        return (self.mu, self.rho, self.method, self.n, self.dn, self.per_symbol,
                self.stderr, self.samples, self.seed)


@dataclass(frozen=True)
class RegretReport:
    n: int
    regret: float
    dn_rho: float
    dn_reference: float
    env: str = ""
    reference: str = ""
    rho: str = ""

    def row(self) -> tuple:
        return (self.env, self.reference, self.rho, self.n, self.dn_rho, self.dn_reference, self.regret)


def _check_pair(mu: ProcessMeasure, rho: ProcessMeasure, n: int):
    if mu.A != rho.A:
        raise InputError("mu and rho must share one alphabet")
    if n < 0:
        raise InputError(f"horizon must be non-negative, got {n}")


def _clamp_gibbs(dn: float) -> float:
    if dn < 0.0:
        if dn < -_GIBBS_SLACK:
            raise ContractError(f"negative KL divergence {dn}")
        return 0.0
    return dn


def exact_dn(mu: ProcessMeasure, rho: ProcessMeasure, n: int, cap: int = DEFAULT_CAP) -> LossReport:
    """Exhaustive ``d_n`` over the mu-support of ``X^n``.

    Returns ``inf`` with a witness sequence when rho misses a sequence mu charges.
    """
    _check_pair(mu, rho, n)
    en = enumerate_sequences([mu, rho], n, cap=cap, prune_on=0)
    lmu, lrho = en.logp
    missed = np.flatnonzero(~np.isfinite(lrho))
    if missed.size:
        witness = tuple(int(s) for s in en.seqs[missed[0]])
        return LossReport(n, math.inf, "exact", witness=witness, mu=mu.tag, rho=rho.tag)
    dn = math.fsum(np.exp2(lmu) * (lmu - lrho))
    return LossReport(n, _clamp_gibbs(dn), "exact", mu=mu.tag, rho=rho.tag)


def conditional_dn(mu: ProcessMeasure, rho: ProcessMeasure, n: int, cap: int = DEFAULT_CAP) -> float:
    """``d_n`` as the expected sum of per-step conditional KL divergences.

    The same quantity as :func:`exact_dn` by the chain rule, computed along
    the other side of the identity (used as a cross-check).
    """
    _check_pair(mu, rho, n)
    total = 0.0
    for t in range(n):
        en = enumerate_sequences([mu, rho], t, cap=cap, prune_on=0)
        pmu = mu.predict(mu.scan(en.seqs)[0])
        prho = rho.predict(rho.scan(en.seqs)[0])
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(pmu > 0, pmu * (log2p(pmu) - log2p(prho)), 0.0)
        total += math.fsum(np.exp2(en.logp[0]) * terms.sum(axis=1))
    return total


# ---------------------------------------------------------------------------
# sufficient-statistic recursion
# ---------------------------------------------------------------------------


def _compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    out = []
    for first in range(total + 1):
        rest = _compositions(total - first, parts - 1)
        out.append(np.hstack([np.full((rest.shape[0], 1), first), rest]))
    return np.vstack(out)


def _kl_rows(theta: np.ndarray, q: np.ndarray) -> np.ndarray:
    pos = theta > 0
    with np.errstate(divide="ignore"):
        return np.sum(theta[pos] * (np.log2(theta[pos]) - np.log2(q[..., pos])), axis=-1)


def _binary_tables(rho: ProcessMeasure, n: int):
    """theta-independent pieces of the binary recursion, indexed [t-1, ones]."""
    t = np.arange(1, n + 1)[:, None]  # step t has seen t-1 symbols
    ones = np.arange(n)[None, :]
    valid = ones <= t - 1
    zeros = np.where(valid, t - 1 - ones, 0)
    ones = np.where(valid, ones, 0)
    logq = log2p(rho.cond_from_counts(np.stack([zeros, ones], axis=-1).astype(float)))
    logc = np.where(valid, (gammaln(t) - gammaln(ones + 1) - gammaln(zeros + 1)) / math.log(2), -np.inf)
    return valid, zeros, ones, logq, logc


def _binary_trace(theta: np.ndarray, tables) -> np.ndarray:
    valid, zeros, ones, logq, logc = tables
    lt = log2p(theta)
    with np.errstate(invalid="ignore"):
        logpmf = logc + np.where(ones > 0, ones * lt[1], 0.0) + np.where(zeros > 0, zeros * lt[0], 0.0)
    pos = theta > 0
    kl = (theta[pos] * (lt[pos] - logq[..., pos])).sum(axis=-1)
    return np.cumsum(np.sum(np.exp2(logpmf) * kl, axis=1))


def _check_dp(theta, rho):
    if isinstance(theta, IIDCategorical):
        theta = theta.theta
    theta = np.asarray(theta, dtype=float)
    if not rho.count_sufficient:
        raise ContractError(f"{rho.tag} does not declare count sufficiency")
    if theta.size != rho.A:
        raise InputError("theta and rho must share one alphabet")
    return theta


def dp_dn_iid_trace(theta, rho: ProcessMeasure, n: int) -> np.ndarray:
    """``[d_1, ..., d_n]`` for i.i.d. ``theta`` against a count-sufficient ``rho``."""
    theta = _check_dp(theta, rho)
    if n <= 0:
        return np.zeros(0)
    A = rho.A
    if A == 2:
        return _binary_trace(theta, _binary_tables(rho, n))
    per_step = np.empty(n)
    logtheta = log2p(theta)
    for t in range(n):
        c = _compositions(t, A)
        with np.errstate(invalid="ignore"):
            logpmf = (gammaln(t + 1) - gammaln(c + 1).sum(axis=1)) / math.log(2) + np.where(
                c > 0, c * logtheta, 0.0
            ).sum(axis=1)
        per_step[t] = np.sum(np.exp2(logpmf) * _kl_rows(theta, rho.cond_from_counts(c.astype(float))))
    return np.cumsum(per_step)


def dp_dn_iid_grid(thetas: Sequence[float], rho: ProcessMeasure, n: int) -> np.ndarray:
    """Traces for many Bernoulli parameters at once; row ``j`` is ``[d_1..d_n]`` for ``thetas[j]``."""
    if rho.A != 2:
        raise InputError("grid recursion is binary")
    tables = _binary_tables(rho, n) if n > 0 else None
    out = np.zeros((len(thetas), max(n, 0)))
    for j, p in enumerate(thetas):
        theta = _check_dp([1.0 - p, p], rho)
        if n > 0:
            out[j] = _binary_trace(theta, tables)
    return out


def dp_dn_iid(theta, rho: ProcessMeasure, n: int) -> LossReport:
    """Exact ``d_n`` in O(n^2) for binary alphabets via symbol-count statistics."""
    mu_tag = theta.tag if isinstance(theta, IIDCategorical) else IIDCategorical(theta).tag
    trace = dp_dn_iid_trace(theta, rho, n)
    dn = float(trace[-1]) if n > 0 else 0.0
    return LossReport(n, _clamp_gibbs(dn), "dp", mu=mu_tag, rho=rho.tag)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def _mc_chunk(mu, rho, n, m, seed_seq):
    rng = np.random.default_rng(seed_seq)
    seqs, lmu = mu.sample(m, n, rng)
    lrho = rho.log_prob_batch(seqs)
    return seqs, lmu - lrho


def mc_dn(mu: ProcessMeasure, rho: ProcessMeasure, n: int, samples: int, seed: int,
          workers: int = 1) -> LossReport:
    """Unbiased estimate of ``d_n``: average ``log2(mu(x)/rho(x))`` over ``x ~ mu``.

    The seed is split into ``workers`` independent streams; the result is a
    deterministic function of ``(seed, workers)``.
    """
    _check_pair(mu, rho, n)
    if samples < 2:
        raise InputError("Monte Carlo needs at least 2 samples")
    if workers < 1:
        raise InputError("workers must be >= 1")
    children = np.random.SeedSequence(seed).spawn(workers)
    sizes = [len(c) for c in np.array_split(np.arange(samples), workers)]
    jobs = [(mu, rho, n, m, ss) for m, ss in zip(sizes, children) if m > 0]
    if workers == 1:
        parts = [_mc_chunk(*j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda j: _mc_chunk(*j), jobs))
    seqs = np.vstack([p[0] for p in parts])
    values = np.concatenate([p[1] for p in parts])
    bad = np.flatnonzero(np.isposinf(values))
    if bad.size:
        witness = tuple(int(s) for s in seqs[bad[0]])
        return LossReport(n, math.inf, "monte-carlo", math.inf, samples, seed, witness, mu.tag, rho.tag)
    dn = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(samples))
    return LossReport(n, dn, "monte-carlo", stderr, samples, seed, mu=mu.tag, rho=rho.tag)


# ---------------------------------------------------------------------------
# dispatch and derived quantities
# ---------------------------------------------------------------------------


def dn(mu: ProcessMeasure, rho: ProcessMeasure, n: int, cap: int = DEFAULT_CAP) -> LossReport:
    """``d_n`` by the cheapest exact route available."""
    if isinstance(mu, IIDCategorical) and rho.count_sufficient and mu.A == 2:
        return dp_dn_iid(mu, rho, n)
    return exact_dn(mu, rho, n, cap=cap)


def dbar_proxy(mu: ProcessMeasure, rho: ProcessMeasure, n_grid: Sequence[int],
               samples: int = 1000, seed: int = 0, cap: int = DEFAULT_CAP) -> list[tuple[int, float]]:
    """Finite-horizon trace ``(n, d_n/n)``; evidence about the limsup, never a verdict."""
    grid = sorted(set(int(n) for n in n_grid))
    if isinstance(mu, IIDCategorical) and rho.count_sufficient and mu.A == 2 and grid:
        trace = dp_dn_iid_trace(mu, rho, grid[-1])
        return [(n, float(trace[n - 1]) / n if n else 0.0) for n in grid]
    out = []
    for n in grid:
        try:
            rep = exact_dn(mu, rho, n, cap=cap)
        except CapacityError:
            rep = mc_dn(mu, rho, n, samples, seed)
        out.append((n, rep.per_symbol))
    return out


def _argmax_low(values: Sequence[float]) -> int:
    values = np.asarray(values, dtype=float)
    top = np.max(values)
    if not np.isfinite(top):
        return int(np.flatnonzero(values == top)[0])
    return int(np.flatnonzero(values >= top - 1e-12 * max(1.0, abs(top)))[0])


def class_loss(C: Sequence[ProcessMeasure], rho: ProcessMeasure, n: int,
               cap: int = DEFAULT_CAP) -> tuple[float, int]:
    """Worst per-symbol loss of ``rho`` over ``C`` at horizon ``n``; ties go to the lowest index."""
    if not C:
        raise InputError("class must be non-empty")
    values = [dn(mu, rho, n, cap).per_symbol for mu in C]
    idx = _argmax_low(values)
    return float(values[idx]), idx


def regret_n(nu_env: ProcessMeasure, mu_ref: ProcessMeasure, rho: ProcessMeasure, n: int,
             cap: int = DEFAULT_CAP) -> RegretReport:
    """``d_n(nu, rho) - d_n(nu, mu)``: excess loss of ``rho`` over the reference ``mu``."""
    d_rho = dn(nu_env, rho, n, cap).dn
    d_mu = dn(nu_env, mu_ref, n, cap).dn
    regret = 0.0 if d_rho == d_mu else d_rho - d_mu
    return RegretReport(n, regret, d_rho, d_mu, nu_env.tag, mu_ref.tag, rho.tag)


def write_loss_csv(path, reports: Sequence[LossReport]):
    return csvio.write(path, LOSS_COLUMNS, [r.row() for r in reports])


def write_regret_csv(path, reports: Sequence[RegretReport]):
    return csvio.write(path, REGRET_COLUMNS, [r.row() for r in reports])
