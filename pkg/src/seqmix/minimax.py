"""Finite-horizon minimax and maximin values over a finite class.

At horizon ``n`` the opponent's randomized strategy is a prior ``W`` over
``C`` and the statistician's loss is ``sum_i W_i d_n(mu_i, rho) / n``. For a
finite class both values equal the capacity of the channel ``i -> x in X^n``
with rows ``mu_i``; it is computed by alternating between the barycentre
predictor and a multiplicative prior update (Blahut-Arimoto). Every iterate
yields a certified sandwich ``lower <= value <= upper``.

These are finite-horizon, finite-class numbers; they are evidence about the
asymptotic values, never a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from seqmix import csvio
from seqmix.enumeration import enumerate_sequences
from seqmix.errors import CapacityError, InputError
from seqmix.loss import DEFAULT_CAP, dn, exact_dn, mc_dn
from seqmix.measures import FiniteMixture, ProcessMeasure, logsumexp2

JOINT_CAP = 2**24
CAPACITY_COLUMNS = ("class_id", "n", "value_bits", "gap", "iterations")
EVIDENCE_NOTE = "finite-horizon, finite-class evidence; not a statement about asymptotic values"


def _prior(W, size: int) -> np.ndarray:
    W = np.asarray(W, dtype=float).reshape(-1)
    if W.size != size:
        raise InputError(f"prior has {W.size} entries for a class of {size}")
    if np.any(W < 0) or abs(W.sum() - 1.0) > 1e-12:
        raise InputError("prior must be non-negative and sum to 1")
    return W


def bayes_risk(W, rho: ProcessMeasure, C: Sequence[ProcessMeasure], n: int, cap: int = DEFAULT_CAP) -> float:
    """Prior-averaged per-symbol loss ``sum_i W_i d_n(mu_i, rho) / n``."""
    W = _prior(W, len(C))
    if n < 1:
        raise InputError("horizon must be >= 1")
    total = 0.0
    for w, mu in zip(W, C):
        if w > 0:
            total += w * dn(mu, rho, n, cap).dn
    return total / n


@dataclass(frozen=True)
class CapacityResult:
    n: int
    value: float            # bits per symbol, midpoint of the sandwich
    lower: float            # maximin side: Bayes risk of the prior against its barycentre
    upper: float            # minimax side: worst member loss of the barycentre
    prior: np.ndarray
    risks: np.ndarray       # d_n(mu_i, barycentre) / n for every member
    bayes_mixture: FiniteMixture
    iterations: int
    converged: bool
    tol: float

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    @property
    def value_bits(self) -> float:
        return self.value

    def row(self, class_id: str) -> tuple:
        return (class_id, self.n, self.value, self.gap, self.iterations)


def _risks(L: np.ndarray, P: np.ndarray, logW: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    logrho = logsumexp2(logW[:, None] + L, axis=0)
    with np.errstate(invalid="ignore"):
        D = np.where(P > 0, P * (L - logrho[None, :]), 0.0).sum(axis=1)
    return D, logrho


def capacity_iterate(C: Sequence[ProcessMeasure], n: int, tol: float = 1e-6, max_iter: int = 200_000,
                     cap: int = JOINT_CAP) -> CapacityResult:
    """Capacity-achieving prior over ``C`` at horizon ``n`` and its Bayes mixture.

    Stops once ``upper - lower <= tol`` (bits per symbol) and the risks of all
    members carrying prior weight above ``tol`` agree within ``tol``; if
    ``max_iter`` is reached first the best sandwich is returned with
    ``converged=False``.
    """
    if not C:
        raise InputError("class must be non-empty")
    if n < 1:
        raise InputError("horizon must be >= 1")
    if tol <= 0:
        raise InputError("tolerance must be positive")
    K = len(C)
    A = C[0].A
    if K * A**n > cap:
        raise CapacityError(f"joint table |C| * A^n = {K * A**n} too large", cap)
    L = enumerate_sequences(list(C), n, cap=cap).logp
    P = np.exp2(L)
    logW = np.full(K, -math.log2(K))
    best = None
    it = 0
    while True:
        D, _ = _risks(L, P, logW)
        W = np.exp2(logW)
        lower = max(0.0, float(np.dot(W, D))) / n
        upper = max(0.0, float(D.max())) / n
        spread = (D.max() - D[W > tol].min()) / n
        done = upper - lower <= tol and spread <= tol
        if best is None or done or upper - lower < best[1] - best[0]:
            best = (lower, upper, logW.copy(), D.copy(), it, done)
        if done or it >= max_iter:
            break
        logW = logW + D
        logW = logW - logsumexp2(logW)
        it += 1
    lower, upper, logW, D, it_best, done = best
    W = np.exp2(logW)
    W = W / W.sum()
    mix = FiniteMixture([(w, mu) for w, mu in zip(W, C) if w > 0], tag="bayes-mixture")
    return CapacityResult(
        n=n,
        value=0.5 * (lower + upper),
        lower=lower,
        upper=upper,
        prior=W,
        risks=np.maximum(D, 0.0) / n,
        bayes_mixture=mix,
        iterations=it_best,
        converged=done,
        tol=tol,
    )


@dataclass(frozen=True)
class MinimaxGapReport:
    n: int
    upper: float
    lower: float
    tol: float
    note: str = EVIDENCE_NOTE

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    @property
    def within(self) -> bool:
        return self.gap <= 2 * self.tol


def minimax_gap(C: Sequence[ProcessMeasure], n: int, tol: float = 1e-6) -> MinimaxGapReport:
    """Upper (minimax) minus lower (maximin) value at horizon ``n``."""
    res = capacity_iterate(C, n, tol)
    return MinimaxGapReport(n, res.upper, res.lower, tol)


@dataclass(frozen=True)
class AdmissibilityReport:
    n: int
    dn_rho: float
    dn_improved: float
    stderr: float
    method: str

    @property
    def improvement(self) -> float:
        return self.dn_rho - self.dn_improved

    @property
    def dominated(self) -> bool:
        """The half-half mixture beats ``rho`` on ``mu`` by more than one bit."""
        return self.improvement > 1.0

    @property
    def bound_holds(self) -> bool:
        slack = 4 * self.stderr if self.method == "monte-carlo" else 1e-12
        return self.dn_improved <= 1.0 + slack


def admissibility_check(rho: ProcessMeasure, mu: ProcessMeasure, n: int, method: str = "exact",
                        samples: int = 1000, seed: int = 0) -> AdmissibilityReport:
    """Compare ``rho`` with ``(rho + mu)/2``, which never loses more than one bit on ``mu``."""
    improved = FiniteMixture([(0.5, rho), (0.5, mu)], tag=f"half[{rho.tag}|{mu.tag}]")
    if method == "exact":
        base = exact_dn(mu, rho, n).dn
        rep = exact_dn(mu, improved, n)
        return AdmissibilityReport(n, base, rep.dn, 0.0, "exact")
    if method == "monte-carlo":
        base = mc_dn(mu, rho, n, samples, seed).dn
        rep = mc_dn(mu, improved, n, samples, seed)
        return AdmissibilityReport(n, base, rep.dn, rep.stderr, "monte-carlo")
    raise InputError(f"unknown method {method!r}")


def write_capacity_csv(path, results: Sequence[tuple[str, CapacityResult]]):
    return csvio.write(path, CAPACITY_COLUMNS, [r.row(cid) for cid, r in results])
