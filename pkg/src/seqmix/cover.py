"""Greedy extraction of a near-minimax Bayesian mixture from a finite class.

Given a reference predictor ``rho`` and a finite class ``C``, each member's
likelihood set ``T_mu`` (sequences with ``mu/rho >= 1/n``) is cut into ``k``
cells by the per-symbol log-likelihood ratio. For every cell index a greedy
cover repeatedly picks the member whose cell adds the most new ``rho``-mass.
The picked members, weighted by the summable schedule, form the mixture; the
audit then re-checks every inequality that makes the mixture as good as
``rho`` with explicit constants.

Sets of sequences are index arrays into the lexicographic enumeration of
``X^n``, which coincide with radix-A integer codes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from seqmix import csvio
from seqmix.enumeration import DEFAULT_CAP, Enumeration, enumerate_sequences
from seqmix.errors import ContractError, InputError
from seqmix.measures import (
    FiniteMixture,
    ProcessMeasure,
    log2_weight,
    mix_with_uniform,
    schedule_normalizer,
    weight,
)

# log-domain slack for every audited inequality
SLACK = 1e-9
# relative tolerance when comparing greedy gains and classifying boundary scores
_TIE = 1e-12

AUDIT_COLUMNS = ("mu_id", "cell_i", "covered_mass", "exceptional_mass", "bound_rhs_bits", "max_violation_bits")


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelParams:
    """Quantization of ``[-(log2 n)/n, M + 1/n]`` into ``k`` cells."""

    n: int
    k: int
    M: float

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise InputError(f"need n >= 1 and k >= 1, got n={self.n}, k={self.k}")

    @property
    def lower(self) -> float:
        return -math.log2(self.n) / self.n

    @property
    def upper(self) -> float:
        return self.M + 1.0 / self.n

    def interval(self, i: int) -> tuple[float, float]:
        lo = self.lower if i == 1 else (i - 1) * self.M / self.k
        hi = self.upper if i == self.k else i * self.M / self.k
        return lo, hi

    def cell_of(self, scores: np.ndarray) -> np.ndarray:
        """1-based cell index of each per-symbol score; out-of-range scores are a contract violation."""
        scores = np.asarray(scores, dtype=float)
        bad = (scores < self.lower - _TIE) | (scores > self.upper + _TIE) | ~np.isfinite(scores)
        if bad.any():
            s = scores[bad][0]
            raise ContractError(
                f"per-symbol log ratio {s:.6g} outside [{self.lower:.6g}, {self.upper:.6g}]; "
                "is rho bounded by n*M + 1 bits (smoothed with the uniform measure)?"
            )
        idx = np.ceil(scores * self.k / self.M - _TIE).astype(np.int64)
        return np.clip(idx, 1, self.k)


@dataclass(frozen=True)
class SlackParams:
    """Margin exponent ``a`` of the dominance argument; must exceed ``M/k``."""

    a: float
    k: int
    M: float

    def __post_init__(self):
        if not self.a > self.M / self.k:
            raise InputError(f"slack a={self.a} must exceed M/k={self.M / self.k:.6g}")

    def exponent(self, i: int, n: int) -> float:
        return (i * self.M / self.k + self.a) * n

    def l_star(self, i: int, n: int) -> float:
        """``ceil(2^((iM/k + a) n + 1))``; ``inf`` when astronomically large."""
        e = self.exponent(i, n) + 1.0
        return float(math.ceil(2.0**e)) if e < 1000 else math.inf


# ---------------------------------------------------------------------------
# likelihood sets and level partitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelPartition:
    owner: str
    params: LevelParams
    codes: np.ndarray        # sorted codes of T_mu
    log_ratio: np.ndarray    # log2(mu/rho) for each code
    cell: np.ndarray         # 1-based cell index for each code
    outside_mass: float      # mu-mass of X^n minus T_mu

    def cell_codes(self, i: int) -> np.ndarray:
        return self.codes[self.cell == i]

    def counts(self) -> list[int]:
        return [int(np.sum(self.cell == i)) for i in range(1, self.params.k + 1)]


def _full_table(measures: Sequence[ProcessMeasure], n: int, cap: int) -> Enumeration:
    return enumerate_sequences(list(measures), n, cap=cap)


def _likelihood_mask(lmu: np.ndarray, lrho: np.ndarray, n: int) -> np.ndarray:
    if not np.all(np.isfinite(lrho)):
        raise ContractError("rho must be positive on X^n (smooth it with the uniform measure)")
    with np.errstate(invalid="ignore"):
        return np.isfinite(lmu) & (lmu - lrho >= -math.log2(n) - _TIE)


def _check_markov(lmu, mask, n, owner):
    outside = math.fsum(np.exp2(lmu[~mask]))
    if outside > 1.0 / n + SLACK:
        raise ContractError(f"{owner}: mass {outside} outside the likelihood set exceeds 1/n")
    return outside


def likelihood_set(mu: ProcessMeasure, rho: ProcessMeasure, n: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Sorted codes of ``{x in X^n : mu(x)/rho(x) >= 1/n}``."""
    if n < 1:
        raise InputError("horizon must be >= 1")
    en = _full_table([mu, rho], n, cap)
    mask = _likelihood_mask(en.logp[0], en.logp[1], n)
    _check_markov(en.logp[0], mask, n, mu.tag)
    return np.flatnonzero(mask)


def _partition_from_logs(owner: str, lmu, lrho, params: LevelParams) -> LevelPartition:
    n = params.n
    mask = _likelihood_mask(lmu, lrho, n)
    outside = _check_markov(lmu, mask, n, owner)
    codes = np.flatnonzero(mask)
    lr = lmu[codes] - lrho[codes]
    cell = params.cell_of(lr / n)
    _check_cell_bounds(owner, lr, cell, params)
    return LevelPartition(owner, params, codes, lr, cell, outside)


def _check_cell_bounds(owner, lr, cell, params: LevelParams):
    n, k, M = params.n, params.k, params.M
    upper = cell * M / k * n + 1.0
    lower = (cell - 1) * M / k * n - math.log2(n)
    if np.any(lr > upper + SLACK):
        j = int(np.argmax(lr - upper))
        raise ContractError(f"{owner}: upper cell bound violated in cell {cell[j]}")
    if np.any(lr < lower - SLACK):
        j = int(np.argmax(lower - lr))
        raise ContractError(f"{owner}: lower cell bound violated in cell {cell[j]}")


def level_partition(mu: ProcessMeasure, rho: ProcessMeasure, n: int, k: int,
                    cap: int = DEFAULT_CAP) -> LevelPartition:
    """Split the likelihood set of ``mu`` into ``k`` cells by ``(1/n) log2(mu/rho)``."""
    en = _full_table([mu, rho], n, cap)
    return _partition_from_logs(mu.tag, en.logp[0], en.logp[1], LevelParams(n, k, mu.alphabet.M))


# ---------------------------------------------------------------------------
# greedy covering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GreedyStep:
    l: int
    index: int
    mass: float
    covered: np.ndarray  # codes of T_l


@dataclass(frozen=True)
class GreedyCoverResult:
    n: int
    k: int
    i: int
    steps: tuple[GreedyStep, ...]
    residuals: np.ndarray  # residuals[l-1, j] = rho(T_{mu_j,k,i} minus T_l)

    @property
    def L_star(self) -> int:
        """First step whose newly covered mass is zero."""
        return len(self.steps) + 1

    @property
    def chosen(self) -> list[int]:
        return [s.index for s in self.steps]

    def covered_at(self, l: float) -> np.ndarray:
        if not self.steps or l < 1:
            return np.zeros(0, dtype=np.int64)
        return self.steps[int(min(l, len(self.steps))) - 1].covered


def _greedy(cells: list[np.ndarray], rho_p: np.ndarray, n: int, k: int, i: int) -> GreedyCoverResult:
    size = rho_p.size
    masks = []
    for codes in cells:
        m = np.zeros(size, dtype=bool)
        m[codes] = True
        masks.append(m)
    covered = np.zeros(size, dtype=bool)
    steps: list[GreedyStep] = []
    residuals = []
    while True:
        fresh = [mk & ~covered for mk in masks]
        gains = np.array([math.fsum(rho_p[f]) for f in fresh])
        nonempty = np.array([f.any() for f in fresh])
        if not nonempty.any():
            break
        top = gains.max()
        j = int(np.flatnonzero(nonempty & (gains >= top * (1.0 - _TIE)))[0])
        covered = covered | masks[j]
        steps.append(GreedyStep(len(steps) + 1, j, float(gains[j]), np.flatnonzero(covered)))
        residuals.append([math.fsum(rho_p[mk & ~covered]) for mk in masks])
    res = np.array(residuals).reshape(len(steps), len(cells))
    result = GreedyCoverResult(n, k, i, tuple(steps), res)
    check_greedy(result)
    return result


def check_greedy(result: GreedyCoverResult) -> None:
    """Assert ``m_1 >= m_2 >= ...``, ``m_l <= 1/l`` and the residual bound at every step."""
    masses = [s.mass for s in result.steps]
    for l, m in enumerate(masses, start=1):
        if m > 1.0 / l + SLACK:
            raise ContractError(f"greedy mass m_{l}={m} exceeds 1/{l}")
        if l > 1 and m > masses[l - 2] * (1 + _TIE) + 1e-300:
            raise ContractError(f"greedy masses increase at step {l}")
        nxt = masses[l] if l < len(masses) else 0.0
        worst = result.residuals[l - 1].max() if result.residuals.size else 0.0
        if worst > nxt * (1 + _TIE) + 1e-300:
            raise ContractError(f"residual {worst} exceeds m_{l + 1}={nxt}")


@dataclass
class ClassTable:
    """Log-probabilities of every sequence in ``X^n`` under each member and ``rho``."""

    members: list[ProcessMeasure]
    rho: ProcessMeasure
    n: int
    logp: np.ndarray  # (|C| + 1, A^n); last row is rho
    _partitions: dict = field(default_factory=dict)

    @classmethod
    def build(cls, C: Sequence[ProcessMeasure], rho: ProcessMeasure, n: int, cap: int = DEFAULT_CAP):
        if not C:
            raise InputError("class must be non-empty")
        if any(mu.A != rho.A for mu in C):
            raise InputError("class members and rho must share one alphabet")
        en = _full_table(list(C) + [rho], n, cap)
        return cls(list(C), rho, n, en.logp)

    @property
    def M(self) -> float:
        return self.rho.alphabet.M

    @property
    def lrho(self) -> np.ndarray:
        return self.logp[-1]

    def partition(self, j: int, k: int) -> LevelPartition:
        key = (j, k)
        if key not in self._partitions:
            params = LevelParams(self.n, k, self.M)
            self._partitions[key] = _partition_from_logs(self.members[j].tag, self.logp[j], self.lrho, params)
        return self._partitions[key]

    def greedy(self, k: int, i: int) -> GreedyCoverResult:
        cells = [self.partition(j, k).cell_codes(i) for j in range(len(self.members))]
        return _greedy(cells, np.exp2(self.lrho), self.n, k, i)


def greedy_cover(C: Sequence[ProcessMeasure], rho: ProcessMeasure, n: int, k: int, i: int,
                 cap: int = DEFAULT_CAP) -> GreedyCoverResult:
    """Greedy cover of the ``i``-th cells of all members; ties go to the lowest index."""
    if not 1 <= i <= k:
        raise InputError(f"cell index {i} outside 1..{k}")
    return ClassTable.build(C, rho, n, cap).greedy(k, i)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellMixture:
    """Members picked by the greedy cover of cell ``i`` at ``(n, k)`` and their schedule weights."""

    n: int
    k: int
    i: int
    indices: tuple[int, ...]
    weights: tuple[float, ...]   # weight(l), before renormalization
    masses: tuple[float, ...]    # m_l


@dataclass(frozen=True)
class ExtractedMixture:
    members: tuple[ProcessMeasure, ...]
    rho_tag: str
    grid: tuple[tuple[int, int], ...]
    cells: tuple[CellMixture, ...]
    greedy: dict                    # (n, k, i) -> GreedyCoverResult
    component_weights: np.ndarray   # over members, sums to 1 (before smoothing)
    measure: FiniteMixture          # smoothed final predictor

    def provenance(self) -> dict:
        return {
            "rho": self.rho_tag,
            "grid": [list(g) for g in self.grid],
            "cells": [
                {"n": c.n, "k": c.k, "i": c.i, "steps": [
                    {"l": l, "member": idx, "weight": w, "mass": m}
                    for l, (idx, w, m) in enumerate(zip(c.indices, c.weights, c.masses), start=1)
                ]}
                for c in self.cells
            ],
        }


def assemble(C: Sequence[ProcessMeasure], rho: ProcessMeasure, grid: Sequence[tuple[int, int]],
             cap: int = DEFAULT_CAP) -> ExtractedMixture:
    """Combine the greedy picks of every cell on a finite ``(n, k)`` grid into one mixture.

    Cell mixtures use weights ``weight(l)``; grid entries are weighted
    ``weight(n) weight(k) / k``; both are renormalized over what was realized,
    duplicates are merged and the result is smoothed with the uniform measure.
    """
    grid = tuple((int(n), int(k)) for n, k in grid)
    if not grid:
        raise InputError("grid must be non-empty")
    if len(set(grid)) != len(grid):
        raise InputError("grid entries must be distinct")
    C = list(C)
    tables: dict[int, ClassTable] = {}
    cells: list[CellMixture] = []
    greedy: dict = {}
    raw = np.zeros(len(C))
    for n, k in grid:
        if n not in tables:
            tables[n] = ClassTable.build(C, rho, n, cap)
        outer = weight(n) * weight(k) / k
        for i in range(1, k + 1):
            res = tables[n].greedy(k, i)
            greedy[(n, k, i)] = res
            if not res.steps:
                continue
            ws = tuple(weight(s.l) for s in res.steps)
            cell = CellMixture(n, k, i, tuple(res.chosen), ws, tuple(s.mass for s in res.steps))
            cells.append(cell)
            total = math.fsum(ws)
            for idx, w in zip(cell.indices, ws):
                raw[idx] += outer * w / total
    if raw.sum() <= 0:
        raise ContractError("no cell of the grid was covered; nothing to extract")
    comp = raw / raw.sum()
    used = [j for j in range(len(C)) if comp[j] > 0]
    inner = FiniteMixture([(comp[j], C[j]) for j in used], tag=f"extracted[{rho.tag}]")
    return ExtractedMixture(tuple(C), rho.tag, grid, tuple(cells), greedy, comp, mix_with_uniform(inner))


@dataclass(frozen=True)
class CombinedMixture:
    """``phi = sum_j w_j nu_j`` over mixtures extracted for several reference predictors."""

    parts: tuple[ExtractedMixture, ...]
    weights: np.ndarray
    measure: FiniteMixture


def combine(parts: Sequence[ExtractedMixture]) -> CombinedMixture:
    if not parts:
        raise InputError("need at least one extracted mixture")
    w = np.array([weight(j) for j in range(1, len(parts) + 1)])
    w = w / w.sum()
    phi = FiniteMixture([(wj, p.measure) for wj, p in zip(w, parts)], tag="phi")
    return CombinedMixture(tuple(parts), w, phi)


# ---------------------------------------------------------------------------
# dominance audit
# ---------------------------------------------------------------------------


def chain_constant(n: int, k: int, i: int, a: float, M: float) -> float:
    """Explicit constant ``B(n,k,i,a)`` of the dominance chain, in bits."""
    outer = log2_weight(n) + log2_weight(k) - math.log2(k)
    return -outer + (1.0 + 2.0 * math.log2((i * M / k + a) * n + 2.0)) - math.log2(schedule_normalizer())


CHAIN_FORMULA = (
    "-log2 nu(x) <= -log2 rho(x) + (a + M/k) n + log2 n + B, "
    "B = -log2(w_n w_k / k) + 1 + 2 log2((iM/k + a) n + 2) - log2 w"
)


@dataclass(frozen=True)
class AuditRow:
    mu_id: str
    cell_i: int
    covered_mass: float
    exceptional_mass: float
    bound_rhs_bits: float
    max_violation_bits: float
    exceptional_ok: bool
    chain_ok: bool

    def row(self) -> tuple:
        return (self.mu_id, self.cell_i, self.covered_mass, self.exceptional_mass,
                self.bound_rhs_bits, self.max_violation_bits)


@dataclass(frozen=True)
class AuditReport:
    n: int
    k: int
    a: float
    rows: tuple[AuditRow, ...]
    dn_nu: tuple[float, ...]     # d_n(mu, nu) for every member
    dn_rho: tuple[float, ...]    # d_n(mu, rho) for every member
    formula: str = CHAIN_FORMULA

    @property
    def passed(self) -> bool:
        return all(r.exceptional_ok and r.chain_ok for r in self.rows)

    def failures(self) -> list[str]:
        out = []
        for r in self.rows:
            if not r.exceptional_ok:
                out.append(f"{r.mu_id} cell {r.cell_i}: exceptional mass {r.exceptional_mass:.3g}")
            if not r.chain_ok:
                out.append(f"{r.mu_id} cell {r.cell_i}: chain violated by {r.max_violation_bits:.3g} bits")
        return out

    def write_csv(self, path):
        return csvio.write(path, AUDIT_COLUMNS, [r.row() for r in self.rows])


def _dn_from_logs(lmu: np.ndarray, lpred: np.ndarray) -> float:
    live = np.isfinite(lmu)
    if np.any(~np.isfinite(lpred[live])):
        return math.inf
    return max(0.0, math.fsum(np.exp2(lmu[live]) * (lmu[live] - lpred[live])))


def dominance_audit(C: Sequence[ProcessMeasure], rho: ProcessMeasure, extracted: ExtractedMixture,
                    n: int, k: int, slack: SlackParams, cap: int = DEFAULT_CAP,
                    nu: ProcessMeasure | None = None) -> AuditReport:
    """Check, for every member and cell, the exceptional-mass bound and the dominance chain.

    ``nu`` defaults to the extracted predictor; the chain is verified for
    every covered sequence against the explicit constant of
    :func:`chain_constant`.
    """
    if (n, k) not in extracted.grid:
        raise InputError(f"(n={n}, k={k}) is not in the extraction grid {list(extracted.grid)}")
    if slack.k != k:
        raise InputError("slack parameters were built for a different k")
    nu = extracted.measure if nu is None else nu
    C = list(C)
    table = ClassTable.build(C, rho, n, cap)
    lnu = enumerate_sequences([nu], n, cap=cap).logp[0]
    M = table.M
    rows = []
    for i in range(1, k + 1):
        res = extracted.greedy[(n, k, i)]
        l_use = min(slack.l_star(i, n), len(res.steps))
        covered = np.zeros(lnu.size, dtype=bool)
        covered[res.covered_at(l_use)] = True
        budget = (slack.a + M / k) * n + math.log2(n) + chain_constant(n, k, i, slack.a, M)
        for j, mu in enumerate(C):
            part = table.partition(j, k)
            cell = np.zeros(lnu.size, dtype=bool)
            cell[part.cell_codes(i)] = True
            lmu = table.logp[j]
            exc = math.fsum(np.exp2(lmu[cell & ~covered]))
            cov = math.fsum(np.exp2(lmu[cell & covered]))
            sel = cell & covered
            if sel.any():
                viol = float(np.max(-lnu[sel] - (-table.lrho[sel] + budget)))
            else:
                viol = -math.inf
            rows.append(AuditRow(
                f"{j}:{mu.tag}", i, cov, exc, budget, viol,
                exceptional_ok=exc <= 2.0 ** (-slack.a * n + 1) + SLACK,
                chain_ok=viol <= SLACK,
            ))
    dn_nu = tuple(_dn_from_logs(table.logp[j], lnu) for j in range(len(C)))
    dn_rho = tuple(_dn_from_logs(table.logp[j], table.lrho) for j in range(len(C)))
    return AuditReport(n, k, slack.a, tuple(rows), dn_nu, dn_rho)
