import math
from math import comb

import numpy as np
import pytest

from seqmix import csvio
from seqmix.enumeration import enumerate_sequences
from seqmix.errors import CapacityError, InputError
from seqmix.measures import (
    Dirac,
    FiniteMixture,
    KTEstimator,
    UniformIID,
    bernoulli,
    random_class,
)
from seqmix.minimax import (
    CAPACITY_COLUMNS,
    EVIDENCE_NOTE,
    admissibility_check,
    bayes_risk,
    capacity_iterate,
    minimax_gap,
    write_capacity_csv,
)

D0, D1 = Dirac(period=[0]), Dirac(period=[1])
H = lambda p: -p * math.log2(p) - (1 - p) * math.log2(1 - p)  # noqa: E731


def mutual_information(C, W, n):
    """Per-symbol I(W) = sum_i W_i D(mu_i || sum_j W_j mu_j) / n by direct summation."""
    P = np.exp2(enumerate_sequences(C, n).logp)
    mix = W @ P
    total = 0.0
    for w, p in zip(W, P):
        if w == 0:
            continue
        live = p > 0
        total += w * np.sum(p[live] * np.log2(p[live] / mix[live]))
    return total / n


def grid_oracle(C, n, step=1e-4):
    """Maximize I(W) over two-point priors on a grid of the given resolution."""
    P = np.exp2(enumerate_sequences(C, n).logp)
    w = np.arange(0.0, 1.0 + step / 2, step)[:, None]
    mix = w * P[0] + (1 - w) * P[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = [np.where(p > 0, p * np.log2(p / mix), 0.0).sum(axis=1) for p in P]
    w = w[:, 0]
    # a member with zero prior weight contributes nothing, even where its divergence is infinite
    with np.errstate(invalid="ignore"):
        info = (np.where(w > 0, w * terms[0], 0.0) + np.where(w < 1, (1 - w) * terms[1], 0.0)) / n
    j = int(np.argmax(info))
    return float(info[j]), float(w[j])


# -- Bayes risk ---------------------------------------------------------------------


def test_bayes_risk_examples():
    mu = bernoulli(0.3)
    assert bayes_risk([1.0, 0.0], mu, [mu, bernoulli(0.9)], 6) == 0.0
    for n in (1, 4, 9):
        assert bayes_risk([0.5, 0.5], UniformIID(2), [D0, D1], n) == pytest.approx(1.0, abs=1e-12)
    C = [bernoulli(0.2), bernoulli(0.8)]
    bary = FiniteMixture([(0.5, C[0]), (0.5, C[1])])
    assert bayes_risk([0.5, 0.5], bary, C, 1) == pytest.approx(1 - H(0.2), abs=1e-12)
    assert bayes_risk([0.5, 0.5], bary, C, 1) == pytest.approx(mutual_information(C, np.array([.5, .5]), 1))


def test_bayes_risk_validates_prior():
    with pytest.raises(InputError):
        bayes_risk([0.5, 0.6], UniformIID(2), [D0, D1], 2)
    with pytest.raises(InputError):
        bayes_risk([1.0], UniformIID(2), [D0, D1], 2)


# -- capacity ----------------------------------------------------------------------------


def test_capacity_singleton():
    res = capacity_iterate([bernoulli(0.4)], 5)
    assert res.value == 0.0 and res.prior.tolist() == [1.0] and res.converged


def test_capacity_two_diracs():
    res = capacity_iterate([D0, D1], 4)
    assert res.value == pytest.approx(0.25, abs=1e-9)
    assert res.prior == pytest.approx([0.5, 0.5], abs=1e-4)
    v, w = grid_oracle([D0, D1], 4)
    assert v == pytest.approx(0.25, abs=1e-9) and w == pytest.approx(0.5, abs=1e-4)


def test_capacity_bernoulli_pair():
    C = [bernoulli(0.2), bernoulli(0.8)]
    res = capacity_iterate(C, 1)
    v, w = grid_oracle(C, 1)
    assert res.value == pytest.approx(v, abs=1e-5)
    assert res.value == pytest.approx(0.278072, abs=1e-5)
    assert w == pytest.approx(0.5, abs=1e-4)
    assert res.prior == pytest.approx([0.5, 0.5], abs=1e-4)


def test_capacity_mixture_weights_are_the_prior():
    res = capacity_iterate(random_class("bernoulli", 4, 3), 6)
    kept = res.prior[res.prior > 0]
    assert np.allclose(res.bayes_mixture.weights, kept / kept.sum(), atol=1e-12)


def test_capacity_respects_joint_cap():
    with pytest.raises(CapacityError):
        capacity_iterate([UniformIID(2), KTEstimator()], 12, cap=1000)


def test_capacity_flags_unconverged_runs():
    res = capacity_iterate(random_class("bernoulli", 5, 1), 6, tol=1e-12, max_iter=3)
    assert not res.converged and res.iterations <= 3
    assert res.lower <= res.upper


def test_capacity_csv(tmp_path):
    res = capacity_iterate([D0, D1], 4)
    rows = csvio.read(write_capacity_csv(tmp_path / "c.csv", [("pair", res)]))
    assert tuple(rows[0]) == CAPACITY_COLUMNS
    assert rows[0]["class_id"] == "pair" and rows[0]["value_bits"] == "0.25"


# -- minimax gap --------------------------------------------------------------------------


def test_minimax_gap_examples():
    assert minimax_gap([KTEstimator()], 4).gap == 0.0
    rep = minimax_gap([D0, D1], 4, 1e-6)
    assert rep.gap <= 2e-6 and rep.within
    assert rep.note == EVIDENCE_NOTE
    rep = minimax_gap(random_class("bernoulli", 5, 0), 8, 1e-6)
    assert 0.0 <= rep.gap <= 2e-6


# -- invariants ---------------------------------------------------------------------------


def test_sandwich_and_equalizer_on_seeded_classes():
    tol = 1e-6
    for seed in range(20):
        C = random_class("bernoulli", 5, 100 + seed)
        res = capacity_iterate(C, 8, tol)
        assert res.converged
        assert res.lower <= res.upper + 1e-15
        assert res.gap <= 2 * tol
        support = res.prior > tol
        assert np.all(np.abs(res.risks[support] - res.value) <= 10 * tol)


def test_permutation_and_duplication_invariance():
    tol = 1e-7
    C = random_class("mixed", 4, 8)
    base = capacity_iterate(C, 5, tol).value
    perm = capacity_iterate([C[i] for i in (2, 0, 3, 1)], 5, tol).value
    dup = capacity_iterate(C + [C[1]], 5, tol).value
    assert perm == pytest.approx(base, abs=2 * tol)
    assert dup == pytest.approx(base, abs=2 * tol)


def test_adding_a_member_never_decreases_value():
    tol = 1e-7
    C = random_class("bernoulli", 6, 21)
    values = [capacity_iterate(C[:m], 6, tol).value for m in range(1, 7)]
    assert all(b >= a - 2 * tol for a, b in zip(values, values[1:]))


# -- admissibility ------------------------------------------------------------------------


def test_admissibility_identity():
    rep = admissibility_check(KTEstimator(), KTEstimator(), 6)
    assert rep.dn_improved == 0.0 and rep.improvement == 0.0 and not rep.dominated


def test_admissibility_dirac_against_uniform():
    rep = admissibility_check(UniformIID(2), D0, 20)
    assert rep.dn_rho == pytest.approx(20.0)
    assert rep.dn_improved <= 1.0 and rep.bound_holds and rep.dominated


def improved_loss_oracle(p, q, n):
    """d_n(Bern(p), (Bern(q) + Bern(p))/2) summed over the number of ones."""
    total = 0.0
    for s in range(n + 1):
        mu = p**s * (1 - p) ** (n - s)
        rho = q**s * (1 - q) ** (n - s)
        total += comb(n, s) * mu * math.log2(mu / (0.5 * rho + 0.5 * mu))
    return total


def test_admissibility_bernoulli_pair():
    rep = admissibility_check(bernoulli(0.25), bernoulli(0.75), 10)
    assert rep.dn_rho == pytest.approx(10 * (0.5 * math.log2(3)), abs=1e-9)
    assert rep.dn_improved == pytest.approx(improved_loss_oracle(0.75, 0.25, 10), abs=1e-9)
    assert rep.dn_improved <= 1.0
    assert rep.improvement == pytest.approx(rep.dn_rho - rep.dn_improved)


def test_admissibility_bound_exhaustive_and_sampled():
    for seed in range(6):
        rho, mu = random_class("mixed", 2, seed)
        for n in (1, 6, 12):
            assert admissibility_check(rho, mu, n).dn_improved <= 1.0 + 1e-12
    rep = admissibility_check(KTEstimator(), bernoulli(0.3), 1000, method="monte-carlo", samples=200, seed=1)
    assert rep.bound_holds


def test_admissibility_unknown_method():
    with pytest.raises(InputError):
        admissibility_check(UniformIID(2), D0, 3, method="guess")
