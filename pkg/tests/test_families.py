import math
from fractions import Fraction

import numpy as np
import pytest

from seqmix import csvio
from seqmix.errors import InputError
from seqmix.families import (
    ChangePointSpec,
    SwitchingKT,
    TypicalMixtureSpec,
    bernoulli_code_length,
    binary_entropy,
    changepoint_value,
    count_extensions,
    gen_changepoint,
    kt_code_lengths,
    periodic,
    switch_budget,
    switching_kt_cond,
    typical_loss_curve,
    typical_mixture_log_prob,
)
from seqmix.measures import KTEstimator, log_prob, logsumexp2, weight

THIRD = Fraction(1, 3)


# -- counting ---------------------------------------------------------------------


def test_count_examples():
    assert count_extensions(0, 0, 6, Fraction(1, 6), THIRD) == 41
    assert count_extensions(2, 2, 6, Fraction(1, 6), THIRD) == 5


def test_count_full_length_prefix():
    assert count_extensions(2, 6, 6, Fraction(1, 6), THIRD) == 1
    assert count_extensions(4, 6, 6, Fraction(1, 6), THIRD) == 0


def popcounts(r):
    return np.array([bin(v).count("1") for v in range(2**r)], dtype=np.int64)


@pytest.mark.parametrize("p_star, eps", [(THIRD, Fraction(1, 2)), (THIRD, Fraction(1, 8)),
                                         (Fraction(1, 2), Fraction(1, 6)), (Fraction(1, 5), Fraction(1, 16))])
def test_count_equals_brute_force(p_star, eps):
    for n_j in range(1, 15):
        allowed = np.array([abs(Fraction(t, n_j) - p_star) <= eps for t in range(n_j + 1)])
        for length in range(n_j + 1):
            pc = popcounts(n_j - length)
            for ones in range(length + 1):
                brute = int(allowed[ones + pc].sum())
                assert count_extensions(ones, length, n_j, eps, p_star) == brute


def test_count_rejects_bad_statistics():
    with pytest.raises(InputError):
        count_extensions(3, 2, 6, Fraction(1, 6))
    with pytest.raises(InputError):
        count_extensions(0, 7, 6, Fraction(1, 6))


# -- typical mixture -------------------------------------------------------------------


def test_empty_prefix_is_total_truncated_weight():
    spec = TypicalMixtureSpec(J=5, L=4)
    total = 0.0
    for j in range(1, 6):
        for l in range(1, 5):
            if count_extensions(0, 0, 2**j, Fraction(1, 2**l), THIRD):
                total += weight(l) * weight(j)
    assert typical_mixture_log_prob(spec, "") == pytest.approx(math.log2(total), abs=1e-12)


def test_atypical_prefix_has_no_mass():
    tight = TypicalMixtureSpec(J=3, L=6, l_min=2)
    assert typical_mixture_log_prob(tight, "111111") == -math.inf
    # the loosest band still admits it
    assert typical_mixture_log_prob(TypicalMixtureSpec(J=3, L=6), "111111") > -math.inf


def test_prefix_longer_than_truncation_rejected():
    with pytest.raises(InputError):
        typical_mixture_log_prob(TypicalMixtureSpec(J=3), "0" * 9)


def test_small_prefix_by_direct_enumeration():
    # explicit representatives for J=2, L=2: horizons 2 and 4, bands 1/2 and 1/4
    spec = TypicalMixtureSpec(J=2, L=2)
    import itertools

    total = 0.0
    for j in (1, 2):
        n_j = 2**j
        for l in (1, 2):
            S = [s for s in itertools.product((0, 1), repeat=n_j)
                 if abs(Fraction(sum(s), n_j) - THIRD) <= Fraction(1, 2**l)]
            if S:
                total += weight(l) * weight(j) * sum(s[:2] == (1, 0) for s in S) / len(S)
    assert typical_mixture_log_prob(spec, "10") == pytest.approx(math.log2(total), abs=1e-12)


def test_super_additivity_up_to_length_ten():
    spec = TypicalMixtureSpec(J=5, L=4)
    rng = np.random.default_rng(0)
    for length in range(0, 11):
        for _ in range(5):
            x = rng.integers(0, 2, length).tolist()
            here = typical_mixture_log_prob(spec, x)
            ext = logsumexp2([typical_mixture_log_prob(spec, x + [a]) for a in (0, 1)])
            assert ext <= here + 1e-12


def test_periodic_sequence_loss_near_entropy():
    x = periodic([1, 0, 0], 3000)
    spec = TypicalMixtureSpec()
    per = -typical_mixture_log_prob(spec, x) / 3000
    assert abs(per - binary_entropy(1 / 3)) <= 0.05
    assert abs(bernoulli_code_length(x, 1 / 3) / 3000 - 0.918296) <= 0.01
    curve = typical_loss_curve(spec, x, [300, 3000])
    assert curve[-1] == (3000, pytest.approx(per, abs=1e-12))


def test_loss_curve_marks_vanished_mass():
    spec = TypicalMixtureSpec(J=4, L=3)
    curve = typical_loss_curve(spec, [1] * 16, [2, 16])
    assert math.isfinite(curve[0][1]) and curve[1][1] == math.inf


def test_binary_entropy_value():
    assert binary_entropy(1 / 3) == pytest.approx(0.918296, abs=1e-6)
    assert binary_entropy(0.0) == 0.0


# -- change points ------------------------------------------------------------------------


def test_no_changes_gives_one_segment():
    tr = gen_changepoint(ChangePointSpec(0.0, 500), 3)
    assert tr.change_times.size == 0 and tr.thetas.size == 1


def test_adversarial_grid_alternates_deterministic_runs():
    tr = gen_changepoint(ChangePointSpec(1 / 64, 256, thetas=(0, 1, 0, 1), change_every=64), 0)
    assert tr.change_times.tolist() == [64, 128, 192]
    assert tr.seq.tolist() == [0] * 64 + [1] * 64 + [0] * 64 + [1] * 64


def test_generator_is_seeded_and_bounded():
    spec = ChangePointSpec(1 / 64, 4096)
    a, b = gen_changepoint(spec, 0), gen_changepoint(spec, 0)
    assert np.array_equal(a.seq, b.seq) and np.array_equal(a.change_times, b.change_times)
    assert a.change_times.size <= 64
    for (lo, hi), th in zip(a.segment_bounds, a.thetas):
        sd = math.sqrt(th * (1 - th) / (hi - lo))
        assert abs(a.seq[lo:hi].mean() - th) <= 3 * sd + 1e-12


def test_excess_changes_are_rejected_and_recorded():
    tr = gen_changepoint(ChangePointSpec(0.25, 40), 1)
    assert tr.change_times.size <= 10
    draws = np.flatnonzero(np.random.default_rng(1).random(39) < 0.25) + 1
    assert tr.rejected == max(0, draws.size - 10)
    assert tr.change_times.tolist() == draws[:10].tolist()


def test_trace_csv(tmp_path):
    tr = gen_changepoint(ChangePointSpec(1 / 8, 32, thetas=(0.5,)), 2)
    rows = csvio.read(tr.write_csv(tmp_path / "t.csv"))
    assert list(rows[0]) == ["t", "symbol", "is_change", "theta"]
    assert len(rows) == 32
    assert sum(r["is_change"] == "true" for r in rows) == tr.change_times.size


def test_bad_change_specs():
    with pytest.raises(InputError):
        ChangePointSpec(1.0, 10)
    with pytest.raises(InputError):
        ChangePointSpec(0.1, 10, thetas=(1.5,))


# -- switching predictor -----------------------------------------------------------------------


def test_switching_starts_uniform():
    assert switching_kt_cond(SwitchingKT(1 / 64), "").tolist() == [0.5, 0.5]


def test_switching_small_alpha_is_kt():
    x = np.random.default_rng(4).integers(0, 2, 100)
    assert log_prob(SwitchingKT(1e-13), x) == pytest.approx(log_prob(KTEstimator(), x), abs=1e-9)


def test_switching_normalization_at_every_step():
    sk = SwitchingKT(0.05)
    x = np.random.default_rng(5).integers(0, 2, 60)
    state = sk.init_state(1)
    for t in range(60):
        assert abs(sk.predict(state).sum() - 1.0) <= 1e-12
        assert abs(sk.posterior(state).sum() - 1.0) <= 1e-12
        state = sk.update(state, x[t:t + 1])


def test_switching_streaming_code_lengths_match_state_machine():
    sk = SwitchingKT(1 / 16)
    x = np.random.default_rng(6).integers(0, 2, 40)
    cl = sk.code_lengths(x)
    for t in (1, 10, 40):
        assert cl[t - 1] == pytest.approx(-log_prob(sk, x[:t]), abs=1e-9)


def test_switching_matches_explicit_path_sum():
    # brute force over all change-time sets for a short sequence
    import itertools

    a = 0.2
    x = [0, 1, 1, 0, 1]
    n = len(x)
    total = 0.0
    for bits in itertools.product((0, 1), repeat=n - 1):
        prior = np.prod([a if b else 1 - a for b in bits])
        starts = [0] + [t + 1 for t, b in enumerate(bits) if b]
        edges = starts + [n]
        lik = 1.0
        for s, e in zip(edges[:-1], edges[1:]):
            lik *= 2 ** log_prob(KTEstimator(), x[s:e])
        total += prior * lik
    assert log_prob(SwitchingKT(a), x) == pytest.approx(math.log2(total), abs=1e-12)


def test_restart_oracle():
    x = np.array([1, 1, 0, 0, 0, 1])
    assert kt_code_lengths(x)[-1] == pytest.approx(-log_prob(KTEstimator(), x), abs=1e-12)
    restarted = kt_code_lengths(x, [2])[-1]
    expect = -log_prob(KTEstimator(), x[:2]) - log_prob(KTEstimator(), x[2:])
    assert restarted == pytest.approx(expect, abs=1e-12)


def test_switching_within_budget_on_seeded_data():
    alpha = 1 / 64
    sk = SwitchingKT(alpha)
    for seed in range(10):
        tr = gen_changepoint(ChangePointSpec(alpha, 2048), seed)
        excess = (sk.code_lengths(tr.seq)[-1] - kt_code_lengths(tr.seq, tr.change_times)[-1]) / 2048
        assert excess <= switch_budget(tr.change_times.size, 2048, alpha) + 0.02


# -- value formula ---------------------------------------------------------------------------


def test_changepoint_value_examples():
    assert changepoint_value(1 / 16) == 0.1875
    assert changepoint_value(1 / 64) == 0.0625
    with pytest.raises(InputError):
        changepoint_value(0.0)


def test_changepoint_value_increasing_on_dyadic_grid():
    vals = [changepoint_value(2.0**-e) for e in range(10, 1, -1)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
