import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import all_sequences
from seqmix.errors import DegenerateConditioningError, InputError
from seqmix.measures import (
    Alphabet,
    Dirac,
    FiniteMixture,
    IIDCategorical,
    KTEstimator,
    MarkovChain,
    UniformIID,
    as_seq,
    bernoulli,
    log_prob,
    logsumexp2,
    mix_with_uniform,
    posterior_weights,
    random_class,
    random_measure,
    schedule_normalizer,
    weight,
)


def kt_by_hand(x, A=2):
    counts = [0] * A
    lp = 0.0
    for t, s in enumerate(x):
        lp += math.log2((counts[s] + 0.5) / (t + A / 2))
        counts[s] += 1
    return lp


def zoo(A):
    rng = np.random.default_rng(11 + A)
    members = [
        UniformIID(A),
        KTEstimator(A),
        IIDCategorical(rng.dirichlet(np.ones(A))),
        MarkovChain(rng.dirichlet(np.ones(A)), rng.dirichlet(np.ones(A), size=A)),
        Dirac([1 % A], [0, A - 1], A),
    ]
    members.append(FiniteMixture([(0.3, members[2]), (0.7, members[4])]))
    members.append(mix_with_uniform(members[3]))
    return members


# -- alphabet and sequences ---------------------------------------------------


def test_alphabet_bounds_and_M():
    assert Alphabet(2).M == 1.0
    assert Alphabet(256).M == 8.0
    assert Alphabet(3).M == math.log2(3)
    for bad in (1, 257):
        with pytest.raises(InputError):
            Alphabet(bad)


def test_as_seq_accepts_strings_and_lists():
    assert as_seq("0102", 3).tolist() == [0, 1, 0, 2]
    assert as_seq([1, 1], 2).tolist() == [1, 1]
    assert as_seq("", 2).size == 0


@pytest.mark.parametrize("bad", ["012", [0, 2], [-1]])
def test_symbol_out_of_range_is_input_error(bad):
    with pytest.raises(InputError):
        log_prob(UniformIID(2), bad)


# -- log_prob examples ---------------------------------------------------------


def test_uniform_log_prob():
    assert log_prob(UniformIID(2), "010") == -3.0


def test_dirac_log_prob():
    d = Dirac(period=[0])
    assert log_prob(d, "000") == 0.0
    assert log_prob(d, "001") == -math.inf


def test_kt_log_prob_matches_add_half_rule():
    assert log_prob(KTEstimator(), "11") == pytest.approx(math.log2(3 / 8), abs=1e-12)
    assert log_prob(KTEstimator(), "11") == pytest.approx(-1.415037, abs=1e-6)
    rng = np.random.default_rng(0)
    for A in (2, 3, 5):
        x = rng.integers(0, A, 40)
        assert log_prob(KTEstimator(A), x) == pytest.approx(kt_by_hand(x, A), abs=1e-9)


def test_empty_sequence_has_log_prob_zero():
    for m in zoo(3):
        assert log_prob(m, []) == 0.0


def test_dirac_prefix_and_period():
    d = Dirac([1, 1], [0, 1])
    assert d.path(7).tolist() == [1, 1, 0, 1, 0, 1, 0]
    assert log_prob(d, d.path(9)) == 0.0
    # off the support the conditional is uniform
    assert d.cond_dist("0").tolist() == [0.5, 0.5]


def test_markov_chain_matches_hand_product():
    init = [0.25, 0.75]
    P = [[0.9, 0.1], [0.4, 0.6]]
    m = MarkovChain(init, P)
    expect = math.log2(0.75 * 0.4 * 0.9 * 0.1)  # 1->0, 0->0, 0->1
    assert log_prob(m, "1001") == pytest.approx(expect, abs=1e-12)


def test_markov_rows_must_sum_to_one():
    with pytest.raises(InputError):
        MarkovChain([0.5, 0.5], [[0.5, 0.4], [0.5, 0.5]])


def test_kt_empty_prefix_is_uniform():
    assert KTEstimator(4).cond_dist([]).tolist() == [0.25] * 4


# -- posterior and mixtures ----------------------------------------------------


def test_posterior_weights_examples():
    d0, d1 = Dirac(period=[0]), Dirac(period=[1])
    mix = FiniteMixture([(0.5, d0), (0.5, d1)])
    assert posterior_weights(mix, "").tolist() == [0.5, 0.5]
    assert posterior_weights(mix, "1").tolist() == [0.0, 1.0]
    bb = FiniteMixture([(0.5, bernoulli(0.25)), (0.5, bernoulli(0.75))])
    assert posterior_weights(bb, "1") == pytest.approx([0.25, 0.75], abs=1e-15)


def test_posterior_of_impossible_prefix_is_degenerate():
    mix = FiniteMixture([(0.5, Dirac(period=[0])), (0.5, Dirac(period=[0, 0, 1]))])
    with pytest.raises(DegenerateConditioningError):
        posterior_weights(mix, "1")


def test_mixture_probability_is_weighted_sum():
    comps = zoo(2)[:5]
    w = np.array([0.1, 0.2, 0.3, 0.15, 0.25])
    mix = FiniteMixture(list(zip(w, comps)))
    for x in all_sequences(2, 6):
        direct = logsumexp2([math.log2(wi) + log_prob(c, x) for wi, c in zip(w, comps)])
        assert log_prob(mix, x) == pytest.approx(direct, abs=1e-9)


def test_mixture_weights_are_normalized():
    mix = FiniteMixture([(2.0, UniformIID(2)), (6.0, KTEstimator(2))])
    assert mix.weights.tolist() == [0.25, 0.75]
    with pytest.raises(InputError):
        FiniteMixture([(0.0, UniformIID(2))])
    with pytest.raises(InputError):
        FiniteMixture([(1.0, UniformIID(2)), (1.0, UniformIID(3))])


def test_mix_with_uniform_examples():
    assert log_prob(mix_with_uniform(Dirac(period=[0])), "111") == -4.0
    u = mix_with_uniform(UniformIID(2))
    for x in all_sequences(2, 5):
        assert log_prob(u, x) == pytest.approx(-5.0, abs=1e-12)
    assert 2 ** log_prob(mix_with_uniform(bernoulli(0.75)), "1") == pytest.approx(0.625, abs=1e-15)


def test_mix_with_uniform_bound_exhaustive():
    # -log2 nu'(x) <= n M + 1 for every x, n <= 12
    for m in zoo(2):
        sm = mix_with_uniform(m)
        for n in (1, 5, 12):
            lp = sm.log_prob_batch(all_sequences(2, n))
            assert np.all(-lp <= n + 1 + 1e-9)


# -- weight schedule -----------------------------------------------------------


def normalizer_oracle():
    """Bracket sum_{j>=2} 1/(j log2^2 j) by a partial sum plus integral tail bounds."""
    N = 10**7
    j = np.arange(2, N + 1, dtype=np.float64)
    partial = math.fsum(1.0 / (j * np.log2(j) ** 2))
    lo = partial + math.log(2) / math.log2(N + 1)
    hi = partial + math.log(2) / math.log2(N)
    return 1.0 / hi, 1.0 / lo


def test_schedule_normalizer_against_oracle():
    w_lo, w_hi = normalizer_oracle()
    w = schedule_normalizer()
    assert w_lo - 1e-12 <= w <= w_hi + 1e-12
    # frozen from the oracle
    assert w == pytest.approx(0.98655105247, abs=1e-9)


def test_weight_examples():
    w = schedule_normalizer()
    assert weight(1) == pytest.approx(w / 2, rel=1e-15)
    assert weight(3) == pytest.approx(w / 16, rel=1e-15)
    with pytest.raises(InputError):
        weight(0)


def test_weight_partial_sums_increase_and_stay_below_one():
    ws = np.array([weight(k) for k in range(1, 5001)])
    assert np.all(ws > 0)
    assert np.all(np.diff(ws) < 0)
    partial = np.cumsum(ws)
    assert np.all(np.diff(partial) > 0)
    assert partial[-1] < 1.0


# -- sampling --------------------------------------------------------------------


def test_sample_is_seeded_and_returns_log_probs():
    m = MarkovChain([0.5, 0.5], [[0.9, 0.1], [0.2, 0.8]])
    a, la = m.sample(50, 12, np.random.default_rng(3))
    b, lb = m.sample(50, 12, np.random.default_rng(3))
    assert np.array_equal(a, b) and np.array_equal(la, lb)
    assert np.allclose(la, m.log_prob_batch(a), atol=1e-12)


def test_sample_frequencies_match_theta():
    m = bernoulli(0.3)
    x, _ = m.sample(20000, 1, np.random.default_rng(0))
    assert abs(x.mean() - 0.3) < 4 * math.sqrt(0.3 * 0.7 / 20000)


def test_random_class_is_reproducible():
    a = [m.tag for m in random_class("mixed", 6, 5)]
    b = [m.tag for m in random_class("mixed", 6, 5)]
    assert a == b
    with pytest.raises(InputError):
        random_measure("nope", np.random.default_rng(0))


# -- invariants (property based) -------------------------------------------------

families = st.sampled_from(["iid", "markov", "dirac", "mixed"])


@given(kind=families, seed=st.integers(0, 10**6), A=st.sampled_from([2, 3]),
       prefix_seed=st.integers(0, 10**6), length=st.integers(0, 12))
def test_conditionals_sum_to_one(kind, seed, A, prefix_seed, length):
    rng = np.random.default_rng(seed)
    m = random_measure(kind, rng, A)
    mix = FiniteMixture([(0.4, m), (0.6, KTEstimator(A))])
    prefix = np.random.default_rng(prefix_seed).integers(0, A, length)
    for meas in (m, mix, mix_with_uniform(m), KTEstimator(A)):
        p = meas.cond_dist(prefix)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) <= 1e-12


@given(kind=families, seed=st.integers(0, 10**6), A=st.sampled_from([2, 3]),
       prefix_seed=st.integers(0, 10**6), length=st.integers(0, 10))
def test_kolmogorov_consistency(kind, seed, A, prefix_seed, length):
    m = FiniteMixture([(0.5, random_measure(kind, np.random.default_rng(seed), A)), (0.5, KTEstimator(A))])
    x = list(np.random.default_rng(prefix_seed).integers(0, A, length))
    ext = logsumexp2([log_prob(m, x + [a]) for a in range(A)])
    assert ext == pytest.approx(log_prob(m, x), abs=1e-9)


@given(seed=st.integers(0, 10**6), length=st.integers(0, 10))
def test_posterior_average_reproduces_mixture_conditional(seed, length):
    rng = np.random.default_rng(seed)
    comps = [random_measure("mixed", rng, 2) for _ in range(3)] + [KTEstimator(2)]
    mix = FiniteMixture(list(zip(rng.dirichlet(np.ones(4)), comps)))
    x = rng.integers(0, 2, length)
    post = posterior_weights(mix, x)
    avg = sum(p * c.cond_dist(x) for p, c in zip(post, comps))
    assert np.allclose(avg, mix.cond_dist(x), atol=1e-12, rtol=0)


def test_batched_state_machine_matches_sequential_evaluation():
    for A in (2, 3):
        for m in zoo(A):
            seqs = all_sequences(A, 4)
            batch = m.log_prob_batch(seqs)
            single = np.array([log_prob(m, s) for s in seqs])
            assert np.array_equal(np.isinf(batch), np.isinf(single))
            fin = np.isfinite(single)
            assert np.allclose(batch[fin], single[fin], atol=1e-12)
            chain = np.array([
                sum(math.log2(m.cond_dist(s[:t])[s[t]]) if m.cond_dist(s[:t])[s[t]] > 0 else -math.inf
                    for t in range(len(s)))
                for s in seqs
            ])
            assert np.allclose(single[fin], chain[fin], atol=1e-12)
