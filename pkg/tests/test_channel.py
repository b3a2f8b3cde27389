import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hanzipron.channel import (ChannelTable, CharTriples, EMConfig, FactoredChannel,
                               LikelihoodTrace, PriorTriples, component_index, corpus_loglik,
                               e_step, em_iteration, em_train, factored_prob, hints_from_pairs,
                               init_channel, posteriors, read_channel, select_best_restart,
                               write_channel)
from hanzipron.lm import train_lm
from hanzipron.phonology import DecompositionTable
from hanzipron.symbols import NgramCounts, SymbolTable, TokenStream, count_ngrams

from .oracles import brute_force_estep, brute_force_mstep


def random_instance(rng, n, T, M, C, P):
    theta = rng.uniform(0.05, 1, size=(P, C))
    theta /= theta.sum(axis=1, keepdims=True)
    cg = np.unique(rng.integers(0, C, size=(T, n)), axis=0)
    cc = rng.integers(1, 50, size=len(cg)).astype(float)
    pg = np.unique(rng.integers(0, P, size=(M, n)), axis=0)
    pp = rng.uniform(0.1, 1, size=len(pg))
    pp /= pp.sum() * 1.5  # top-M mass below one, as for a truncated prior
    return theta, CharTriples(cg, cc), PriorTriples(pg, pp)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([2, 3]), st.sampled_from(["direct", "contract"]))
def test_estep_matches_brute_force(seed, n, method):
    rng = np.random.default_rng(seed)
    theta, chars, prior = random_instance(rng, n, 5, 10, 4, 3)
    est = e_step(theta, chars, prior, method)
    posts, ll, counts = brute_force_estep(theta.tolist(), chars.grams.tolist(),
                                          chars.counts.tolist(), prior.grams.tolist(),
                                          prior.probs.tolist())
    assert abs(est.loglik - ll) <= 1e-12 * max(1, abs(ll))
    dense = np.zeros_like(theta)
    for (c, p), v in counts.items():
        dense[p, c] = v
    np.testing.assert_allclose(est.counts, dense, rtol=1e-12, atol=1e-12)
    post, _ = posteriors(ChannelTable(theta), chars, prior)
    np.testing.assert_allclose(post, np.array(posts), rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_mstep_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    theta, chars, prior = random_instance(rng, 3, 5, 10, 4, 3)
    new, _, _ = em_iteration(ChannelTable(theta), chars, prior, "direct")
    _, _, counts = brute_force_estep(theta.tolist(), chars.grams.tolist(), chars.counts.tolist(),
                                     prior.grams.tolist(), prior.probs.tolist())
    ref = np.array(brute_force_mstep(counts, theta.tolist()))
    np.testing.assert_allclose(new.probs, ref, rtol=1e-12, atol=1e-14)


def test_posteriors_sum_to_one():
    rng = np.random.default_rng(1)
    theta, chars, prior = random_instance(rng, 3, 8, 20, 5, 4)
    post, ll = posteriors(ChannelTable(theta), chars, prior)
    np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-12)
    assert np.isfinite(ll).all()


def test_single_candidate_aligns_in_one_iteration():
    c_tri = NgramCounts(3, {(0, 1, 2): 4}, 4)
    prior = train_lm(NgramCounts(3, {(2, 0, 1): 1}, 1))
    res = em_train(c_tri, prior, EMConfig(N=1, M=1, iterations=1), chars=3, syllables=3)
    th = res.channel.matrix()
    assert th[2, 0] == th[0, 1] == th[1, 2] == 1.0


def test_uniform_init():
    ch = init_channel(4, 3, EMConfig(init="uniform"))
    assert np.all(ch.matrix() == 0.25)


def test_init_is_seeded_and_hints_dominate():
    cfg = EMConfig(seed=7, hints=((2, 1),))
    a = init_channel(10, 4, cfg).matrix()
    b = init_channel(10, 4, cfg).matrix()
    assert np.array_equal(a, b)
    assert a[1, 2] == a[1].max() and a[1, 2] > 0.5
    np.testing.assert_allclose(a.sum(axis=1), 1.0)
    plain = init_channel(10, 4, EMConfig(seed=7)).matrix()
    assert np.array_equal(plain[0], a[0])
    with pytest.raises(ValueError):
        init_channel(10, 4, EMConfig(hints=((10, 0),)))


def test_hints_from_pairs():
    ct, st_ = SymbolTable(), SymbolTable()
    ct.intern("要"), st_.intern("yao")
    assert hints_from_pairs([("要", "yao")], ct, st_) == [(0, 0)]
    with pytest.raises(ValueError):
        hints_from_pairs([("要", "zhong")], ct, st_)


def toy_cipher(seed, P=6, C=10, length=3000):
    rng = np.random.default_rng(seed)
    syl = rng.integers(0, P, size=length)
    # every syllable has one or two spellings
    owner = np.concatenate([np.arange(P), rng.integers(0, P, size=C - P)])
    spell = [np.flatnonzero(owner == p) for p in range(P)]
    chars = np.array([rng.choice(spell[p]) for p in syl])
    other = rng.integers(0, P, size=length)
    lm = train_lm(count_ngrams(TokenStream.from_ids("syllable", other), 3))
    return count_ngrams(TokenStream.from_ids("character", chars), 3), lm, owner


def test_em_trace_is_monotone_and_final_is_corpus_loglik():
    c_tri, prior, _ = toy_cipher(0)
    cfg = EMConfig(N=200, M=200, iterations=15, restarts=2, seed=3)
    res = em_train(c_tri, prior, cfg, chars=10, syllables=6)
    assert all(t.is_monotone() for t in res.runs)
    assert len(res.trace.values) == 15
    assert res.trace.final == pytest.approx(corpus_loglik(res.channel, c_tri, prior, cfg),
                                            rel=1e-12)
    assert res.best == select_best_restart(res.runs)
    np.testing.assert_allclose(res.channel.matrix().sum(axis=1), 1.0, atol=1e-9)


def test_direct_and_contract_training_agree():
    c_tri, prior, _ = toy_cipher(1)
    kw = dict(N=150, M=150, iterations=5, seed=2)
    a = em_train(c_tri, prior, EMConfig(method="direct", **kw), chars=10, syllables=6)
    b = em_train(c_tri, prior, EMConfig(method="contract", **kw), chars=10, syllables=6)
    np.testing.assert_allclose(a.channel.matrix(), b.channel.matrix(), rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(a.trace.values, b.trace.values, rtol=1e-12)


def test_parallel_restarts_match_serial():
    c_tri, prior, _ = toy_cipher(2)
    kw = dict(N=100, M=100, iterations=3, restarts=3, seed=5)
    a = em_train(c_tri, prior, EMConfig(**kw), chars=10, syllables=6)
    b = em_train(c_tri, prior, EMConfig(workers=2, **kw), chars=10, syllables=6)
    assert [t.final for t in a.runs] == [t.final for t in b.runs]
    assert np.array_equal(a.channel.matrix(), b.channel.matrix())


def test_pair_mode_with_pruning():
    rng = np.random.default_rng(0)
    syl = rng.integers(0, 4, size=2000)
    chars = TokenStream.from_ids("character", syl + 0)
    prior = train_lm(count_ngrams(TokenStream.from_ids("syllable", rng.integers(0, 4, 2000)), 2))
    cfg = EMConfig(mode="pair", N=50, M=50, iterations=10, prune=5)
    res = em_train(count_ngrams(chars, 2), prior, cfg, chars=4, syllables=4)
    assert res.trace.is_monotone()
    with pytest.raises(ValueError):
        em_train(count_ngrams(chars, 3), prior, cfg)


def test_zero_support_is_reported_not_fatal(caplog):
    c_tri = NgramCounts(3, {(0, 0, 0): 2, (1, 1, 1): 1}, 3)
    prior = train_lm(NgramCounts(3, {(0, 0, 0): 1}, 1))
    theta = np.array([[1.0, 0.0]])
    chars = CharTriples(np.array([[0, 0, 0], [1, 1, 1]]), np.array([2.0, 1.0]))
    est = e_step(theta, chars, PriorTriples(np.array([[0, 0, 0]]), np.array([1.0])))
    assert est.loglik == -math.inf and est.zero.tolist() == [1]
    assert est.counts[0, 0] == pytest.approx(6.0)


def test_select_best_restart_examples():
    assert select_best_restart([-5.0, -4.2, -4.9]) == 1
    assert select_best_restart([-4.2, -4.2]) == 0
    assert select_best_restart([LikelihoodTrace([-9.0], -3.0), LikelihoodTrace([-1.0], -4.0)]) == 0
    with pytest.raises(ValueError):
        select_best_restart([])


def test_trace_monotonicity_check():
    assert LikelihoodTrace([-10.0, -9.0], -9.0).is_monotone()
    assert not LikelihoodTrace([-10.0, -11.0], -11.0).is_monotone()
    assert LikelihoodTrace([-10.0, -10.0 - 1e-12], -10.0).is_monotone()


# ---------------------------------------------------------------------------
# factored channel

def factored_setup():
    ct = SymbolTable()
    for c in "排徘非人":
        ct.intern(c)
    table = DecompositionTable({"排": ("扌", "非"), "徘": ("彳", "非")})
    return ct, component_index(ct, table)


def test_factored_degenerate_lambda_is_flat():
    ct, comps = factored_setup()
    f = init_channel(len(ct), 2, EMConfig(mode="factored", lambdas=(1.0, 0.0, 0.0), seed=1), comps)
    np.testing.assert_array_equal(f.matrix(), f.pr1)
    for c in range(len(ct)):
        assert factored_prob(c, 1, f) == f.pr1[1, c]


def test_factored_arithmetic():
    ct, comps = factored_setup()
    P = 1
    pr4 = np.zeros((P, comps.n_part2))
    pr5 = np.zeros((comps.n_part2, len(ct)))
    b = comps.part2[ct.id("徘")]
    pr4[0, b] = 0.2
    pr5[b, ct.id("徘")] = 0.1
    f = FactoredChannel(np.zeros((P, len(ct))), np.zeros((P, comps.n_part1)),
                        np.zeros((comps.n_part1, len(ct))), pr4, pr5, (0, 0, 0.5), comps)
    assert factored_prob(ct.id("徘"), 0, f) == pytest.approx(0.01, abs=1e-15)
    assert f.matrix()[0, ct.id("徘")] == pytest.approx(0.01, abs=1e-15)


def test_factored_training_shares_component_evidence():
    # syllable 0 is always written 排; its component 非 should gain mass under syllable 0
    ct, comps = factored_setup()
    syl = np.tile([0, 0, 1], 1000)
    spell = np.where(syl == 0, ct.id("排"), ct.id("人"))
    c_tri = count_ngrams(TokenStream.from_ids("character", spell), 3)
    prior = train_lm(count_ngrams(TokenStream.from_ids("syllable", np.roll(syl, 1)), 3))
    cfg = EMConfig(mode="factored", N=100, M=100, iterations=20, seed=0, restarts=2)
    res = em_train(c_tri, prior, cfg, chars=ct, syllables=2, comps=comps)
    f = res.channel
    assert all(t.is_monotone() for t in res.runs)
    p = int(np.argmax(f.pr1[:, ct.id("排")]))
    assert f.pr1[p, ct.id("排")] > 0.9
    assert f.pr4[p, comps.part2[ct.id("排")]] > 0
    assert (f.matrix().sum(axis=1) <= 1 + 1e-6).all()
    assert ((f.matrix() >= 0) & (f.matrix() <= 1)).all()


def test_factored_needs_components():
    with pytest.raises(ValueError):
        init_channel(3, 2, EMConfig(mode="factored"))


def test_config_validation():
    with pytest.raises(ValueError):
        EMConfig(N=0)
    with pytest.raises(ValueError):
        EMConfig(mode="tonal")
    with pytest.raises(ValueError):
        EMConfig(lambdas=(0.5, 0.5, 0.5))


def test_channel_file_roundtrip(tmp_path):
    ct, st_ = SymbolTable(), SymbolTable()
    for c in "中重":
        ct.intern(c)
    for s in ("zhong", "chong"):
        st_.intern(s)
    probs = np.array([[0.75, 0.25], [0.0, 1.0]])
    write_channel(tmp_path / "ch.tsv", probs, st_, ct, mode="flat", iterations=3)
    table, s2, c2, header = read_channel(tmp_path / "ch.tsv")
    assert header == {"mode": "flat", "iterations": "3"}
    assert s2.strings == st_.strings and c2.strings == ct.strings
    np.testing.assert_array_equal(table.probs, probs)
