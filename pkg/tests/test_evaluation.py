import numpy as np
import pytest
from hypothesis import given, strategies as st

from hanzipron.evaluation import (MODES, component_predict, evaluate, majority_baseline,
                                  memorize_pronouncer, syllable_match, token_accuracy)
from hanzipron.phonology import DecompositionTable, Syllable
from hanzipron.synth import SYLLABLES

syllables = st.builds(Syllable, st.sampled_from(SYLLABLES[:60] + ["ao", "e", "er"]), st.integers(0, 4))


def test_partial_credit_for_shared_rime():
    assert syllable_match("hào", "mào", "partial")
    assert not syllable_match("hào", "mào", "notone")
    assert not syllable_match("hào", "mào", "tone")


def test_tone_only_difference():
    assert not syllable_match("hào", "hǎo", "tone")
    assert syllable_match("hào", "hǎo", "notone")
    assert syllable_match("hao4", "hào", "tone")


def test_partial_onset_rime_and_zero_onset():
    assert syllable_match("zhang", "zhong", "partial")   # onset zh
    assert not syllable_match("zhang", "chong", "partial")
    assert syllable_match("ao", "e", "partial")          # both lack an onset
    assert syllable_match("ao", "bao", "partial")        # rime ao


def test_identical_streams_score_one():
    ref = ["zhong1", "guo2", "ren2"]
    for m in MODES:
        assert token_accuracy(ref, ref, m) == 1.0
    rep = evaluate(ref, ref)
    assert (rep.tone, rep.notone, rep.partial) == (1.0, 1.0, 1.0)


def test_length_mismatch_and_unknown_mode():
    with pytest.raises(ValueError):
        token_accuracy(["a"], [], "tone")
    with pytest.raises(ValueError):
        evaluate(["a"], ["a", "a"])
    with pytest.raises(ValueError):
        syllable_match("a", "a", "fuzzy")


@given(st.lists(st.tuples(syllables, syllables), max_size=40))
def test_mode_ordering_and_symmetry(pairs):
    hyp = [h for h, _ in pairs]
    ref = [r for _, r in pairs]
    rep = evaluate(hyp, ref)
    assert rep.tone <= rep.notone <= rep.partial
    for m in MODES:
        assert token_accuracy(hyp, ref, m) == token_accuracy(ref, hyp, m)
    assert evaluate(hyp, ref).to_tsv() == rep.to_tsv()


def test_majority_baseline():
    ref = ["yu4"] * 3 + ["ma1"]
    rep = majority_baseline(ref, ["yu4", "yu4", "ma1"])
    assert rep.notone == 0.75
    # ties go to the syllable seen first
    assert majority_baseline(["ma"], ["ma", "yu", "yu", "ma"]).notone == 1.0
    with pytest.raises(ValueError):
        majority_baseline(ref, [])


def test_majority_baseline_on_uniform_readings():
    rng = np.random.default_rng(0)
    names = SYLLABLES[:10]
    ref = [names[i] for i in rng.integers(0, 10, size=20000)]
    train = [names[i] for i in rng.integers(0, 10, size=5000)]
    assert majority_baseline(ref, train).notone == pytest.approx(0.1, abs=0.01)


def test_memorize_pronouncer():
    chars = list("中国中国人")
    sylls = ["zhong1", "guo2", "zhong1", "guo2", "ren2"]
    rep = memorize_pronouncer(chars, sylls, list("国人中"), ["guo2", "ren2", "zhong1"])
    assert rep.tone == 1.0
    rep = memorize_pronouncer(chars, sylls, list("大"), ["da4"])
    assert rep.notone == 0.0 and rep.n == 1
    with pytest.raises(ValueError):
        memorize_pronouncer(chars, sylls[:2], [], [])


def test_memorize_caps_a_two_reading_character():
    rng = np.random.default_rng(1)
    reads = np.where(rng.random(5000) < 0.6, "le", "liao")
    train, test = reads[:4000], reads[4000:]
    rep = memorize_pronouncer(["了"] * 4000, list(train), ["了"] * 1000, list(test))
    assert rep.notone == pytest.approx(np.mean(test == "le"))
    assert rep.notone <= 0.65


def test_component_guess_example():
    table = DecompositionTable({"耗": ("耒", "毛")})
    known = {"毛": "máo", "耒": "lěi"}
    rep = component_predict(known, [("耗", "hào")], table, "MATCH1")
    assert (rep.tone, rep.notone, rep.partial) == (0.0, 0.0, 1.0)


def test_component_match2_takes_better_guess_per_mode():
    table = DecompositionTable({"x": ("a", "b"), "y": ("c", "d")})
    known = {"a": "hao3", "b": "mao4", "c": "ma1"}
    test = [("x", "hao4"), ("y", "ma1"), ("z", "ma1")]
    r1 = component_predict(known, test, table, "MATCH1")
    r2 = component_predict(known, test, table, "MATCH2")
    assert (r1.tone, r1.notone, r1.partial) == (0.0, 0.0, pytest.approx(1 / 3))
    assert (r2.tone, r2.notone, r2.partial) == (pytest.approx(1 / 3), pytest.approx(2 / 3),
                                                 pytest.approx(2 / 3))
    weighted = component_predict(known, test, table, "MATCH2", token_counts={"y": 8})
    assert weighted.n == 10 and weighted.tone == pytest.approx(0.8)
    with pytest.raises(ValueError):
        component_predict(known, test, table, "MATCH3")


def test_report_tsv_lists_errors():
    rep = evaluate(["ma1", "ma1", "ta1"], ["ma1", "ba1", "ba1"], chars=list("马爸爸"))
    lines = rep.to_tsv().splitlines()
    assert lines[0] == "mode\tcorrect\ttotal\taccuracy"
    assert lines[2] == "notone\t1\t3\t0.333333"
    assert lines[4] == "error\t爸\t2\t"
