from collections import Counter

import numpy as np
import pytest

from hanzipron.evaluation import memorize_pronouncer
from hanzipron.synth import SynthConfig, gen_cipher_corpus

SMALL = dict(n_syllables=20, n_chars=60, char_tokens=20_000, syllable_tokens=20_000, test_tokens=500)


@pytest.fixture(scope="module")
def default_corpus():
    return gen_cipher_corpus(SynthConfig())


def test_fixed_seed_is_reproducible():
    a = gen_cipher_corpus(SynthConfig(seed=3, **SMALL))
    b = gen_cipher_corpus(SynthConfig(seed=3, **SMALL))
    assert a.char_lines == b.char_lines
    assert a.syllable_lines == b.syllable_lines
    assert a.gold == b.gold
    c = gen_cipher_corpus(SynthConfig(seed=4, **SMALL))
    assert a.char_lines != c.char_lines


def test_type_counts_and_coverage(default_corpus):
    sc = default_corpus
    chars = Counter(c for line in sc.char_lines for c in line)
    sylls = Counter(s for line in sc.syllable_lines for s in line)
    assert len(chars) == 200 and len(sc.chars) == 200
    assert len(sylls) == 50 and len(sc.syllables) == 50
    assert min(chars.values()) >= 5
    assert sum(len(l) for l in sc.char_lines) == 200_000
    assert sum(len(l) for l in sc.syllable_lines) == 200_000
    assert len(sc.test_ref()) == len(sc.test_chars()) == 2_000


def test_gold_distributions(default_corpus):
    g = default_corpus.gold
    for r in g.readings.values():
        assert abs(sum(r.values()) - 1) < 1e-12
    for row in g.channel.values():
        assert abs(sum(row.values()) - 1) < 1e-12
    assert len(g.heteronyms()) == round(0.05 * 200)


def test_hidden_readings_follow_gold(default_corpus):
    sc = default_corpus
    for line, gold in zip(sc.char_lines[:200], sc.char_gold[:200]):
        assert len(line) == len(gold)
        for c, p in zip(line, gold):
            assert p in sc.gold.readings[c]


def test_streams_are_not_parallel(default_corpus):
    # positional agreement between the hidden readings and the spoken corpus
    # should match chance for independent streams, not be near one
    sc = default_corpus
    hidden = [p for line in sc.char_gold for p in line]
    spoken = [p for line in sc.syllable_lines for p in line]
    agree = np.mean([a == b for a, b in zip(hidden, spoken)])
    f = Counter(spoken)
    chance = sum((v / len(spoken)) ** 2 for v in f.values())
    assert abs(agree - chance) < 0.02


def test_no_heteronyms_means_memorizing_is_perfect():
    sc = gen_cipher_corpus(SynthConfig(heteronym_fraction=0.0, **SMALL))
    train_c = [c for line in sc.char_lines for c in line]
    train_s = [p for line in sc.char_gold for p in line]
    rep = memorize_pronouncer(train_c, train_s, sc.test_chars(), sc.test_ref())
    assert rep.notone == 1.0


def test_word_mode_layers_agree():
    sc = gen_cipher_corpus(SynthConfig(lm="words", seed=1, **SMALL))
    assert ["".join(ws) for ws in sc.char_word_lines] == sc.char_lines
    assert ["".join(ws) for ws in sc.test_word_lines] == sc.test_lines
    flat = [s for ws in sc.syllable_word_lines for w in ws for s in w.split("-")]
    assert flat == [s for line in sc.syllable_lines for s in line]
    assert len({c for line in sc.char_lines for c in line}) == 60


def test_tones_and_dictionary():
    sc = gen_cipher_corpus(SynthConfig(seed=2, **SMALL))
    assert all(1 <= s.tone <= 4 for s in sc.test_ref())
    majority = sc.gold.majority()
    assert len(sc.dictionary) == 60
    toneless = gen_cipher_corpus(SynthConfig(seed=2, tones=0, **SMALL))
    assert all(s.tone == 0 for s in toneless.test_ref())
    assert set(majority) == set(sc.chars)


def test_infeasible_configs_rejected():
    with pytest.raises(ValueError):
        SynthConfig(n_syllables=50, n_chars=40)
    with pytest.raises(ValueError):
        SynthConfig(n_syllables=10_000, n_chars=20_000)
    with pytest.raises(ValueError):
        SynthConfig(char_tokens=0)
    with pytest.raises(ValueError):
        SynthConfig(heteronym_fraction=1.5)
    with pytest.raises(ValueError):
        SynthConfig(lm="neural")
    with pytest.raises(KeyError):
        SynthConfig.from_dict({"n_syllable": 3})
    assert SynthConfig.from_dict({"n_chars": "300"}).n_chars == 300


def test_write_emits_package_formats(tmp_path):
    sc = gen_cipher_corpus(SynthConfig(lm="words", **SMALL))
    paths = sc.write(tmp_path)
    assert paths["chars"].read_text(encoding="utf-8").splitlines() == sc.char_lines
    ref = paths["ref"].read_text(encoding="utf-8").splitlines()
    assert len(ref) == len(sc.test_lines)
    assert all(len(r.split()) == len(t) for r, t in zip(ref, sc.test_lines))
    assert paths["test_words"].exists()
    gold = [l.split("\t") for l in paths["gold"].read_text(encoding="utf-8").splitlines()]
    assert all(len(g) == 3 and 0 < float(g[2]) <= 1 for g in gold)
