import pytest
from hypothesis import given, strategies as st

from hanzipron.phonology import (ATOMIC, FINALS, INITIALS, DecompositionTable, Syllable,
                                 decompose, parse_syllable, read_decomposition,
                                 split_onset_rime, strip_tone)
from hanzipron.synth import SYLLABLES


def test_strip_tone_examples():
    assert strip_tone("dāng") == "dang"
    assert strip_tone("dang") == "dang"
    assert strip_tone("lǜ") == "lv"
    assert strip_tone(Syllable("hao", 4)) == "hao"


def test_parse_formats_agree():
    assert parse_syllable("dāng") == parse_syllable("dang1") == Syllable("dang", 1)
    assert parse_syllable("de5") == parse_syllable("de0") == parse_syllable("de") == Syllable("de", 0)
    assert parse_syllable("lu:4") == parse_syllable("lǜ") == Syllable("lv", 4)
    assert Syllable("de", 0).numeric() == "de5"


@pytest.mark.parametrize("bad", ["", "dāngé", "x1y", "ma6"])
def test_parse_rejects_garbage(bad):
    with pytest.raises(ValueError):
        parse_syllable(bad)


def test_tone_range():
    with pytest.raises(ValueError):
        Syllable("ma", 5)


@pytest.mark.parametrize("s", ["dāng", "lǜ", "xué", "guǒ", "shuǐ", "jiào", "liú", "ma", "nǚ", "ér"])
def test_render_roundtrip(s):
    assert parse_syllable(s).render() == s


@given(st.sampled_from(SYLLABLES), st.integers(0, 4))
def test_parse_render_roundtrip_inventory(base, tone):
    s = Syllable(base, tone)
    assert parse_syllable(s.render()) == s
    assert parse_syllable(s.numeric()) == s


def test_split_examples():
    assert split_onset_rime("zhang") == split_onset_rime("zhang")
    r = split_onset_rime("zhang")
    assert (r.onset, r.rime) == ("zh", "ang")
    r = split_onset_rime("ang")
    assert (r.onset, r.rime) == ("", "ang")
    h, m = split_onset_rime("hao"), split_onset_rime("mao")
    assert h.onset != m.onset and h.rime == m.rime == "ao"


@given(st.sampled_from(SYLLABLES))
def test_onset_rime_reassembles(base):
    r = split_onset_rime(base)
    assert r.onset + r.rime == base
    assert r.onset == "" or r.onset in INITIALS


def test_y_and_w_are_onsets():
    assert split_onset_rime("yao").onset == "y"
    assert split_onset_rime("wo").onset == "w"


def test_lenient_forms():
    assert split_onset_rime("nar").onset == ""
    assert split_onset_rime("hng").rime == "hng"
    with pytest.raises(ValueError):
        split_onset_rime("xyz")


def test_inventory_sizes():
    assert len(INITIALS) == 23
    assert "ang" in FINALS and "zh" not in FINALS


def test_decompose(tmp_path):
    t = DecompositionTable({"鸦": ("牙", "鸟"), "鸭": ("甲", "鸟"), "一": ("一", None)})
    assert decompose("鸦", t) == ("牙", "鸟")
    assert decompose("人", t) is ATOMIC
    assert t.with_part2("鸟") == {"鸦", "鸭"}
    for comp in ("鸟",):
        assert all(t.part2(c) == comp for c in t.with_part2(comp))
    t.write(tmp_path / "d.tsv")
    (tmp_path / "d.tsv").write_text((tmp_path / "d.tsv").read_text(encoding="utf-8")
                                    + "鸦\t其\t他\n", encoding="utf-8")
    back = read_decomposition(tmp_path / "d.tsv")
    assert back.get("鸦") == ("牙", "鸟")  # first line wins
    assert back.get("一") == ("一", None)


def test_read_decomposition_rejects_bad_lines(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("鸦\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_decomposition(p)
