import numpy as np
import pytest
from hypothesis import given, strategies as st

from hanzipron.combine import (ConfidentPairs, distill_agreements, majority_votes, read_hints,
                               vector_votes)
from hanzipron.vecmap import WordPronTable


def test_agreeing_votes_are_kept():
    pairs, rep = distill_agreements({"要": "yao", "中": "zhong"}, {"要": "yao4", "中": "chong"})
    assert pairs.pairs == {"要": "yao"}
    assert "中" not in pairs
    assert (rep.n_shared, rep.n_agree) == (2, 1)
    assert rep.type_rate == 0.5


def test_one_sided_characters_are_excluded():
    pairs, rep = distill_agreements({"要": "yao", "人": "ren"}, {"要": "yao", "的": "de"},
                                    token_counts={"要": 3, "人": 5, "的": 9})
    assert pairs.pairs == {"要": "yao"}
    assert rep.n_shared == 1 and rep.token_rate == 1.0


def test_token_rate_weights_by_frequency():
    _, rep = distill_agreements({"a": "ma", "b": "ba"}, {"a": "ma", "b": "pa"},
                                token_counts={"a": 1, "b": 3})
    assert rep.type_rate == 0.5 and rep.token_rate == 0.25


def test_pairs_are_functional():
    p = ConfidentPairs()
    p.add("中", "zhong", "x")
    p.add("中", "zhong", "y")
    with pytest.raises(ValueError):
        p.add("中", "chong")
    assert len(p) == 1 and p.provenance["中"] == "y"


@given(st.dictionaries(st.sampled_from("abcdef"), st.sampled_from(["ma", "ba", "pa"])),
       st.dictionaries(st.sampled_from("abcdef"), st.sampled_from(["ma", "ba", "pa"])),
       st.dictionaries(st.sampled_from("abcdef"), st.sampled_from(["ma", "ba", "pa"]), min_size=6))
def test_agreement_precision_never_below_both_sides(em, vec, gold):
    # agreed pairs are right exactly when both voters are right, so their
    # error set is contained in each voter's error set
    pairs, _ = distill_agreements(em, vec)
    for c, p in pairs:
        assert em[c] == vec[c] == p
    wrong = {c for c, p in pairs if gold[c] != p}
    assert wrong <= {c for c in em if em[c] != gold[c]}
    assert wrong <= {c for c in vec if vec[c] != gold[c]}


def test_majority_votes_ties_and_lengths():
    assert majority_votes("aab", ["x", "y", "z"]) == {"a": "x", "b": "z"}
    assert majority_votes("aaa", ["x", "y", "y"]) == {"a": "y"}
    with pytest.raises(ValueError):
        majority_votes("ab", ["x"])


def test_vector_votes_use_projection():
    t = WordPronTable({"重要": (("zhong", "yao"), 1.0), "重": (("chong",), 0.1)})
    votes = vector_votes(t, [["重要", "重要", "重"], ["要"]], default_syllable="de")
    assert votes == {"重": "zhong", "要": "yao"}


def test_hints_file(tmp_path):
    p = tmp_path / "h.tsv"
    p.write_text("要\tyào\n\n中\tzhong1\n", encoding="utf-8")
    hints = read_hints(p)
    assert hints.pairs == {"要": "yao", "中": "zhong"}
    hints.write(tmp_path / "out.tsv")
    assert read_hints(tmp_path / "out.tsv").pairs == hints.pairs
    (tmp_path / "bad.tsv").write_text("要 yao\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_hints(tmp_path / "bad.tsv")
    assert hints.precision({"要": "yao", "中": "chong"}) == 0.5
    assert np.isnan(ConfidentPairs().precision({}))
