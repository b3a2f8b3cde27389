import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hanzipron.embed import EmbeddingMatrix
from hanzipron.vecmap import (MapConfig, MappingMatrix, WordPronTable, csls_nn, csls_scores,
                              map_words, precision_at_1, procrustes, project_to_characters,
                              read_pron_table, self_learn_map, split_spoken)


def random_rotation(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))


def rotated_pair(seed, n, d, sigma):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    Q = random_rotation(rng, d)
    Y = X @ Q + sigma * rng.normal(size=(n, d))
    perm = rng.permutation(n)
    gold = {int(perm[j]): j for j in range(n)}
    return X, Y[perm], gold


def test_noiseless_rotation_is_recovered_exactly():
    X, Y, gold = rotated_pair(0, 500, 50, 0.0)
    m = self_learn_map(X, Y, MapConfig(seed=0))
    assert precision_at_1(X, Y, m.W, gold) == 1.0
    assert m.orthogonality_error() <= 1e-5
    assert m.converged


def test_dimension_mismatch_is_an_error():
    with pytest.raises(ValueError):
        self_learn_map(np.ones((5, 3)), np.ones((5, 4)))


def test_procrustes_recovers_rotation():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 6))
    Q = random_rotation(rng, 6)
    W = procrustes(X, X @ Q)
    np.testing.assert_allclose(W, Q, atol=1e-10)
    assert MappingMatrix(W).orthogonality_error() < 1e-10


def test_csls_two_points_is_cosine_order():
    Z = np.array([[1.0, 0.0], [0.0, 1.0]])
    q = np.array([0.9, 0.1])
    assert csls_nn(q, Z, k=2, sources=Z).tolist() == [0, 1]
    assert csls_nn(np.array([0.1, 0.9]), Z, k=2, sources=Z).tolist() == [1, 0]


def test_duplicate_candidates_tie_to_lower_id():
    Z = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]])
    assert csls_nn(np.array([1.0, 0.2]), Z, k=1).tolist()[:2] == [1, 2]


def test_csls_demotes_a_hub():
    rng = np.random.default_rng(0)
    d, n = 20, 50
    # queries sit around a common direction; the hub is that direction itself
    u = rng.normal(size=d)
    u /= np.linalg.norm(u)
    Q = u + 0.5 * rng.normal(size=(n, d)) / np.sqrt(d)
    own = Q + 0.5 * rng.normal(size=(n, d)) / np.sqrt(d)
    Z = np.vstack([u, own])
    cos = (Q / np.linalg.norm(Q, axis=1, keepdims=True)) @ (Z / np.linalg.norm(Z, axis=1, keepdims=True)).T
    cos_rank = np.argsort(-cos, axis=1, kind="stable")
    csls_rank = csls_nn(Q, Z, k=10)
    hub_first_cos = np.mean(cos_rank[:, 0] == 0)
    hub_first_csls = np.mean(csls_rank[:, 0] == 0)
    assert hub_first_cos > 0.3
    assert hub_first_csls < hub_first_cos


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.01, 100), st.floats(0.01, 100))
def test_uniform_scaling_keeps_rankings(seed, a, b):
    rng = np.random.default_rng(seed)
    Q = rng.normal(size=(5, 4))
    Z = rng.normal(size=(8, 4))
    np.testing.assert_array_equal(csls_nn(Q, Z, k=3), csls_nn(a * Q, b * Z, k=3))
    np.testing.assert_allclose(csls_scores(Q, Z, 3), csls_scores(a * Q, b * Z, 3), atol=1e-12)


def test_split_spoken():
    assert split_spoken("zhong-yao") == ("zhong", "yao")
    assert split_spoken("zhongyao", {"zhong", "yao", "zhon", "gyao"}) == ("zhong", "yao")
    assert split_spoken("xian", {"xi", "an", "xian"}) == ("xian",)
    assert split_spoken("de") == ("de",)


def planted(seed, written, spoken, truth, noise=0.05, d=16):
    rng = np.random.default_rng(seed)
    Y = rng.normal(size=(len(spoken), d))
    X = np.array([Y[spoken.index(truth[w])] for w in written]) + noise * rng.normal(size=(len(written), d))
    return EmbeddingMatrix(written, X), EmbeddingMatrix(spoken, Y)


def test_planted_neighbours_are_recovered():
    spoken = ["zhong-yao", "dang-pin", "ren", "de", "shui-jiao", "guo-jia-ren", "yao"]
    truth = {"重要": "zhong-yao", "人": "ren", "的": "de", "睡觉": "shui-jiao",
             "国家人": "guo-jia-ren", "要": "yao", "当品": "dang-pin"}
    written = list(truth)
    X, Y = planted(0, written, spoken, truth)
    table = map_words(X, Y, np.eye(16), k=2)
    for w in written:
        assert table[w] == tuple(truth[w].split("-"))
    assert not table.fallback


def test_length_filter_and_constraint_preference():
    # 重要 sits right on top of dang-pin; the constraint 要 -> yao rules it out
    spoken = ["dang-pin", "dang-yao", "zhong-yao", "ren", "de"]
    rng = np.random.default_rng(3)
    Y = rng.normal(size=(5, 8))
    Xw = np.vstack([Y[0] + 0.1 * Y[1] + 0.05 * Y[2], Y[3], Y[4] + Y[0]])
    X = EmbeddingMatrix(["重要", "人", "他"], Xw)
    Ym = EmbeddingMatrix(spoken, Y)
    free = map_words(X, Ym, np.eye(8), k=1)
    assert free["重要"] == ("dang", "pin")
    assert free["他"] in {("ren",), ("de",)}   # only one-syllable candidates
    tied = map_words(X, Ym, np.eye(8), constraints={"要": "yao"}, k=1)
    assert tied["重要"] in {("dang", "yao"), ("zhong", "yao")}
    assert tied["重要"][1] == "yao"


def test_fallback_sequences():
    spoken = EmbeddingMatrix(["de", "de", "shi"], np.eye(3))
    written = EmbeddingMatrix(["重要人"], np.ones((1, 3)))
    table = map_words(written, spoken, np.eye(3))
    assert table["重要人"] == ("de", "de", "de")
    assert "重要人" in table.fallback
    table = map_words(written, spoken, np.eye(3), constraints={"要": "yao"})
    assert table["重要人"] == ("de", "yao", "de")


def test_project_to_characters():
    t = WordPronTable({"重要": (("zhong", "yao"), 1.0), "人": (("ren",), 0.5)})
    out = project_to_characters(t, [["重要", "人"], ["人"]])
    assert out == [["zhong", "yao", "ren"], ["ren"]]
    assert project_to_characters(t, [["新词"]]) == [["de", "de"]]
    bad = WordPronTable({"重要": (("zhong",), 1.0)})
    with pytest.raises(ValueError):
        project_to_characters(bad, [["重要"]])


@given(st.lists(st.lists(st.sampled_from(["重要", "人", "睡觉", "新词汇"]), max_size=6), max_size=6))
def test_projection_conserves_tokens(lines):
    t = WordPronTable({"重要": (("zhong", "yao"), 1.0), "人": (("ren",), 0.5),
                       "睡觉": (("shui", "jiao"), 0.2)})
    out = project_to_characters(t, lines)
    assert [len(o) for o in out] == [sum(len(w) for w in l) for l in lines]


def test_pron_table_roundtrip(tmp_path):
    t = WordPronTable({"重要": (("zhong", "yao"), 0.75), "人": (("ren",), float("-inf"))}, {"人"})
    t.write(tmp_path / "t.tsv")
    assert (tmp_path / "t.tsv").read_text(encoding="utf-8").splitlines()[0] == "重要\tzhong yao\t0.75"
    back = read_pron_table(tmp_path / "t.tsv")
    assert back.entries == t.entries
