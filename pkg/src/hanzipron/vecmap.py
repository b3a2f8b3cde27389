"""Unsupervised orthogonal mapping between two embedding spaces.

Self-learning in the style of unsupervised bilingual lexicon induction:

1. seed dictionary from *similarity-distribution matching*: every word is
   described by the sorted row of its (square-rooted) intra-space
   similarity matrix, a signature that is invariant to rotations of the
   space, and signatures are matched across spaces;
2. alternate an orthogonal Procrustes solve on the current dictionary
   with dictionary re-induction by CSLS nearest neighbours, until the
   dictionary stops changing.

CSLS scores a pair as ``2 cos(x, z) - r(x) - r(z)`` where ``r`` is the
mean cosine to the ``k`` nearest neighbours in the other space.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .embed import EmbeddingMatrix

__all__ = [
    "MappingMatrix",
    "MapConfig",
    "WordPronTable",
    "procrustes",
    "csls_scores",
    "csls_nn",
    "similarity_signatures",
    "self_learn_map",
    "map_words",
    "project_to_characters",
    "split_spoken",
    "read_pron_table",
]

log = logging.getLogger(__name__)


@dataclass
class MappingMatrix:
    W: np.ndarray
    source: str = "source"
    target: str = "target"
    dictionary: np.ndarray | None = None     # [K, 2] final (source, target) index pairs
    objective: float = float("nan")
    converged: bool = True

    def orthogonality_error(self) -> float:
        return float(np.abs(self.W.T @ self.W - np.eye(self.W.shape[1])).max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        return X @ self.W


@dataclass
class MapConfig:
    csls_k: int = 10
    max_iter: int = 1000
    init_size: int = 4000          # most frequent words used to build the seed dictionary
    vocab_cutoff: int = 20000      # words taking part in dictionary induction
    stochastic: bool = True
    keep_prob: float = 0.1         # initial keep probability of stochastic induction
    interval: int = 50             # stalled iterations before keep_prob doubles
    patience: int = 50
    threshold: float = 1e-6
    direction: str = "union"       # "forward" | "union"
    seed: int = 0


def _unit(X: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(X, axis=-1, keepdims=True)
    return X / np.where(n > 0, n, 1.0)


def _prep(X: np.ndarray) -> np.ndarray:
    """unit length, mean centre, unit length again"""
    X = _unit(np.asarray(X, dtype=np.float64))
    return _unit(X - X.mean(axis=0))


def procrustes(X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Orthogonal ``W`` minimising ``||X W - Z||_F``."""
    u, _, vt = np.linalg.svd(X.T @ Z)
    return u @ vt


def _topk_mean(sims: np.ndarray, k: int) -> np.ndarray:
    k = min(k, sims.shape[1])
    if k <= 0:
        return np.zeros(sims.shape[0])
    part = np.partition(sims, sims.shape[1] - k, axis=1)[:, sims.shape[1] - k:]
    return part.mean(axis=1)


def csls_scores(Xq: np.ndarray, Z: np.ndarray, k: int = 10,
                sources: np.ndarray | None = None) -> np.ndarray:
    """CSLS matrix between query rows and candidate rows (cosine based).

    ``sources`` is the set whose neighbourhoods define each candidate's
    hubness penalty; by default it is the queries themselves.
    """
    Xq = _unit(np.atleast_2d(np.asarray(Xq, dtype=np.float64)))
    Z = _unit(np.asarray(Z, dtype=np.float64))
    S = Xq @ Z.T
    rx = _topk_mean(S, k)
    src = Xq if sources is None else _unit(np.atleast_2d(sources))
    rz = _topk_mean(Z @ src.T, k)
    return 2 * S - rx[:, None] - rz[None, :]


def csls_nn(query: np.ndarray, candidates, k: int = 10,
            sources: np.ndarray | None = None) -> np.ndarray:
    """Candidate ids ranked by CSLS score, best first; ties go to the lower id.

    A single query vector gives a 1-D ranking, a matrix of queries one
    ranking per row.
    """
    Z = candidates.vectors if isinstance(candidates, EmbeddingMatrix) else candidates
    q = np.asarray(query, dtype=np.float64)
    scores = csls_scores(q, Z, k, sources)
    ranks = np.argsort(-scores, axis=1, kind="stable")
    return ranks[0] if q.ndim == 1 else ranks


def similarity_signatures(X: np.ndarray) -> np.ndarray:
    """Sorted rows of ``sqrt(X X^T)``, normalised; invariant to rotating ``X``."""
    u, s, _ = np.linalg.svd(X, full_matrices=False)
    sim = (u * s) @ u.T
    sim.sort(axis=1)
    return _prep(sim)


def _csls_full(XW: np.ndarray, Z: np.ndarray, k: int):
    S = XW @ Z.T
    rx = _topk_mean(S, k)
    rz = _topk_mean(S.T, k)
    return 2 * S - rx[:, None] - rz[None, :]


def _induce(scores: np.ndarray, direction: str):
    fwd = np.argmax(scores, axis=1)
    src = np.arange(scores.shape[0])
    if direction == "forward":
        return np.stack([src, fwd], axis=1), float(scores[src, fwd].mean())
    bwd = np.argmax(scores, axis=0)
    trg = np.arange(scores.shape[1])
    pairs = np.concatenate([np.stack([src, fwd], 1), np.stack([bwd, trg], 1)])
    pairs = np.unique(pairs, axis=0)
    obj = (scores[src, fwd].mean() + scores[bwd, trg].mean()) / 2
    return pairs, float(obj)


def self_learn_map(X, Y, cfg: MapConfig = MapConfig()) -> MappingMatrix:
    """Learn an orthogonal map from ``X``'s space into ``Y``'s without supervision.

    ``X`` and ``Y`` are :class:`EmbeddingMatrix` objects or arrays with
    rows ordered by decreasing frequency.  The returned ``W`` maps
    preprocessed (unit, centred, unit) source rows into the target space.
    """
    Xv = X.vectors if isinstance(X, EmbeddingMatrix) else np.asarray(X)
    Yv = Y.vectors if isinstance(Y, EmbeddingMatrix) else np.asarray(Y)
    if Xv.shape[1] != Yv.shape[1]:
        raise ValueError(f"dimension mismatch: {Xv.shape[1]} vs {Yv.shape[1]}")
    xs, zs = _prep(Xv), _prep(Yv)
    rng = np.random.default_rng(cfg.seed)

    n = min(len(xs), len(zs), cfg.init_size)
    sig_x = similarity_signatures(xs[:n])
    sig_z = similarity_signatures(zs[:n])
    init_scores = _csls_full(sig_x, sig_z, cfg.csls_k)
    dictionary, _ = _induce(init_scores, cfg.direction)

    xv = xs[: cfg.vocab_cutoff]
    zv = zs[: cfg.vocab_cutoff]
    keep = cfg.keep_prob if cfg.stochastic else 1.0
    best_obj, best_W, best_dict = -np.inf, None, dictionary
    last_improve = 0
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        W = procrustes(xs[dictionary[:, 0]], zs[dictionary[:, 1]])
        scores = _csls_full(xv @ W, zv, cfg.csls_k)
        if keep < 1.0:
            # stochastic induction: random entries are knocked out
            mask = rng.random(scores.shape) >= keep
            scores = np.where(mask, -np.inf, scores)
        new_dict, obj = _induce(scores, cfg.direction)
        if keep >= 1.0:
            if obj > best_obj + cfg.threshold:
                best_obj, best_W, best_dict = obj, W, new_dict
                last_improve = it
            if np.array_equal(new_dict, dictionary):
                converged = True
                dictionary = new_dict
                best_W, best_dict = W, new_dict
                best_obj = max(best_obj, obj)
                break
            if it - last_improve > cfg.patience:
                break
        else:
            if obj > best_obj + cfg.threshold:
                best_obj, last_improve = obj, it
            elif it - last_improve >= cfg.interval:
                keep = min(1.0, 2 * keep)
                best_obj, last_improve = -np.inf, it
        dictionary = new_dict
    if best_W is None:
        best_W = procrustes(xs[dictionary[:, 0]], zs[dictionary[:, 1]])
    if not converged:
        log.warning("self-learning stopped after %d iterations without a dictionary fixpoint", it)
    return MappingMatrix(best_W, dictionary=best_dict, objective=best_obj, converged=converged)


def precision_at_1(X, Y, W: np.ndarray, gold: Mapping[int, int], k: int = 10) -> float:
    """Fraction of gold source rows whose CSLS nearest target is the gold row."""
    xs = _prep(X.vectors if isinstance(X, EmbeddingMatrix) else X)
    zs = _prep(Y.vectors if isinstance(Y, EmbeddingMatrix) else Y)
    scores = _csls_full(xs @ W, zs, k)
    src = np.fromiter(gold.keys(), dtype=np.int64)
    best = np.argmax(scores[src], axis=1)
    trg = np.fromiter(gold.values(), dtype=np.int64)
    return float((best == trg).mean())


# ---------------------------------------------------------------------------
# word pronunciation tables


def split_spoken(word: str, inventory: set[str] | None = None) -> tuple[str, ...]:
    """Syllables of a spoken word written as ``zhong-yao`` (or undelimited with an inventory)."""
    if "-" in word or inventory is None:
        return tuple(word.split("-"))
    # shortest segmentation into inventory syllables, preferring long syllables first
    best: list[tuple[str, ...] | None] = [None] * (len(word) + 1)
    best[0] = ()
    for i in range(len(word)):
        if best[i] is None:
            continue
        for j in range(len(word), i, -1):
            piece = word[i:j]
            if piece in inventory:
                cand = best[i] + (piece,)
                if best[j] is None or (len(cand), [-len(x) for x in cand]) < (
                        len(best[j]), [-len(x) for x in best[j]]):
                    best[j] = cand
    if best[-1] is None:
        return (word,)
    return best[-1]


@dataclass
class WordPronTable:
    entries: dict[str, tuple[tuple[str, ...], float]] = field(default_factory=dict)
    fallback: set[str] = field(default_factory=set)

    def __getitem__(self, word: str) -> tuple[str, ...]:
        return self.entries[word][0]

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for w, (sylls, score) in self.entries.items():
                f.write(f"{w}\t{' '.join(sylls)}\t{float(score)!r}\n")


def read_pron_table(path) -> WordPronTable:
    table = WordPronTable()
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            w, sylls, score = line.split("\t")
            table.entries[w] = (tuple(sylls.split()), float(score))
    return table


def _fallback(word: str, constraints: Mapping[str, str], default: str) -> tuple[str, ...]:
    return tuple(constraints.get(ch, default) for ch in word)


def map_words(written: EmbeddingMatrix, spoken: EmbeddingMatrix, W: np.ndarray | MappingMatrix,
              constraints: Mapping[str, str] | None = None,
              syl_len: Callable[[str], int] | None = None,
              default_syllable: str | None = None, k: int = 10,
              max_rank: int | None = None, chunk: int = 2048) -> WordPronTable:
    """Pronounce every written word by its best CSLS neighbour among spoken words.

    Candidates must have as many syllables as the written word has
    characters and, when ``constraints`` (character -> syllable) are given,
    must agree with every constrained character of the word.  ``max_rank``
    limits the search to that many nearest neighbours.  Words without a
    surviving candidate get the per-character fallback: the constrained
    syllable where there is one, ``default_syllable`` (the most frequent
    syllable of the spoken side unless given) elsewhere.
    """
    constraints = dict(constraints or {})
    Wm = W.W if isinstance(W, MappingMatrix) else np.asarray(W)
    sylls = [split_spoken(w) for w in spoken.words]
    if default_syllable is None:
        default_syllable = Counter(s for ws in sylls for s in ws).most_common(1)[0][0]
    lens = np.array([len(s) for s in sylls]) if syl_len is None else np.array(
        [syl_len(w) for w in spoken.words])
    maxlen = int(lens.max())
    syl_ids: dict[str, int] = {}
    grid = np.full((len(sylls), maxlen), -1, dtype=np.int64)
    for i, ws in enumerate(sylls):
        for j, s in enumerate(ws):
            grid[i, j] = syl_ids.setdefault(s, len(syl_ids))

    xs = _prep(written.vectors) @ Wm
    zs = _prep(spoken.vectors)
    rz = _topk_mean(zs @ xs.T, k)
    table = WordPronTable()
    for lo in range(0, len(written), chunk):
        S = xs[lo:lo + chunk] @ zs.T
        scores = 2 * S - _topk_mean(S, k)[:, None] - rz[None, :]
        for r, word in enumerate(written.words[lo:lo + chunk]):
            row = scores[r]
            ok = lens == len(word)
            for j, ch in enumerate(word):
                if ch in constraints and j < maxlen:
                    ok &= grid[:, j] == syl_ids.get(constraints[ch], -2)
            if max_rank is not None:
                near = np.zeros(len(row), dtype=bool)
                near[np.argsort(-row, kind="stable")[:max_rank]] = True
                ok &= near
            if ok.any():
                cand = np.flatnonzero(ok)
                best = cand[np.argmax(row[cand])]  # first maximum: lowest id
                table.entries[word] = (sylls[best], float(row[best]))
            else:
                table.entries[word] = (_fallback(word, constraints, default_syllable), float("-inf"))
                table.fallback.add(word)
    return table


def project_to_characters(table: WordPronTable, segmented: Sequence[Sequence[str]],
                          default_syllable: str = "de",
                          constraints: Mapping[str, str] | None = None) -> list[list[str]]:
    """Split each word's syllables over its characters, position by position.

    ``segmented`` holds one list of written words per line; words missing
    from ``table`` use the same fallback as :func:`map_words`.
    """
    constraints = dict(constraints or {})
    out = []
    for line in segmented:
        sylls: list[str] = []
        for word in line:
            pron = table[word] if word in table else _fallback(word, constraints, default_syllable)
            if len(pron) != len(word):
                raise ValueError(f"{word!r} has {len(word)} characters but {len(pron)} syllables")
            sylls.extend(pron)
        out.append(sylls)
    return out
