"""Skip-gram embeddings with negative sampling.

Plain SGNS: every (centre, context) pair inside a dynamically shrunk
window is a positive example, and ``negative`` tokens drawn from the
unigram distribution raised to 0.75 are negatives.  Updates are applied
in shuffled minibatches; with ``deterministic`` set the order is fixed by
the seed and training is single threaded, so results are bit-identical
across runs.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = ["EmbedConfig", "EmbeddingMatrix", "train_embeddings", "read_vectors"]

log = logging.getLogger(__name__)


@dataclass
class EmbedConfig:
    dim: int = 300
    window: int = 5
    negative: int = 5
    epochs: int = 5
    min_count: int = 5
    seed: int = 0
    deterministic: bool = True
    lr: float = 0.025
    batch_size: int = 256
    sample: float = 1e-3
    workers: int = 1

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        for name in ("window", "negative", "epochs", "min_count", "batch_size", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class EmbeddingMatrix:
    words: list[str]
    vectors: np.ndarray
    normalized: bool = False
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, w) -> bool:
        return w in self.index

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __getitem__(self, w: str) -> np.ndarray:
        return self.vectors[self.index[w]]

    def normalize(self) -> "EmbeddingMatrix":
        norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
        vecs = self.vectors / np.where(norms > 0, norms, 1.0)
        return EmbeddingMatrix(list(self.words), vecs, True, list(self.loss_history))

    def center(self) -> "EmbeddingMatrix":
        return EmbeddingMatrix(list(self.words), self.vectors - self.vectors.mean(axis=0),
                               False, list(self.loss_history))

    def subset(self, words: Sequence[str]) -> "EmbeddingMatrix":
        idx = [self.index[w] for w in words]
        return EmbeddingMatrix(list(words), self.vectors[idx], self.normalized)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"{len(self.words)} {self.dim}\n")
            for w, v in zip(self.words, self.vectors):
                f.write(w + " " + " ".join(repr(float(x)) for x in v) + "\n")


def read_vectors(path) -> EmbeddingMatrix:
    with open(path, encoding="utf-8") as f:
        V, d = (int(x) for x in f.readline().split())
        words, rows = [], []
        for line in f:
            parts = line.rstrip("\n").split(" ")
            if len(parts) != d + 1:
                raise ValueError(f"{path}: expected {d} values for {parts[0]!r}")
            words.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if len(words) != V:
        raise ValueError(f"{path}: header says {V} vectors, found {len(words)}")
    return EmbeddingMatrix(words, np.array(rows, dtype=np.float64).reshape(V, d))


def _as_lines(corpus) -> list[list[str]]:
    if isinstance(corpus, str):
        raise TypeError("pass a sequence of token lines, not a single string")
    lines = []
    for line in corpus:
        lines.append(line.split() if isinstance(line, str) else list(line))
    return lines


def _pairs(segs: list[np.ndarray], window: int, rng: np.random.Generator):
    """All (centre, context) pairs with a per-centre window drawn from 1..window."""
    if not segs:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    flat = np.concatenate(segs)
    line = np.repeat(np.arange(len(segs)), [len(s) for s in segs])
    reach = rng.integers(1, window + 1, size=len(flat))
    centres, contexts = [], []
    for d in range(1, window + 1):
        ok = (reach[:-d] >= d) & (line[:-d] == line[d:])  # centre i, context i + d
        i = np.flatnonzero(ok)
        centres.append(flat[i]); contexts.append(flat[i + d])
        ok = (reach[d:] >= d) & (line[d:] == line[:-d])   # centre i, context i - d
        i = np.flatnonzero(ok) + d
        centres.append(flat[i]); contexts.append(flat[i - d])
    return np.concatenate(centres), np.concatenate(contexts)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _sgd_batch(W, U, c, o, neg, lr) -> float:
    v = W[c]                                  # [B, d]
    up = U[o]                                 # [B, d]
    un = U[neg]                               # [B, K, d]
    sp = _sigmoid(np.einsum("bd,bd->b", v, up))
    sn = _sigmoid(np.einsum("bd,bkd->bk", v, un))
    loss = -np.log(np.maximum(sp, 1e-12)).sum() - np.log(np.maximum(1 - sn, 1e-12)).sum()
    gp = (sp - 1.0)[:, None]
    grad_v = gp * up + np.einsum("bk,bkd->bd", sn, un)
    np.add.at(U, o, -lr * gp * v)
    np.add.at(U, neg, -lr * sn[:, :, None] * v[:, None, :])
    np.add.at(W, c, -lr * grad_v)
    return float(loss)


def train_embeddings(corpus: Iterable, cfg: EmbedConfig = EmbedConfig()) -> EmbeddingMatrix:
    """Train SGNS vectors on ``corpus`` (an iterable of token lines).

    Tokens seen fewer than ``min_count`` times are removed before training.
    Rows are ordered by descending frequency, ties by first appearance.
    """
    lines = _as_lines(corpus)
    counts = Counter(t for line in lines for t in line)
    first = {}
    for line in lines:
        for t in line:
            first.setdefault(t, len(first))
    vocab = sorted((t for t, n in counts.items() if n >= cfg.min_count),
                   key=lambda t: (-counts[t], first[t]))
    if len(vocab) < 2:
        raise ValueError("corpus has fewer than two tokens above min_count")
    index = {t: i for i, t in enumerate(vocab)}
    segs = [np.array([index[t] for t in line if t in index], dtype=np.int64) for line in lines]
    segs = [s for s in segs if len(s) > 1]
    n_tokens = sum(len(s) for s in segs)
    if n_tokens < cfg.window + 1:
        raise ValueError("corpus is too short for the context window")

    rng = np.random.default_rng(cfg.seed)
    V, d = len(vocab), cfg.dim
    W = (rng.random((V, d)) - 0.5) / d
    U = np.zeros((V, d))
    freq = np.array([counts[t] for t in vocab], dtype=np.float64)
    noise = freq ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())
    if cfg.sample > 0:
        f = freq / freq.sum()
        keep_p = np.minimum(1.0, np.sqrt(cfg.sample / f) + cfg.sample / f)
    else:
        keep_p = np.ones(V)

    history = []
    for epoch in range(cfg.epochs):
        kept = [s[rng.random(len(s)) < keep_p[s]] for s in segs]
        c, o = _pairs(kept, cfg.window, rng)
        order = rng.permutation(len(c))
        c, o = c[order], o[order]
        neg = np.searchsorted(noise_cdf, rng.random((len(c), cfg.negative)))
        neg = np.minimum(neg, V - 1)
        B = cfg.batch_size
        starts = range(0, len(c), B)
        total = len(c) * cfg.epochs
        done = epoch * len(c)

        def run(batch_starts):
            loss = 0.0
            for lo in batch_starts:
                lr = max(cfg.lr * (1 - (done + lo) / total), cfg.lr * 1e-4)
                loss += _sgd_batch(W, U, c[lo:lo + B], o[lo:lo + B], neg[lo:lo + B], lr)
            return loss

        if cfg.deterministic or cfg.workers == 1:
            epoch_loss = run(starts)
        else:
            # unsynchronised updates from several threads; not reproducible
            shards = [list(starts)[k::cfg.workers] for k in range(cfg.workers)]
            with ThreadPoolExecutor(cfg.workers) as ex:
                epoch_loss = sum(ex.map(run, shards))
        history.append(epoch_loss / max(len(c), 1))
        log.info("epoch %d mean loss %.4f over %d pairs", epoch + 1, history[-1], len(c))
    return EmbeddingMatrix(vocab, W, False, history)
