"""N-gram syllable language models.

Two uses:

* the EM prior, an unsmoothed joint distribution over the stored
  n-grams, ``Pr(p1 p2 p3) = count(p1 p2 p3) / total``;
* the decoding model, an add-delta smoothed conditional
  ``Pr(w | h) = (c(h, w) + delta) / (c(h) + delta * V)``.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .symbols import BOS, BOS_STRING, NgramCounts, SymbolTable, TokenStream

__all__ = ["Smoothing", "NgramLM", "train_lm", "logprob", "UNSMOOTHED"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Smoothing:
    kind: str = "none"  # "none" | "add"
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "add"):
            raise ValueError(f"unknown smoothing {self.kind!r}")
        if self.kind == "add" and self.delta <= 0:
            raise ValueError("additive smoothing needs delta > 0")

    @classmethod
    def additive(cls, delta: float = 0.1) -> "Smoothing":
        return cls("add", delta)

    def __str__(self) -> str:
        return "none" if self.kind == "none" else f"add-{self.delta:g}"

    @classmethod
    def parse(cls, s: str) -> "Smoothing":
        if s == "none":
            return cls()
        if s.startswith("add-"):
            return cls("add", float(s[4:]))
        raise ValueError(f"cannot parse smoothing spec {s!r}")


UNSMOOTHED = Smoothing()


class NgramLM:
    """Conditional n-gram model with optional joint counts for the EM prior."""

    def __init__(self, n: int, V: int, cond, unseen, default: float,
                 smoothing: Smoothing, joint: NgramCounts | None = None):
        self.n = n
        self.V = V
        self.cond: dict[tuple, dict[int, float]] = cond
        self.unseen: dict[tuple, float] = unseen
        self.default = default
        self.smoothing = smoothing
        self.joint = joint

    @property
    def smoothed(self) -> bool:
        return self.smoothing.kind != "none"

    def prob(self, w: int, history=()) -> float:
        h = tuple(history)[-(self.n - 1):] if self.n > 1 else ()
        row = self.cond.get(h)
        if row is None:
            return self.default
        p = row.get(w)
        if p is None:
            return self.unseen.get(h, 0.0)
        return p

    def joint_prob(self, ngram) -> float:
        if self.joint is None:
            raise ValueError("this model carries no joint counts")
        return self.joint[ngram] / self.joint.total

    def top_joint(self, M: int) -> tuple[np.ndarray, np.ndarray]:
        """The ``M`` most probable stored n-grams and their joint probabilities.

        Ordering is by descending count, ties by ascending id tuple.
        """
        if self.joint is None:
            raise ValueError("this model carries no joint counts")
        grams, counts = self.joint.as_arrays()
        keep = np.all(grams >= 0, axis=1)  # BOS-padded n-grams are not syllable triples
        grams, counts = grams[keep], counts[keep]
        order = np.lexsort(tuple(grams[:, j] for j in range(self.n - 1, -1, -1)) + (-counts,))
        order = order[:M]
        return grams[order], counts[order] / self.joint.total

    def histories(self):
        return self.cond.keys()

    def bigram_logprobs(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``(log Pr(w | <s>), log Pr(w | v))`` arrays for Viterbi."""
        if self.n != 2:
            raise ValueError("bigram_logprobs needs an order-2 model")
        V = self.V
        start = np.array([self.prob(w, (BOS,)) for w in range(V)])
        trans = np.empty((V, V))
        for v in range(V):
            row = self.cond.get((v,))
            if row is None:
                trans[v].fill(self.default)
                continue
            trans[v].fill(self.unseen.get((v,), 0.0))
            for w, p in row.items():
                if 0 <= w < V:
                    trans[v, w] = p
        with np.errstate(divide="ignore"):
            return np.log(start), np.log(trans)

    def logprob(self, seq) -> float:
        return logprob(self, seq)

    def write(self, path, table: SymbolTable) -> None:
        def name(i):
            return BOS_STRING if i == BOS else table.lookup(i)

        with open(path, "w", encoding="utf-8") as f:
            f.write(f"#lm\torder={self.n}\tV={self.V}\tsmoothing={self.smoothing}\n")
            f.write("#vocab\t" + " ".join(table.strings) + "\n")
            for h in sorted(self.cond):
                hs = " ".join(name(i) for i in h)
                for w in sorted(self.cond[h]):
                    f.write(f"{hs}\t{name(w)}\t{float(self.cond[h][w])!r}\n")
                if h in self.unseen:
                    f.write(f"{hs}\t*\t{float(self.unseen[h])!r}\n")

    @classmethod
    def read(cls, path) -> tuple["NgramLM", SymbolTable]:
        table = SymbolTable()
        cond: dict[tuple, dict[int, float]] = defaultdict(dict)
        unseen: dict[tuple, float] = {}
        header: dict[str, str] = {}

        def ident(s):
            return BOS if s == BOS_STRING else table.intern(s)

        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if line.startswith("#lm"):
                    header = dict(kv.split("=", 1) for kv in line.split("\t")[1:])
                elif line.startswith("#vocab"):
                    for s in line.partition("\t")[2].split():
                        table.intern(s)
                elif line:
                    hs, w, p = line.split("\t")
                    h = tuple(ident(s) for s in hs.split())
                    if w == "*":
                        unseen[h] = float(p)
                    else:
                        cond[h][ident(w)] = float(p)
        n, V = int(header["order"]), int(header["V"])
        smoothing = Smoothing.parse(header["smoothing"])
        default = 1.0 / V if smoothing.kind == "add" else 0.0
        return cls(n, V, dict(cond), unseen, default, smoothing), table


def train_lm(counts: NgramCounts, smoothing: Smoothing | str = UNSMOOTHED,
             V: int | None = None) -> NgramLM:
    """Estimate an :class:`NgramLM` from n-gram counts.

    ``V`` is the prediction vocabulary size used by additive smoothing;
    by default it is one more than the largest id in ``counts``.
    """
    if isinstance(smoothing, str):
        smoothing = Smoothing.parse(smoothing)
    if not counts.table:
        raise ValueError("cannot train a language model from empty counts")
    n = counts.n
    if V is None:
        V = 1 + max(max(g) for g in counts.table)
    hist_total: dict[tuple, int] = defaultdict(int)
    raw: dict[tuple, dict[int, int]] = defaultdict(dict)
    for gram, c in counts.table.items():
        h, w = gram[:-1], gram[-1]
        hist_total[h] += c
        raw[h][w] = c
    cond: dict[tuple, dict[int, float]] = {}
    unseen: dict[tuple, float] = {}
    if smoothing.kind == "add":
        d = smoothing.delta
        for h, row in raw.items():
            denom = hist_total[h] + d * V
            cond[h] = {w: (c + d) / denom for w, c in row.items()}
            unseen[h] = d / denom
        default = 1.0 / V
    else:
        for h, row in raw.items():
            denom = hist_total[h]
            cond[h] = {w: c / denom for w, c in row.items()}
        default = 0.0
    return NgramLM(n, V, cond, unseen, default, smoothing, joint=counts)


def logprob(lm: NgramLM, seq) -> float:
    """Log probability of a sequence (or every line of a stream).

    Each line is scored with ``n - 1`` start symbols of context and no
    end symbol.  Returns ``-inf`` when an unsmoothed model has no mass
    for some token.
    """
    if isinstance(seq, TokenStream):
        segments = seq.segments
    else:
        segments = (np.asarray(seq, dtype=np.int64),)
    if sum(len(s) for s in segments) < 1:
        raise ValueError("logprob needs at least one token")
    total = 0.0
    for seg in segments:
        hist = [BOS] * (lm.n - 1)
        for w in seg.tolist():
            p = lm.prob(w, hist)
            if p <= 0.0:
                log.warning("zero probability for token %d after %s", w, tuple(hist))
                return -math.inf
            total += math.log(p)
            if lm.n > 1:
                hist = hist[1:] + [w]
    return total
