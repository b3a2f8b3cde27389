"""Vocabulary interning, integer-coded corpora and n-gram counting.

Corpora are kept as a list of per-line segments.  N-gram windows never
cross a segment boundary, so a triple is only counted when all three
tokens come from the same input line.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "BOS",
    "CorpusError",
    "SymbolTable",
    "TokenStream",
    "NgramCounts",
    "build_vocab",
    "count_ngrams",
    "top_k",
    "read_corpus",
    "read_lines",
    "tokenize_line",
    "write_counts",
    "read_counts",
]

# Start-of-line padding id used inside n-gram tuples.
BOS = -1
BOS_STRING = "<s>"

DOMAINS = ("character", "syllable", "word")


class CorpusError(ValueError):
    """Raised when a corpus is too small or malformed to be used."""


@dataclass
class SymbolTable:
    """Dense, first-seen-order interning of token strings."""

    strings: list[str] = field(default_factory=list)
    index: dict[str, int] = field(default_factory=dict)

    def intern(self, s: str) -> int:
        i = self.index.get(s)
        if i is None:
            i = len(self.strings)
            self.strings.append(s)
            self.index[s] = i
        return i

    def lookup(self, i: int) -> str:
        if i == BOS:
            return BOS_STRING
        return self.strings[i]

    def id(self, s: str) -> int:
        return self.index[s]

    def get(self, s: str, default=None):
        return self.index.get(s, default)

    def encode(self, tokens: Iterable[str], add: bool = False) -> np.ndarray:
        if add:
            return np.array([self.intern(t) for t in tokens], dtype=np.int64)
        return np.array([self.index[t] for t in tokens], dtype=np.int64)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.lookup(int(i)) for i in ids]

    def __len__(self) -> int:
        return len(self.strings)

    def __contains__(self, s: object) -> bool:
        return s in self.index

    def __iter__(self) -> Iterator[str]:
        return iter(self.strings)

    def write(self, path) -> None:
        Path(path).write_text("".join(s + "\n" for s in self.strings), encoding="utf-8")

    @classmethod
    def read(cls, path) -> "SymbolTable":
        table = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line:
                table.intern(line)
        return table


def build_vocab(tokens: Iterable[str]) -> SymbolTable:
    """Intern ``tokens`` in first-seen order."""
    table = SymbolTable()
    for t in tokens:
        table.intern(t)
    return table


@dataclass(frozen=True)
class TokenStream:
    """An integer-coded corpus split into independent line segments."""

    domain: str
    segments: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")

    @classmethod
    def from_ids(cls, domain: str, ids: Sequence[int] | np.ndarray) -> "TokenStream":
        return cls(domain, (np.asarray(ids, dtype=np.int64),))

    @classmethod
    def from_segments(cls, domain: str, segments: Iterable[Sequence[int]]) -> "TokenStream":
        return cls(domain, tuple(np.asarray(s, dtype=np.int64) for s in segments))

    @property
    def ids(self) -> np.ndarray:
        if not self.segments:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(self.segments)

    @property
    def length(self) -> int:
        return sum(len(s) for s in self.segments)

    def __len__(self) -> int:
        return self.length

    def check(self, table: SymbolTable) -> None:
        V = len(table)
        for seg in self.segments:
            if len(seg) and (seg.min() < 0 or seg.max() >= V):
                raise ValueError("token id outside the symbol table")


@dataclass
class NgramCounts:
    """Sliding-window n-gram counts (only non-zero entries are stored)."""

    n: int
    table: dict[tuple[int, ...], int]
    total: int

    def __getitem__(self, ngram) -> int:
        return self.table.get(tuple(ngram), 0)

    def __len__(self) -> int:
        return len(self.table)

    def __iter__(self):
        return iter(self.table)

    def items(self):
        return self.table.items()

    def merge(self, other: "NgramCounts") -> "NgramCounts":
        if other.n != self.n:
            raise ValueError("cannot merge counts of different order")
        merged = Counter(self.table)
        merged.update(other.table)
        return NgramCounts(self.n, dict(merged), self.total + other.total)

    def prune(self, min_count: int) -> "NgramCounts":
        """Drop n-grams seen fewer than ``min_count`` times."""
        kept = {k: c for k, c in self.table.items() if c >= min_count}
        return NgramCounts(self.n, kept, sum(kept.values()))

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(ngrams[K, n], counts[K])`` in table order."""
        if not self.table:
            return np.zeros((0, self.n), dtype=np.int64), np.zeros(0, dtype=np.int64)
        grams = np.array(list(self.table.keys()), dtype=np.int64).reshape(-1, self.n)
        counts = np.fromiter(self.table.values(), dtype=np.int64, count=len(self.table))
        return grams, counts


def _windows(seg: np.ndarray, n: int, pad: bool) -> np.ndarray:
    if pad and n > 1:
        seg = np.concatenate([np.full(n - 1, BOS, dtype=np.int64), seg])
    if len(seg) < n:
        return np.zeros((0, n), dtype=np.int64)
    return np.lib.stride_tricks.sliding_window_view(seg, n)


def count_ngrams(stream: TokenStream, n: int, pad_start: bool = False) -> NgramCounts:
    """Count every length-``n`` window inside each line segment.

    With ``pad_start`` each segment is prefixed with ``n - 1`` :data:`BOS`
    ids, which is what conditional models need for their first tokens.
    """
    if n < 1:
        raise ValueError("n-gram order must be >= 1")
    wins = [_windows(seg, n, pad_start) for seg in stream.segments]
    wins = [w for w in wins if len(w)]
    if not wins:
        raise CorpusError(f"corpus has no window of length {n}; unusable for counting")
    grams = np.concatenate(wins)
    # Encode each window as one int64 key (ids shifted so BOS maps to 0).
    base = int(grams.max()) + 2
    if base ** n >= 2**62:
        counter = Counter(map(tuple, grams.tolist()))
        return NgramCounts(n, dict(counter), len(grams))
    shifted = grams + 1
    keys = np.zeros(len(grams), dtype=np.int64)
    for j in range(n):
        keys = keys * base + shifted[:, j]
    uniq, counts = np.unique(keys, return_counts=True)
    decoded = np.empty((len(uniq), n), dtype=np.int64)
    rest = uniq.copy()
    for j in range(n - 1, -1, -1):
        decoded[:, j] = rest % base - 1
        rest //= base
    table = {tuple(row): int(c) for row, c in zip(decoded.tolist(), counts.tolist())}
    return NgramCounts(n, table, int(counts.sum()))


def top_k(counts: NgramCounts, K: int) -> list[tuple[tuple[int, ...], int]]:
    """The ``K`` most frequent n-grams, ties broken by ascending id tuple."""
    if K < 1:
        raise ValueError("K must be >= 1")
    ranked = sorted(counts.table.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:K]


def tokenize_line(line: str, domain: str) -> list[str]:
    if domain == "character":
        return [ch for ch in line if not ch.isspace()]
    return line.split()


def read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f]


def read_corpus(path, domain: str, table: SymbolTable | None = None,
                grow: bool = True) -> tuple[TokenStream, SymbolTable]:
    """Read a UTF-8 corpus file into a :class:`TokenStream`.

    Character corpora treat every non-space code point as a token;
    syllable and word corpora are whitespace separated.  Unknown tokens
    are interned when ``grow`` is set and skipped otherwise.
    """
    table = SymbolTable() if table is None else table
    segments = []
    for line in read_lines(path):
        toks = tokenize_line(line, domain)
        if grow:
            ids = [table.intern(t) for t in toks]
        else:
            ids = [table.index[t] for t in toks if t in table.index]
        segments.append(np.asarray(ids, dtype=np.int64))
    return TokenStream(domain, tuple(segments)), table


def write_counts(path, counts: NgramCounts, table: SymbolTable) -> None:
    """Write ``tok tok tok<TAB>count`` lines, most frequent first."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"#counts\tn={counts.n}\ttotal={counts.total}\n")
        for gram, c in sorted(counts.table.items(), key=lambda kv: (-kv[1], kv[0])):
            f.write(" ".join(table.lookup(i) for i in gram) + f"\t{c}\n")


def read_counts(path, table: SymbolTable | None = None) -> tuple[NgramCounts, SymbolTable]:
    table = SymbolTable() if table is None else table
    counts: dict[tuple[int, ...], int] = {}
    n = total = None
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#counts"):
                header = dict(kv.split("=", 1) for kv in line.split("\t")[1:])
                n, total = int(header["n"]), int(header["total"])
            elif line:
                toks, c = line.split("\t")
                gram = tuple(BOS if t == BOS_STRING else table.intern(t) for t in toks.split(" "))
                counts[gram] = int(c)
    if n is None:
        raise ValueError(f"{path}: missing #counts header")
    return NgramCounts(n, counts, total), table
