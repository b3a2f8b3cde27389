"""Agreement distillation between the EM and vector methods.

Each method casts one vote per character type: the majority syllable it
assigns to that character's tokens.  Characters on which both votes agree
become high-confidence pairs, which are fed back into both methods: as
initial channel weights for EM and as constraints on the word mapping.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .channel import EMConfig, EMResult, em_train, hints_from_pairs, with_hints
from .decoder import DecodeConfig, Decoder
from .embed import EmbedConfig, EmbeddingMatrix, train_embeddings
from .lm import NgramLM, Smoothing, train_lm
from .phonology import strip_tone
from .symbols import SymbolTable, TokenStream, count_ngrams
from .vecmap import (MapConfig, MappingMatrix, WordPronTable, map_words,
                     project_to_characters, self_learn_map, split_spoken)

__all__ = [
    "ConfidentPairs",
    "AgreementReport",
    "majority_votes",
    "em_votes",
    "vector_votes",
    "distill_agreements",
    "read_hints",
    "Corpora",
    "CombineConfig",
    "CombinedResult",
    "run_combined",
]

log = logging.getLogger(__name__)


@dataclass
class ConfidentPairs:
    """A functional character -> toneless syllable map with a note per pair."""

    pairs: dict[str, str] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)

    def add(self, char: str, syllable: str, note: str = "") -> None:
        old = self.pairs.get(char)
        if old is not None and old != syllable:
            raise ValueError(f"{char} already paired with {old}, not {syllable}")
        self.pairs[char] = syllable
        self.provenance[char] = note

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, char: str) -> bool:
        return char in self.pairs

    def __iter__(self):
        return iter(self.pairs.items())

    def precision(self, gold: Mapping[str, str]) -> float:
        """Share of pairs whose syllable equals ``gold[char]``."""
        if not self.pairs:
            return float("nan")
        return sum(gold.get(c) == p for c, p in self.pairs.items()) / len(self.pairs)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for c, p in self.pairs.items():
                f.write(f"{c}\t{p}\n")


def read_hints(path) -> ConfidentPairs:
    """Read a ``char<TAB>syllable`` file."""
    out = ConfidentPairs()
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"{path}:{n}: expected char<TAB>syllable")
            out.add(parts[0], strip_tone(parts[1]), f"{path}:{n}")
    return out


def majority_votes(chars: Iterable[str], syllables: Iterable[str]) -> dict[str, str]:
    """Most frequent syllable per character; ties go to the syllable seen first."""
    table: dict[str, Counter] = {}
    for c, p in zip(chars, syllables, strict=True):
        table.setdefault(c, Counter())[p] += 1
    return {c: cnt.most_common(1)[0][0] for c, cnt in table.items()}


def em_votes(decoder: Decoder, lines: Sequence[str], chars: SymbolTable,
             syllables: SymbolTable, limit: int = 100_000) -> dict[str, str]:
    """EM's vote per character: majority Viterbi reading over the first ``limit`` characters."""
    cs, ps = [], []
    for line in lines:
        if len(cs) >= limit:
            break
        line = line[: limit - len(cs)]
        ids = [chars.get(c, -1) for c in line]
        path, _ = decoder.viterbi(ids)
        cs.extend(line)
        ps.extend(syllables.lookup(int(p)) for p in path)
    return majority_votes(cs, ps)


def vector_votes(table: WordPronTable, segmented: Sequence[Sequence[str]],
                 default_syllable: str = "de") -> dict[str, str]:
    """The vector method's vote per character: majority projected syllable."""
    projected = project_to_characters(table, segmented, default_syllable)
    cs = [c for line in segmented for w in line for c in w]
    return majority_votes(cs, [p for line in projected for p in line])


@dataclass
class AgreementReport:
    n_em: int
    n_vec: int
    n_shared: int
    n_agree: int
    type_rate: float
    token_rate: float

    def __str__(self) -> str:
        return (f"agreement {self.n_agree}/{self.n_shared} character types "
                f"({self.type_rate:.1%}), {self.token_rate:.1%} of tokens")


def distill_agreements(em: Mapping[str, str], vec: Mapping[str, str],
                       token_counts: Mapping[str, int] | None = None
                       ) -> tuple[ConfidentPairs, AgreementReport]:
    """Pairs on which both votes name the same toneless syllable.

    Characters voted on by only one side are left out.  The agreement
    rate is reported over character types and, with ``token_counts``,
    over tokens as well.
    """
    pairs = ConfidentPairs()
    shared = [c for c in em if c in vec]
    for c in shared:
        a, b = strip_tone(em[c]), strip_tone(vec[c])
        if a == b:
            pairs.add(c, a, "em+vector")
    type_rate = len(pairs) / len(shared) if shared else 0.0
    if token_counts:
        tot = sum(token_counts.get(c, 0) for c in shared)
        agree = sum(token_counts.get(c, 0) for c in pairs.pairs)
        token_rate = agree / tot if tot else 0.0
    else:
        token_rate = float("nan")
    rep = AgreementReport(len(em), len(vec), len(shared), len(pairs), type_rate, token_rate)
    log.info("%s", rep)
    return pairs, rep


# ---------------------------------------------------------------------------
# end-to-end combination


@dataclass
class Corpora:
    """Non-parallel inputs of both methods.

    ``char_lines`` are unsegmented character lines (EM); the word lines are
    the same kinds of text segmented into words (vector method).  Spoken
    words join their syllables with ``-``.
    """

    char_lines: list[str]
    syllable_lines: list[list[str]]
    char_word_lines: list[list[str]]
    syllable_word_lines: list[list[str]]
    test_word_lines: list[list[str]]

    def tables(self) -> tuple[SymbolTable, SymbolTable]:
        ct, st = SymbolTable(), SymbolTable()
        for line in self.char_lines:
            for c in line:
                ct.intern(c)
        for line in self.syllable_lines:
            for p in line:
                st.intern(p)
        return ct, st

    def streams(self, ct: SymbolTable, st: SymbolTable) -> tuple[TokenStream, TokenStream]:
        cs = TokenStream.from_segments("character", [ct.encode(l) for l in self.char_lines])
        ss = TokenStream.from_segments("syllable", [st.encode(l) for l in self.syllable_lines])
        return cs, ss

    def test_chars(self) -> list[str]:
        return [c for line in self.test_word_lines for w in line for c in w]


@dataclass
class CombineConfig:
    em: EMConfig = field(default_factory=EMConfig)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    mapping: MapConfig = field(default_factory=MapConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    lm_delta: float = 0.1
    vote_chars: int = 100_000


@dataclass
class CombinedResult:
    em: EMResult
    em_hinted: EMResult | None
    mapping: MappingMatrix
    table: WordPronTable
    table_constrained: WordPronTable | None
    pairs: ConfidentPairs
    report: AgreementReport
    em_test: list[str]                 # EM pronunciation of the test characters
    vector_test: list[str]             # unconstrained vector pronunciation
    final: list[str]                   # constrained vector pronunciation (or the fallback)
    source: str                        # which method produced ``final``
    votes: tuple[dict, dict] = field(repr=False, default=None)   # (EM, vector) per-character votes
    symbols: tuple[SymbolTable, SymbolTable] = field(repr=False, default=None)


def _decode_lines(decoder: Decoder, lines: Sequence[str], ct: SymbolTable,
                  st: SymbolTable) -> list[str]:
    out = []
    for line in lines:
        path, _ = decoder.viterbi([ct.get(c, -1) for c in line])
        out.extend(st.lookup(int(p)) for p in path)
    return out


def _objective(decoder: Decoder, lines: Sequence[str], sylls: Sequence[str],
               ct: SymbolTable, st: SymbolTable) -> float:
    """Noisy-channel score of a test pronunciation under the EM models."""
    total, k = 0.0, 0
    for line in lines:
        ps = [st.get(p, -1) for p in sylls[k:k + len(line)]]
        k += len(line)
        if any(p < 0 for p in ps):
            return -math.inf
        if line:
            total += decoder.score([ct.get(c, -1) for c in line], ps)
    return total


def run_combined(corpora: Corpora, cfg: CombineConfig = CombineConfig()) -> CombinedResult:
    """EM and vector mapping, agreement distillation, then one hinted rerun of each."""
    ct, st = corpora.tables()
    cs, ss = corpora.streams(ct, st)
    prior = train_lm(count_ngrams(ss, cfg.em.order))
    lm2 = train_lm(count_ngrams(ss, 2, pad_start=True), Smoothing.additive(cfg.lm_delta), V=len(st))
    c_tri = count_ngrams(cs, cfg.em.order)

    em = em_train(c_tri, prior, cfg.em, chars=ct, syllables=st)
    dec = Decoder(lm2, em.channel, cfg.decode)

    X = train_embeddings(corpora.char_word_lines, cfg.embed)
    Y = train_embeddings(corpora.syllable_word_lines, cfg.embed)
    W = self_learn_map(X, Y, cfg.mapping)
    spoken_sylls = Counter(p for line in corpora.syllable_lines for p in line)
    default = spoken_sylls.most_common(1)[0][0]
    table = map_words(X, Y, W, default_syllable=default, k=cfg.mapping.csls_k)

    votes_em = em_votes(dec, corpora.char_lines, ct, st, cfg.vote_chars)
    votes_vec = vector_votes(table, corpora.char_word_lines, default)
    tokens = Counter(c for line in corpora.char_lines for c in line)
    pairs, report = distill_agreements(votes_em, votes_vec, tokens)

    test_lines = ["".join(line) for line in corpora.test_word_lines]
    em_test = _decode_lines(dec, test_lines, ct, st)
    vector_test = [p for line in project_to_characters(table, corpora.test_word_lines, default)
                   for p in line]

    if not pairs:
        s_em = _objective(dec, test_lines, em_test, ct, st)
        s_vec = _objective(dec, test_lines, vector_test, ct, st)
        source = "em" if s_em >= s_vec else "vector"
        log.warning("the methods agree on no character; falling back to the %s output", source)
        final = em_test if source == "em" else vector_test
        return CombinedResult(em, None, W, table, None, pairs, report, em_test, vector_test,
                              final, source, (votes_em, votes_vec), (ct, st))

    known = [(c, p) for c, p in pairs if p in st]
    hinted_cfg = with_hints(cfg.em, hints_from_pairs(known, ct, st))
    em2 = em_train(c_tri, prior, hinted_cfg, chars=ct, syllables=st)
    table2 = map_words(X, Y, W, constraints=pairs.pairs, default_syllable=default,
                       k=cfg.mapping.csls_k)
    final = [p for line in project_to_characters(table2, corpora.test_word_lines, default,
                                                 pairs.pairs) for p in line]
    return CombinedResult(em, em2, W, table, table2, pairs, report, em_test, vector_test,
                          final, "vector+constraints", (votes_em, votes_vec), (ct, st))
