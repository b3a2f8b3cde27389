"""Greedy longest-match conversion of character text into syllables."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from .phonology import Syllable, parse_syllable

__all__ = ["PronDictionary", "PinyinizeResult", "pinyinize", "read_dictionary"]

log = logging.getLogger(__name__)


class PronDictionary:
    """Word -> syllable sequence, one syllable per character.

    Duplicate words keep the first pronunciation added.
    """

    def __init__(self, entries: Iterable[tuple[str, Iterable[Syllable | str]]] = ()):
        self.words: dict[str, tuple[Syllable, ...]] = {}
        self.max_len = 0
        for word, pron in entries:
            self.add(word, pron)

    def add(self, word: str, pron: Iterable[Syllable | str]) -> bool:
        sylls = tuple(p if isinstance(p, Syllable) else parse_syllable(p) for p in pron)
        if len(sylls) != len(word):
            raise ValueError(f"{word!r}: {len(word)} characters but {len(sylls)} syllables")
        if word in self.words:
            return False
        self.words[word] = sylls
        self.max_len = max(self.max_len, len(word))
        return True

    @property
    def entries(self) -> list[tuple[str, tuple[Syllable, ...]]]:
        return list(self.words.items())

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def __getitem__(self, word: str) -> tuple[Syllable, ...]:
        return self.words[word]

    def longest_match(self, text: str, start: int) -> str | None:
        for n in range(min(self.max_len, len(text) - start), 0, -1):
            w = text[start:start + n]
            if w in self.words:
                return w
        return None


def read_dictionary(path) -> PronDictionary:
    """Read a ``word<TAB>syl1 syl2 ...`` file.

    Lines whose syllable count does not match the word length are skipped.
    """
    d = PronDictionary()
    skipped = 0
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            word, _, pron = line.partition("\t")
            try:
                d.add(word, pron.split())
            except ValueError:
                skipped += 1
    if skipped:
        log.warning("%s: skipped %d malformed dictionary lines", path, skipped)
    return d


@dataclass
class PinyinizeResult:
    lines: list[list[Syllable]] = field(default_factory=list)
    matched: int = 0
    total: int = 0

    @property
    def coverage(self) -> float:
        return self.matched / self.total if self.total else 1.0

    def to_text(self, strip_tones: bool = False) -> str:
        fmt = (lambda s: s.base) if strip_tones else Syllable.numeric
        return "".join(" ".join(fmt(s) for s in line) + "\n" for line in self.lines)


def pinyinize(text: str | Iterable[str], d: PronDictionary) -> PinyinizeResult:
    """Replace characters with syllables, left to right, longest match first.

    Characters no dictionary word starts with are dropped and counted
    against coverage.  ``text`` is one string or an iterable of lines.
    """
    if not len(d):
        raise ValueError("pronunciation dictionary is empty")
    lines = [text] if isinstance(text, str) else text
    result = PinyinizeResult()
    for line in lines:
        chars = "".join(ch for ch in line if not ch.isspace())
        out: list[Syllable] = []
        i = 0
        while i < len(chars):
            w = d.longest_match(chars, i)
            if w is None:
                i += 1
                continue
            out.extend(d[w])
            result.matched += len(w)
            i += len(w)
        result.total += len(chars)
        result.lines.append(out)
    return result
