"""Pinyin syllable structure and graphical character decomposition."""

from __future__ import annotations

import re
import unicodedata
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "Syllable",
    "OnsetRime",
    "DecompositionTable",
    "ATOMIC",
    "INITIALS",
    "FINALS",
    "parse_syllable",
    "strip_tone",
    "split_onset_rime",
    "decompose",
    "read_decomposition",
]

# 21 consonant initials plus y and w; the empty onset is handled separately.
INITIALS = (
    "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h",
    "j", "q", "x", "zh", "ch", "sh", "r", "z", "c", "s", "y", "w",
)
_INITIALS_LONGEST_FIRST = sorted(INITIALS, key=len, reverse=True)

FINALS = frozenset("""
a o e ai ei ao ou an en ang eng ong er
i ia ie iao iu ian in iang ing iong
u ua uo uai ui uan un uang ueng ue
v ve van vn
""".split())

# Syllables that are legal but do not fit the onset+final grammar.
_LENIENT = frozenset(["r", "m", "n", "ng", "hm", "hng"])

_TONE_MARKS = {
    "a": "āáǎà", "e": "ēéěè", "i": "īíǐì",
    "o": "ōóǒò", "u": "ūúǔù", "v": "ǖǘǚǜ",
}
_MARK_TO_VOWEL = {m: (v, t + 1) for v, marks in _TONE_MARKS.items() for t, m in enumerate(marks)}
_NUMERIC = re.compile(r"^([a-zü:]+)([0-5])$")

# Neutral tone is stored as 0 and written with suffix 5 (CC-CEDICT style).
NEUTRAL_SUFFIX = "5"


@dataclass(frozen=True, order=True)
class Syllable:
    base: str
    tone: int = 0

    def __post_init__(self):
        if not (0 <= self.tone <= 4):
            raise ValueError(f"tone must be in 0..4, got {self.tone}")
        if not self.base or not self.base.isascii() or self.base != self.base.lower():
            raise ValueError(f"syllable base must be lowercase ASCII: {self.base!r}")

    @classmethod
    def parse(cls, s: str) -> "Syllable":
        return parse_syllable(s)

    def numeric(self) -> str:
        return self.base + (str(self.tone) if self.tone else NEUTRAL_SUFFIX)

    def render(self) -> str:
        """Tone-mark rendering, e.g. ``Syllable('dang', 1) -> 'dāng'``."""
        base = self.base
        if self.tone:
            pos = _mark_position(base)
            if pos is not None:
                base = base[:pos] + _TONE_MARKS[base[pos]][self.tone - 1] + base[pos + 1:]
        return base.replace("v", "ü")

    def __str__(self) -> str:
        return self.numeric()


def _mark_position(base: str):
    for v in "ae":
        if v in base:
            return base.index(v)
    if "ou" in base:
        return base.index("o")
    for i in range(len(base) - 1, -1, -1):
        if base[i] in "iouv":
            return i
    return None


def parse_syllable(s: str) -> Syllable:
    """Parse tone-marked (``dāng``), numbered (``dang1``) or bare pinyin."""
    s = unicodedata.normalize("NFC", s.strip()).lower()
    if not s:
        raise ValueError("empty syllable")
    m = _NUMERIC.match(s)
    if m:
        base, tone = m.group(1), int(m.group(2))
        tone = 0 if tone == 5 else tone
    else:
        tone = 0
        chars = []
        for ch in s:
            if ch in _MARK_TO_VOWEL:
                vowel, t = _MARK_TO_VOWEL[ch]
                if tone:
                    raise ValueError(f"multiple tone marks in {s!r}")
                tone = t
                chars.append(vowel)
            else:
                chars.append(ch)
        base = "".join(chars)
    base = base.replace("u:", "v").replace("ü", "v")
    if not base.isascii() or not base.isalpha():
        raise ValueError(f"not a pinyin syllable: {s!r}")
    return Syllable(base, tone)


def strip_tone(s: Syllable | str) -> str:
    """Toneless base of a syllable; plain strings are parsed first."""
    if isinstance(s, str):
        s = parse_syllable(s)
    return s.base


@dataclass(frozen=True)
class OnsetRime:
    onset: str
    rime: str


def split_onset_rime(base: str) -> OnsetRime:
    """Split a toneless syllable at the longest matching initial.

    >>> split_onset_rime("zhang")
    OnsetRime(onset='zh', rime='ang')
    """
    if not base or not base.isascii() or not base.isalpha():
        raise ValueError(f"not a pinyin syllable: {base!r}")
    for ini in _INITIALS_LONGEST_FIRST:
        if base.startswith(ini) and base[len(ini):] in FINALS:
            return OnsetRime(ini, base[len(ini):])
    if base in FINALS:
        return OnsetRime("", base)
    # erhua forms (e.g. "nar") and interjections are accepted without analysis
    if base in _LENIENT or (base.endswith("r") and len(base) > 1
                            and _is_syllable(base[:-1])):
        return OnsetRime("", base)
    raise ValueError(f"not a pinyin syllable: {base!r}")


def _is_syllable(base: str) -> bool:
    try:
        split_onset_rime(base)
    except ValueError:
        return False
    return True


ATOMIC = None


class DecompositionTable:
    """Top-level two-part graphical decomposition of characters.

    Characters missing from the table are atomic.  Only one level is
    stored; components are not decomposed further.
    """

    def __init__(self, entries: dict[str, tuple[str, str | None]] | None = None):
        self.entries: dict[str, tuple[str, str | None]] = dict(entries or {})
        self._by_part1: dict[str, set[str]] = defaultdict(set)
        self._by_part2: dict[str, set[str]] = defaultdict(set)
        for c, (p1, p2) in self.entries.items():
            self._by_part1[p1].add(c)
            if p2 is not None:
                self._by_part2[p2].add(c)

    def __contains__(self, c: str) -> bool:
        return c in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, c: str):
        return self.entries.get(c, ATOMIC)

    def part1(self, c: str) -> str | None:
        e = self.entries.get(c)
        return e[0] if e else None

    def part2(self, c: str) -> str | None:
        e = self.entries.get(c)
        return e[1] if e else None

    def with_part1(self, comp: str) -> set[str]:
        return set(self._by_part1.get(comp, ()))

    def with_part2(self, comp: str) -> set[str]:
        return set(self._by_part2.get(comp, ()))

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for c, (p1, p2) in self.entries.items():
                f.write(f"{c}\t{p1}\t{p2 or ''}\n")


def decompose(c: str, t: DecompositionTable):
    """``(part1, part2)`` for ``c``, or :data:`ATOMIC` when ``c`` is not listed."""
    return t.get(c)


def read_decomposition(path) -> DecompositionTable:
    """Read ``char<TAB>part1[<TAB>part2]`` lines; the first line for a char wins."""
    entries: dict[str, tuple[str, str | None]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) < 2 or not fields[0] or not fields[1]:
            raise ValueError(f"{path}:{lineno}: expected char<TAB>part1[<TAB>part2]")
        part2 = fields[2] if len(fields) > 2 and fields[2] else None
        entries.setdefault(fields[0], (fields[1], part2))
    return DecompositionTable(entries)
