"""Pronunciation accuracy metrics and supervised comparison points."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .phonology import DecompositionTable, Syllable, parse_syllable, split_onset_rime

__all__ = [
    "MODES",
    "EvalReport",
    "token_accuracy",
    "syllable_match",
    "evaluate",
    "majority_baseline",
    "memorize_pronouncer",
    "component_predict",
]

MODES = ("tone", "notone", "partial")


def _syl(x) -> Syllable:
    return x if isinstance(x, Syllable) else parse_syllable(x)


def syllable_match(hyp, ref, mode: str) -> bool:
    """Whether ``hyp`` counts as a correct reading of ``ref`` under ``mode``.

    ``tone``: base and tone equal.  ``notone``: base equal.  ``partial``:
    toneless onsets equal or rimes equal (two zero onsets count as equal).
    """
    h, r = _syl(hyp), _syl(ref)
    if mode == "tone":
        return h == r
    if mode == "notone":
        return h.base == r.base
    if mode == "partial":
        if h.base == r.base:
            return True
        try:
            a, b = split_onset_rime(h.base), split_onset_rime(r.base)
        except ValueError:
            return False
        return a.onset == b.onset or a.rime == b.rime
    raise ValueError(f"unknown mode {mode!r}")


def token_accuracy(hyp: Sequence, ref: Sequence, mode: str) -> float:
    if len(hyp) != len(ref):
        raise ValueError(f"hypothesis has {len(hyp)} tokens, reference {len(ref)}")
    if not ref:
        return 0.0
    return sum(syllable_match(h, r, mode) for h, r in zip(hyp, ref)) / len(ref)


@dataclass
class EvalReport:
    n: int = 0
    correct: dict[str, int] = field(default_factory=lambda: dict.fromkeys(MODES, 0))
    errors: Counter = field(default_factory=Counter)

    def accuracy(self, mode: str) -> float:
        return self.correct[mode] / self.n if self.n else 0.0

    @property
    def tone(self) -> float:
        return self.accuracy("tone")

    @property
    def notone(self) -> float:
        return self.accuracy("notone")

    @property
    def partial(self) -> float:
        return self.accuracy("partial")

    def add(self, key, hits: Mapping[str, bool]) -> None:
        self.n += 1
        for m in MODES:
            self.correct[m] += bool(hits[m])
        if not hits["notone"]:
            self.errors[key] += 1

    def to_tsv(self, top_errors: int = 20) -> str:
        lines = ["mode\tcorrect\ttotal\taccuracy"]
        for m in MODES:
            lines.append(f"{m}\t{self.correct[m]}\t{self.n}\t{self.accuracy(m):.6f}")
        for key, cnt in sorted(self.errors.items(), key=lambda kv: (-kv[1], str(kv[0])))[:top_errors]:
            lines.append(f"error\t{key}\t{cnt}\t")
        return "\n".join(lines) + "\n"


def evaluate(hyp: Sequence, ref: Sequence, chars: Sequence | None = None) -> EvalReport:
    """Score aligned syllable streams in all three modes at once."""
    if len(hyp) != len(ref):
        raise ValueError(f"hypothesis has {len(hyp)} tokens, reference {len(ref)}")
    rep = EvalReport()
    keys = chars if chars is not None else ref
    for h, r, k in zip(hyp, ref, keys):
        rep.add(k, {m: syllable_match(h, r, m) for m in MODES})
    return rep


def majority_baseline(ref: Sequence, training_prons: Iterable,
                      chars: Sequence | None = None) -> EvalReport:
    """Predict the most frequent training syllable for every test item.

    Frequency ties go to the syllable seen first.
    """
    counts = Counter(_syl(p) for p in training_prons)
    if not counts:
        raise ValueError("no training pronunciations")
    top = max(counts.values())
    guess = next(s for s in counts if counts[s] == top)
    return evaluate([guess] * len(ref), ref, chars)


def memorize_pronouncer(train_chars: Sequence[str], train_sylls: Sequence,
                        test_chars: Sequence[str], test_ref: Sequence) -> EvalReport:
    """Most frequent training reading per character; unseen characters score wrong."""
    if len(train_chars) != len(train_sylls):
        raise ValueError("training characters and syllables are not parallel")
    table: dict[str, Counter] = {}
    for c, s in zip(train_chars, train_sylls):
        table.setdefault(c, Counter())[_syl(s)] += 1
    rep = EvalReport()
    for c, r in zip(test_chars, test_ref):
        if c in table:
            guess = table[c].most_common(1)[0][0]
            rep.add(c, {m: syllable_match(guess, r, m) for m in MODES})
        else:
            rep.add(c, dict.fromkeys(MODES, False))
    return rep


def component_predict(known: Mapping[str, object], test: Sequence[tuple[str, object]],
                      table: DecompositionTable, variant: str = "MATCH1",
                      token_counts: Mapping[str, int] | None = None) -> EvalReport:
    """Guess a character's reading from the known reading of a component.

    ``MATCH1`` uses the second component.  ``MATCH2`` tries both
    components and credits whichever guess scores better for that
    character, separately in each mode.  Characters without a component of
    known reading count as wrong.  Scoring is per type unless
    ``token_counts`` weights each test character by its frequency.
    """
    if variant not in ("MATCH1", "MATCH2"):
        raise ValueError("variant must be MATCH1 or MATCH2")
    rep = EvalReport()
    for c, ref in test:
        parts = table.get(c)
        guesses = []
        if parts is not None:
            p1, p2 = parts
            cands = [p2] if variant == "MATCH1" else [p1, p2]
            guesses = [_syl(known[x]) for x in cands if x is not None and x in known]
        hits = {m: any(syllable_match(g, ref, m) for g in guesses) for m in MODES}
        weight = token_counts.get(c, 1) if token_counts is not None else 1
        for _ in range(weight):
            rep.add(c, hits)
    return rep
