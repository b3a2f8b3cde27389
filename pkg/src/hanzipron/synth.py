"""Synthetic writing systems with known pronunciations.

A hidden syllable process generates two independent samples.  One is kept
as the spoken corpus; the other is written down through a gold
syllable-to-character channel, giving the character corpus.  A further
held-out sample, written the same way, is the test set with gold readings.

Two hidden processes are available:

``trigram``
    a random trigram model whose next-syllable distributions are drawn
    from a Dirichlet around a Zipfian unigram.  Characters are chosen
    independently for every token.
``words``
    a lexicon of multi-syllable words with a random word bigram model.
    Each word has one fixed spelling, so word-segmented versions of both
    corpora can be emitted for the embedding-mapping method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .phonology import Syllable
from .pinyinizer import PronDictionary

__all__ = ["SynthConfig", "GoldMapping", "SynthCorpus", "gen_cipher_corpus", "SYLLABLES"]

# Common Mandarin syllables, roughly by frequency.
SYLLABLES = """
de shi yi bu you zhe ge ren wo zai ta le zhong da guo he ni lai shang dao
men wei sheng xiao ke xue jia zi nian dui hui yao ye chu fa jiu ming hou
ji zuo ying xing qi dong neng guan yu sui gong fang zhi kai ti xian mei na
li tian jin wen jie gao mian quan lu bao li dian xin jian qu shuo kan zhu
hua bei ben zheng jing ding shou ming tong zao chang yong xiang qing hao
bian hai qian yuan san duo si liang shen nan jiao suo cheng cong bing nei
wu hen ma ba zou ran rang pin pai piao lou shan kou cai mu ri mao zong
tou ban lan luo sha can kong ku kuai huan hong mo lin ling long lv nv pao
qiao qiong sai sen shai shang shua song tuo wai wan wang weng xia xiong
yang yin yun zan zen zhai zhan zhao zhou zhuang zhun zui
""".split()
SYLLABLES = list(dict.fromkeys(SYLLABLES))


@dataclass
class SynthConfig:
    n_syllables: int = 50
    n_chars: int = 200
    fanout: str = "uniform"            # "uniform" | "zipf": how characters spread over syllables
    heteronym_fraction: float = 0.05
    reading_split: float = 0.7         # share of a heteronym's tokens read the primary way
    tones: int = 4                     # gold readings carry a tone in 1..tones (0: neutral only)
    lm: str = "trigram"                # "trigram" | "words"
    concentration: float = 1.0         # Dirichlet concentration of next-token distributions
    zipf: float = 1.0                  # unigram skew
    n_words: int = 600
    char_tokens: int = 200_000
    syllable_tokens: int = 200_000
    test_tokens: int = 2_000
    line_length: int = 20
    seed: int = 0

    def __post_init__(self):
        for f in ("n_syllables", "n_chars", "char_tokens", "syllable_tokens",
                  "test_tokens", "line_length", "n_words"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be >= 1")
        if self.n_chars < self.n_syllables:
            raise ValueError("need at least one character per syllable (n_chars >= n_syllables)")
        if self.n_syllables > len(SYLLABLES):
            raise ValueError(f"at most {len(SYLLABLES)} syllable types are available")
        if not 0 <= self.heteronym_fraction <= 1:
            raise ValueError("heteronym_fraction must be in [0, 1]")
        if not 0 < self.reading_split <= 1:
            raise ValueError("reading_split must be in (0, 1]")
        if self.lm not in ("trigram", "words"):
            raise ValueError("lm must be 'trigram' or 'words'")
        if self.fanout not in ("uniform", "zipf"):
            raise ValueError("fanout must be 'uniform' or 'zipf'")
        if self.n_syllables < 2 and self.heteronym_fraction > 0:
            raise ValueError("heteronyms need at least two syllables")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for k, v in d.items():
            if k not in known:
                raise KeyError(f"unknown synth option {k!r}")
            default = getattr(cls, k)
            kwargs[k] = type(default)(v) if not isinstance(v, type(default)) else v
        return cls(**kwargs)


@dataclass
class GoldMapping:
    """Gold channel, per-character reading distributions and reading tones."""

    channel: dict[str, dict[str, float]]     # syllable -> character -> Pr(c | p)
    readings: dict[str, dict[str, float]]    # character -> syllable -> Pr(p | c)
    tones: dict[tuple[str, str], int]        # (character, syllable) -> tone

    def majority(self) -> dict[str, str]:
        return {c: max(r, key=lambda p: (r[p], p)) for c, r in self.readings.items()}

    def heteronyms(self) -> set[str]:
        return {c for c, r in self.readings.items() if len(r) > 1}


@dataclass
class SynthCorpus:
    config: SynthConfig
    syllables: list[str]
    chars: list[str]
    char_lines: list[str]
    char_gold: list[list[str]]               # hidden readings of the character corpus
    syllable_lines: list[list[str]]
    test_lines: list[str]
    test_gold: list[list[Syllable]]
    gold: GoldMapping
    dictionary: PronDictionary
    char_word_lines: list[list[str]] | None = None
    syllable_word_lines: list[list[str]] | None = None
    test_word_lines: list[list[str]] | None = None
    lexicon: list[tuple[str, ...]] = field(default_factory=list)

    def write(self, outdir) -> dict[str, Path]:
        """Write every artifact in the package's plain-text formats."""
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "chars": out / "chars.txt",
            "syllables": out / "syllables.txt",
            "test": out / "test.chars.txt",
            "ref": out / "test.ref.txt",
            "gold": out / "gold.tsv",
            "dict": out / "dict.tsv",
        }
        _write_lines(paths["chars"], self.char_lines)
        _write_lines(paths["syllables"], (" ".join(s) for s in self.syllable_lines))
        _write_lines(paths["test"], self.test_lines)
        _write_lines(paths["ref"], (" ".join(s.render() for s in line) for line in self.test_gold))
        _write_lines(paths["gold"], (f"{c}\t{p}\t{float(q)!r}" for c, r in self.gold.readings.items()
                                     for p, q in sorted(r.items())))
        _write_lines(paths["dict"], (f"{w}\t{' '.join(s.numeric() for s in pron)}"
                                     for w, pron in self.dictionary.entries))
        if self.char_word_lines is not None:
            paths["char_words"] = out / "chars.words.txt"
            paths["syllable_words"] = out / "syllables.words.txt"
            paths["test_words"] = out / "test.words.txt"
            _write_lines(paths["char_words"], (" ".join(x) for x in self.char_word_lines))
            _write_lines(paths["syllable_words"], (" ".join(x) for x in self.syllable_word_lines))
            _write_lines(paths["test_words"], (" ".join(x) for x in self.test_word_lines))
        return paths

    def test_chars(self) -> list[str]:
        return [c for line in self.test_lines for c in line]

    def test_ref(self) -> list[Syllable]:
        return [s for line in self.test_gold for s in line]


def _write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")


def _zipf(n: int, s: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


def _char_names(rng: np.random.Generator, n: int) -> list[str]:
    picks = rng.choice(20_000, size=n, replace=False)
    return [chr(0x4E00 + int(i)) for i in picks]


def _assign_readings(cfg: SynthConfig, rng: np.random.Generator, unigram: np.ndarray):
    """Primary (and for heteronyms, secondary) reading of every character."""
    P, C = cfg.n_syllables, cfg.n_chars
    primary = np.empty(C, dtype=np.int64)
    primary[:P] = np.arange(P)
    if C > P:
        probs = np.full(P, 1.0 / P) if cfg.fanout == "uniform" else unigram
        primary[P:] = rng.choice(P, size=C - P, p=probs)
    primary = primary[rng.permutation(C)]
    n_het = int(round(cfg.heteronym_fraction * C))
    het = rng.choice(C, size=n_het, replace=False) if n_het else np.zeros(0, dtype=np.int64)
    secondary = np.full(C, -1, dtype=np.int64)
    for c in het:
        q = rng.integers(P - 1)
        secondary[c] = q + (q >= primary[c])
    return primary, secondary


def _gold_channel(cfg, rng, primary, secondary, unigram) -> np.ndarray:
    """Pr(c | p) as a [P, C] matrix."""
    P, C = cfg.n_syllables, cfg.n_chars
    chan = np.zeros((P, C))
    for p in range(P):
        members = np.flatnonzero(primary == p)
        w = 0.5 * rng.dirichlet(np.ones(len(members))) + 0.5 / len(members)
        chan[p, members] = w
    s = cfg.reading_split
    for c in np.flatnonzero(secondary >= 0):
        p, q = primary[c], secondary[c]
        # token mass of the secondary reading relative to the primary one
        target = unigram[p] * chan[p, c] * (1 - s) / s / unigram[q]
        chan[q, c] = min(target, 0.5)
    return chan / chan.sum(axis=1, keepdims=True)


class _TrigramSource:
    def __init__(self, cfg: SynthConfig, rng: np.random.Generator, unigram: np.ndarray):
        P = cfg.n_syllables
        alpha = np.maximum(cfg.concentration * unigram, 1e-3)
        # contexts are (p1, p2) with P standing for the start symbol
        self.next = rng.dirichlet(alpha, size=(P + 1) * (P + 1)).reshape(P + 1, P + 1, P)
        self.cdf = np.cumsum(self.next, axis=2)
        self.P = P
        self.line_length = cfg.line_length

    def line(self, rng) -> list[int]:
        length = 1 + rng.poisson(self.line_length - 1)
        a = b = self.P
        out = []
        for u in rng.random(length):
            x = int(np.searchsorted(self.cdf[a, b], u * self.cdf[a, b, -1]))
            x = min(x, self.P - 1)
            out.append(x)
            a, b = b, x
        return out


class _WordSource:
    def __init__(self, cfg: SynthConfig, rng: np.random.Generator, unigram: np.ndarray):
        P = cfg.n_syllables
        lengths = rng.choice([1, 2, 3], size=cfg.n_words, p=[0.3, 0.55, 0.15])
        lexicon: list[tuple[int, ...]] = []
        seen = set()
        # every syllable gets a one-syllable word so the whole inventory is used
        for p in range(P):
            seen.add((p,))
            lexicon.append((p,))
        attempts = 0
        while len(lexicon) < cfg.n_words and attempts < 100 * cfg.n_words:
            attempts += 1
            L = int(lengths[attempts % len(lengths)])
            w = tuple(int(x) for x in rng.choice(P, size=L, p=unigram))
            if w not in seen:
                seen.add(w)
                lexicon.append(w)
        self.lexicon = lexicon
        self.n_base = len(lexicon)
        self.cfg = cfg

    def finish(self, rng: np.random.Generator, spelling: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
        """Shuffle the lexicon into frequency ranks and sample the word bigram model.

        Returns ``spelling`` permuted to match the new word order.
        """
        cfg = self.cfg
        n_extra = len(self.lexicon) - self.n_base
        order = list(rng.permutation(self.n_base))
        # extra words land in the frequent half so their characters get seen
        for i, pos in enumerate(rng.integers(0, self.n_base // 2 + 1, size=n_extra)):
            order.insert(int(pos), self.n_base + i)
        self.lexicon = [self.lexicon[i] for i in order]
        spelling = [spelling[i] for i in order]
        W = len(self.lexicon)
        base = _zipf(W, cfg.zipf)
        alpha = np.maximum(cfg.concentration * base * 50, 1e-3)
        self.next = rng.dirichlet(alpha, size=W + 1)
        self.cdf = np.cumsum(self.next, axis=1)
        self.W = W
        self.line_length = cfg.line_length
        return spelling

    def line_words(self, rng) -> list[int]:
        target = 1 + rng.poisson(self.line_length - 1)
        prev = self.W
        words, n = [], 0
        while n < target:
            u = rng.random() * self.cdf[prev, -1]
            w = min(int(np.searchsorted(self.cdf[prev], u)), self.W - 1)
            words.append(w)
            n += len(self.lexicon[w])
            prev = w
        return words


def gen_cipher_corpus(cfg: SynthConfig) -> SynthCorpus:
    """Generate character, syllable and test corpora plus their gold mapping."""
    rng = np.random.default_rng(cfg.seed)
    P, C = cfg.n_syllables, cfg.n_chars
    syl_names = list(SYLLABLES[:P])
    char_names = _char_names(rng, C)
    unigram = _zipf(P, cfg.zipf)[rng.permutation(P)]
    primary, secondary = _assign_readings(cfg, rng, unigram)
    chan = _gold_channel(cfg, rng, primary, secondary, unigram)
    chan_cdf = np.cumsum(chan, axis=1)
    tones = {}
    for c in range(C):
        for p in np.flatnonzero(chan[:, c] > 0):
            tones[(char_names[c], syl_names[p])] = int(rng.integers(1, cfg.tones + 1)) if cfg.tones else 0

    def write_char(p: int, u: float) -> int:
        return min(int(np.searchsorted(chan_cdf[p], u * chan_cdf[p, -1])), C - 1)

    char_word_lines = syllable_word_lines = test_word_lines = None
    lexicon_names: list[tuple[str, ...]] = []
    if cfg.lm == "trigram":
        src = _TrigramSource(cfg, rng, unigram)

        def sample(n_tokens):
            lines, n = [], 0
            while n < n_tokens:
                line = src.line(rng)[: n_tokens - n]
                lines.append(line)
                n += len(line)
            return lines

        syl_side = sample(cfg.syllable_tokens)
        char_side = sample(cfg.char_tokens)
        test_side = sample(cfg.test_tokens)

        def spell(lines):
            return [[write_char(p, u) for p, u in zip(line, rng.random(len(line)))] for line in lines]

        char_ids, test_ids = spell(char_side), spell(test_side)
    else:
        src = _WordSource(cfg, rng, unigram)
        spelling = [tuple(write_char(p, u) for p, u in zip(w, rng.random(len(w)))) for w in src.lexicon]
        # a character no spelling uses gets its own one-syllable homophone word
        used = {c for w in spelling for c in w}
        for c in range(C):
            if c not in used:
                src.lexicon.append((int(primary[c]),))
                spelling.append((c,))
        spelling = src.finish(rng, spelling)
        lexicon_names = [tuple(syl_names[p] for p in w) for w in src.lexicon]

        def sample_words(n_tokens):
            lines, n = [], 0
            while n < n_tokens:
                words = src.line_words(rng)
                lines.append(words)
                n += sum(len(src.lexicon[w]) for w in words)
            return lines

        def syllables_of(wlines):
            return [[p for w in line for p in src.lexicon[w]] for line in wlines]

        def chars_of(wlines):
            return [[c for w in line for c in spelling[w]] for line in wlines]

        syl_words = sample_words(cfg.syllable_tokens)
        char_words = sample_words(cfg.char_tokens)
        test_words = sample_words(cfg.test_tokens)
        syl_side = syllables_of(syl_words)
        char_side, char_ids = syllables_of(char_words), chars_of(char_words)
        test_side, test_ids = syllables_of(test_words), chars_of(test_words)

        def written(wlines):
            return [["".join(char_names[c] for c in spelling[w]) for w in line] for line in wlines]

        char_word_lines = written(char_words)
        test_word_lines = written(test_words)
        syllable_word_lines = [["-".join(syl_names[p] for p in src.lexicon[w]) for w in line]
                               for line in syl_words]

    # gold reading distributions: Pr(p | c) proportional to Pr(p) Pr(c | p)
    mass = unigram[:, None] * chan
    readings = {}
    for c in range(C):
        col = mass[:, c]
        tot = col.sum()
        readings[char_names[c]] = {syl_names[p]: float(col[p] / tot) for p in np.flatnonzero(col > 0)}
    gold = GoldMapping(
        channel={syl_names[p]: {char_names[c]: float(chan[p, c]) for c in np.flatnonzero(chan[p] > 0)}
                 for p in range(P)},
        readings=readings,
        tones=tones,
    )
    dictionary = PronDictionary()
    for c in range(C):
        name = char_names[c]
        p = syl_names[primary[c]]
        dictionary.add(name, [Syllable(p, tones[(name, p)])])

    def as_text(lines):
        return ["".join(char_names[c] for c in line) for line in lines]

    return SynthCorpus(
        config=cfg,
        syllables=syl_names,
        chars=char_names,
        char_lines=as_text(char_ids),
        char_gold=[[syl_names[p] for p in line] for line in char_side],
        syllable_lines=[[syl_names[p] for p in line] for line in syl_side],
        test_lines=as_text(test_ids),
        test_gold=[[Syllable(syl_names[p], tones[(char_names[c], syl_names[p])])
                    for c, p in zip(cl, pl)] for cl, pl in zip(test_ids, test_side)],
        gold=gold,
        dictionary=dictionary,
        char_word_lines=char_word_lines,
        syllable_word_lines=syllable_word_lines,
        test_word_lines=test_word_lines,
        lexicon=lexicon_names,
    )
