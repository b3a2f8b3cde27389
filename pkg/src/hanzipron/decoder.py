"""Viterbi pronunciation of character sequences.

The decoding criterion is ``argmax_P Pr(P) * prod_i Pr(c_i | p_i) ** k`` with
a bigram syllable model for ``Pr(P)`` and the channel exponent ``k``
(3 by default).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .lm import NgramLM
from .symbols import TokenStream

__all__ = ["DecodeConfig", "Decoder", "viterbi_decode", "exhaustive_decode",
           "UNKNOWN_EPSILON", "TooLargeError"]

log = logging.getLogger(__name__)

UNKNOWN_EPSILON = 1e-12
EXHAUSTIVE_LIMIT = 10 ** 7


class TooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class DecodeConfig:
    exponent: float = 3.0
    lm_order: int = 2
    beam: int = 0  # 0 = exact

    def __post_init__(self):
        if self.exponent < 1:
            raise ValueError("channel exponent must be >= 1")
        if self.lm_order not in (1, 2):
            raise ValueError("only unigram and bigram decoding models are supported")
        if self.beam < 0:
            raise ValueError("beam must be >= 0")


class Decoder:
    """Caches the log tables shared by every sentence decoded."""

    def __init__(self, lm: NgramLM, channel, cfg: DecodeConfig = DecodeConfig()):
        self.cfg = cfg
        theta = channel.matrix() if hasattr(channel, "matrix") else np.asarray(channel)
        P, C = theta.shape
        if lm.n != cfg.lm_order:
            raise ValueError(f"decoder expects an order-{cfg.lm_order} model, got {lm.n}")
        if lm.V != P:
            raise ValueError(f"language model has {lm.V} syllables, channel has {P}")
        if lm.n == 2:
            self.start, self.trans = lm.bigram_logprobs()
        else:
            with np.errstate(divide="ignore"):
                uni = np.log(np.array([lm.prob(w) for w in range(P)]))
            self.start = uni
            self.trans = np.broadcast_to(uni, (P, P))
        with np.errstate(divide="ignore"):
            self.chan = np.log(theta)
        self.unsupported = np.flatnonzero(~(theta > 0).any(axis=0))
        self.n_chars = C
        self.flagged: set[int] = set()

    def emission(self, c: int) -> np.ndarray:
        """``k * log Pr(c | p)`` for every syllable, with the unknown-character fallback."""
        k = self.cfg.exponent
        if c < 0 or c >= self.n_chars or np.isneginf(self.chan[:, c]).all():
            self.flagged.add(int(c))
            return np.full(len(self.start), k * math.log(UNKNOWN_EPSILON))
        return k * self.chan[:, c]

    def score(self, chars, syllables) -> float:
        chars, syllables = list(chars), list(syllables)
        s = self.start[syllables[0]]
        for i, (c, p) in enumerate(zip(chars, syllables)):
            if i:
                s += self.trans[syllables[i - 1], p]
            s += self.emission(c)[p]
        return float(s)

    def viterbi(self, chars) -> tuple[np.ndarray, float]:
        chars = np.asarray(chars, dtype=np.int64)
        T = len(chars)
        if T == 0:
            return np.zeros(0, dtype=np.int64), 0.0
        P = len(self.start)
        beam = self.cfg.beam
        back = np.zeros((T, P), dtype=np.int64)
        delta = self.start + self.emission(chars[0])
        for t in range(1, T):
            if beam and beam < P:
                cut = np.partition(delta, P - beam)[P - beam]
                delta = np.where(delta >= cut, delta, -np.inf)
            cand = delta[:, None] + self.trans
            back[t] = np.argmax(cand, axis=0)  # first maximum = lowest syllable id
            delta = cand[back[t], np.arange(P)] + self.emission(chars[t])
        best = int(np.argmax(delta))
        path = np.empty(T, dtype=np.int64)
        path[-1] = best
        for t in range(T - 1, 0, -1):
            path[t - 1] = back[t, path[t]]
        return path, float(delta[best])

    def exhaustive(self, chars) -> tuple[np.ndarray, float]:
        chars = list(chars)
        P = len(self.start)
        if P ** len(chars) > EXHAUSTIVE_LIMIT:
            raise TooLargeError(f"{P}**{len(chars)} sequences exceeds the enumeration budget")
        if not chars:
            return np.zeros(0, dtype=np.int64), 0.0
        em = [self.emission(c) for c in chars]
        best, best_seq = -math.inf, None
        for seq in itertools.product(range(P), repeat=len(chars)):
            s = self.start[seq[0]] + em[0][seq[0]]
            for i in range(1, len(seq)):
                s += self.trans[seq[i - 1], seq[i]] + em[i][seq[i]]
            if s > best:
                best, best_seq = s, seq
        if best_seq is None:
            best_seq = (0,) * len(chars)
        return np.asarray(best_seq, dtype=np.int64), float(best)

    def decode_stream(self, stream: TokenStream) -> TokenStream:
        return TokenStream("syllable", tuple(self.viterbi(seg)[0] for seg in stream.segments))


def viterbi_decode(chars, lm: NgramLM, channel, cfg: DecodeConfig = DecodeConfig(),
                   return_score: bool = False):
    """Most probable syllable sequence for ``chars`` (ids or a :class:`TokenStream`)."""
    dec = Decoder(lm, channel, cfg)
    if isinstance(chars, TokenStream):
        out = dec.decode_stream(chars)
        if dec.flagged:
            log.warning("%d character types had no channel support", len(dec.flagged))
        return out
    path, score = dec.viterbi(chars)
    if dec.flagged:
        log.warning("characters %s had no channel support", sorted(dec.flagged))
    return (path, score) if return_score else path


def exhaustive_decode(chars, lm: NgramLM, channel, cfg: DecodeConfig = DecodeConfig(),
                      return_score: bool = False):
    """Argmax by enumerating every sequence (test oracle; small inputs only)."""
    path, score = Decoder(lm, channel, cfg).exhaustive(chars)
    return (path, score) if return_score else path
