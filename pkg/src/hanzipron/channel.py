"""EM training of the syllable-to-character substitution channel.

The character corpus is reduced to its ``N`` most frequent n-grams (triples
by default) with counts; the syllable side supplies its ``M`` most probable
n-grams with joint probabilities.  Each EM iteration scores every
(character n-gram, syllable n-gram) pair as

    Pr(p1 p2 p3) * Pr(c1 | p1) * Pr(c2 | p2) * Pr(c3 | p3),

turns the scores into a posterior over syllable n-grams, collects
fractional ``count(c, p)`` weighted by ``count(c1 c2 c3)`` and renormalises.

Two exact E-step routes are provided.  ``direct`` is the literal N x M
loop, chunked over character n-grams and carried out in log space with a
per-row max shift.  ``contract`` sums over syllable n-grams by tensor
contraction against a dense prior tensor and back-propagates the counts;
it is much faster whenever the syllable inventory is small enough for a
dense ``P**n`` prior.  ``auto`` picks between them.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .lm import NgramLM
from .symbols import NgramCounts, SymbolTable, top_k

__all__ = [
    "ChannelTable",
    "FactoredChannel",
    "EMConfig",
    "LikelihoodTrace",
    "EMResult",
    "CharTriples",
    "PriorTriples",
    "init_channel",
    "em_train",
    "em_iteration",
    "corpus_loglik",
    "posteriors",
    "factored_prob",
    "component_index",
    "select_best_restart",
    "prepare_triples",
    "prepare_prior",
]

log = logging.getLogger(__name__)

MODES = ("flat", "factored", "pair")
# dense-prior route is used while P**n and the per-block work stay below these
_DENSE_PRIOR_LIMIT = 4_000_000
_CONTRACT_BLOCK = 1 << 22


# ---------------------------------------------------------------------------
# channel models


class ChannelTable:
    """Flat substitution table, ``probs[p, c] = Pr(c | p)``."""

    mode = "flat"

    def __init__(self, probs: np.ndarray):
        self.probs = np.asarray(probs, dtype=np.float64)

    @property
    def shape(self):
        return self.probs.shape

    @property
    def n_syllables(self) -> int:
        return self.probs.shape[0]

    @property
    def n_chars(self) -> int:
        return self.probs.shape[1]

    def matrix(self) -> np.ndarray:
        return self.probs

    def prob(self, c: int, p: int) -> float:
        return float(self.probs[p, c])

    def copy(self) -> "ChannelTable":
        return ChannelTable(self.probs.copy())

    def write(self, path, syllables: SymbolTable, chars: SymbolTable, **header) -> None:
        write_channel(path, self.matrix(), syllables, chars, mode=self.mode, **header)


@dataclass
class Components:
    """Integer component ids per character (``-1`` = no such part)."""

    part1: np.ndarray
    part2: np.ndarray
    n_part1: int
    n_part2: int
    names1: list = field(default_factory=list)
    names2: list = field(default_factory=list)


def component_index(chars: SymbolTable, decomposition) -> Components:
    """Map each character id to ids of its first and second components."""
    names1: dict[str, int] = {}
    names2: dict[str, int] = {}
    part1 = np.full(len(chars), -1, dtype=np.int64)
    part2 = np.full(len(chars), -1, dtype=np.int64)
    for cid, c in enumerate(chars.strings):
        parts = decomposition.get(c)
        if parts is None:
            continue
        a, b = parts
        part1[cid] = names1.setdefault(a, len(names1))
        if b is not None:
            part2[cid] = names2.setdefault(b, len(names2))
    return Components(part1, part2, len(names1), len(names2), list(names1), list(names2))


class FactoredChannel:
    """Mixture channel built from five tables.

    ``Pr(c|p) = l1 Pr1(c|p) + l2 Pr2(a(c)|p) Pr3(c|a(c)) + l3 Pr4(b(c)|p) Pr5(c|b(c))``

    where ``a(c)`` and ``b(c)`` are the first and second graphical
    components of ``c``.  A term is absent when ``c`` lacks that component.
    ``Pr3``/``Pr5`` rows are supported only on characters that carry the
    component, so the mixture is normalised whenever ``Pr2``/``Pr4`` are
    supported on components that occur in the character vocabulary.
    """

    mode = "factored"

    def __init__(self, pr1, pr2, pr3, pr4, pr5, lambdas, comps: Components):
        self.pr1, self.pr2, self.pr3, self.pr4, self.pr5 = (
            np.asarray(t, dtype=np.float64) for t in (pr1, pr2, pr3, pr4, pr5))
        self.lambdas = tuple(float(x) for x in lambdas)
        self.comps = comps

    @property
    def n_syllables(self) -> int:
        return self.pr1.shape[0]

    @property
    def n_chars(self) -> int:
        return self.pr1.shape[1]

    def terms(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        l1, l2, l3 = self.lambdas
        P, C = self.pr1.shape
        t1 = l1 * self.pr1
        t2 = np.zeros((P, C))
        t3 = np.zeros((P, C))
        has1 = self.comps.part1 >= 0
        has2 = self.comps.part2 >= 0
        if has1.any():
            a = self.comps.part1[has1]
            t2[:, has1] = l2 * self.pr2[:, a] * self.pr3[a, np.flatnonzero(has1)][None, :]
        if has2.any():
            b = self.comps.part2[has2]
            t3[:, has2] = l3 * self.pr4[:, b] * self.pr5[b, np.flatnonzero(has2)][None, :]
        return t1, t2, t3

    def matrix(self) -> np.ndarray:
        t1, t2, t3 = self.terms()
        return t1 + t2 + t3

    def prob(self, c: int, p: int) -> float:
        return factored_prob(c, p, self)

    def copy(self) -> "FactoredChannel":
        return FactoredChannel(self.pr1.copy(), self.pr2.copy(), self.pr3.copy(),
                               self.pr4.copy(), self.pr5.copy(), self.lambdas, self.comps)

    def write(self, path, syllables: SymbolTable, chars: SymbolTable, **header) -> None:
        header.setdefault("lambda", ",".join(f"{x:g}" for x in self.lambdas))
        write_channel(path, self.matrix(), syllables, chars, mode=self.mode, **header)


def factored_prob(c: int, p: int, f: FactoredChannel) -> float:
    """Evaluate the five-table mixture for one (character, syllable) pair."""
    l1, l2, l3 = f.lambdas
    value = l1 * f.pr1[p, c]
    a = f.comps.part1[c]
    if a >= 0:
        value += l2 * f.pr2[p, a] * f.pr3[a, c]
    b = f.comps.part2[c]
    if b >= 0:
        value += l3 * f.pr4[p, b] * f.pr5[b, c]
    return float(value)


def write_channel(path, probs: np.ndarray, syllables: SymbolTable, chars: SymbolTable,
                  min_prob: float = 0.0, **header) -> None:
    """Write ``p<TAB>c<TAB>prob`` rows grouped by syllable."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("#channel" + "".join(f"\t{k}={v}" for k, v in header.items()) + "\n")
        for p in range(probs.shape[0]):
            row = probs[p]
            ps = syllables.lookup(p)
            for c in np.flatnonzero(row > min_prob):
                f.write(f"{ps}\t{chars.lookup(int(c))}\t{float(row[c])!r}\n")


def read_channel(path, syllables: SymbolTable | None = None,
                 chars: SymbolTable | None = None):
    """Read a channel file; returns ``(ChannelTable, syllables, chars, header)``."""
    syllables = SymbolTable() if syllables is None else syllables
    chars = SymbolTable() if chars is None else chars
    header: dict[str, str] = {}
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#channel"):
                header = dict(kv.split("=", 1) for kv in line.split("\t")[1:])
            elif line:
                ps, cs, prob = line.split("\t")
                rows.append((syllables.intern(ps), chars.intern(cs), float(prob)))
    probs = np.zeros((len(syllables), len(chars)))
    for p, c, x in rows:
        probs[p, c] = x
    return ChannelTable(probs), syllables, chars, header


# ---------------------------------------------------------------------------
# configuration and bookkeeping


@dataclass
class EMConfig:
    N: int = 10_000
    M: int = 10_000
    iterations: int = 50
    restarts: int = 1
    seed: int = 0
    mode: str = "flat"
    hints: Sequence[tuple[int, int]] = ()
    prune: int = 5
    lambdas: tuple[float, float, float] = (0.8, 0.1, 0.1)
    init: str = "random"
    method: str = "auto"
    chunk: int = 512
    workers: int = 1   # restarts run in this many processes

    def __post_init__(self):
        for name in ("N", "M", "iterations", "restarts", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.init not in ("random", "uniform"):
            raise ValueError("init must be 'random' or 'uniform'")
        if self.method not in ("auto", "direct", "contract"):
            raise ValueError("method must be auto, direct or contract")
        if any(x < 0 for x in self.lambdas) or abs(sum(self.lambdas) - 1) > 1e-9:
            raise ValueError("lambdas must be non-negative and sum to 1")

    @property
    def order(self) -> int:
        return 2 if self.mode == "pair" else 3


@dataclass
class LikelihoodTrace:
    """log Pr(C_tri) per iteration, computed before that iteration's update.

    ``final`` is the log-likelihood of the returned channel.
    """

    values: list[float] = field(default_factory=list)
    final: float = -math.inf
    warnings: list[str] = field(default_factory=list)

    def all_values(self) -> list[float]:
        return list(self.values) + [self.final]

    def is_monotone(self, rtol: float = 1e-9) -> bool:
        vals = self.all_values()
        for a, b in zip(vals, vals[1:]):
            if a == -math.inf:
                continue
            if b < a - rtol * abs(a):
                return False
        return True


@dataclass
class EMResult:
    channel: ChannelTable | FactoredChannel
    trace: LikelihoodTrace
    runs: list[LikelihoodTrace] = field(default_factory=list)
    best: int = 0

    def __iter__(self):
        return iter((self.channel, self.trace))


def select_best_restart(traces: Sequence[LikelihoodTrace | Sequence[float] | float]) -> int:
    """Index of the restart with the highest final log-likelihood (lowest index on ties)."""
    if not traces:
        raise ValueError("no completed restarts to choose from")
    finals = []
    for t in traces:
        if isinstance(t, LikelihoodTrace):
            finals.append(t.final)
        elif isinstance(t, (int, float)):
            finals.append(float(t))
        else:
            finals.append(float(list(t)[-1]))
    best = 0
    for i, v in enumerate(finals):
        if v > finals[best]:
            best = i
    return best


# ---------------------------------------------------------------------------
# training data


@dataclass
class CharTriples:
    grams: np.ndarray   # [T, n] character ids
    counts: np.ndarray  # [T] float weights


@dataclass
class PriorTriples:
    grams: np.ndarray   # [M, n] syllable ids
    probs: np.ndarray   # [M] joint probabilities


def prepare_triples(C_tri: NgramCounts, N: int) -> CharTriples:
    ranked = top_k(C_tri, N)
    grams = np.array([g for g, _ in ranked], dtype=np.int64).reshape(-1, C_tri.n)
    counts = np.array([c for _, c in ranked], dtype=np.float64)
    return CharTriples(grams, counts)


def prepare_prior(prior: NgramLM, M: int, prune: int | None = None) -> PriorTriples:
    lm = prior
    if prune:
        counts = prior.joint.prune(prune)
        if not counts.table:
            raise ValueError(f"pruning at {prune} removed every syllable n-gram")
        lm = NgramLM(prior.n, prior.V, prior.cond, prior.unseen, prior.default,
                     prior.smoothing, joint=counts)
    grams, probs = lm.top_joint(M)
    if not len(grams):
        raise ValueError("prior has no syllable n-grams")
    return PriorTriples(grams, probs)


# ---------------------------------------------------------------------------
# initialisation


def _size(x) -> int:
    return x if isinstance(x, (int, np.integer)) else len(x)


def _random_rows(rng: np.random.Generator, shape, mask=None, uniform=False) -> np.ndarray:
    w = np.ones(shape) if uniform else rng.uniform(0.5, 1.5, size=shape)
    if mask is not None:
        w = w * mask
    s = w.sum(axis=1, keepdims=True)
    return np.divide(w, s, out=np.zeros_like(w), where=s > 0)


def _apply_hints(probs: np.ndarray, hints, n_chars: int, n_syllables: int) -> np.ndarray:
    probs = probs.copy()
    touched = set()
    for c, p in hints:
        if not (0 <= c < n_chars) or not (0 <= p < n_syllables):
            raise ValueError(f"hint ({c}, {p}) refers to an unknown symbol")
        probs[p, c] = 1.0
        touched.add(p)
    for p in touched:
        probs[p] /= probs[p].sum()
    return probs


def init_channel(chars, syllables, cfg: EMConfig, comps: Components | None = None,
                 rng: np.random.Generator | None = None):
    """Initial channel: random row-normalised values, or uniform rows.

    Random weights are drawn from Uniform(0.5, 1.5) and normalised.  Each
    hint ``(c, p)`` then has its probability replaced by a weight of 1.0
    before the row is renormalised, so hinted entries dominate their rows.
    """
    C, P = _size(chars), _size(syllables)
    if C < 1 or P < 1:
        raise ValueError("vocabularies must be non-empty")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    uniform = cfg.init == "uniform"
    pr1 = _apply_hints(_random_rows(rng, (P, C), uniform=uniform), cfg.hints, C, P)
    if cfg.mode != "factored":
        return ChannelTable(pr1)
    if comps is None:
        raise ValueError("factored mode needs a character decomposition")
    A, B = max(comps.n_part1, 1), max(comps.n_part2, 1)
    mask3 = np.zeros((A, C))
    mask5 = np.zeros((B, C))
    has1 = comps.part1 >= 0
    has2 = comps.part2 >= 0
    mask3[comps.part1[has1], np.flatnonzero(has1)] = 1
    mask5[comps.part2[has2], np.flatnonzero(has2)] = 1
    pr2 = _random_rows(rng, (P, A), uniform=uniform)
    pr3 = _random_rows(rng, (A, C), mask3, uniform=uniform)
    pr4 = _random_rows(rng, (P, B), uniform=uniform)
    pr5 = _random_rows(rng, (B, C), mask5, uniform=uniform)
    return FactoredChannel(pr1, pr2, pr3, pr4, pr5, cfg.lambdas, comps)


# ---------------------------------------------------------------------------
# E-step


@dataclass
class EStep:
    counts: np.ndarray          # [P, C] expected count(c, p)
    loglik: float
    zero: np.ndarray            # indices of character n-grams with no support


def _log(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


def _direct_scores(logth: np.ndarray, logpi: np.ndarray, pg: np.ndarray,
                   cg: np.ndarray) -> np.ndarray:
    S = np.broadcast_to(logpi, (len(cg), len(logpi))).copy()
    for i in range(cg.shape[1]):
        S += logth[pg[:, i][None, :], cg[:, i][:, None]]
    return S


def _estep_direct(theta, chars: CharTriples, prior: PriorTriples, chunk: int) -> EStep:
    P, C = theta.shape
    n = chars.grams.shape[1]
    logth = _log(theta)
    logpi = _log(prior.probs)
    pg = prior.grams
    # group syllable n-grams by the syllable at each position for reduceat
    groups = []
    for i in range(n):
        order = np.argsort(pg[:, i], kind="stable")
        keys = pg[order, i]
        starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
        groups.append((order, starts, keys[starts]))
    counts_T = np.zeros((C, P))
    loglik = 0.0
    zero = []
    for lo in range(0, len(chars.counts), chunk):
        cg = chars.grams[lo:lo + chunk]
        w = chars.counts[lo:lo + chunk]
        S = _direct_scores(logth, logpi, pg, cg)
        m = S.max(axis=1)
        ok = np.isfinite(m)
        if not ok.all():
            zero.extend((lo + np.flatnonzero(~ok)).tolist())
            S, m, w, cg = S[ok], m[ok], w[ok], cg[ok]
        E = np.exp(S - m[:, None])
        s = E.sum(axis=1)
        loglik += float(np.dot(w, m + np.log(s)))
        E *= (w / s)[:, None]
        for i in range(n):
            order, starts, syl = groups[i]
            R = np.add.reduceat(E[:, order], starts, axis=1)
            full = np.zeros((len(cg), P))
            full[:, syl] = R
            np.add.at(counts_T, cg[:, i], full)
    if zero:
        loglik = -math.inf
    return EStep(counts_T.T.copy(), loglik, np.asarray(zero, dtype=np.int64))


def _dense_prior(prior: PriorTriples, P: int) -> np.ndarray:
    n = prior.grams.shape[1]
    Pi = np.zeros((P,) * n)
    np.add.at(Pi, tuple(prior.grams[:, i] for i in range(n)), prior.probs)
    return Pi


def _estep_contract(theta, chars: CharTriples, prior: PriorTriples, chunk: int) -> EStep:
    P, C = theta.shape
    n = chars.grams.shape[1]
    colmax = theta.max(axis=0)
    scale = np.where(colmax > 0, colmax, 1.0)
    th = theta / scale                       # column-rescaled channel
    Pi = _dense_prior(prior, P)
    pimax = Pi.max()
    Pi = Pi / pimax
    cg, w = chars.grams, chars.counts
    if n == 2:
        L, counts_T = _contract2(th, Pi, cg, w)
    elif n == 3:
        L, counts_T = _contract3(th, Pi, cg, w)
    else:
        raise ValueError("contraction route supports orders 2 and 3")
    bad = ~(L > 0)
    zero = np.flatnonzero(bad)
    if len(zero):
        # underflow or genuinely unsupported n-grams: redo those in log space
        sub = CharTriples(cg[bad], w[bad])
        redo = _estep_direct(theta, sub, prior, chunk)
        counts = counts_T.T + redo.counts
        good_ll = float(np.dot(w[~bad], np.log(L[~bad]) + math.log(pimax)
                               + np.log(scale[cg[~bad]]).sum(axis=1)))
        zero = np.flatnonzero(bad)[redo.zero] if len(redo.zero) else np.zeros(0, np.int64)
        ll = good_ll + redo.loglik if not len(zero) else -math.inf
        return EStep(counts, ll, zero)
    ll = float(np.dot(w, np.log(L) + math.log(pimax) + np.log(scale[cg]).sum(axis=1)))
    return EStep(counts_T.T.copy(), ll, zero)


def _safe_ratio(w, L):
    return np.divide(w, L, out=np.zeros_like(w), where=L > 0)


def _contract2(th, Pi, cg, w):
    P, C = th.shape
    u1, inv1 = np.unique(cg[:, 0], return_inverse=True)
    T1 = th[:, u1].T @ Pi                                 # [U1, P]  sum over p1
    L = np.einsum("tq,qt->t", T1[inv1], th[:, cg[:, 1]])
    r = _safe_ratio(w, L)
    counts_T = np.zeros((C, P))
    np.add.at(counts_T, cg[:, 1], r[:, None] * T1[inv1] * th[:, cg[:, 1]].T)
    g = np.zeros((len(u1), P))
    np.add.at(g, inv1, r[:, None] * th[:, cg[:, 1]].T)
    counts_T[u1] += (g @ Pi.T) * th[:, u1].T
    return L, counts_T


def _contract3(th, Pi, cg, w):
    P, C = th.shape
    pairs, inv_u = np.unique(cg[:, :2], axis=0, return_inverse=True)
    inv_u = inv_u.reshape(-1)
    u1, inv1 = np.unique(pairs[:, 0], return_inverse=True)
    Pi2 = Pi.reshape(P, P * P)
    T1 = (th[:, u1].T @ Pi2).reshape(len(u1), P, P)       # sum over p1
    U = len(pairs)
    block = max(1, _CONTRACT_BLOCK // (P * P))
    T2 = np.empty((U, P))
    for lo in range(0, U, block):
        sl = slice(lo, lo + block)
        T2[sl] = np.einsum("upq,pu->uq", T1[inv1[sl]], th[:, pairs[sl, 1]])
    th3 = th[:, cg[:, 2]].T                                # [T, P]
    L = np.einsum("tq,tq->t", T2[inv_u], th3)
    r = _safe_ratio(w, L)
    counts_T = np.zeros((C, P))
    np.add.at(counts_T, cg[:, 2], r[:, None] * T2[inv_u] * th3)
    g = np.zeros((U, P))
    np.add.at(g, inv_u, r[:, None] * th3)
    R2 = np.empty((U, P))
    H = np.zeros((len(u1), P, P))
    for lo in range(0, U, block):
        sl = slice(lo, lo + block)
        th2 = th[:, pairs[sl, 1]].T                        # [u, P]
        R2[sl] = np.einsum("upq,uq->up", T1[inv1[sl]], g[sl]) * th2
        np.add.at(H, inv1[sl], th2[:, :, None] * g[sl][:, None, :])
    np.add.at(counts_T, pairs[:, 1], R2)
    counts_T[u1] += (H.reshape(len(u1), P * P) @ Pi2.T) * th[:, u1].T
    return L, counts_T


def _pick_method(cfg_method: str, P: int, n: int, chars: CharTriples) -> str:
    if cfg_method != "auto":
        return cfg_method
    if n in (2, 3) and P ** n <= _DENSE_PRIOR_LIMIT:
        return "contract"
    return "direct"


def e_step(theta: np.ndarray, chars: CharTriples, prior: PriorTriples,
           method: str = "auto", chunk: int = 512) -> EStep:
    method = _pick_method(method, theta.shape[0], chars.grams.shape[1], chars)
    if method == "contract":
        return _estep_contract(theta, chars, prior, chunk)
    return _estep_direct(theta, chars, prior, chunk)


def posteriors(channel, chars: CharTriples, prior: PriorTriples) -> tuple[np.ndarray, np.ndarray]:
    """Per character n-gram posterior over the syllable n-grams.

    Returns ``(post[T, M], loglik_per_ngram[T])``; rows with no support are
    all zero with log-likelihood ``-inf``.
    """
    theta = _matrix(channel)
    S = _direct_scores(_log(theta), _log(prior.probs), prior.grams, chars.grams)
    m = S.max(axis=1)
    post = np.zeros_like(S)
    ll = np.full(len(S), -math.inf)
    ok = np.isfinite(m)
    E = np.exp(S[ok] - m[ok, None])
    s = E.sum(axis=1)
    post[ok] = E / s[:, None]
    ll[ok] = m[ok] + np.log(s)
    return post, ll


def _matrix(channel) -> np.ndarray:
    return channel.matrix() if hasattr(channel, "matrix") else np.asarray(channel)


# ---------------------------------------------------------------------------
# M-step


def _normalize_rows(counts: np.ndarray, previous: np.ndarray) -> np.ndarray:
    s = counts.sum(axis=1, keepdims=True)
    out = np.divide(counts, s, out=np.zeros_like(counts), where=s > 0)
    empty = s[:, 0] <= 0
    out[empty] = previous[empty]  # rows without evidence keep their values
    return out


def _m_step(channel, counts: np.ndarray):
    if isinstance(channel, ChannelTable):
        return ChannelTable(_normalize_rows(counts, channel.probs))
    f = channel
    t1, t2, t3 = f.terms()
    total = t1 + t2 + t3
    ratio = np.divide(counts, total, out=np.zeros_like(counts), where=total > 0)
    n1, n2, n3 = ratio * t1, ratio * t2, ratio * t3
    comps = f.comps
    P, C = counts.shape
    pr1 = _normalize_rows(n1, f.pr1)
    pr2c = np.zeros_like(f.pr2)
    pr3c = np.zeros_like(f.pr3)
    pr4c = np.zeros_like(f.pr4)
    pr5c = np.zeros_like(f.pr5)
    has1 = np.flatnonzero(comps.part1 >= 0)
    has2 = np.flatnonzero(comps.part2 >= 0)
    if len(has1):
        a = comps.part1[has1]
        np.add.at(pr2c.T, a, n2[:, has1].T)
        np.add.at(pr3c, (a, has1), n2[:, has1].sum(axis=0))
    if len(has2):
        b = comps.part2[has2]
        np.add.at(pr4c.T, b, n3[:, has2].T)
        np.add.at(pr5c, (b, has2), n3[:, has2].sum(axis=0))
    return FactoredChannel(pr1, _normalize_rows(pr2c, f.pr2), _normalize_rows(pr3c, f.pr3),
                           _normalize_rows(pr4c, f.pr4), _normalize_rows(pr5c, f.pr5),
                           f.lambdas, comps)


def em_iteration(channel, chars: CharTriples, prior: PriorTriples,
                 method: str = "auto", chunk: int = 512):
    """One EM step; returns ``(new_channel, loglik_of_old_channel, EStep)``."""
    est = e_step(_matrix(channel), chars, prior, method, chunk)
    return _m_step(channel, est.counts), est.loglik, est


# ---------------------------------------------------------------------------
# drivers


def _check_prior(prior: NgramLM, cfg: EMConfig) -> None:
    if prior.n != cfg.order:
        raise ValueError(f"mode {cfg.mode!r} needs an order-{cfg.order} prior, got {prior.n}")


def corpus_loglik(channel, C_tri: NgramCounts | CharTriples, prior: NgramLM | PriorTriples,
                  cfg: EMConfig) -> float:
    """``sum count(c1c2c3) * log sum_{top-M p} Pr(p) prod Pr(c_i | p_i)`` over the top-N.

    Returns ``-inf`` (and logs the offending n-gram) when some character
    n-gram has no probability under every candidate.
    """
    chars = C_tri if isinstance(C_tri, CharTriples) else prepare_triples(C_tri, cfg.N)
    pri = prior if isinstance(prior, PriorTriples) else prepare_prior(
        prior, cfg.M, cfg.prune if cfg.mode == "pair" else None)
    est = e_step(_matrix(channel), chars, pri, cfg.method, cfg.chunk)
    if len(est.zero):
        log.warning("character n-gram %s has zero probability",
                    tuple(chars.grams[est.zero[0]].tolist()))
    return est.loglik


def _run_once(chars, prior, cfg: EMConfig, C: int, P: int, comps, rng) -> EMResult:
    channel = init_channel(C, P, cfg, comps, rng)
    trace = LikelihoodTrace()
    for k in range(cfg.iterations):
        channel, ll, est = em_iteration(channel, chars, prior, cfg.method, cfg.chunk)
        if len(est.zero):
            trace.warnings.append(
                f"iteration {k + 1}: {len(est.zero)} character n-grams had no support")
        trace.values.append(ll)
    trace.final = e_step(_matrix(channel), chars, prior, cfg.method, cfg.chunk).loglik
    return EMResult(channel, trace, [trace], 0)


def em_train(C_tri: NgramCounts, prior: NgramLM, cfg: EMConfig, chars=None,
             syllables=None, comps: Components | None = None) -> EMResult:
    """Train the channel with ``cfg.restarts`` random restarts.

    ``chars``/``syllables`` give the vocabulary sizes (ints or symbol
    tables); by default they are inferred from the largest ids.  The
    restart with the highest final objective is returned.
    """
    _check_prior(prior, cfg)
    if C_tri.n != cfg.order:
        raise ValueError(f"mode {cfg.mode!r} needs order-{cfg.order} character counts")
    if not C_tri.table:
        raise ValueError("no character n-grams to train on")
    ct = prepare_triples(C_tri, cfg.N)
    pt = prepare_prior(prior, cfg.M, cfg.prune if cfg.mode == "pair" else None)
    C = _size(chars) if chars is not None else 1 + max(max(g) for g in C_tri.table)
    P = _size(syllables) if syllables is not None else max(prior.V, int(pt.grams.max()) + 1)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    args = [(ct, pt, cfg, C, P, comps, np.random.default_rng(s)) for s in seeds]
    if cfg.workers > 1 and cfg.restarts > 1:
        # each restart owns its generator, so results do not depend on scheduling
        with ProcessPoolExecutor(min(cfg.workers, cfg.restarts)) as ex:
            results = list(ex.map(_run_once, *zip(*args)))
    else:
        results = [_run_once(*a) for a in args]
    runs = []
    for r, res in enumerate(results):
        for msg in res.trace.warnings:
            log.warning("restart %d: %s", r, msg)
        runs.append(res.trace)
        log.info("restart %d final log-likelihood %.6f", r, res.trace.final)
    best = select_best_restart(runs)
    return EMResult(results[best].channel, runs[best], runs, best)


def hints_from_pairs(pairs: Iterable[tuple[str, str]], chars: SymbolTable,
                     syllables: SymbolTable) -> list[tuple[int, int]]:
    """Convert ``(char, syllable)`` strings to id pairs; unknown symbols raise."""
    out = []
    for c, p in pairs:
        if c not in chars or p not in syllables:
            raise ValueError(f"hint ({c}, {p}) refers to an unknown symbol")
        out.append((chars.id(c), syllables.id(p)))
    return out


def with_hints(cfg: EMConfig, hints) -> EMConfig:
    return replace(cfg, hints=tuple(hints))
