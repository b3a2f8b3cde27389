"""
Reading characters without a teacher
====================================

A synthetic writing system: 50 spoken syllables written with 200
characters, a few of them read two ways.  We only get a pile of
character text and an unrelated pile of syllable text, and ask EM to
work out which syllables the characters stand for.
"""

import time
from collections import Counter

import numpy as np

from hanzipron.channel import EMConfig, em_train
from hanzipron.decoder import DecodeConfig, Decoder
from hanzipron.evaluation import evaluate, majority_baseline
from hanzipron.lm import Smoothing, train_lm
from hanzipron.symbols import SymbolTable, TokenStream, count_ngrams
from hanzipron.synth import SynthConfig, gen_cipher_corpus

sc = gen_cipher_corpus(SynthConfig(char_tokens=100_000, syllable_tokens=100_000, seed=0))
print(sc.char_lines[0])
print(" ".join(sc.syllable_lines[0]))

# Intern both vocabularies; the syllable table is filled in inventory order.
ct, st = SymbolTable(), SymbolTable()
for s in sc.syllables:
    st.intern(s)
chars = TokenStream.from_segments("character", [[ct.intern(c) for c in l] for l in sc.char_lines])
sylls = TokenStream.from_segments("syllable", [[st.id(s) for s in l] for l in sc.syllable_lines])

# EM only ever sees trigram counts from each side.
c_tri = count_ngrams(chars, 3)
prior = train_lm(count_ngrams(sylls, 3))
print(f"{len(c_tri)} character trigram types, {len(prior.joint)} syllable trigram types")

t0 = time.perf_counter()
res = em_train(c_tri, prior, EMConfig(N=5000, M=5000, iterations=30, restarts=3, seed=0),
               chars=ct, syllables=st)
print(f"EM took {time.perf_counter() - t0:.1f}s")
for i, run in enumerate(res.runs):
    mark = "  <- kept" if i == res.best else ""
    print(f"restart {i}: log-likelihood {run.values[0]:.0f} -> {run.final:.0f}{mark}")

# The learned channel for the commonest syllable: which characters spell it?
top = Counter(s for l in sc.syllable_lines for s in l).most_common(1)[0][0]
row = res.channel.matrix()[st.id(top)]
best = np.argsort(-row)[:4]
print(top, [(ct.lookup(int(c)), round(float(row[c]), 3)) for c in best])
print("gold", sorted(sc.gold.channel[top].items(), key=lambda kv: -kv[1])[:4])

# Decode the held-out text with a smoothed bigram model and cubed channel scores.
lm2 = train_lm(count_ngrams(sylls, 2, pad_start=True), Smoothing.additive(0.1), V=len(st))
dec = Decoder(lm2, res.channel, DecodeConfig(exponent=3))
hyp = []
for line in sc.test_lines:
    path, _ = dec.viterbi([ct.get(c, -1) for c in line])
    hyp += [st.lookup(int(p)) for p in path]
rep = evaluate(hyp, sc.test_ref(), sc.test_chars())
# synthetic syllables carry no tone, so only the toneless scores mean anything
print(f"accuracy: no tone {rep.notone:.3f}  partial {rep.partial:.3f}")

base = majority_baseline(sc.test_ref(), [s for l in sc.syllable_lines for s in l])
print(f"guessing the commonest syllable everywhere: {base.notone:.3f}")
print("most frequent errors:", rep.errors.most_common(5))
