"""
Letting two weak readers vote
=============================

EM and the vector method make different mistakes.  Where their readings
of a character agree, the reading is nearly always right; those pairs
go back into both methods as hints.
"""

from hanzipron.channel import EMConfig
from hanzipron.combine import CombineConfig, Corpora, run_combined
from hanzipron.embed import EmbedConfig
from hanzipron.evaluation import evaluate
from hanzipron.vecmap import MapConfig
from hanzipron.synth import SynthConfig, gen_cipher_corpus

seed = 0
sc = gen_cipher_corpus(SynthConfig(lm="words", concentration=0.3, char_tokens=100_000,
                                   syllable_tokens=100_000, seed=seed))
corpora = Corpora(sc.char_lines, sc.syllable_lines, sc.char_word_lines,
                  sc.syllable_word_lines, sc.test_word_lines)
cfg = CombineConfig(em=EMConfig(N=5000, M=5000, iterations=20, restarts=2, seed=seed),
                    embed=EmbedConfig(dim=40, window=2, min_count=3, seed=seed),
                    mapping=MapConfig(seed=seed))
res = run_combined(corpora, cfg)

gold = sc.gold.majority()
em_votes, vec_votes = res.votes
for name, votes in (("EM", em_votes), ("vectors", vec_votes)):
    right = sum(gold[c] == p for c, p in votes.items())
    print(f"{name:8s} votes right for {right}/{len(votes)} characters")
print(res.report)
print(f"agreed pairs right: {res.pairs.precision(gold):.3f}")

ref = sc.test_ref()
print(f"EM alone        {evaluate(res.em_test, ref).notone:.3f}")
print(f"vectors alone   {evaluate(res.vector_test, ref).notone:.3f}")
print(f"with agreements {evaluate(res.final, ref).notone:.3f}  ({res.source})")
