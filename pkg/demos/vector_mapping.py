"""
Pronouncing words by aligning two vector spaces
===============================================

Words written in characters and words spoken as syllables are used in
similar contexts.  We train skip-gram vectors on each side, rotate one
space onto the other without any seed dictionary, and read off each
written word's closest spoken word of the right length.
"""

import numpy as np

from hanzipron.embed import EmbedConfig, train_embeddings
from hanzipron.evaluation import evaluate
from hanzipron.vecmap import (MapConfig, map_words, precision_at_1, project_to_characters,
                              self_learn_map)
from hanzipron.synth import SynthConfig, gen_cipher_corpus

# First a sanity check on made-up data: a rotated, shuffled copy of a point cloud.
rng = np.random.default_rng(0)
X = rng.normal(size=(500, 20))
Q, _ = np.linalg.qr(rng.normal(size=(20, 20)))
perm = rng.permutation(500)
Y = (X @ Q + 0.01 * rng.normal(size=X.shape))[perm]
m = self_learn_map(X, Y)
gold = {int(perm[j]): j for j in range(500)}
print(f"rotation: precision@1 {precision_at_1(X, Y, m.W, gold):.3f}, "
      f"|W'W - I| {m.orthogonality_error():.1e}")

# Now word-segmented synthetic text.
sc = gen_cipher_corpus(SynthConfig(lm="words", concentration=0.3, seed=1))
print(" ".join(sc.char_word_lines[0][:8]))
print(" ".join(sc.syllable_word_lines[0][:8]))

cfg = EmbedConfig(dim=100, window=2, min_count=3, epochs=10, seed=1)
written = train_embeddings(sc.char_word_lines, cfg)
spoken = train_embeddings(sc.syllable_word_lines, cfg)
print(f"{len(written)} written and {len(spoken)} spoken word types")
print("loss per epoch", np.round(written.loss_history, 3))

mapping = self_learn_map(written, spoken, MapConfig(seed=1))
print("fixpoint reached:", mapping.converged)
table = map_words(written, spoken, mapping)
for w in written.words[:8]:
    print(w, "->", " ".join(table[w]))

hyp = [s for line in project_to_characters(table, sc.test_word_lines) for s in line]
rep = evaluate(hyp, sc.test_ref())
print(f"test accuracy without tone: {rep.notone:.3f}")
# The alignment is all-or-nothing: a different seed or corpus can land in a
# bad fixpoint and score far lower.
