"""Slow, loop-based reference implementations used only by the tests."""

import itertools
import math


def brute_force_estep(theta, char_grams, char_counts, pin_grams, pin_probs):
    """Literal triple-by-triple E-step over Python lists.

    ``theta[p][c]`` is Pr(c | p).  Returns ``(posteriors, loglik, counts)``
    where ``counts[(c, p)]`` are the fractional counts.
    """
    posts = []
    loglik = 0.0
    counts = {}
    for cg, w in zip(char_grams, char_counts):
        scores = []
        for pg, pr in zip(pin_grams, pin_probs):
            s = pr
            for c, p in zip(cg, pg):
                s *= theta[p][c]
            scores.append(s)
        total = math.fsum(scores)
        if total == 0:
            posts.append([0.0] * len(scores))
            loglik = -math.inf
            continue
        loglik += w * math.log(total)
        post = [s / total for s in scores]
        posts.append(post)
        for pg, q in zip(pin_grams, post):
            for c, p in zip(cg, pg):
                counts[(c, p)] = counts.get((c, p), 0.0) + q * w
    return posts, loglik, counts


def brute_force_mstep(counts, theta):
    P = len(theta)
    new = [row[:] for row in theta]
    for p in range(P):
        tot = math.fsum(v for (c, q), v in counts.items() if q == p)
        if tot > 0:
            new[p] = [counts.get((c, p), 0.0) / tot for c in range(len(theta[p]))]
    return new


def exhaustive_argmax(chars, start_lp, trans_lp, chan_lp, k):
    """Enumerate every syllable sequence; return (best_seq, best_score)."""
    P = len(start_lp)
    best, best_seq = -math.inf, None
    for seq in itertools.product(range(P), repeat=len(chars)):
        s = start_lp[seq[0]] + k * chan_lp[seq[0]][chars[0]]
        for i in range(1, len(seq)):
            s += trans_lp[seq[i - 1]][seq[i]] + k * chan_lp[seq[i]][chars[i]]
        if s > best:
            best, best_seq = s, seq
    return list(best_seq), best
