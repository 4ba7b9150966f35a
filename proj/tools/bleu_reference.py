#!/usr/bin/env python3
"""Reference corpus BLEU-4, used once to freeze test expectations.

Independent of the C++ implementation: pooled clipped n-gram counts over
whitespace tokens, geometric mean of four precisions, exponential brevity
penalty when the hypothesis side is shorter than the references.

Usage: bleu_reference.py hyps.txt refs.txt   (one sentence per line)
"""
import math
import sys
from collections import Counter


def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hyps, refs):
    if len(hyps) != len(refs):
        raise SystemExit("line count mismatch")
    matches = [0] * 4
    totals = [0] * 4
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hyps, refs):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, 5):
            h = ngrams(hyp, n)
            r = ngrams(ref, n)
            totals[n - 1] += sum(h.values())
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
    if hyp_len == 0:
        return 0.0
    precisions = [m / t if t else 0.0 for m, t in zip(matches, totals)]
    if any(p == 0.0 for p in precisions):
        return 0.0
    log_mean = sum(math.log(p) for p in precisions) / 4.0
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_mean)


def main():
    with open(sys.argv[1]) as f:
        hyps = [line.split() for line in f]
    with open(sys.argv[2]) as f:
        refs = [line.split() for line in f]
    print(f"{corpus_bleu(hyps, refs):.10f}")


if __name__ == "__main__":
    main()
