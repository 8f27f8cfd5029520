#!/usr/bin/env python3
"""Reference BLEU / ROUGE values for the lexical metric tests.

Scores randomized candidate/reference pairs with NLTK's sentence_bleu and
Google's rouge_score package, then writes them to
tests/fixtures/metric_oracle.json. Rerun with:

    pip install nltk rouge_score
    python3 oracle/metric_oracle.py
"""

import json
import random
import re
from fractions import Fraction
from pathlib import Path

from nltk.translate.bleu_score import sentence_bleu
from rouge_score import rouge_scorer

SEED = 20240611
PAIRS = 64

VOCAB = (
    "the red palm weevil larvae feed inside trunk of date palms adult beetles "
    "lay eggs in wounds emerald ash borer kills trees quickly traps monitor "
    "population spread quarantine limits movement firewood 2 5 cm 10"
).split()
PUNCT = [" ", " ", " ", ", ", ". ", "; ", " - ", "! ", "? "]


def tokens(text):
    return re.findall(r"[a-z0-9]+", text.lower())


def add_one_on_zero(p_n, *args, **kwargs):
    # Zero-match orders become 1 / (candidate n-gram count + 1).
    return [
        p if p.numerator != 0 else Fraction(1, p.denominator + 1)
        for p in p_n
    ]


def random_text(rng, words):
    out = []
    for i, w in enumerate(words):
        if rng.random() < 0.15:
            w = w.upper() if rng.random() < 0.5 else w.capitalize()
        out.append(w)
        if i + 1 < len(words):
            out.append(rng.choice(PUNCT))
    if rng.random() < 0.5:
        out.append(rng.choice([".", "!", "?"]))
    return "".join(out)


def make_pair(rng):
    ref_len = rng.randint(4, 18)
    ref_words = [rng.choice(VOCAB) for _ in range(ref_len)]
    # Candidate is a noisy edit of the reference so every n-gram order shows up.
    cand_words = []
    for w in ref_words:
        r = rng.random()
        if r < 0.15:
            continue
        if r < 0.35:
            cand_words.append(rng.choice(VOCAB))
        else:
            cand_words.append(w)
        if rng.random() < 0.1:
            cand_words.append(rng.choice(VOCAB))
    if rng.random() < 0.2:
        # Short candidates exercise the reduced effective BLEU order.
        cand_words = [rng.choice(VOCAB) for _ in range(rng.randint(1, 3))]
    while not cand_words:
        cand_words.append(rng.choice(ref_words))
    return random_text(rng, cand_words), random_text(rng, ref_words)


def main():
    rng = random.Random(SEED)
    scorer = rouge_scorer.RougeScorer(["rouge1", "rouge2", "rougeL"])
    rows = []
    while len(rows) < PAIRS:
        cand, ref = make_pair(rng)
        ct, rt = tokens(cand), tokens(ref)
        # Identical token sequences are covered by the self-identity tests.
        if not ct or not rt or ct == rt:
            continue
        # auto_reweigh limits the geometric mean to min(4, len(candidate))
        # orders; no unigram match scores 0.
        bleu = sentence_bleu([rt], ct, smoothing_function=add_one_on_zero,
                             auto_reweigh=True)
        rs = scorer.score(ref, cand)
        rows.append({
            "candidate": cand,
            "reference": ref,
            "bleu": bleu,
            "rouge1": rs["rouge1"].fmeasure,
            "rouge2": rs["rouge2"].fmeasure,
            "rougeL": rs["rougeL"].fmeasure,
        })
    out = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "metric_oracle.json"
    doc = {
        "generator": "nltk.sentence_bleu + rouge_score.RougeScorer",
        "seed": SEED,
        "pairs": rows,
    }
    out.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {len(rows)} pairs to {out}")


if __name__ == "__main__":
    main()
