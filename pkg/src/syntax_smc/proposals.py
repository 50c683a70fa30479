"""Proposal distributions over the next word.

Proposals are position-aware: asked for a prefix that already has all
L words of the template, they return EOS with probability one (the
word budget), so engines never special-case termination.  Before the
budget, the prior proposal simply returns the language model's own
conditional (importance ratio one), while the bigram mixture reweights
the LM's next-word probabilities by a part-of-speech bigram table
keyed to the template's POS sequence, normalized exactly over its
candidate set so weights can use the proposal's true probability.
"""

import json
import math

from .lm import EOS, NextTokenDistribution
from .trees import pos_sequence

END_POS = "END"


class EmptyCandidateSet(Exception):
    pass


class PriorProposal:
    """q = the language model itself; ratios cancel while words flow."""

    def __init__(self, lm):
        self.lm = lm

    def distribution(self, prefix, template):
        if template is not None and len(prefix) >= template.word_count:
            return _eos_point_mass(self.lm)
        return self.lm.conditional(prefix)


def _eos_point_mass(lm):
    probs = {w: 0.0 for w in lm.vocab}
    probs[EOS] = 1.0
    return NextTokenDistribution(probs)


class PosBigramModel:
    """MLE word distributions conditioned on (pos_n, pos_n+1) pairs.

    The pair for the last word of a sentence uses END as its right
    context.  ``backoff`` conditions on pos_n alone and is used when a
    pair was never observed.  ``floor`` is the mass spread over the
    LM's top words by the mixture proposal.
    """

    def __init__(self, pairs, backoff, floor=1e-6):
        self.pairs = {k: dict(v) for k, v in pairs.items()}
        self.backoff = {k: dict(v) for k, v in backoff.items()}
        self.floor = float(floor)

    def row(self, pos, next_pos):
        key = pos + "|" + next_pos
        if key in self.pairs:
            return self.pairs[key]
        return self.backoff.get(pos, {})


def train_pos_bigram(records, floor=1e-6):
    """``records`` is a list of (words, pos_labels) sentence pairs."""
    pair_counts, back_counts = {}, {}
    for words, pos in records:
        assert len(words) == len(pos)
        for i, word in enumerate(words):
            next_pos = pos[i + 1] if i + 1 < len(pos) else END_POS
            key = pos[i] + "|" + next_pos
            pair_counts.setdefault(key, {})
            pair_counts[key][word] = pair_counts[key].get(word, 0) + 1
            back_counts.setdefault(pos[i], {})
            back_counts[pos[i]][word] = back_counts[pos[i]].get(word, 0) + 1
    if not pair_counts:
        raise EmptyCandidateSet("no tagged sentences to train on")

    def normalize(counts):
        return {
            key: {w: c / total for w, c in row.items()}
            for key, row in counts.items()
            for total in [sum(row.values())]
        }

    return PosBigramModel(normalize(pair_counts), normalize(back_counts), floor)


class BigramMixtureProposal:
    """q(w | prefix) proportional to p_lm(w | prefix) * p_bigram(w | pos pair).

    Candidates are the bigram row's words; on top of that, the floor
    mass is spread evenly over the LM's top-K next words so that
    high-prior words outside the table keep a path.  Words the LM has
    never seen are dropped (their prior, and hence their posterior
    mass, is zero).  The result is normalized over this candidate set,
    and ``distribution`` exposes those exact probabilities.
    """

    def __init__(self, lm, bigram, top_k=50):
        self.lm = lm
        self.bigram = bigram
        self.top_k = top_k
        self._cache = {}

    def distribution(self, prefix, template):
        if len(prefix) >= template.word_count:
            return _eos_point_mass(self.lm)
        pos = pos_sequence(template.tree)
        n = len(prefix)
        next_pos = pos[n + 1] if n + 1 < len(pos) else END_POS
        key = (self.lm.history_key(prefix), pos[n], next_pos)
        if key in self._cache:
            return self._cache[key]
        conditional = self.lm.conditional(prefix)
        row = self.bigram.row(pos[n], next_pos)
        scores = {}
        for word, bigram_prob in sorted(row.items()):
            if word in self.lm.vocab:
                scores[word] = conditional.prob(word) * bigram_prob
        if self.bigram.floor > 0.0 and self.top_k > 0:
            ranked = sorted(
                ((w, p) for w, p in conditional.items() if w != EOS and p > 0.0),
                key=lambda item: (-item[1], item[0]),
            )
            share = self.bigram.floor / self.top_k
            for word, _ in ranked[: self.top_k]:
                scores[word] = scores.get(word, 0.0) + share
        total = math.fsum(scores.values())
        if total <= 0.0:
            raise EmptyCandidateSet(
                "no candidate after POS pair %s|%s" % (pos[n], next_pos)
            )
        probs = {w: 0.0 for w in self.lm.vocab}
        for word, score in scores.items():
            probs[word] = score / total
        probs[EOS] = 0.0
        dist = NextTokenDistribution(probs)
        self._cache[key] = dist
        return dist


def save_pos_bigram(model, path):
    payload = {
        "format": "pos-bigram-v1",
        "pairs": model.pairs,
        "backoff": model.backoff,
        "floor": model.floor,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=1, sort_keys=True)
        handle.write("\n")


def load_pos_bigram(path):
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("format") != "pos-bigram-v1":
        raise ValueError("unknown bigram format %r" % payload.get("format"))
    return PosBigramModel(payload["pairs"], payload["backoff"], payload["floor"])
