"""Exact posterior over constrained strings, by exhaustive enumeration.

On small instances the posterior p(words) ∝ prior(words) * potential
can be computed directly: walk the prefix tree of all word sequences
up to the template length, take the prior mass times the potential at
each complete sequence, and normalize.  The same sweep yields the
expected future potential of every prefix, which doubles as the ideal
shaping function: used as both proposal and shaper, it pins every
particle's weight to the normalizing constant at every step.  The
samplers are tested against these tables.

Everything here works in plain float64 probability space with exact
summation (math.fsum); the instances are small enough that log-space
tricks would only add noise.
"""

import csv
import json
import math
from dataclasses import dataclass

from .lm import EOS, NEGINF, NextTokenDistribution, log
from .tags import encode
from .trees import serialize_bracketed

ENUMERATION_CAP = 10_000_000


class SupportTooLarge(Exception):
    """Raised when vocabulary ** length exceeds the enumeration budget."""


def _check_size(lm, template, cap):
    count = len(lm.vocab) ** template.word_count
    if count > cap:
        raise SupportTooLarge(
            "%d ** %d = %d sequences exceeds the enumeration cap of %d"
            % (len(lm.vocab), template.word_count, count, cap))


def _mass_tables(lm, potential, target, length):
    """Sweep the prefix tree once.

    Returns (complete, future): complete maps each full-length word
    tuple to prior * potential mass, future maps each prefix to the
    total mass of its completions.  Only strictly positive entries are
    stored, so absent keys read as zero.  Sequences longer than the
    template carry zero potential by contract and are never visited.
    """
    complete = {}
    future = {}

    def visit(prefix, path):
        dist = lm.conditional(prefix)
        if len(prefix) == length:
            tail = dist.prob(EOS) * potential.likelihood(prefix, target)
            if tail > 0.0:
                complete[prefix] = path * tail
                future[prefix] = tail
            return tail
        parts = []
        for word in lm.vocab:
            step = dist.prob(word)
            if step > 0.0:
                parts.append(step * visit(prefix + (word,), path * step))
        mass = math.fsum(parts)
        if mass > 0.0:
            future[prefix] = mass
        return mass

    visit((), 1.0)
    return complete, future


@dataclass(frozen=True)
class ExactPosterior:
    z: float
    log_z: float
    probs: dict          # full-length word tuple -> posterior probability
    template_text: str

    def prob(self, words):
        return self.probs.get(tuple(words), 0.0)


def enumerate_posterior(lm, potential, template, cap=ENUMERATION_CAP):
    """Brute-force normalized posterior and normalizing constant."""
    _check_size(lm, template, cap)
    target = encode(template.tree)
    complete, future = _mass_tables(lm, potential, target, template.word_count)
    z = future.get((), 0.0)
    probs = {words: mass / z for words, mass in sorted(complete.items())} if z > 0.0 else {}
    return ExactPosterior(
        z=z,
        log_z=log(z),
        probs=probs,
        template_text=serialize_bracketed(template.tree),
    )


class OptimalShaping:
    """Expected-future-potential table with proposal and shaper adapters.

    value(prefix) is the total prior-times-potential mass of all
    completions of the prefix; value of the empty prefix is the
    normalizing constant.
    """

    def __init__(self, lm, potential, template, cap=ENUMERATION_CAP):
        _check_size(lm, template, cap)
        self.lm = lm
        self.length = template.word_count
        target = encode(template.tree)
        complete, future = _mass_tables(lm, potential, target, self.length)
        self.z = future.get((), 0.0)
        assert self.z > 0.0, "potential rejects every sequence; nothing to shape"
        self._future = future
        self.proposal = PhiStarProposal(self)
        self.shaper = PhiStarShaper(self)

    def value(self, prefix):
        return self._future.get(tuple(prefix), 0.0)


def optimal_shaping(lm, potential, template, cap=ENUMERATION_CAP):
    return OptimalShaping(lm, potential, template, cap=cap)


class PhiStarProposal:
    """Next word proportional to prior times expected future potential.

    Drawing from this proposal while shaping with the matching table
    makes every importance weight equal the normalizing constant, so
    any spread across particles is a bug in the engine.
    """

    def __init__(self, shaping):
        self.shaping = shaping
        self._cache = {}

    def distribution(self, prefix, template):
        prefix = tuple(prefix)
        cached = self._cache.get(prefix)
        if cached is not None:
            return cached
        assert len(prefix) <= self.shaping.length
        if len(prefix) == self.shaping.length:
            probs = {word: 0.0 for word in self.shaping.lm.vocab}
            probs[EOS] = 1.0
        else:
            base = self.shaping.value(prefix)
            assert base > 0.0, "proposal queried at an unreachable prefix"
            dist = self.shaping.lm.conditional(prefix)
            probs = {
                word: dist.prob(word) * self.shaping.value(prefix + (word,)) / base
                for word in self.shaping.lm.vocab
            }
            probs[EOS] = 0.0
        out = NextTokenDistribution(probs)
        self._cache[prefix] = out
        return out


class PhiStarShaper:
    """Shaper reading the exact expected-future-potential table."""

    def __init__(self, shaping):
        self.shaping = shaping

    def log_initial(self):
        return log(self.shaping.z)

    def step_log_factors(self, prefix, word, target):
        return self.log_step_ratio(prefix, word, target), 0.0

    def log_step_ratio(self, prefix, word, target):
        before = self.shaping.value(prefix)
        after = self.shaping.value(tuple(prefix) + (word,))
        if before <= 0.0 or after <= 0.0:
            return NEGINF
        return log(after) - log(before)


def empirical_distribution(result):
    """Posterior estimate of a run as a dict over word tuples."""
    return {entry.words: entry.weight for entry in result.support}


def tvd(exact_probs, approx_probs):
    """Total variation distance between two dicts over word tuples."""
    keys = set(exact_probs) | set(approx_probs)
    return 0.5 * math.fsum(
        abs(exact_probs.get(k, 0.0) - approx_probs.get(k, 0.0)) for k in keys)


def write_comparison_csv(exact_probs, approx_probs, handle):
    """text, exact probability, estimated weight; exact-descending."""
    writer = csv.writer(handle)
    writer.writerow(("text", "exact_prob", "estimated_weight"))
    keys = set(exact_probs) | set(approx_probs)
    ranked = sorted(keys, key=lambda k: (-exact_probs.get(k, 0.0), k))
    for words in ranked:
        writer.writerow((" ".join(words),
                         exact_probs.get(words, 0.0),
                         approx_probs.get(words, 0.0)))


def write_posterior_json(exact, handle):
    payload = {
        "z": exact.z,
        "log_z": None if exact.log_z == NEGINF else exact.log_z,
        "template": exact.template_text,
        "support": [
            {"text": " ".join(words), "words": list(words), "prob": prob}
            for words, prob in sorted(
                exact.probs.items(), key=lambda kv: (-kv[1], kv[0]))
        ],
    }
    json.dump(payload, handle, indent=2)
    handle.write("\n")
