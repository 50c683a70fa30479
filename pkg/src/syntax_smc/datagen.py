"""Synthetic data from a PCFG: corpora, tagged records, templates.

These helpers exist so experiments and tests can build everything
from one grammar: a word corpus to train the n-gram prior, tagged
sentences for the POS-bigram proposal and the feature tagger, tree
templates to condition generation on, and length-matched prior
baseline samples to compare against.
"""

from .engine import sample_categorical
from .grammar import GrammarError
from .lm import EOS, NextTokenDistribution
from .tags import encode
from .trees import leaves, pos_sequence, template_from_tree


def sample_trees(pcfg, count, rng, max_depth=40, max_attempts_factor=50):
    """``count`` full trees by ancestral sampling; runaway draws retried."""
    out = []
    attempts = 0
    budget = count * max_attempts_factor
    while len(out) < count:
        attempts += 1
        if attempts > budget:
            raise GrammarError("grammar keeps exceeding the depth limit")
        try:
            out.append(pcfg.sample_tree(rng, max_depth=max_depth))
        except GrammarError:
            continue
    return out


def corpus_from_trees(trees):
    """Plain word sentences, one tuple per tree."""
    return [tuple(leaves(tree)) for tree in trees]


def tagged_records(trees):
    """(words, pos_labels) pairs for POS-bigram training."""
    out = []
    for tree in trees:
        out.append((tuple(leaves(tree)), tuple(pos_sequence(tree))))
    return out


def tagger_corpus(trees):
    """(words, rendered_tags) pairs for feature-tagger training."""
    out = []
    for tree in trees:
        tags = [tag.render() for tag in encode(tree)]
        out.append((list(leaves(tree)), tags))
    return out


def sample_templates(pcfg, count, rng, min_words=4, max_words=8,
                     max_attempts_factor=200, distinct=True):
    """Templates drawn from the grammar with a bounded word count."""
    out = []
    seen = set()
    attempts = 0
    budget = count * max_attempts_factor
    while len(out) < count:
        attempts += 1
        if attempts > budget:
            raise GrammarError(
                "could not find %d templates with %d..%d words"
                % (count, min_words, max_words))
        try:
            tree = pcfg.sample_tree(rng)
        except GrammarError:
            continue
        size = len(leaves(tree))
        if not min_words <= size <= max_words:
            continue
        template = template_from_tree(tree)
        key = template.tree
        if distinct and key in seen:
            continue
        seen.add(key)
        out.append(template)
    return out


def prior_sample_words(lm, length, rng):
    """One length-``length`` draw from the LM with EOS renormalized away.

    This is the unconstrained baseline: no potential, no template,
    just the prior conditioned on producing exactly ``length`` words.
    """
    words = ()
    for _ in range(length):
        dist = lm.conditional(words)
        total = 1.0 - dist.prob(EOS)
        assert total > 0.0, "prior puts all mass on EOS; cannot extend"
        probs = {word: dist.prob(word) / total for word in lm.vocab}
        probs[EOS] = 0.0
        words = words + (sample_categorical(NextTokenDistribution(probs), rng),)
    return words
