"""Potentials and shapers: grammar oracle and trained feature tagger."""

import math
import random

import pytest

from syntax_smc.grammar import parse_grammar
from syntax_smc.taggers import (FeatureTagger, NullShaper, UnitPotential,
                                grammar_oracle_tagger, load_tagged_corpus,
                                load_tagger, save_tagged_corpus, save_tagger,
                                shaping_prefix_score, target_from_tree,
                                train_feature_tagger)
from syntax_smc.tags import encode
from syntax_smc.trees import leaves, parse_bracketed

from helpers import TOY_GRAMMAR, toy_pcfg

TEMPLATE = "(S (NP (DT ?) (NN ?)) (VP (VBZ ?)))"


def _target():
    return encode(parse_bracketed(TEMPLATE))


def test_unit_and_null():
    target = _target()
    assert UnitPotential().likelihood(("x",), target) == 1.0
    shaper = NullShaper()
    assert shaper.log_initial() == 0.0
    assert shaper.step_log_factors((), "x", target) == (0.0, 0.0)


def test_grammar_potential_accepts_parseable_strings():
    potential, _ = grammar_oracle_tagger(toy_pcfg())
    target = _target()
    assert potential.likelihood(("the", "dog", "runs"), target) == 1.0
    assert potential.likelihood(("a", "bird", "sings"), target) == 1.0
    # Wrong length and unparseable strings carry no mass.
    assert potential.likelihood(("the", "dog"), target) == 0.0
    assert potential.likelihood(("dog", "the", "runs"), target) == 0.0
    assert potential.likelihood(("the", "the", "the"), target) == 0.0


def test_grammar_potential_is_a_parse_fraction():
    # Two parses of "x y" that differ in the unary chain above the split,
    # so their tag sequences differ; only one matches the target.  Labels
    # of bare preterminals are invisible to the tags, which is why the
    # ambiguity must live above the preterminal layer.
    ambiguous = parse_grammar(
        "S -> P 0.5\n"
        "S -> Q 0.5\n"
        "P -> A B 1.0\n"
        "Q -> A B 1.0\n"
        "A -> x 1.0\n"
        "B -> y 1.0\n")
    potential, _ = grammar_oracle_tagger(ambiguous)
    target = encode(parse_bracketed("(S (P (A ?) (B ?)))"))
    assert abs(potential.likelihood(("x", "y"), target) - 0.5) < 1e-12
    # A target neither parse realizes carries no mass at all.
    other = encode(parse_bracketed("(S (R (A ?) (B ?)))"))
    assert potential.likelihood(("x", "y"), other) == 0.0


def test_grammar_shaper_telescopes_to_potential():
    pcfg = toy_pcfg()
    potential, shaper = grammar_oracle_tagger(pcfg)
    target = _target()
    for words in (("the", "dog", "runs"), ("a", "cat", "sleeps")):
        stepped = 0.0
        for i in range(len(words)):
            odd, even = shaper.step_log_factors(words[:i], words[i], target)
            stepped += odd + even
        direct = potential.log_likelihood(words, target)
        assert abs(stepped - direct) < 1e-9
        assert abs(shaping_prefix_score(shaper, words, target)
                   - potential.likelihood(words, target)) < 1e-9


def test_grammar_shaper_final_even_slot_is_free():
    _, shaper = grammar_oracle_tagger(toy_pcfg())
    target = _target()
    odd, even = shaper.step_log_factors(("the", "dog"), "runs", target)
    assert even == 0.0


def test_grammar_shaper_dead_prefix():
    _, shaper = grammar_oracle_tagger(toy_pcfg())
    target = _target()
    odd, even = shaper.step_log_factors((), "runs", target)
    assert odd == float("-inf")


def test_target_from_tree_matches_encode():
    tree = parse_bracketed(TEMPLATE)
    assert list(target_from_tree(tree)) == list(encode(tree))


def _tagger_corpus():
    pcfg = toy_pcfg()
    rng = random.Random(5)
    records = []
    for _ in range(120):
        tree = pcfg.sample_tree(rng)
        records.append((leaves(tree), [t.render() for t in encode(tree)]))
    return records


def test_feature_tagger_training_and_likelihood():
    corpus = _tagger_corpus()
    tagger = train_feature_tagger(corpus, "full", epochs=30)
    assert isinstance(tagger, FeatureTagger)
    target = _target()
    good = tagger.likelihood(("the", "dog", "runs"), target)
    assert 0.0 < good <= 1.0
    # The trained model should prefer the true tags to shuffled words.
    bad = tagger.likelihood(("runs", "the", "dog"), target)
    assert good > bad
    assert tagger.likelihood(("the", "dog"), target) == 0.0


def test_feature_tagger_slot_distributions_normalize():
    tagger = train_feature_tagger(_tagger_corpus(), "full", epochs=10)
    words = ("the", "dog", "runs")
    odd, even = tagger.slot_distributions(words, 1, 3)
    assert abs(math.fsum(odd.values()) - 1.0) < 1e-9
    assert abs(math.fsum(even.values()) - 1.0) < 1e-9
    _, last_even = tagger.slot_distributions(words, 2, 3)
    assert list(last_even.values()) == [1.0]


def test_prefix_tagger_is_a_shaper():
    corpus = _tagger_corpus()
    shaper = train_feature_tagger(corpus, "prefix", epochs=10)
    target = _target()
    assert shaper.log_initial() == 0.0
    odd, even = shaper.step_log_factors(("the", "dog"), "runs", target)
    assert math.isfinite(odd) and odd <= 0.0
    assert even == 0.0  # final word: the padding slot is certain
    full = train_feature_tagger(corpus, "full", epochs=5)
    with pytest.raises(AssertionError):
        full.step_log_factors((), "the", target)
    with pytest.raises(AssertionError):
        shaper.likelihood(("the", "dog", "runs"), target)


def test_tagger_round_trip(tmp_path):
    tagger = train_feature_tagger(_tagger_corpus(), "full", epochs=5)
    path = tmp_path / "tagger.json"
    save_tagger(tagger, path)
    back = load_tagger(path)
    target = _target()
    words = ("the", "cat", "sings")
    assert abs(back.log_likelihood(words, target)
               - tagger.log_likelihood(words, target)) < 1e-12
    assert back.context == "full"


def test_tagged_corpus_round_trip(tmp_path):
    records = _tagger_corpus()[:10]
    path = tmp_path / "corpus.jsonl"
    save_tagged_corpus(records, path)
    back = load_tagged_corpus(path)
    assert back == [(list(w), list(t)) for w, t in records]
