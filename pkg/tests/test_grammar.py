"""PCFG parsing, inside probabilities, derivation enumeration."""

import math
import random

import numpy as np
import pytest

from syntax_smc.grammar import (GrammarError, TooAmbiguous, load_grammar,
                                parse_grammar, save_grammar)
from syntax_smc.trees import leaves, parse_bracketed, serialize_bracketed

from helpers import TOY_GRAMMAR, toy_pcfg

AMBIGUOUS = """\
S -> A B 0.7
S -> C D 0.3
A -> x 1.0
B -> y 1.0
C -> x 1.0
D -> y 1.0
"""


def test_parse_grammar_basics():
    pcfg = toy_pcfg()
    assert pcfg.start == "S"
    assert set(pcfg.preterminals) == {"DT", "NN", "VBZ"}
    assert set(pcfg.words) == {"the", "a", "dog", "cat", "bird",
                               "runs", "sleeps", "sings"}
    assert pcfg.word_mass("DT", "the") == 0.6
    assert pcfg.word_mass("DT", "zebra") == 0.0


def test_parse_grammar_rejects_malformed():
    with pytest.raises(GrammarError):
        parse_grammar("")
    with pytest.raises(GrammarError):
        parse_grammar("S NP VP 1.0\n")
    with pytest.raises(GrammarError):
        parse_grammar("S -> NP VP PP 1.0\n")
    with pytest.raises(GrammarError):
        parse_grammar("S -> NP VP x\n")
    with pytest.raises(GrammarError):
        # probabilities for S sum to 1.5
        parse_grammar("S -> a 1.0\nS -> b 0.5\n")
    with pytest.raises(GrammarError):
        # terminal inside a binary rule
        parse_grammar("S -> A dog 1.0\nA -> a 1.0\n")
    with pytest.raises(GrammarError):
        # unary cycle
        parse_grammar("A -> B 0.5\nA -> x 0.5\nB -> A 1.0\n")


def test_inside_by_hand():
    pcfg = toy_pcfg()
    # 1.0 * 1.0 * P(the) * P(dog) * 1.0 * P(runs)
    want = 0.6 * 0.4 * 0.4
    assert abs(pcfg.inside(("the", "dog", "runs")) - want) < 1e-12
    assert pcfg.inside(("dog", "the", "runs")) == 0.0
    assert pcfg.inside(("the", "dog")) == 0.0
    assert pcfg.inside(()) == 0.0


def test_inside_sums_over_parses():
    pcfg = parse_grammar(AMBIGUOUS)
    assert abs(pcfg.inside(("x", "y")) - 1.0) < 1e-12


def test_three_word_yields_cover_unit_mass():
    pcfg = toy_pcfg()
    dset = pcfg.derivations(3)
    masses = dset.yield_masses((), known=0)
    assert abs(float(masses.sum()) - 1.0) < 1e-12


def test_derivation_enumeration_counts():
    assert len(toy_pcfg().derivations(3)) == 1
    assert len(parse_grammar(AMBIGUOUS).derivations(2)) == 2
    with pytest.raises(TooAmbiguous):
        toy_pcfg().derivations(3, max_derivations=0)


def test_yield_masses_match_inside():
    pcfg = toy_pcfg()
    dset = pcfg.derivations(3)
    for words in (("the", "dog", "runs"), ("a", "bird", "sings"),
                  ("the", "the", "the")):
        masses = dset.yield_masses(words)
        assert abs(float(masses.sum()) - pcfg.inside(words)) < 1e-12
    assert dset.yield_masses(("the", "dog", "zebra")) is None


def test_yield_masses_wildcards():
    pcfg = toy_pcfg()
    dset = pcfg.derivations(3)
    partial = dset.yield_masses(("the",), known=1)
    # P(the ? ?) summed over the lexicon
    assert abs(float(partial.sum()) - 0.6) < 1e-12


def test_viterbi_parse():
    pcfg = toy_pcfg()
    tree = pcfg.viterbi_parse(("the", "dog", "runs"))
    assert serialize_bracketed(tree) == \
        "(S (NP (DT the) (NN dog)) (VP (VBZ runs)))"
    assert pcfg.viterbi_parse(("dog", "the", "runs")) is None
    assert pcfg.viterbi_parse(("the", "dog", "zebra")) is None


def test_viterbi_prefers_heavier_parse():
    pcfg = parse_grammar(AMBIGUOUS)
    tree = pcfg.viterbi_parse(("x", "y"))
    assert tree.children[0].label == "A"


def test_sample_tree_is_seeded_and_parseable():
    pcfg = toy_pcfg()
    first = pcfg.sample_tree(random.Random(4))
    again = pcfg.sample_tree(random.Random(4))
    assert first == again
    for seed in range(10):
        tree = pcfg.sample_tree(random.Random(seed))
        words = tuple(leaves(tree))
        assert pcfg.inside(words) > 0.0


def test_prefix_masks_are_monotone():
    pcfg = toy_pcfg()
    from syntax_smc.tags import encode

    target = encode(parse_bracketed("(S (NP (DT ?) (NN ?)) (VP (VBZ ?)))"))
    masks = pcfg.derivations(3).prefix_masks(list(target))
    assert len(masks) == 2 * 3 - 1 + 1
    for earlier, later in zip(masks, masks[1:]):
        assert not np.any(later & ~earlier)


def test_grammar_round_trip(tmp_path):
    pcfg = toy_pcfg()
    path = tmp_path / "toy.grammar"
    save_grammar(pcfg, path)
    back = load_grammar(path)
    assert back.rules == pcfg.rules
    assert back.start == pcfg.start


def test_unary_rule_support():
    pcfg = parse_grammar(
        "TOP -> S 1.0\n"
        "S -> A B 1.0\n"
        "A -> x 1.0\n"
        "B -> y 1.0\n")
    assert abs(pcfg.inside(("x", "y")) - 1.0) < 1e-12
    tree = pcfg.viterbi_parse(("x", "y"))
    assert serialize_bracketed(tree) == "(TOP (S (A x) (B y)))"
