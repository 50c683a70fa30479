"""Tag codec: encode, decode, prefix validity, text round trips."""

import random

import pytest

from syntax_smc.tags import (MalformedSequence, TagSequence, Tetratag,
                             decode, encode, format_tags, is_valid_prefix,
                             parse_tags)
from syntax_smc.trees import leaves, parse_bracketed, pos_sequence

from helpers import GOLDEN_TAGS, GOLDEN_TREE, random_tree


def test_golden_encoding():
    tags = encode(parse_bracketed(GOLDEN_TREE))
    assert format_tags(tags) == GOLDEN_TAGS


def test_tag_count_is_2l_minus_1():
    rng = random.Random(3)
    for _ in range(50):
        tree = random_tree(rng, max_leaves=10)
        tags = encode(tree)
        assert len(tags) == 2 * len(leaves(tree)) - 1


def test_alternation():
    tags = encode(parse_bracketed(GOLDEN_TREE))
    for position, tag in enumerate(tags, start=1):
        if position % 2 == 1:
            assert tag.kind in ("l", "r")
        else:
            assert tag.kind in ("L", "R")


def test_golden_decode():
    tree = parse_bracketed(GOLDEN_TREE)
    rebuilt = decode(encode(tree), leaves(tree), pos_sequence(tree))
    assert rebuilt == tree


def test_random_round_trip():
    rng = random.Random(11)
    for _ in range(300):
        tree = random_tree(rng, max_leaves=15)
        rebuilt = decode(encode(tree), leaves(tree), pos_sequence(tree))
        assert rebuilt == tree


def test_decode_rejects_bad_lengths():
    tree = parse_bracketed(GOLDEN_TREE)
    tags = encode(tree)
    with pytest.raises(MalformedSequence):
        decode(tags, leaves(tree)[:-1], pos_sequence(tree)[:-1])
    with pytest.raises(MalformedSequence):
        decode(tags, leaves(tree), pos_sequence(tree)[:-1])


def test_decode_rejects_misplaced_tags():
    words = ["a", "b"]
    pos = ["X", "Y"]
    # r with no open slot
    bad = TagSequence((Tetratag("r"), Tetratag("L", "S"), Tetratag("l")), 2)
    with pytest.raises(MalformedSequence) as err:
        decode(bad, words, pos)
    assert err.value.position == 1
    # leaf tag in an internal slot
    bad = TagSequence((Tetratag("l"), Tetratag("L", "S"), Tetratag("l")), 2)
    with pytest.raises(MalformedSequence) as err:
        decode(bad, words, pos)
    assert err.value.position == 3
    # R before anything is open
    bad = TagSequence((Tetratag("l"), Tetratag("R", "S"), Tetratag("r")), 2)
    with pytest.raises(MalformedSequence):
        decode(bad, words, pos)


def test_parse_format_round_trip():
    tags = parse_tags(GOLDEN_TAGS)
    assert format_tags(tags) == GOLDEN_TAGS
    bare = parse_tags("l/NP L/S l R/VP l/ADVP R l R/NP r")
    assert format_tags(bare) == GOLDEN_TAGS


def test_parse_tags_rejects_even_count():
    with pytest.raises(MalformedSequence):
        parse_tags("l L/S")


def test_prefix_validity():
    tags = tuple(encode(parse_bracketed(GOLDEN_TREE)))
    for cut in range(len(tags) + 1):
        assert is_valid_prefix(tags[:cut], word_count=5)
    # A prefix that can never finish: r opens nothing.
    assert not is_valid_prefix((Tetratag("r"),), word_count=2)


def test_single_word_tree_codec():
    tree = parse_bracketed("(S (NN dog))")
    tags = encode(tree)
    assert len(tags) == 1
    assert format_tags(tags) == "['l/S']"
    assert decode(tags, ["dog"], ["NN"]) == tree
