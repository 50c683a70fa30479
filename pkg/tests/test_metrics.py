"""Evaluation metrics: brackets, F1, matches, diversity, reports."""

import io
import itertools
import math
import random

import pytest

from syntax_smc.lm import NEGINF
from syntax_smc.metrics import (EmptyList, EvalReport, bracket_f1, brackets,
                                diversity, evaluate_run, log_potential_median,
                                match_metrics, score_outputs, summarize,
                                write_eval_csv)
from syntax_smc.taggers import grammar_oracle_tagger
from syntax_smc.trees import leaves, parse_bracketed, template_from_tree

from helpers import GOLDEN_TREE, random_tree, toy_lm, toy_pcfg


def test_brackets_golden():
    found = brackets(parse_bracketed(GOLDEN_TREE))
    assert found == {
        ("S", 0, 5): 1,
        ("NP", 0, 1): 1,
        ("VP", 1, 5): 1,
        ("ADVP", 2, 3): 1,
        ("NP", 3, 5): 1,
    }


def test_brackets_exclude_preterminals_count_duplicates():
    tree = parse_bracketed("(S (NP (NN a)) (NP (NN b)))")
    found = brackets(tree)
    assert found[("NP", 0, 1)] == 1 and found[("NP", 1, 2)] == 1
    assert ("NN", 0, 1) not in found
    stacked = parse_bracketed("(S (S (NN a) (NN b)))")
    assert brackets(stacked)[("S", 0, 2)] == 2


def test_f1_identity_and_disjoint():
    tree = parse_bracketed(GOLDEN_TREE)
    assert bracket_f1(tree, tree) == 100.0
    other = parse_bracketed("(X (Y (NN There) (NN is)) (Z (NN always) "
                            "(NN a) (NN chance)))")
    assert bracket_f1(other, tree) == 0.0


def test_f1_partial_overlap_by_hand():
    gold = parse_bracketed("(S (NP (DT the) (NN dog)) (VP (VBZ runs)))")
    pred = parse_bracketed("(S (NP (DT the)) (VP (NN dog) (VBZ runs)))")
    # Matching: S(0,3). Pred also has NP(0,1), VP(1,3); gold NP(0,2), VP(2,3).
    # P = 1/3, R = 1/3.
    assert abs(bracket_f1(pred, gold) - 100.0 / 3.0) < 1e-9


def test_f1_bare_preterminal_edge():
    one = parse_bracketed("(NN dog)")
    other = parse_bracketed("(VB runs)")
    assert bracket_f1(one, other) == 100.0
    two = parse_bracketed("(S (NN a) (NN b))")
    assert bracket_f1(one, two) == 0.0


def test_f1_matches_brute_force_on_random_pairs():
    rng = random.Random(13)
    for _ in range(80):
        a = random_tree(rng, max_leaves=8)
        b = random_tree(rng, max_leaves=8)
        fast = bracket_f1(a, b)
        pa, pb = brackets(a), brackets(b)
        if not pa and not pb:
            continue
        matched = sum(min(pa[k], pb[k]) for k in set(pa) & set(pb))
        if matched == 0:
            assert fast == 0.0
            continue
        p = matched / sum(pa.values())
        r = matched / sum(pb.values())
        assert abs(fast - 200.0 * p * r / (p + r)) < 1e-9


def test_match_metrics():
    gold = parse_bracketed("(S (NP (DT ?) (NN ?)) (VP (VBZ ?)))")
    same = parse_bracketed("(S (NP (DT the) (NN dog)) (VP (VBZ runs)))")
    relabeled = parse_bracketed("(S (XP (DT the) (NN dog)) (VP (VBZ runs)))")
    reshaped = parse_bracketed("(S (NP (DT the)) (VP (NN dog) (VBZ runs)))")
    short = parse_bracketed("(S (NP (DT the) (NN dog)))")
    assert match_metrics(same, gold) == {
        "exact": True, "structure": True, "correct_length": True}
    assert match_metrics(relabeled, gold) == {
        "exact": False, "structure": True, "correct_length": True}
    assert match_metrics(reshaped, gold) == {
        "exact": False, "structure": False, "correct_length": True}
    assert match_metrics(short, gold) == {
        "exact": False, "structure": False, "correct_length": False}


def test_log_potential_median_is_lower_median():
    values = [math.log(0.1), math.log(0.4), math.log(0.2), math.log(0.3)]
    assert abs(log_potential_median(values) - math.log(0.2)) < 1e-12
    assert abs(log_potential_median([math.log(0.5)]) - math.log(0.5)) < 1e-12
    assert log_potential_median([NEGINF, NEGINF, 0.0]) == NEGINF
    with pytest.raises(EmptyList):
        log_potential_median([])


def test_diversity_token_convention():
    assert abs(diversity([("a", "b", "c")], 2) - 2.0 / 3.0) < 1e-12
    assert diversity([("a", "a"), ("a", "a")], 1) == 0.25
    assert diversity([("a",)], 2) == 0.0
    with pytest.raises(EmptyList):
        diversity([], 1)


def test_score_and_summarize():
    pcfg = toy_pcfg()
    potential, _ = grammar_oracle_tagger(pcfg)
    lm = toy_lm()
    template = template_from_tree(
        parse_bracketed("(S (NP (DT ?) (NN ?)) (VP (VBZ ?)))"))
    outputs = ["the dog runs", "a cat sleeps", "dog the runs", "the dog"]
    scores = score_outputs(outputs, template, potential, lm,
                           pcfg.viterbi_parse)
    assert [s.correct_length for s in scores] == [True, True, True, False]
    assert [s.exact for s in scores] == [True, True, False, False]
    assert scores[2].f1 == 0.0
    assert scores[2].log_potential == NEGINF
    assert all(s.log_prior is not None for s in scores)

    report = summarize(scores)
    assert report.count == 4
    assert report.correct_length == 75.0
    assert report.exact_match == 50.0
    assert report.structure_match == 50.0
    assert abs(report.f1 - (100.0 + 100.0 + 0.0 + 0.0) / 4.0) < 1e-12
    # Exponentiated potentials: 1, 1, 0, 0; lower median is 0.
    assert report.log_potential == NEGINF
    assert report.to_dict()["log_potential"] is None


def test_stored_log_priors_used_when_no_lm():
    pcfg = toy_pcfg()
    potential, _ = grammar_oracle_tagger(pcfg)
    template = template_from_tree(
        parse_bracketed("(S (NP (DT ?) (NN ?)) (VP (VBZ ?)))"))
    stored = {"the dog runs": -1.5}
    scores = score_outputs(["the dog runs", "a cat sleeps"], template,
                           potential, None, pcfg.viterbi_parse,
                           log_priors=stored)
    assert scores[0].log_prior == -1.5
    assert scores[1].log_prior is None
    report = summarize(scores)
    assert report.log_prior == -1.5


def test_evaluate_run_requires_outputs():
    pcfg = toy_pcfg()
    potential, _ = grammar_oracle_tagger(pcfg)
    template = template_from_tree(parse_bracketed("(S (NN ?))"))
    with pytest.raises(EmptyList):
        evaluate_run([], template, potential, None, pcfg.viterbi_parse)


def test_eval_csv_rows():
    report = EvalReport(count=2, correct_length=100.0, exact_match=50.0,
                        structure_match=50.0, f1=75.0, log_potential=-0.1,
                        log_prior=None, diversity_1=0.5, diversity_2=0.75,
                        diversity_3=1.0)
    buffer = io.StringIO()
    write_eval_csv([("runA", report)], buffer)
    lines = buffer.getvalue().strip().splitlines()
    assert lines[0].startswith("name,count,correct_length")
    cells = lines[1].split(",")
    assert cells[0] == "runA"
    assert cells[1] == "2"
    assert cells[7] == ""  # absent log prior stays blank
