"""Evaluation metrics for generated sentences against a tree template.

Covers the usual parsing-flavoured measures: labeled bracketing F1,
exact and structure-only tree match, word-count accuracy, a median
summary of the reference potential, mean log prior, and distinct
n-gram diversity.  Brackets follow the evalb convention: every
non-preterminal internal node counts, including the root; preterminals
do not.
"""

import csv
import math
from collections import Counter
from dataclasses import dataclass

from .lm import NEGINF, log
from .tags import encode
from .trees import Internal, Leaf, TEMPLATE_WORD, is_preterminal, leaves


class EmptyList(Exception):
    pass


def brackets(tree):
    """Multiset of (label, start, end) spans, half-open word indices."""
    found = Counter()

    def walk(node, start):
        if isinstance(node, Leaf):
            return start + 1
        end = start
        for child in node.children:
            end = walk(child, end)
        if not is_preterminal(node):
            found[(node.label, start, end)] += 1
        return end

    walk(tree, 0)
    return found


def bracket_f1(predicted, target):
    """Labeled bracketing F1 on a 0..100 scale.

    Trees with no brackets at all (bare preterminals) score 100 when
    their yields have the same length, 0 otherwise.
    """
    pred = brackets(predicted)
    gold = brackets(target)
    if not pred and not gold:
        same = len(leaves(predicted)) == len(leaves(target))
        return 100.0 if same else 0.0
    matched = sum((pred & gold).values())
    if matched == 0:
        return 0.0
    precision = matched / sum(pred.values())
    recall = matched / sum(gold.values())
    return 200.0 * precision * recall / (precision + recall)


def _shape(node):
    if isinstance(node, Leaf):
        return None
    return tuple(_shape(child) for child in node.children)


def _masked(node):
    """Copy with every leaf word replaced by the template placeholder."""
    if isinstance(node, Leaf):
        return Leaf(TEMPLATE_WORD)
    return Internal(node.label, tuple(_masked(child) for child in node.children))


def match_metrics(predicted, target):
    """exact (labels and shape), structure (shape only), correct_length.

    Words are ignored throughout; the target's leaves are placeholders.
    """
    return {
        "exact": _masked(predicted) == _masked(target),
        "structure": _shape(predicted) == _shape(target),
        "correct_length": len(leaves(predicted)) == len(leaves(target)),
    }


def log_potential_median(values):
    """Log of the (lower) median of the exponentiated values."""
    if not values:
        raise EmptyList("no log-potential values to summarize")
    ordered = sorted(math.exp(v) for v in values)
    return log(ordered[(len(ordered) - 1) // 2])


def diversity(sentences, n):
    """Distinct n-grams across all sentences over total token count."""
    assert n >= 1
    if not sentences:
        raise EmptyList("no sentences to measure")
    total = sum(len(sentence) for sentence in sentences)
    grams = {
        tuple(sentence[i:i + n])
        for sentence in sentences
        for i in range(len(sentence) - n + 1)
    }
    return len(grams) / total if total else 0.0


@dataclass(frozen=True)
class EvalReport:
    count: int
    correct_length: float     # percent of outputs with the template's word count
    exact_match: float        # percent whose parse equals the template exactly
    structure_match: float    # percent matching in shape, labels ignored
    f1: float                 # mean labeled bracketing F1, 0..100
    log_potential: float      # lower-median of log reference potential
    log_prior: float | None   # mean log prior, None when no scorer was given
    diversity_1: float
    diversity_2: float
    diversity_3: float

    def to_dict(self):
        """JSON-safe dict; non-finite summaries become null."""
        def clean(value):
            if value is None or not math.isfinite(value):
                return None
            return value

        return {
            "count": self.count,
            "correct_length": self.correct_length,
            "exact_match": self.exact_match,
            "structure_match": self.structure_match,
            "f1": self.f1,
            "log_potential": clean(self.log_potential),
            "log_prior": clean(self.log_prior),
            "diversity_1": self.diversity_1,
            "diversity_2": self.diversity_2,
            "diversity_3": self.diversity_3,
        }


@dataclass(frozen=True)
class OutputScore:
    """Per-sentence raw values, pooled later by summarize()."""
    text: str
    words: tuple
    correct_length: bool
    exact: bool
    structure: bool
    f1: float
    log_potential: float
    log_prior: float | None


def score_outputs(outputs, template, reference_potential, lm, parser,
                  log_priors=None):
    """Score each generated sentence against one template.

    outputs are plain strings; parser maps a word tuple to a tree or
    None when no parse exists (unparseable outputs score zero on the
    match metrics and F1).  lm scores log priors; pass None and supply
    log_priors (a text -> logprob mapping) to reuse stored scores, or
    neither to leave log_prior unset.
    """
    target = encode(template.tree)
    scores = []
    for text in outputs:
        words = tuple(text.split())
        parse = parser(words)
        if parse is None:
            exact = structure = False
            f1 = 0.0
        else:
            matches = match_metrics(parse, template.tree)
            exact = matches["exact"]
            structure = matches["structure"]
            f1 = bracket_f1(parse, template.tree)
        if lm is not None:
            log_prior = lm.string_logprob(words)
        elif log_priors is not None and text in log_priors:
            log_prior = log_priors[text]
        else:
            log_prior = None
        scores.append(OutputScore(
            text=text,
            words=words,
            correct_length=len(words) == template.word_count,
            exact=exact,
            structure=structure,
            f1=f1,
            log_potential=reference_potential.log_likelihood(words, target),
            log_prior=log_prior,
        ))
    return scores


def summarize(scores):
    """Pool per-sentence scores (possibly across templates) into a report."""
    if not scores:
        raise EmptyList("no outputs to evaluate")
    count = len(scores)
    sentences = [score.words for score in scores]
    log_prior_values = [s.log_prior for s in scores if s.log_prior is not None]
    if not log_prior_values:
        log_prior = None
    elif any(value == NEGINF for value in log_prior_values):
        log_prior = NEGINF
    else:
        log_prior = math.fsum(log_prior_values) / len(log_prior_values)
    return EvalReport(
        count=count,
        correct_length=100.0 * sum(s.correct_length for s in scores) / count,
        exact_match=100.0 * sum(s.exact for s in scores) / count,
        structure_match=100.0 * sum(s.structure for s in scores) / count,
        f1=math.fsum(s.f1 for s in scores) / count,
        log_potential=log_potential_median([s.log_potential for s in scores]),
        log_prior=log_prior,
        diversity_1=diversity(sentences, 1),
        diversity_2=diversity(sentences, 2),
        diversity_3=diversity(sentences, 3),
    )


def evaluate_run(outputs, template, reference_potential, lm, parser,
                 log_priors=None):
    """Aggregate all metrics for one batch of generated sentences."""
    if not outputs:
        raise EmptyList("no outputs to evaluate")
    return summarize(score_outputs(outputs, template, reference_potential,
                                   lm, parser, log_priors=log_priors))


_CSV_FIELDS = ("name", "count", "correct_length", "exact_match",
               "structure_match", "f1", "log_potential", "log_prior",
               "diversity_1", "diversity_2", "diversity_3")


def write_eval_csv(named_reports, handle):
    """One row per (name, EvalReport) pair, plain text numbers."""
    writer = csv.writer(handle)
    writer.writerow(_CSV_FIELDS)
    for name, report in named_reports:
        row = [name] + [getattr(report, field) for field in _CSV_FIELDS[1:]]
        writer.writerow(["" if value is None else value for value in row])
