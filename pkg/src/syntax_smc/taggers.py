"""Potentials and shapers over tetratag targets.

A *potential* scores a finished sentence against a target tag
sequence: psi(words) = prod over the 2L tag slots of the tagger's
probability for the target tag, where the last word's second slot is
the distinguished DUMMY tag with probability one.  A *shaper* scores
prefixes incrementally; extending a prefix by one word multiplies in
exactly two new factors (the new word's odd and even slot
probabilities), so the score telescopes and engines only ever ask for
the per-step ratio.

Two families are provided.  The grammar oracle computes exact
quantities under a PCFG: the potential is the posterior mass of parses
whose tag sequence equals the target, and the shaper's two factors are
the exact conditional probabilities of the next two target slots given
the words so far, with unseen positions summed over the lexicon.  The
feature tagger is a pair of multinomial logistic classifiers (odd and
even slots) over simple word features; with full context it serves as
a learned potential, with prefix context as a learned shaper.
"""

import json
import math

import numpy as np

from .lm import NEGINF, log
from .tags import TagSequence, encode

DUMMY_TAG = "DUMMY"
BOUNDARY = "<s>"


class Potential:
    def likelihood(self, words, target):
        raise NotImplementedError

    def log_likelihood(self, words, target):
        return log(self.likelihood(words, target))


class NullShaper:
    """phi identically one: SMC with this shaper degrades to plain SIS."""

    def log_initial(self):
        return 0.0

    def step_log_factors(self, prefix, word, target):
        return 0.0, 0.0

    def log_step_ratio(self, prefix, word, target):
        return 0.0


class UnitPotential(Potential):
    """psi identically one, for diagnostics and calibration checks.

    Note this accepts any string, including ones shorter than the
    template, so the word-count guarantee of the real potentials does
    not apply under it.
    """

    def likelihood(self, words, target):
        return 1.0


def shaping_prefix_score(shaper, prefix, target):
    """prod over i of the two slot factors for word i; empty prefix -> 1."""
    total = 0.0
    for i in range(len(prefix)):
        odd, even = shaper.step_log_factors(tuple(prefix[:i]), prefix[i], target)
        total += odd + even
    return math.exp(total)


# ----------------------------------------------------------------------
# grammar oracle


class GrammarOracleTagger:
    """Shared exact machinery; use .potential and .shaper."""

    def __init__(self, pcfg):
        self.pcfg = pcfg
        self._mask_cache = {}
        self._mass_cache = {}
        self.potential = GrammarPotential(self)
        self.shaper = GrammarShaper(self)

    def masks(self, target):
        key = tuple(t.render() for t in target)
        if key not in self._mask_cache:
            dset = self.pcfg.derivations(target.word_count)
            self._mask_cache[key] = dset.prefix_masks(list(target))
        return self._mask_cache[key]

    def masses(self, words, length, known):
        key = (length, known, tuple(words[:known]))
        if key not in self._mass_cache:
            dset = self.pcfg.derivations(length)
            self._mass_cache[key] = dset.yield_masses(tuple(words), known=known)
        return self._mass_cache[key]


def grammar_oracle_tagger(pcfg):
    oracle = GrammarOracleTagger(pcfg)
    return oracle.potential, oracle.shaper


class GrammarPotential(Potential):
    """P(target tags | words) summed over parses, exactly."""

    def __init__(self, oracle):
        self.oracle = oracle

    def likelihood(self, words, target):
        if len(words) != target.word_count:
            return 0.0
        masses = self.oracle.masses(tuple(words), target.word_count, len(words))
        if masses is None:
            return 0.0
        denom = float(masses.sum())
        if denom <= 0.0:
            # No parse at all: zero mass, not an error.
            return 0.0
        masks = self.oracle.masks(target)
        num = float(masses[masks[-1]].sum())
        return min(num / denom, 1.0)


class GrammarShaper:
    """Exact next-slot conditionals given the words so far.

    The factor for an odd slot is P(slot matches the target | all
    earlier slots match, words <= i observed), computed by summing
    derivation mass with the unseen word positions marginalized to the
    full lexicon; even slots condition on the odd one too.  The second
    factor of the final word is the DUMMY slot and is always one.
    """

    def __init__(self, oracle):
        self.oracle = oracle

    def log_initial(self):
        return 0.0

    def step_log_factors(self, prefix, word, target):
        i = len(prefix) + 1
        length = target.word_count
        assert i <= length, "stepped past the word budget"
        words = tuple(prefix) + (word,)
        masses = self.oracle.masses(words, length, i)
        if masses is None:
            return NEGINF, NEGINF
        masks = self.oracle.masks(target)
        base = float(masses[masks[2 * i - 2]].sum())
        odd = float(masses[masks[2 * i - 1]].sum())
        if base <= 0.0 or odd <= 0.0:
            return NEGINF, NEGINF
        if i == length:
            even = odd  # the DUMMY slot
        else:
            even = float(masses[masks[2 * i]].sum())
            if even <= 0.0:
                return log(odd / base), NEGINF
        return log(odd / base), log(even / odd)

    def log_step_ratio(self, prefix, word, target):
        odd, even = self.step_log_factors(prefix, word, target)
        return odd + even


# ----------------------------------------------------------------------
# feature tagger


def word_features(words, index, context):
    """Sparse features for one word position; prefix context never looks ahead."""
    word = words[index]
    feats = [
        "w=" + word,
        "lo=" + word.lower(),
        "s1=" + word[-1:],
        "s2=" + word[-2:],
        "s3=" + word[-3:],
        "pr=" + (words[index - 1] if index > 0 else BOUNDARY),
    ]
    if context == "full":
        feats.append("nx=" + (words[index + 1] if index + 1 < len(words) else BOUNDARY))
    return feats


class FeatureTagger:
    """Multinomial logistic heads for odd and even tag slots."""

    def __init__(self, context, features, odd_classes, even_classes, w_odd, w_even):
        assert context in ("full", "prefix")
        self.context = context
        self.features = list(features)
        self._feat_index = {f: i for i, f in enumerate(self.features)}
        self.odd_classes = list(odd_classes)
        self.even_classes = list(even_classes)
        self.w_odd = np.asarray(w_odd, dtype=np.float64)
        self.w_even = np.asarray(w_even, dtype=np.float64)

    def _scores(self, weights, feats):
        ids = [self._feat_index[f] for f in feats if f in self._feat_index]
        if not ids:
            return np.zeros(weights.shape[0])
        return weights[:, ids].sum(axis=1)

    def slot_distributions(self, words, index, word_count):
        """(odd, even) tag distributions for the word at ``index``."""
        feats = word_features(words, index, self.context)
        odd = _softmax_dict(self._scores(self.w_odd, feats), self.odd_classes)
        if index == word_count - 1:
            even = {DUMMY_TAG: 1.0}
        else:
            even = _softmax_dict(self._scores(self.w_even, feats), self.even_classes)
        return odd, even

    # potential interface (full context)

    def likelihood(self, words, target):
        assert self.context == "full", "potential use needs a full-context tagger"
        if len(words) != target.word_count:
            return 0.0
        return math.exp(self._log_product(words, target))

    def log_likelihood(self, words, target):
        assert self.context == "full"
        if len(words) != target.word_count:
            return NEGINF
        return self._log_product(words, target)

    def _log_product(self, words, target):
        rendered = [t.render() for t in target]
        total = 0.0
        for i in range(len(words)):
            odd, even = self.slot_distributions(words, i, target.word_count)
            total += log(odd.get(rendered[2 * i], 0.0))
            if i < len(words) - 1:
                total += log(even.get(rendered[2 * i + 1], 0.0))
            if total == NEGINF:
                return NEGINF
        return total

    # shaper interface (prefix context)

    def log_initial(self):
        return 0.0

    def step_log_factors(self, prefix, word, target):
        assert self.context == "prefix", "shaper use needs a prefix-context tagger"
        words = tuple(prefix) + (word,)
        index = len(prefix)
        rendered = [t.render() for t in target]
        odd, even = self.slot_distributions(words, index, target.word_count)
        log_odd = log(odd.get(rendered[2 * index], 0.0))
        if index == target.word_count - 1:
            log_even = 0.0
        else:
            log_even = log(even.get(rendered[2 * index + 1], 0.0))
        return log_odd, log_even

    def log_step_ratio(self, prefix, word, target):
        odd, even = self.step_log_factors(prefix, word, target)
        return odd + even


def _softmax_dict(scores, classes):
    shifted = np.exp(scores - scores.max())
    probs = shifted / shifted.sum()
    return dict(zip(classes, probs.tolist()))


def train_feature_tagger(corpus, context, lr=0.1, epochs=50, l2=1e-4):
    """Fit both heads by full-batch gradient ascent (deterministic).

    ``corpus`` is a list of (words, rendered_tags) pairs, each with
    2L-1 tags.  The even head is trained on all words but the last of
    each sentence; the final even slot is always DUMMY and not modeled.
    """
    corpus = [(list(w), list(t)) for w, t in corpus]
    assert corpus, "empty tagged corpus"
    odd_samples, even_samples = [], []
    features = set()
    for words, tag_strs in corpus:
        assert len(tag_strs) == 2 * len(words) - 1
        for i in range(len(words)):
            feats = word_features(words, i, context)
            features.update(feats)
            odd_samples.append((feats, tag_strs[2 * i]))
            if i < len(words) - 1:
                even_samples.append((feats, tag_strs[2 * i + 1]))
    feature_list = sorted(features)
    feat_index = {f: i for i, f in enumerate(feature_list)}

    def fit(samples):
        classes = sorted({tag for _, tag in samples})
        class_index = {c: i for i, c in enumerate(classes)}
        arity = len(samples[0][0])
        x = np.array([[feat_index[f] for f in feats] for feats, _ in samples])
        y = np.array([class_index[tag] for _, tag in samples])
        weights = np.zeros((len(classes), len(feature_list)))
        n = len(samples)
        for _ in range(epochs):
            scores = weights[:, x].sum(axis=2)          # [C, n]
            scores -= scores.max(axis=0, keepdims=True)
            probs = np.exp(scores)
            probs /= probs.sum(axis=0, keepdims=True)
            grad = np.zeros_like(weights)
            for j in range(arity):
                np.add.at(grad, (y, x[:, j]), 1.0)
                for c in range(len(classes)):
                    np.add.at(grad[c], x[:, j], -probs[c])
            weights += lr * (grad / n - l2 * weights)
        return classes, weights

    odd_classes, w_odd = fit(odd_samples)
    even_classes, w_even = fit(even_samples) if even_samples else ([], np.zeros((0, len(feature_list))))
    return FeatureTagger(context, feature_list, odd_classes, even_classes, w_odd, w_even)


def save_tagger(tagger, path):
    payload = {
        "format": "feature-tagger-v1",
        "context": tagger.context,
        "features": tagger.features,
        "odd_classes": tagger.odd_classes,
        "even_classes": tagger.even_classes,
        "w_odd": tagger.w_odd.tolist(),
        "w_even": tagger.w_even.tolist(),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)
        handle.write("\n")


def load_tagger(path):
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("format") != "feature-tagger-v1":
        raise ValueError("unknown tagger format %r" % payload.get("format"))
    return FeatureTagger(
        payload["context"],
        payload["features"],
        payload["odd_classes"],
        payload["even_classes"],
        payload["w_odd"],
        payload["w_even"],
    )


def load_tagged_corpus(path):
    """JSONL records {"words": [...], "tags": [...]} (rendered tags)."""
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            rec = json.loads(line)
            records.append((rec["words"], rec["tags"]))
    return records


def save_tagged_corpus(records, path):
    with open(path, "w", encoding="utf-8") as handle:
        for words, tags in records:
            handle.write(json.dumps({"words": list(words), "tags": list(tags)}) + "\n")


def target_from_tree(tree):
    """Convenience: the tag sequence of a tree or template tree."""
    return encode(tree)


__all__ = [
    "DUMMY_TAG",
    "FeatureTagger",
    "GrammarOracleTagger",
    "NullShaper",
    "Potential",
    "TagSequence",
    "grammar_oracle_tagger",
    "load_tagged_corpus",
    "load_tagger",
    "save_tagged_corpus",
    "save_tagger",
    "shaping_prefix_score",
    "train_feature_tagger",
    "word_features",
]
