"""Word-level language models: shared interface, tabular and n-gram priors.

A language model factors the probability of a sentence y = x_1..x_n as
p(y) = p(EOS | y) * prod_i p(x_i | x_<i).  ``conditional`` returns the
full next-token distribution for a prefix, including the EOS entry;
the EOS marker itself is never part of the vocabulary.

Both implementations are immutable once built and safe to share across
runs.  Trained models serialize to versioned JSON files.
"""

import json
import math

EOS = "</s>"
BOS = "<s>"
RESERVED = (EOS, BOS)

NEGINF = float("-inf")

_SUM_TOL = 1e-9


class UnknownToken(Exception):
    pass


class EmptyCorpus(Exception):
    pass


def log(p):
    return math.log(p) if p > 0.0 else NEGINF


def logsumexp(values):
    """log(sum(exp(v))) without overflow; -inf for an empty or all--inf list."""
    peak = max(values, default=NEGINF)
    if peak == NEGINF:
        return NEGINF
    return peak + math.log(math.fsum(math.exp(v - peak) for v in values))


class Vocabulary:
    """Ordered set of word strings; EOS is excluded by construction."""

    def __init__(self, tokens):
        self.tokens = tuple(tokens)
        self._members = frozenset(self.tokens)
        assert len(self._members) == len(self.tokens)
        for tok in RESERVED:
            assert tok not in self._members, "%r is reserved" % tok

    def __contains__(self, token):
        return token in self._members

    def __iter__(self):
        return iter(self.tokens)

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens


class NextTokenDistribution:
    """Distribution over vocabulary words plus EOS; sums to 1 (1e-9)."""

    def __init__(self, probs):
        self.probs = dict(probs)
        assert EOS in self.probs, "distribution must include an EOS entry"
        total = math.fsum(self.probs.values())
        assert abs(total - 1.0) <= _SUM_TOL, "probabilities sum to %r" % total

    def prob(self, token):
        return self.probs.get(token, 0.0)

    def logprob(self, token):
        return log(self.prob(token))

    def items(self):
        return self.probs.items()


class LanguageModel:
    """Interface: ``vocab`` attribute plus the two methods below."""

    vocab: Vocabulary

    def conditional(self, prefix):
        raise NotImplementedError

    def history_key(self, prefix):
        """Hashable state ``conditional`` depends on; used for caching."""
        return tuple(prefix)

    def string_logprob(self, words):
        """log p(words), including the final EOS factor."""
        total = 0.0
        for i, word in enumerate(words):
            total += self.conditional(tuple(words[:i])).logprob(word)
            if total == NEGINF:
                return NEGINF
        return total + self.conditional(tuple(words)).logprob(EOS)


class TabularLM(LanguageModel):
    """Explicit distribution over a bounded set of word sequences."""

    def __init__(self, table):
        self.table = {tuple(k): float(v) for k, v in table.items()}
        assert self.table, "table must contain at least one string"
        total = math.fsum(self.table.values())
        assert abs(total - 1.0) <= _SUM_TOL, "string probabilities sum to %r" % total
        words = sorted({w for seq in self.table for w in seq})
        self.vocab = Vocabulary(tuple(words))
        self.max_words = max(len(seq) for seq in self.table)
        self._cache = {}

    def conditional(self, prefix):
        prefix = tuple(prefix)
        for word in prefix:
            if word not in self.vocab:
                raise UnknownToken(word)
        if prefix in self._cache:
            return self._cache[prefix]
        n = len(prefix)
        continuation = {w: 0.0 for w in self.vocab}
        eos_mass = 0.0
        total = 0.0
        for seq, p in self.table.items():
            if seq[:n] != prefix:
                continue
            total += p
            if len(seq) == n:
                eos_mass += p
            else:
                continuation[seq[n]] += p
        if total <= 0.0:
            # Unreachable under the model itself; a proposal may still
            # wander here, at which point its weight is already zero.
            dist = NextTokenDistribution({w: 0.0 for w in self.vocab} | {EOS: 1.0})
        else:
            probs = {w: mass / total for w, mass in continuation.items()}
            probs[EOS] = eos_mass / total
            dist = NextTokenDistribution(probs)
        self._cache[prefix] = dist
        return dist

    def support(self):
        return sorted(self.table.items())


class NgramLM(LanguageModel):
    """Add-k smoothed order-n model over the corpus vocabulary plus EOS."""

    def __init__(self, order, k, vocab, counts):
        assert order >= 1 and k >= 0.0
        self.order = order
        self.k = k
        self.vocab = vocab if isinstance(vocab, Vocabulary) else Vocabulary(tuple(vocab))
        # counts: history tuple (length order-1, BOS padded) -> {token: count}
        self.counts = {tuple(h): dict(c) for h, c in counts.items()}
        self._totals = {h: sum(c.values()) for h, c in self.counts.items()}
        self._cache = {}

    def _history(self, prefix):
        if self.order == 1:
            return ()
        padded = (BOS,) * (self.order - 1) + tuple(prefix)
        return padded[len(padded) - (self.order - 1):]

    def history_key(self, prefix):
        return self._history(prefix)

    def conditional(self, prefix):
        prefix = tuple(prefix)
        for word in prefix:
            if word not in self.vocab:
                raise UnknownToken(word)
        history = self._history(prefix)
        if history in self._cache:
            return self._cache[history]
        seen = self.counts.get(history, {})
        total = self._totals.get(history, 0)
        outcomes = tuple(self.vocab) + (EOS,)
        denom = total + self.k * len(outcomes)
        if denom <= 0.0:
            # k = 0 and an unseen history: fall back to uniform.
            probs = {tok: 1.0 / len(outcomes) for tok in outcomes}
        else:
            probs = {tok: (seen.get(tok, 0) + self.k) / denom for tok in outcomes}
        dist = NextTokenDistribution(probs)
        self._cache[history] = dist
        return dist


def train_ngram(sentences, order=2, k=0.01):
    """Count-based training; ``sentences`` is an iterable of token lists."""
    sentences = [list(s) for s in sentences]
    sentences = [s for s in sentences if s]
    if not sentences:
        raise EmptyCorpus("no sentences to train on")
    words = set()
    for sent in sentences:
        for tok in sent:
            if tok in RESERVED:
                raise ValueError("corpus contains reserved token %r" % tok)
            words.add(tok)
    vocab = Vocabulary(tuple(sorted(words)))
    counts = {}
    for sent in sentences:
        padded = [BOS] * (order - 1) + sent + [EOS]
        for i in range(order - 1, len(padded)):
            history = tuple(padded[i - order + 1:i])
            counts.setdefault(history, {})
            counts[history][padded[i]] = counts[history].get(padded[i], 0) + 1
    return NgramLM(order, k, vocab, counts)


def load_corpus(path):
    """One whitespace-tokenized sentence per line; blank lines skipped."""
    with open(path, encoding="utf-8") as handle:
        return [line.split() for line in handle if line.strip()]


def save_lm(model, path):
    if isinstance(model, NgramLM):
        payload = {
            "format": "ngram-v1",
            "order": model.order,
            "k": model.k,
            "vocab": list(model.vocab),
            "counts": {" ".join(h): c for h, c in model.counts.items()},
        }
    elif isinstance(model, TabularLM):
        payload = {
            "format": "tabular-v1",
            "table": {" ".join(seq): p for seq, p in model.table.items()},
        }
    else:
        raise TypeError("cannot serialize %r" % type(model).__name__)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=1, sort_keys=True)
        handle.write("\n")


def load_lm(path):
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    fmt = payload.get("format")
    if fmt == "ngram-v1":
        counts = {tuple(h.split()): c for h, c in payload["counts"].items()}
        return NgramLM(payload["order"], payload["k"], tuple(payload["vocab"]), counts)
    if fmt == "tabular-v1":
        return TabularLM({tuple(s.split()): p for s, p in payload["table"].items()})
    raise ValueError("unknown model format %r" % fmt)
