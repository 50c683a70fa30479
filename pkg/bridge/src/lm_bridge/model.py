"""Deterministic seeded token-level model behind the bridge endpoints.

Every distribution is a pure function of (seed, conditioning key): weights come
from SHA-256 hashes, so two servers with the same seed serve bit-identical
responses, which is what makes golden transcripts possible.  Log probabilities
are serialized as repr() strings so clients can round trip the exact floats.
"""

import hashlib
import math
from .tokenizer import Tokenizer

TOP_K = 64

ODD_TAGS = ("l", "r", "l/NP", "r/NP", "l/VP", "r/VP")
EVEN_TAGS = ("L", "R", "L/S", "R/S", "L/NP", "R/VP")


def _format(value):
    return repr(value)


class BridgeModel:
    def __init__(self, seed=0, top_k=TOP_K):
        assert top_k >= 1
        self.seed = seed
        self.top_k = top_k
        self.tokenizer = Tokenizer()
        self.vocab_size = len(self.tokenizer)
        assert self.vocab_size > top_k, "top-k truncation should leave leftover mass"

    def _unit(self, *key):
        """Hash a key to a float in (0, 1)."""
        digest = hashlib.sha256(repr((self.seed,) + key).encode("utf-8")).digest()
        raw = int.from_bytes(digest[:8], "big")
        return (raw + 1) / (2.0 ** 64 + 2)

    def distribution(self, prefix):
        """Normalized next-token distribution: (piece_probs, eos_prob)."""
        prefix = tuple(prefix)
        weights = [self._unit("tok", prefix, tid) ** 2 for tid in range(self.vocab_size)]
        wsum = math.fsum(weights)
        # End-of-sentence pressure grows with prefix length so free-running
        # generation terminates and final-word closings happen quickly.
        eos_weight = wsum * (0.02 + 0.22 * min(len(prefix), 8))
        total = wsum + eos_weight
        probs = [w / total for w in weights]
        return probs, eos_weight / total

    def next_token_page(self, prefix):
        probs, eos_prob = self.distribution(prefix)
        order = sorted(range(self.vocab_size), key=lambda tid: (-probs[tid], tid))
        kept = order[:self.top_k]
        rest = order[self.top_k:]
        other = math.fsum(probs[tid] for tid in rest)
        return {
            "top": [[tid, _format(math.log(probs[tid]))] for tid in kept],
            "texts": [self.tokenizer.text(tid) for tid in kept],
            "starts_word": [self.tokenizer.starts_word[tid] for tid in kept],
            "eos_logprob": _format(math.log(eos_prob)),
            "other_mass_logprob": _format(math.log(other)) if other > 0.0 else "-inf",
        }

    def score(self, prefix, token_id):
        probs, _ = self.distribution(prefix)
        return math.log(probs[token_id])

    def score_page(self, prefix, token_id):
        return {"logprob": _format(self.score(prefix, token_id))}

    def _tag_map(self, prefix, slot, names):
        weights = [self._unit("tag", tuple(prefix), slot, name) for name in names]
        total = math.fsum(weights)
        return {name: _format(math.log(w / total)) for name, w in zip(names, weights)}

    def tag_page(self, prefix):
        return {
            "odd": self._tag_map(prefix, "odd", ODD_TAGS),
            "even": self._tag_map(prefix, "even", EVEN_TAGS),
        }

    def tokenize_page(self, text):
        tokens, word_ends = self.tokenizer.tokenize(text)
        return {"tokens": tokens, "word_ends": word_ends}
