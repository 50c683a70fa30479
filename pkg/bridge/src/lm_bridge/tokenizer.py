"""Greedy longest-match subword tokenizer over a fixed piece inventory.

The convention mirrors sentencepiece-style vocabularies: every piece that can
begin a word carries a leading space, continuation pieces never do, and the
input text is normalized with a single leading space before matching.  Single
letters exist in both flavors, so any lowercase text tokenizes without an
unknown-token escape hatch.
"""

import re

WORDS = (
    "the", "a", "an", "dog", "cat", "bird", "fish", "horse", "man", "woman",
    "child", "house", "tree", "river", "song", "story", "friend", "doctor",
    "artist", "train", "window", "garden", "city", "book", "cloud", "stone",
    "field", "light", "night", "morning", "ch", "run", "walk", "sing",
)

CONTINUATIONS = ("s", "es", "er", "ing", "ance", "ant", "ed", "ly")

_TEXT_RE = re.compile(r"^[a-z]+( [a-z]+)*$")


def build_pieces():
    pieces = []
    seen = set()

    def add(piece):
        if piece not in seen:
            seen.add(piece)
            pieces.append(piece)

    for word in WORDS:
        add(" " + word)
    for tail in CONTINUATIONS:
        add(tail)
    for code in range(ord("a"), ord("z") + 1):
        add(chr(code))
        add(" " + chr(code))
    return tuple(pieces)


class Tokenizer:
    def __init__(self):
        self.pieces = build_pieces()
        self.table = {piece: tid for tid, piece in enumerate(self.pieces)}
        self.starts_word = tuple(piece.startswith(" ") for piece in self.pieces)
        self.max_len = max(len(piece) for piece in self.pieces)

    def __len__(self):
        return len(self.pieces)

    def text(self, token_id):
        return self.pieces[token_id]

    def tokenize(self, text):
        """Return (token_ids, word_ends) for lowercase space-separated text."""
        if not isinstance(text, str) or not _TEXT_RE.match(text):
            raise ValueError("text must be lowercase words separated by single spaces")
        work = " " + text
        tokens = []
        pos = 0
        while pos < len(work):
            for length in range(min(self.max_len, len(work) - pos), 0, -1):
                tid = self.table.get(work[pos:pos + length])
                if tid is not None:
                    tokens.append(tid)
                    pos += length
                    break
            else:
                raise ValueError("untokenizable text at offset %d" % pos)
        word_ends = []
        for index in range(len(tokens)):
            last = index + 1 == len(tokens)
            word_ends.append(last or self.starts_word[tokens[index + 1]])
        return tokens, word_ends

    def detokenize(self, token_ids):
        return "".join(self.pieces[tid] for tid in token_ids).strip()
