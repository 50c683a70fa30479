"""Probabilistic context-free grammars over word-level vocabularies.

The text format is one rule per line, ``LHS -> RHS1 [RHS2] prob``, with
``#`` comments.  A symbol is a nonterminal iff it appears on some
left-hand side; right-hand symbols that never do are terminal words.
Right-hand sides have one or two symbols: two nonterminals (binary), a
single nonterminal (unary), or a single terminal (lexical).  The first
rule's LHS is the start symbol.  Rule probabilities must sum to one per
LHS, and unary rules must not form cycles so that the set of parses of
any fixed-length yield is finite.

Besides parsing and sampling, the module enumerates every derivation
of a given yield length once and caches it in columnar (numpy) form.
That enumeration is what the grammar-oracle tagger and the Viterbi
reference parser run on; the classic CKY inside pass is kept as an
independently-coded total-probability routine.
"""

import math

import numpy as np

from . import tags as tags_mod
from .trees import Internal, Leaf, leaves, pos_sequence

SUM_TOL = 1e-6


class GrammarError(Exception):
    pass


class TooAmbiguous(Exception):
    """Derivation enumeration exceeded the configured cap."""


class _DepthExceeded(Exception):
    pass


class PCFG:
    def __init__(self, rules, start):
        """``rules`` is a list of (lhs, rhs_tuple, prob) in file order."""
        self.rules = [(lhs, tuple(rhs), float(p)) for lhs, rhs, p in rules]
        self.start = start
        self.nonterminals = {lhs for lhs, _, _ in self.rules}
        assert start in self.nonterminals
        self.lexical = {}   # lhs -> {word: prob}
        self.unary = {}     # lhs -> [(child, prob)]
        self.binary = {}    # lhs -> [(left, right, prob)]
        for lhs, rhs, prob in self.rules:
            if len(rhs) == 1 and rhs[0] not in self.nonterminals:
                self.lexical.setdefault(lhs, {})
                if rhs[0] in self.lexical[lhs]:
                    raise GrammarError("duplicate rule %s -> %s" % (lhs, rhs[0]))
                self.lexical[lhs][rhs[0]] = prob
            elif len(rhs) == 1:
                self.unary.setdefault(lhs, []).append((rhs[0], prob))
            elif len(rhs) == 2:
                for sym in rhs:
                    if sym not in self.nonterminals:
                        raise GrammarError(
                            "terminal %r cannot appear in a binary rule" % sym
                        )
                self.binary.setdefault(lhs, []).append((rhs[0], rhs[1], prob))
            else:
                raise GrammarError("rules take one or two right-hand symbols")
        self._check_sums()
        self._unary_order = self._toposort_unaries()
        self.preterminals = tuple(sorted(self.lexical))
        self.words = tuple(sorted({w for lex in self.lexical.values() for w in lex}))
        self._word_index = {w: i for i, w in enumerate(self.words)}
        self._pre_index = {p: i for i, p in enumerate(self.preterminals)}
        # Lexical probabilities, one row per preterminal; the last
        # column holds the row sum (the "any word" wildcard).
        self.lex_matrix = np.zeros((len(self.preterminals), len(self.words) + 1))
        for pre, lex in self.lexical.items():
            row = self._pre_index[pre]
            for word, prob in lex.items():
                self.lex_matrix[row, self._word_index[word]] = prob
            self.lex_matrix[row, -1] = math.fsum(lex.values())
        self._deriv_memo = {}
        self._deriv_sets = {}

    def _check_sums(self):
        totals = {}
        for lhs, _, prob in self.rules:
            if prob < 0.0:
                raise GrammarError("negative probability for %s" % lhs)
            totals[lhs] = totals.get(lhs, 0.0) + prob
        for lhs, total in totals.items():
            if abs(total - 1.0) > SUM_TOL:
                raise GrammarError("rules for %s sum to %r" % (lhs, total))

    def _toposort_unaries(self):
        order = {}
        visiting = set()

        def visit(sym):
            if sym in order:
                return
            if sym in visiting:
                raise GrammarError("unary rule cycle through %s" % sym)
            visiting.add(sym)
            for child, _ in self.unary.get(sym, []):
                visit(child)
            visiting.discard(sym)
            order[sym] = len(order)

        for sym in sorted(self.nonterminals):
            visit(sym)
        flat = [
            (lhs, child, prob)
            for lhs in sorted(self.unary, key=order.get)
            for child, prob in self.unary[lhs]
        ]
        return flat

    # ------------------------------------------------------------------
    # total parse probability (inside algorithm)

    def inside(self, words):
        """Sum of P(tree, words) over all parses rooted at the start symbol."""
        n = len(words)
        if n == 0:
            return 0.0
        nts = sorted(self.nonterminals)
        index = {nt: i for i, nt in enumerate(nts)}
        chart = np.zeros((n, n + 1, len(nts)))
        for i, word in enumerate(words):
            for pre, lex in self.lexical.items():
                chart[i, i + 1, index[pre]] = lex.get(word, 0.0)
            self._unary_close(chart[i, i + 1], index)
        for width in range(2, n + 1):
            for i in range(n - width + 1):
                j = i + width
                cell = chart[i, j]
                for lhs, rules in self.binary.items():
                    total = 0.0
                    for left, right, prob in rules:
                        li, ri = index[left], index[right]
                        for split in range(i + 1, j):
                            total += prob * chart[i, split, li] * chart[split, j, ri]
                    cell[index[lhs]] = total
                self._unary_close(cell, index)
        return float(chart[0, n, index[self.start]])

    def _unary_close(self, cell, index):
        # Children come before parents in _unary_order, so one pass is exact.
        for lhs, child, prob in self._unary_order:
            cell[index[lhs]] += prob * cell[index[child]]

    # ------------------------------------------------------------------
    # derivation enumeration

    def derivations(self, length, max_derivations=500_000):
        """All parses of a length-``length`` yield, in columnar form (cached)."""
        if length not in self._deriv_sets:
            items = self._derive(self.start, length, max_derivations)
            self._deriv_sets[length] = DerivationSet(self, length, items)
        return self._deriv_sets[length]

    def _derive(self, sym, length, cap):
        key = (sym, length)
        if key in self._deriv_memo:
            return self._deriv_memo[key]
        items = []
        if length == 1 and sym in self.lexical:
            items.append((Internal(sym, (Leaf("?"),)), 1.0))
        for child, prob in self.unary.get(sym, []):
            for tree, mass in self._derive(child, length, cap):
                items.append((Internal(sym, (tree,)), prob * mass))
        for left, right, prob in self.binary.get(sym, []):
            for split in range(1, length):
                for ltree, lmass in self._derive(left, split, cap):
                    for rtree, rmass in self._derive(right, length - split, cap):
                        items.append(
                            (Internal(sym, (ltree, rtree)), prob * lmass * rmass)
                        )
                        if len(items) > cap:
                            raise TooAmbiguous(
                                "more than %d parses of a %d-word yield" % (cap, length)
                            )
        items = tuple(items)
        self._deriv_memo[key] = items
        return items

    # ------------------------------------------------------------------
    # parsing and sampling

    def viterbi_parse(self, words):
        """Most probable parse of ``words``, or None if there is no parse."""
        dset = self.derivations(len(words))
        masses = dset.yield_masses(words)
        if masses is None or not len(masses):
            return None
        best = int(np.argmax(masses))
        if masses[best] <= 0.0:
            return None
        return _fill_words(dset.trees[best], words)

    def sample_tree(self, rng, max_depth=40):
        """Ancestral sample of a full tree; raises GrammarError on runaway depth."""

        def expand(sym, depth):
            if depth > max_depth:
                raise _DepthExceeded()
            rules = [(rhs, prob) for lhs, rhs, prob in self.rules if lhs == sym]
            u = rng.random()
            acc = 0.0
            chosen = rules[-1][0]
            for rhs, prob in rules:
                acc += prob
                if u <= acc:
                    chosen = rhs
                    break
            if len(chosen) == 1 and chosen[0] not in self.nonterminals:
                return Internal(sym, (Leaf(chosen[0]),))
            return Internal(sym, tuple(expand(child, depth + 1) for child in chosen))

        for _ in range(1000):
            try:
                return expand(self.start, 0)
            except _DepthExceeded:
                continue
        raise GrammarError("sampling keeps exceeding depth %d" % max_depth)

    def word_mass(self, pre, word):
        """P(pre -> word), zero for unknown pairs."""
        return self.lexical.get(pre, {}).get(word, 0.0)


def _fill_words(tree, words):
    it = iter(words)

    def fill(node):
        if isinstance(node, Leaf):
            return Leaf(next(it))
        return Internal(node.label, tuple(fill(c) for c in node.children))

    return fill(tree)


class DerivationSet:
    """Columnar view of every parse of a fixed yield length.

    For each derivation d: ``trees[d]`` (with placeholder leaves),
    ``tag_ids[d]`` (its tetratag sequence, as small integers), the
    preterminal id per word position, and the product of all
    non-lexical rule probabilities.  Lexical factors are applied per
    query because they depend on the words.
    """

    def __init__(self, pcfg, length, items):
        self.pcfg = pcfg
        self.length = length
        self.trees = [tree for tree, _ in items]
        self.struct_mass = np.array([mass for _, mass in items], dtype=np.float64)
        count = len(self.trees)
        self.tag_vocab = {}
        self.tag_ids = np.zeros((count, max(2 * length - 1, 1)), dtype=np.int32)
        self.preterm_ids = np.zeros((count, length), dtype=np.int32)
        for d, tree in enumerate(self.trees):
            rendered = [t.render() for t in tags_mod.encode(tree)]
            for k, tag in enumerate(rendered):
                self.tag_ids[d, k] = self.tag_vocab.setdefault(tag, len(self.tag_vocab))
            for p, pre in enumerate(pos_sequence(tree)):
                self.preterm_ids[d, p] = pcfg._pre_index[pre]

    def __len__(self):
        return len(self.trees)

    def prefix_masks(self, target_tags):
        """masks[k][d]: derivation d agrees with the target on tags[:k]."""
        rendered = [t.render() for t in target_tags]
        assert len(rendered) == 2 * self.length - 1
        count = len(self.trees)
        masks = [np.ones(count, dtype=bool)]
        for k, tag in enumerate(rendered):
            tag_id = self.tag_vocab.get(tag)
            if tag_id is None:
                column = np.zeros(count, dtype=bool)
            else:
                column = self.tag_ids[:, k] == tag_id
            masks.append(masks[-1] & column)
        return masks

    def yield_masses(self, words, known=None):
        """P(derivation) * lexical factors, with wildcards past ``known``.

        ``known`` defaults to all positions; positions at or beyond it
        use the "any word" column.  Returns None if a known word is not
        in the grammar's lexicon at all.
        """
        if known is None:
            known = len(words)
        assert known <= len(words) and known <= self.length
        columns = np.empty(self.length, dtype=np.int64)
        for p in range(self.length):
            if p < known:
                col = self.pcfg._word_index.get(words[p])
                if col is None:
                    return None
                columns[p] = col
            else:
                columns[p] = self.pcfg.lex_matrix.shape[1] - 1
        factors = self.pcfg.lex_matrix[self.preterm_ids, columns[None, :]]
        return self.struct_mass * factors.prod(axis=1)


def parse_grammar(text):
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 4 or parts[1] != "->":
            raise GrammarError("line %d: expected 'LHS -> RHS... prob'" % lineno)
        try:
            prob = float(parts[-1])
        except ValueError:
            raise GrammarError("line %d: bad probability %r" % (lineno, parts[-1]))
        rhs = tuple(parts[2:-1])
        if len(rhs) not in (1, 2):
            raise GrammarError("line %d: one or two right-hand symbols" % lineno)
        rules.append((parts[0], rhs, prob))
    if not rules:
        raise GrammarError("grammar has no rules")
    return PCFG(rules, start=rules[0][0])


def load_grammar(path):
    with open(path, encoding="utf-8") as handle:
        return parse_grammar(handle.read())


def save_grammar(pcfg, path):
    lines = ["%s -> %s %r" % (lhs, " ".join(rhs), prob) for lhs, rhs, prob in pcfg.rules]
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
