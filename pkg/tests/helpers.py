"""Shared builders for the test suite: random trees and toy models."""

from syntax_smc.grammar import parse_grammar
from syntax_smc.lm import TabularLM, train_ngram
from syntax_smc.trees import Internal, Leaf

LABELS = ("S", "NP", "VP", "PP", "ADJP", "ADVP", "SBAR", "X")
POS = ("NN", "VB", "DT", "JJ", "RB", "IN", "PRP")
WORDS = ("time", "flies", "like", "an", "arrow", "green", "ideas",
         "sleep", "furiously", "the", "old", "man", "boats")

GOLDEN_TREE = ("(S (NP (EX There)) (VP (VBZ is) (ADVP (RB always)) "
               "(NP (DT a) (NN chance))))")
GOLDEN_TAGS = "['l/NP', 'L/S', 'l', 'R/VP', 'l/ADVP', 'R', 'l', 'R/NP', 'r']"

TOY_GRAMMAR = """\
# three-word toy: determiner noun verb
S -> NP VP 1.0
NP -> DT NN 1.0
VP -> VBZ 1.0
DT -> the 0.6
DT -> a 0.4
NN -> dog 0.4
NN -> cat 0.3
NN -> bird 0.3
VBZ -> runs 0.4
VBZ -> sleeps 0.4
VBZ -> sings 0.2
"""

TOY_CORPUS = [
    "the dog runs", "the cat sleeps", "a dog sleeps", "the dog sleeps",
    "a cat runs", "the cat runs", "a dog runs", "the bird sings",
    "a bird sings", "the bird sleeps",
]


def toy_pcfg():
    return parse_grammar(TOY_GRAMMAR)


def toy_lm(order=2, k=0.01):
    return train_ngram([line.split() for line in TOY_CORPUS],
                       order=order, k=k)


def tiny_tabular():
    """Three strings over {a, b}; small enough to verify by hand."""
    return TabularLM({
        ("a", "b"): 0.5,
        ("b", "a"): 0.3,
        ("a", "a"): 0.2,
    })


def random_tree(rng, max_leaves=20):
    """A random constituency tree with unary chains and arity up to 4."""
    count = rng.randint(1, max_leaves)

    def preterminal():
        return Internal(rng.choice(POS), (Leaf(rng.choice(WORDS)),))

    def build(n, depth):
        if n == 1:
            node = preterminal()
            while depth < 12 and rng.random() < 0.3:
                node = Internal(rng.choice(LABELS), (node,))
            return node
        arity = rng.randint(2, min(4, n))
        cuts = sorted(rng.sample(range(1, n), arity - 1))
        bounds = [0] + cuts + [n]
        sizes = [b - a for a, b in zip(bounds, bounds[1:])]
        node = Internal(rng.choice(LABELS),
                        tuple(build(s, depth + 1) for s in sizes))
        while depth < 12 and rng.random() < 0.15:
            node = Internal(rng.choice(LABELS), (node,))
        return node

    root = build(count, 0)
    if isinstance(root, Internal) and len(root.children) == 1 \
            and isinstance(root.children[0], Leaf):
        # Give single-word trees at least one phrase level so every
        # generated tree has a root distinct from its preterminal.
        root = Internal("S", (root,))
    return root
