"""Constituency trees: bracketed parsing, binarization, templates.

A tree is built from two immutable node kinds: ``Leaf`` (a word) and
``Internal`` (a labeled constituent with one or more children).  A
*preterminal* is an Internal whose single child is a Leaf; every Leaf
must sit directly under a preterminal.

``binarize`` turns any such tree into the right-branching binary form
used by the tetratag codec: unary chains are collapsed into one node
whose label joins the chain with "+", and parents with more than two
children are split by introducing nodes labeled with the dummy marker
"∅".  ``debinarize`` inverts the transform exactly, so
``debinarize(binarize(t)) == t`` for any tree whose labels do not
themselves contain the reserved markers.
"""

from dataclasses import dataclass

DUMMY_LABEL = "∅"
CHAIN_JOIN = "+"
TEMPLATE_WORD = "?"


@dataclass(frozen=True)
class Leaf:
    word: str


@dataclass(frozen=True)
class Internal:
    label: str
    children: tuple

    def __post_init__(self):
        assert len(self.children) >= 1, "Internal node needs at least one child"


class TreeError(Exception):
    """Base class for tree parsing/transform errors; carries a byte offset."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = "%s (offset %d)" % (message, offset)
        super().__init__(message)


class UnbalancedParens(TreeError):
    pass


class EmptyLabel(TreeError):
    pass


class EmptyTree(TreeError):
    pass


class InvalidDummyPlacement(TreeError):
    pass


def is_preterminal(node):
    return (
        isinstance(node, Internal)
        and len(node.children) == 1
        and isinstance(node.children[0], Leaf)
    )


def validate_tree(tree):
    """Check the structural invariants; raise EmptyTree on violation."""
    if isinstance(tree, Leaf):
        raise EmptyTree("bare word cannot be a tree; wrap it in a preterminal")
    _validate_node(tree)
    return tree


def _validate_node(node):
    if isinstance(node, Leaf):
        return
    for child in node.children:
        if isinstance(child, Leaf) and not is_preterminal(node):
            raise EmptyTree(
                "word %r must sit directly under a preterminal" % child.word
            )
        _validate_node(child)


def parse_bracketed(text):
    """Parse a single bracketed S-expression like "(S (NN dog))".

    Labels and words are any run of characters other than parentheses
    and whitespace.  Errors report the byte offset of the offending
    character in the input string.
    """
    n = len(text)
    pos = 0

    def skip_space(pos):
        while pos < n and text[pos].isspace():
            pos += 1
        return pos

    def read_token(pos):
        start = pos
        while pos < n and not text[pos].isspace() and text[pos] not in "()":
            pos += 1
        return text[start:pos], pos

    def parse_node(pos):
        assert text[pos] == "("
        open_at = pos
        pos = skip_space(pos + 1)
        label, pos = read_token(pos)
        if not label:
            raise EmptyLabel("constituent is missing a label", pos)
        children = []
        while True:
            pos = skip_space(pos)
            if pos >= n:
                raise UnbalancedParens("unclosed constituent", open_at)
            if text[pos] == ")":
                pos += 1
                break
            if text[pos] == "(":
                child, pos = parse_node(pos)
            else:
                word, pos = read_token(pos)
                child = Leaf(word)
            children.append(child)
        if not children:
            raise EmptyTree("constituent %r has no children" % label, open_at)
        return Internal(label, tuple(children)), pos

    pos = skip_space(pos)
    if pos >= n:
        raise EmptyTree("input contains no tree", 0)
    if text[pos] != "(":
        raise UnbalancedParens("expected '('", pos)
    tree, pos = parse_node(pos)
    pos = skip_space(pos)
    if pos < n:
        raise UnbalancedParens("unexpected content after tree", pos)
    return validate_tree(tree)


def serialize_bracketed(tree):
    """Render a tree in the canonical single-space bracketed form."""
    if isinstance(tree, Leaf):
        return tree.word
    inner = " ".join(serialize_bracketed(c) for c in tree.children)
    return "(%s %s)" % (tree.label, inner)


def _collapse_unaries(node):
    if is_preterminal(node):
        return node
    if len(node.children) == 1:
        child = _collapse_unaries(node.children[0])
        return Internal(node.label + CHAIN_JOIN + child.label, child.children)
    return Internal(node.label, tuple(_collapse_unaries(c) for c in node.children))


def _split_nary(node):
    if is_preterminal(node):
        return node
    kids = [_split_nary(c) for c in node.children]
    if len(kids) <= 2:
        return Internal(node.label, tuple(kids))
    right = kids[-1]
    for kid in reversed(kids[1:-1]):
        right = Internal(DUMMY_LABEL, (kid, right))
    return Internal(node.label, (kids[0], right))


def binarize(tree):
    """Right-branching binarization with "+"-collapsed unary chains.

    In the result every node is either a (possibly fused) preterminal
    over a single Leaf, or an Internal with exactly two children.
    Nodes introduced to split parents with more than two children carry
    the dummy label.  Counting each preterminal+Leaf pair as one leaf
    unit, a tree with L words has exactly 2L-1 nodes.
    """
    return _split_nary(_collapse_unaries(tree))


def _expand(node):
    # Returns a list of nodes so dummy constituents can splice their
    # children into the surrounding child list.
    if isinstance(node, Leaf):
        return [node]
    kids = [g for c in node.children for g in _expand(c)]
    if node.label == DUMMY_LABEL:
        return kids
    labels = node.label.split(CHAIN_JOIN)
    out = Internal(labels[-1], tuple(kids))
    for label in reversed(labels[:-1]):
        out = Internal(label, (out,))
    return [out]


def debinarize(tree):
    """Invert ``binarize``: splice dummy nodes, split "+"-joined chains."""
    if isinstance(tree, Internal) and tree.label == DUMMY_LABEL:
        raise InvalidDummyPlacement("dummy marker cannot label the root")
    expanded = _expand(tree)
    assert len(expanded) == 1 and isinstance(expanded[0], Internal)
    return expanded[0]


def leaves(tree):
    if isinstance(tree, Leaf):
        return [tree.word]
    return [w for c in tree.children for w in leaves(c)]


def preterminals(tree):
    """The preterminal nodes, left to right."""
    if is_preterminal(tree):
        return [tree]
    if isinstance(tree, Leaf):
        return []
    return [p for c in tree.children for p in preterminals(c)]


def pos_sequence(tree):
    """Preterminal labels, left to right."""
    return [p.label for p in preterminals(tree)]


def tree_stats(tree):
    """leaf_count, size (all nodes incl. leaves), height (edges)."""

    def walk(node):
        if isinstance(node, Leaf):
            return 1, 1, 0
        lc = sz = 0
        ht = 0
        for child in node.children:
            c_lc, c_sz, c_ht = walk(child)
            lc += c_lc
            sz += c_sz
            ht = max(ht, c_ht)
        return lc, sz + 1, ht + 1

    lc, sz, ht = walk(tree)
    return {"leaf_count": lc, "size": sz, "height": ht}


@dataclass(frozen=True)
class TreeTemplate:
    """A tree whose words have been replaced by the placeholder "?"."""

    tree: Internal
    word_count: int

    def __post_init__(self):
        assert self.word_count == len(leaves(self.tree))


def template_from_tree(tree):
    """Replace every word with the placeholder, keeping all structure."""

    def strip(node):
        if isinstance(node, Leaf):
            return Leaf(TEMPLATE_WORD)
        return Internal(node.label, tuple(strip(c) for c in node.children))

    stripped = strip(validate_tree(tree))
    return TreeTemplate(stripped, len(leaves(stripped)))


def fill_template(template, words):
    """A copy of the template tree with its placeholders replaced by words."""
    assert len(words) == template.word_count
    it = iter(words)

    def fill(node):
        if isinstance(node, Leaf):
            return Leaf(next(it))
        return Internal(node.label, tuple(fill(c) for c in node.children))

    return fill(template.tree)
