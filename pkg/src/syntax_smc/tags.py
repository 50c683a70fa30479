"""Tetratag codec: linearize binary constituency trees into tag sequences.

A tree over L words maps to a sequence of 2L-1 tags, one per node of
the binarized tree, in in-order traversal order.  Odd positions
(1-indexed) describe leaf units and use kinds "l"/"r"; even positions
describe internal nodes and use "L"/"R".  The kind says whether the
node is a left or right child of its parent (the root counts as left).
Leaf tags carry the collapsed unary chain above the leaf, excluding
the preterminal itself; internal tags carry the node label, absent for
dummy nodes introduced by binarization.

Decoding runs a stack machine: "l" pushes a leaf unit, "L" wraps the
finished subtree on top of the stack into a new node with an open
right slot, "r" fills the lowest open slot of the top element, and "R"
wraps the top element and attaches it into the open slot of the
element below it.
"""

from dataclasses import dataclass

from .trees import (
    CHAIN_JOIN,
    DUMMY_LABEL,
    Internal,
    Leaf,
    binarize,
    debinarize,
    is_preterminal,
)

LEAF_KINDS = ("l", "r")
INTERNAL_KINDS = ("L", "R")


class MalformedSequence(Exception):
    """A tag sequence that no tree can produce; reports the bad position."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = "%s (position %d)" % (message, position)
        super().__init__(message)


@dataclass(frozen=True)
class Tetratag:
    kind: str
    label: str | None = None

    def __post_init__(self):
        assert self.kind in LEAF_KINDS + INTERNAL_KINDS

    def is_leaf(self):
        return self.kind in LEAF_KINDS

    def render(self):
        if self.label is None:
            return self.kind
        return "%s/%s" % (self.kind, self.label)


def parse_tag(text):
    kind, sep, label = text.partition("/")
    if kind not in LEAF_KINDS + INTERNAL_KINDS or (sep and not label):
        raise MalformedSequence("cannot parse tag %r" % text)
    return Tetratag(kind, label if sep else None)


@dataclass(frozen=True)
class TagSequence:
    """2L-1 tags for an L-word tree; odd slots leaf tags, even internal."""

    tags: tuple
    word_count: int

    def __post_init__(self):
        assert len(self.tags) == 2 * self.word_count - 1

    def __iter__(self):
        return iter(self.tags)

    def __len__(self):
        return len(self.tags)

    def render(self):
        return format_tags(self.tags)


def format_tags(tags):
    """Render tags the way the tag-sequence figures do: ['l/NP', 'L/S', ...]."""
    return "[%s]" % ", ".join("'%s'" % t.render() for t in tags)


def parse_tags(text):
    """Inverse of format_tags; also accepts bare comma/space separation."""
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        text = text[1:-1]
    parts = [p.strip().strip("'\"") for p in text.replace(",", " ").split()]
    tags = [parse_tag(p) for p in parts if p]
    if len(tags) % 2 == 0:
        raise MalformedSequence("tag sequence must have odd length 2L-1")
    return TagSequence(tuple(tags), (len(tags) + 1) // 2)


def encode(tree):
    """Tag sequence of a tree (or of a template's tree), via binarization."""
    binary = binarize(tree)
    tags = []

    def walk(node, is_left):
        if is_preterminal(node):
            parts = node.label.split(CHAIN_JOIN)
            chain = CHAIN_JOIN.join(parts[:-1])
            tags.append(Tetratag("l" if is_left else "r", chain or None))
            return
        walk(node.children[0], True)
        label = None if node.label == DUMMY_LABEL else node.label
        tags.append(Tetratag("L" if is_left else "R", label))
        walk(node.children[1], False)

    walk(binary, True)
    assert len(tags) % 2 == 1
    return TagSequence(tuple(tags), (len(tags) + 1) // 2)


class _Partial:
    # Mutable node used only while decoding.
    __slots__ = ("label", "left", "right")

    def __init__(self, label, left):
        self.label = label
        self.left = left
        self.right = None

    def freeze(self):
        left = self.left.freeze() if isinstance(self.left, _Partial) else self.left
        right = self.right.freeze() if isinstance(self.right, _Partial) else self.right
        assert right is not None
        return Internal(self.label, (left, right))


def decode(tag_sequence, words, pos):
    """Rebuild the tree from tags plus the words and their POS labels.

    ``decode(encode(t), leaves, pos_sequence)`` reproduces ``t``.
    Raises MalformedSequence (with the failing 1-based position) if the
    tags cannot drive the stack machine to a single finished tree.
    """
    tags = list(tag_sequence)
    if len(words) != len(pos):
        raise MalformedSequence("got %d words but %d POS labels" % (len(words), len(pos)))
    if len(tags) != 2 * len(words) - 1:
        raise MalformedSequence(
            "%d words need %d tags, got %d" % (len(words), 2 * len(words) - 1, len(tags))
        )

    def leaf_unit(index, chain):
        label = pos[index] if chain is None else chain + CHAIN_JOIN + pos[index]
        return Internal(label, (Leaf(words[index]),))

    stack = []  # (node, open_partial or None); top may be complete
    next_word = 0
    for position, tag in enumerate(tags, start=1):
        odd = position % 2 == 1
        if odd != tag.is_leaf():
            want = "leaf" if odd else "internal"
            raise MalformedSequence("expected a %s tag" % want, position)
        if tag.kind == "l":
            stack.append((leaf_unit(next_word, tag.label), None))
            next_word += 1
        elif tag.kind == "r":
            if not stack or stack[-1][1] is None:
                raise MalformedSequence("no open slot for a right leaf", position)
            node, slot = stack[-1]
            slot.right = leaf_unit(next_word, tag.label)
            next_word += 1
            stack[-1] = (node, None)
        else:
            if not stack or stack[-1][1] is not None:
                raise MalformedSequence("no finished subtree to attach", position)
            done, _ = stack.pop()
            wrapper = _Partial(tag.label if tag.label is not None else DUMMY_LABEL, done)
            if tag.kind == "L":
                stack.append((wrapper, wrapper))
            else:
                if not stack or stack[-1][1] is None:
                    raise MalformedSequence("no open slot for a right node", position)
                below, slot = stack[-1]
                slot.right = wrapper
                stack[-1] = (below, wrapper)
    if len(stack) != 1 or stack[0][1] is not None:
        raise MalformedSequence("tags leave %d unfinished subtrees" % len(stack), len(tags))
    root = stack[0][0]
    binary = root.freeze() if isinstance(root, _Partial) else root
    return debinarize(binary)


def is_valid_prefix(tags, word_count=None):
    """True iff some completion of this tag prefix is decodable.

    Simulates the stack machine, tracking only the number of open
    elements.  With ``word_count`` given, additionally checks that the
    open elements can all be closed within the remaining word budget.
    """
    open_count = 0
    top_complete = False
    words_seen = 0
    for position, tag in enumerate(tags, start=1):
        odd = position % 2 == 1
        if odd != tag.is_leaf():
            return False
        if tag.kind == "l":
            top_complete = True
            words_seen += 1
        elif tag.kind == "r":
            if open_count < 1:
                return False
            open_count -= 1
            top_complete = True
            words_seen += 1
        elif tag.kind == "L":
            assert top_complete
            open_count += 1
            top_complete = False
        else:
            if open_count < 1:
                return False
            top_complete = False
    if word_count is None:
        return True
    if words_seen > word_count or len(tags) > 2 * word_count - 1:
        return False
    remaining = word_count - words_seen
    if remaining == 0:
        return top_complete and open_count == 0
    # Each remaining word can close at most one open element.
    return open_count <= remaining
