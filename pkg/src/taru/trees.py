"""Ordered labeled trees and partial trees.

A tree node carries a label and an ordered tuple of children.  Node addresses
are tuples of 1-based child indices, so the root is () and (2, 1) is the first
child of the second child of the root.

Partial trees reuse the same structure: a leaf whose label is an int is a
hole, and the int is the size of the subtree that will eventually replace it.
The full size of a partial tree counts every labeled node once plus the target
size of every hole.
"""

from __future__ import annotations

from typing import Iterator


class Tree:
    __slots__ = ("label", "children", "size", "full_size", "_hash", "_text")

    def __init__(self, label, children: tuple = ()):
        if isinstance(label, int) and children:
            raise ValueError("holes can appear only at the leaves")
        self.label = label
        self.children = children
        size = 1
        full = label if isinstance(label, int) else 1
        for c in children:
            size += c.size
            full += c.full_size
        self.size = size
        self.full_size = full
        self._hash = hash((label, children))
        self._text = None

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Tree):
            return NotImplemented
        return (
            self._hash == other._hash
            and self.label == other.label
            and self.children == other.children
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Tree({self.text()})"

    def is_leaf(self) -> bool:
        return not self.children

    def is_hole(self) -> bool:
        return isinstance(self.label, int)

    def is_complete(self) -> bool:
        if isinstance(self.label, int):
            return False
        return all(c.is_complete() for c in self.children)

    def node(self, address: tuple[int, ...]) -> "Tree":
        t = self
        for i in address:
            t = t.children[i - 1]
        return t

    def nodes(self) -> Iterator[tuple[tuple[int, ...], "Tree"]]:
        """All (address, subtree) pairs in preorder."""
        stack = [((), self)]
        while stack:
            addr, t = stack.pop()
            yield addr, t
            for i in range(len(t.children), 0, -1):
                stack.append((addr + (i,), t.children[i - 1]))

    def holes(self) -> list[tuple[tuple[int, ...], int]]:
        return [(addr, t.label) for addr, t in self.nodes() if t.is_hole()]

    def replace(self, address: tuple[int, ...], subtree: "Tree") -> "Tree":
        if not address:
            return subtree
        i = address[0]
        kids = list(self.children)
        kids[i - 1] = kids[i - 1].replace(address[1:], subtree)
        return Tree(self.label, tuple(kids))

    def text(self) -> str:
        if self._text is None:
            self._text = serialize_tree(self)
        return self._text

    def to_json(self):
        if self.is_hole():
            return {"hole": self.label}
        return {"label": self.label, "children": [c.to_json() for c in self.children]}


def leaf(label) -> Tree:
    return Tree(label, ())


def hole(size: int) -> Tree:
    if size < 1:
        raise ValueError("hole size must be at least 1")
    return Tree(size, ())


def binary(label, left: Tree, right: Tree) -> Tree:
    return Tree(label, (left, right))


_PLAIN = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_@#&.*+-")


def _label_text(label) -> str:
    if isinstance(label, int):
        return str(label)
    if label and all(ch in _PLAIN for ch in label) and not label.isdigit():
        return label
    return '"' + label.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_tree(t: Tree) -> str:
    """Compact text form: a, a(b,c), f(1,"x y")."""
    out = []

    def go(node: Tree):
        out.append(_label_text(node.label))
        if node.children:
            out.append("(")
            for i, c in enumerate(node.children):
                if i:
                    out.append(",")
                go(c)
            out.append(")")

    go(t)
    return "".join(out)


class TreeParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


def parse_tree(text: str) -> Tree:
    """Parse the compact text form.  Integer leaf labels become holes."""
    pos = 0
    n = len(text)

    def skip_ws():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def parse_label():
        nonlocal pos
        skip_ws()
        if pos >= n:
            raise TreeParseError("expected a label", pos)
        if text[pos] == '"':
            pos += 1
            out = []
            while pos < n and text[pos] != '"':
                if text[pos] == "\\" and pos + 1 < n:
                    pos += 1
                out.append(text[pos])
                pos += 1
            if pos >= n:
                raise TreeParseError("unterminated quoted label", pos)
            pos += 1
            return "".join(out)
        start = pos
        while pos < n and text[pos] in _PLAIN:
            pos += 1
        if pos == start:
            raise TreeParseError(f"unexpected character {text[pos]!r}", pos)
        token = text[start:pos]
        if token.isdigit():
            return int(token)
        return token

    def parse_node():
        nonlocal pos
        label = parse_label()
        skip_ws()
        children = []
        if pos < n and text[pos] == "(":
            pos += 1
            while True:
                children.append(parse_node())
                skip_ws()
                if pos < n and text[pos] == ",":
                    pos += 1
                    continue
                if pos < n and text[pos] == ")":
                    pos += 1
                    break
                raise TreeParseError("expected ',' or ')'", pos)
        if isinstance(label, int):
            if children:
                raise TreeParseError("holes cannot have children", pos)
            if label < 1:
                raise TreeParseError("hole sizes must be positive", pos)
            return hole(label)
        return Tree(label, tuple(children))

    root = parse_node()
    skip_ws()
    if pos != n:
        raise TreeParseError("trailing input after tree", pos)
    return root


def tree_from_json(obj) -> Tree:
    if not isinstance(obj, dict):
        raise TreeParseError("tree JSON must be an object", 0)
    if "hole" in obj:
        size = obj["hole"]
        if not isinstance(size, int) or size < 1:
            raise TreeParseError("hole size must be a positive integer", 0)
        return hole(size)
    if "label" not in obj:
        raise TreeParseError("tree JSON needs a 'label' field", 0)
    label = obj["label"]
    if not isinstance(label, str):
        raise TreeParseError("tree labels must be strings", 0)
    kids = obj.get("children", [])
    return Tree(label, tuple(tree_from_json(c) for c in kids))


def all_shapes(n: int, arities: tuple[int, ...]) -> list[Tree]:
    """All unlabeled ordered tree shapes with n nodes and node arities from
    the given set (0 is always allowed).  Labels are None placeholders."""
    memo: dict[int, list[Tree]] = {}

    def seqs(total: int, parts: int) -> Iterator[tuple[Tree, ...]]:
        if parts == 0:
            if total == 0:
                yield ()
            return
        for first in range(1, total - parts + 2):
            for t in build(first):
                for rest in seqs(total - first, parts - 1):
                    yield (t,) + rest

    def build(m: int) -> list[Tree]:
        if m in memo:
            return memo[m]
        out = []
        if m == 1:
            out.append(Tree("?", ()))
        for k in arities:
            if k >= 1 and m - 1 >= k:
                for kids in seqs(m - 1, k):
                    out.append(Tree("?", kids))
        memo[m] = out
        return out

    return build(n)


def count_shapes(n: int, arities: tuple[int, ...]) -> int:
    """Number of unlabeled ordered tree shapes with n nodes (arity in set)."""
    memo: dict[tuple[int, int], int] = {}
    ar = tuple(sorted(set(k for k in arities if k >= 1)))

    def shapes(m: int) -> int:
        if m == 1:
            return 1
        total = 0
        for k in ar:
            if m - 1 >= k:
                total += comps(m - 1, k)
        return total

    def comps(total: int, parts: int) -> int:
        if parts == 0:
            return 1 if total == 0 else 0
        key = (total, parts)
        if key in memo:
            return memo[key]
        acc = 0
        for first in range(1, total - parts + 2):
            rest = comps(total - first, parts - 1)
            if rest:
                acc += shapes(first) * rest
        memo[key] = acc
        return acc

    return shapes(n) if n >= 1 else 0
