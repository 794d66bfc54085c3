import pytest

from taru.automata import TreeAutomaton
from taru.cq import Atom, ConjunctiveQuery, Database, Var
from taru.trees import parse_tree


@pytest.fixture(scope="session")
def catalan():
    """Single-state automaton accepting every binary tree over one symbol."""
    return TreeAutomaton(
        {"r"}, {"a"}, [("r", "a", ("r", "r")), ("r", "a", ())], "r"
    )


@pytest.fixture(scope="session")
def fig3():
    """Accepts trees containing a node whose two children are both internal.

    Built from that stated behavior and checked against brute force; the
    ambiguity is real: the 13-node witness tree below has exactly two runs.
    """
    return TreeAutomaton(
        {"s", "q", "r"},
        {"a"},
        [
            ("s", "a", ("q", "q")),
            ("s", "a", ("s", "r")),
            ("s", "a", ("r", "s")),
            ("q", "a", ("r", "r")),
            ("r", "a", ("r", "r")),
            ("r", "a", ()),
        ],
        "s",
    )


@pytest.fixture(scope="session")
def fig3_t1():
    # Size 9, every node has a leaf child: rejected.
    return parse_tree("a(a(a(a(a,a),a),a),a)")


@pytest.fixture(scope="session")
def fig3_t2():
    # Size 13 with exactly two doubly-internal nodes: accepted, two runs.
    return parse_tree("a(a(a(a,a),a(a,a)),a(a(a,a),a))")


@pytest.fixture(scope="session")
def root_witness():
    """Both children of the root must be internal; counts stay small."""
    return TreeAutomaton(
        {"s", "q", "r"},
        {"a"},
        [
            ("s", "a", ("q", "q")),
            ("q", "a", ("r", "r")),
            ("r", "a", ("r", "r")),
            ("r", "a", ()),
        ],
        "s",
    )


@pytest.fixture(scope="session")
def mixed():
    """Two derivation channels per split with genuinely overlapping products,
    so the overlap fractions are statistical rather than 0/1."""
    return TreeAutomaton(
        {"u", "p", "l", "r"},
        {"a"},
        [
            ("u", "a", ("p", "r")),
            ("u", "a", ("r", "p")),
            ("p", "a", ("l", "r")),
            ("l", "a", ()),
            ("r", "a", ("r", "r")),
            ("r", "a", ()),
        ],
        "u",
    )


@pytest.fixture(scope="session")
def ternary_one_tree():
    """3-ary automaton accepting exactly f(b,b,b)."""
    return TreeAutomaton(
        {"s", "p"}, {"f", "b"}, [("s", "f", ("p", "p", "p")), ("p", "b", ())], "s"
    )


@pytest.fixture(scope="session")
def q1_d1():
    q1 = ConjunctiveQuery(
        "Q1",
        ("x",),
        (
            Atom("G", (Var("x"),)),
            Atom("E", (Var("x"), Var("y"))),
            Atom("E", (Var("x"), Var("z"))),
            Atom("C", (Var("y"),)),
            Atom("M", (Var("z"),)),
        ),
    )
    d1 = Database(
        {
            "G": {("a",), ("b",)},
            "E": {("a", "c1"), ("b", "c1"), ("b", "c2"), ("b", "c3")},
            "C": {("c1",), ("c2",)},
            "M": {("c3",)},
        }
    )
    return q1, d1
