import random

import pytest

from taru.oracles import brute_completions, brute_nfa_count, _enumerate_from
from taru.partition import (
    MainPathError,
    build_partition_nfa,
    extended_run_exists,
    main_path,
    up_states,
)
from taru.snfa import LabelOracle, OracleExhausted
from taru.trees import Tree, hole, leaf, parse_tree
from taru.unrolling import UnrolledAutomaton

from genutil import random_binary_automaton, random_partial_tree


class EnumeratedTreeLabel(LabelOracle):
    """Exact tree-language label for brute-force checks."""

    def __init__(self, key, elements):
        self.key = key
        self.elements = tuple(elements)
        self._set = frozenset(self.elements)

    def member(self, element):
        return element in self._set

    def size_est(self):
        return float(len(self.elements))

    def size_bound_bits(self):
        return float(max(1, len(self.elements).bit_length()))

    def new_sampler(self, stream):
        rand = stream.rand()
        elems = self.elements

        def draw():
            if not elems:
                raise OracleExhausted(self.key)
            return elems[rand.below(len(elems))]

        return draw

    def pool(self):
        return list(self.elements)

    def enumerate_all(self):
        return list(self.elements)


def exact_label_factory(automaton):
    memo = {}

    def factory(state, size):
        elems = sorted(
            _enumerate_from(automaton, memo, state, size), key=lambda t: t.text()
        )
        return EnumeratedTreeLabel(f"T:{state}:{size}", elems)

    return factory


# -- main path ----------------------------------------------------------------


def test_main_path_single_root_hole():
    mp = main_path(hole(5))
    assert mp.k == 1
    assert mp.vertices == ((),)
    assert mp.terminal_is_hole


def test_main_path_single_hole_with_parent():
    t = Tree("a", (hole(3), leaf("a")))
    mp = main_path(t)
    assert mp.k == 1
    assert mp.vertices == ((),)
    assert not mp.terminal_is_hole
    assert mp.hole_sizes == (3,)


def test_main_path_nested_chain():
    # Holes at (1,), then inside the right subtree: parents chain downward.
    t = parse_tree("a(1,a(a,3))")
    mp = main_path(t)
    assert mp.k == 2
    assert mp.holes == ((1,), (2, 2))
    assert mp.vertices == ((), (2,))
    assert not mp.terminal_is_hole
    assert mp.vertex_sizes[0] > mp.vertex_sizes[1]


def test_main_path_shared_parent():
    # The last two holes share a parent: the chain ends at the deeper hole.
    t = parse_tree("a(1,a(2,4))")
    mp = main_path(t)
    assert mp.k == 3
    assert mp.holes == ((1,), (2, 1), (2, 2))
    assert mp.vertices == ((), (2,), (2, 2))
    assert mp.terminal_is_hole
    assert mp.hole_sizes == (1, 2, 4)


def test_main_path_rejects_non_nested():
    t = parse_tree("a(a(1,a),a(1,a))")
    with pytest.raises(MainPathError):
        main_path(t)


def test_main_path_rejects_complete():
    with pytest.raises(MainPathError):
        main_path(parse_tree("a(a,a)"))


def test_random_partial_trees_have_main_paths(catalan):
    rng = random.Random(13)
    for _ in range(200):
        t = random_partial_tree(rng, {"a"}, rng.choice([5, 7, 9]), rng.randint(0, 4))
        if t.is_complete():
            continue
        mp = main_path(t)
        path_nodes = set(mp.vertices)
        for addr, _ in t.holes():
            assert addr in path_nodes or addr[:-1] in path_nodes


# -- extended runs ------------------------------------------------------------


def test_extended_run_single_hole(catalan):
    u = UnrolledAutomaton(catalan, 7)
    assert extended_run_exists(u, hole(7), "r")


def test_extended_run_complete_matches_accepts(fig3):
    u = UnrolledAutomaton(fig3, 7)
    t = parse_tree("a(a(a,a),a(a,a))")
    assert extended_run_exists(u, t, "s") == fig3.accepts(t)
    t_bad = parse_tree("a(a(a,a),a)")
    assert extended_run_exists(u, t_bad, "s") == fig3.accepts(t_bad)


def test_extended_run_with_nonempty_filter_matches_completions(fig3):
    u = UnrolledAutomaton(fig3, 9)
    alive = u.nonempty_levels()
    rng = random.Random(17)
    for _ in range(120):
        t = random_partial_tree(rng, {"a"}, 9, rng.randint(0, 4))
        has = extended_run_exists(u, t, "s", hole_filter=lambda s, h: alive[(s, h)])
        completions = brute_completions(fig3, t, "s", 9, budget=None)
        assert has == (len(completions) > 0)


# -- the counting reduction ----------------------------------------------------


def _check_exact(automaton, t, state, size):
    u = UnrolledAutomaton(automaton, size)
    built = build_partition_nfa(u, t, state, exact_label_factory(automaton))
    got = brute_nfa_count(built.nfa, built.word_length, budget=None)
    want = len(brute_completions(automaton, t, state, size, budget=None))
    assert got == want, f"{t.text()} from {state}@{size}: nfa {got} != brute {want}"
    return got


def test_partition_nfa_complete_tree(fig3):
    t = parse_tree("a(a(a,a),a(a,a))")
    assert _check_exact(fig3, t, "s", 7) == 1
    t2 = parse_tree("a(a(a,a),a)")
    assert _check_exact(fig3, t2, "s", 5) == 0


def test_partition_nfa_root_hole_counts_whole_slice(fig3):
    from taru.oracles import brute_slice

    for size in (7, 9):
        got = _check_exact(fig3, hole(size), "s", size)
        assert got == len(brute_slice(fig3, size, budget=None))


def test_partition_nfa_shared_parent_fixture(catalan):
    t = parse_tree("a(1,a(2,4))")
    _check_exact(catalan, t, "r", 9)
    t2 = parse_tree("a(1,a(1,3))")
    _check_exact(catalan, t2, "r", 7)


def test_partition_nfa_random_exactness(fig3, catalan, mixed):
    rng = random.Random(29)
    cases = 0
    for automaton, state in ((fig3, "s"), (catalan, "r"), (mixed, "u")):
        for _ in range(80):
            size = rng.choice([5, 7, 9])
            t = random_partial_tree(rng, {"a"}, size, rng.randint(0, 5))
            if t.is_complete():
                continue
            _check_exact(automaton, t, state, size)
            cases += 1
    assert cases >= 150


def test_partition_nfa_random_automata_exactness():
    rng = random.Random(31)
    cases = 0
    while cases < 60:
        automaton = random_binary_automaton(rng)
        state = sorted(automaton.states)[rng.randrange(len(automaton.states))]
        size = rng.choice([5, 7])
        t = random_partial_tree(rng, sorted(automaton.alphabet), size, rng.randint(1, 4))
        if t.is_complete():
            continue
        _check_exact(automaton, t, state, size)
        cases += 1


def test_partition_nfa_size_bound(fig3):
    u = UnrolledAutomaton(fig3, 9)
    rng = random.Random(37)
    bound = 3 * (9 * fig3.size) ** 4
    for _ in range(40):
        t = random_partial_tree(rng, {"a"}, 9, rng.randint(1, 4))
        if t.is_complete():
            continue
        built = build_partition_nfa(u, t, "s", exact_label_factory(fig3))
        assert built.nfa.size() <= bound
