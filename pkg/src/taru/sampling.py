"""Top-down uniform tree sampling via partial trees.

A sample from the size-i language of a state is grown from a single hole of
size i.  Each round expands the smallest hole into every compatible root
symbol and left/right size split; one branch is chosen with probability
proportional to an estimate of how many completions it admits.  A final
acceptance coin with probability 1/(2 * branch-product * slice-estimate)
makes accepted outputs exactly uniform, because the product of branch
probabilities cancels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .rng import Stream
from .trees import Tree, hole, leaf

FAIL = "FAIL"
EMPTY = "EMPTY"


class SamplingError(ValueError):
    pass


def min_hole(t: Tree) -> tuple[int, ...]:
    """Address of the smallest hole; ties go to the lexicographically
    smallest node address."""
    best = None
    for addr, size in t.holes():
        key = (size, addr)
        if best is None or key < best:
            best = key
    if best is None:
        raise SamplingError("tree is complete, no hole to pick")
    return best[1]


@dataclass(frozen=True)
class ExtensionChoice:
    hole: tuple[int, ...]
    symbol: str
    left: int
    right: int

    @property
    def is_leaf_fill(self) -> bool:
        return self.left == 0


def immediate_extensions(
    t: Tree, address: tuple[int, ...], alphabet
) -> list[tuple[ExtensionChoice, Tree]]:
    """All one-step expansions of the hole at the address.

    A hole of size 1 becomes a leaf; a hole of size v >= 3 becomes a node
    with two fresh holes of sizes j and v-1-j for each j in [1, v-2].  The
    resulting partial trees partition the completions of t over that hole.
    Size-2 holes admit no expansion (no two-node trees with 0/2 children).
    """
    node = t.node(address)
    if not node.is_hole():
        raise SamplingError(f"no hole at address {address}")
    v = node.label
    out = []
    symbols = sorted(alphabet)
    if v == 1:
        for a in symbols:
            out.append((ExtensionChoice(address, a, 0, 0), t.replace(address, leaf(a))))
        return out
    for a in symbols:
        for j in range(1, v - 1):
            sub = Tree(a, (hole(j), hole(v - 1 - j)))
            out.append((ExtensionChoice(address, a, j, v - 1 - j), t.replace(address, sub)))
    return out


@dataclass
class SampleTrace:
    passes: int = 0
    branch_product: float = 1.0
    clamped: bool = False


def sample_tree(
    level: int,
    alphabet,
    estimator: Callable[[Tree], float],
    slice_estimate: float,
    stream: Stream,
    trace: Optional[SampleTrace] = None,
):
    """One draw from the size-`level` trees of the language behind
    `estimator`; returns a complete Tree, FAIL, or EMPTY."""
    if slice_estimate <= 0.0:
        return EMPTY
    rand = stream.rand()
    t = hole(level)
    phi = 1.0
    while not t.is_complete():
        u = min_hole(t)
        options = immediate_extensions(t, u, alphabet)
        weights = [estimator(candidate) for _, candidate in options]
        total = sum(weights)
        if total <= 0.0:
            return FAIL
        k = rand.weighted_index(weights)
        phi *= weights[k] / total
        t = options[k][1]
        if trace is not None:
            trace.passes += 1
    if trace is not None:
        trace.branch_product = phi
    accept = 1.0 / (2.0 * phi * slice_estimate)
    if accept > 1.0:
        accept = 1.0
        if trace is not None:
            trace.clamped = True
    if rand.bernoulli(accept):
        return t
    return FAIL
