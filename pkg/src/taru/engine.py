"""Slice counting and uniform sampling for binary tree automata.

The engine estimates N(s, i), the number of size-i trees derivable from each
state s, level by level.  Level 1 is exact.  At level i every derivation
channel (root symbol, left size, child-state pair) contributes the product of
its children's estimates, discounted by the measured fraction of its trees
not already produced by an earlier channel with the same symbol and split;
channels with different symbols or splits never overlap, so only true
ambiguity is ever sampled.

Alongside the estimates the engine stores, per (state, level), a sketch of
uniform sample trees.  Sketches supply the overlap measurements and back the
tree-language oracles of the completion-counting NFAs used while sampling.
Samples are drawn by growing partial trees top down;
the branch estimates come from the completion counter and are memoized per
(state, level, partial tree), which makes each accepted draw exactly uniform
conditioned on the table (acceptance cancels the branch probabilities).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .automata import TreeAutomaton, decode_tree, encode_binary
from .config import Config, EngineParams, resolve_engine_params
from .partition import build_partition_nfa
from .rng import Stream
from .sampling import EMPTY, FAIL, SampleTrace, sample_tree
from .snfa import LabelOracle, NfaCounter, OracleExhausted
from .trees import Tree, leaf
from .unrolling import UnrolledAutomaton

BOT = "BOT"


class EngineFail(RuntimeError):
    """A sample-set slot could not be filled within its trial budget."""


@dataclass
class EngineDiagnostics:
    clamped_accepts: int = 0
    sample_failures: int = 0
    nfa_clamped: int = 0
    nfa_walk_caps: int = 0
    nfa_exhausted: int = 0

    def as_warnings(self) -> dict:
        return {
            "clamped_accepts": self.clamped_accepts,
            "sample_failures": self.sample_failures,
            "nfa_clamped": self.nfa_clamped,
            "nfa_walk_caps": self.nfa_walk_caps,
            "nfa_exhausted": self.nfa_exhausted,
        }


class _SketchLabel(LabelOracle):
    """Tree-language oracle for (state, level), answered from the engine
    table: membership by the automaton, size by the level estimate, samples
    by replaying the stored sketch in a per-consumer order without
    replacement."""

    def __init__(self, engine: "Engine", state: str, level: int):
        self.key = f"T:{state}:{level}"
        self.engine = engine
        self.state = state
        self.level = level

    def member(self, element) -> bool:
        return isinstance(element, Tree) and self.engine.unrolled.member(
            element, self.state, self.level
        )

    def size_est(self) -> float:
        return self.engine.estimate(self.state, self.level)

    def size_bound_bits(self) -> float:
        # Crude but sufficient: trees of size i over |alphabet| symbols.
        i = self.level
        return 2.0 * i + i * math.log2(max(2, len(self.engine.unrolled.base.alphabet)))

    def pool(self) -> Optional[list]:
        if self.engine.params.refresh_epochs:
            return None
        return self.engine.sketch(self.state, self.level)

    def new_sampler(self, stream: Stream):
        engine = self.engine
        state, level = self.state, self.level
        if engine.params.refresh_epochs:
            # Lazily materialized stream of fresh draws; consuming a prefix
            # of an i.i.d. sequence is a without-replacement draw from it.
            counter = [0]
            alpha = engine.params.alpha

            def draw_fresh():
                idx = counter[0]
                if idx >= alpha:
                    raise OracleExhausted(self.key)
                counter[0] += 1
                return engine.sketch_entry(state, level, idx)

            return draw_fresh
        pool = engine.sketch(state, level)
        order = list(range(len(pool)))
        stream.rand().shuffle(order)
        pos = [0]

        def draw():
            if pos[0] >= len(order):
                raise OracleExhausted(self.key)
            item = pool[order[pos[0]]]
            pos[0] += 1
            return item

        return draw


class Engine:
    def __init__(self, automaton: TreeAutomaton, n: int, config: Config):
        automaton.require_binary()
        self.base = automaton
        self.n = n
        self.config = config
        self.params: EngineParams = resolve_engine_params(config, n, automaton.size)
        self.unrolled = UnrolledAutomaton(automaton, n)
        self.root_stream = Stream.from_seed(config.seed).child("engine")
        self.est_table: dict[tuple[str, int], float] = {}
        self._sketches: dict[tuple[str, int, int], list[Tree]] = {}
        self._ep_memo: dict = {}
        self.diag = EngineDiagnostics()
        self.epoch = 0
        self._built = False

    # -- table access ------------------------------------------------------

    def estimate(self, state: str, level: int) -> float:
        return self.est_table.get((state, level), 0.0)

    def sketch(self, state: str, level: int) -> list[Tree]:
        """The full sample set for (state, level) in the current epoch."""
        key = (state, level, self.epoch)
        pool = self._sketches.get(key)
        if pool is None:
            pool = []
            self._sketches[key] = pool
        target = self.params.alpha
        while len(pool) < target:
            pool.append(self._draw_sketch_entry(state, level, len(pool)))
        return pool

    def sketch_entry(self, state: str, level: int, index: int) -> Tree:
        key = (state, level, self.epoch)
        pool = self._sketches.get(key)
        if pool is None:
            pool = []
            self._sketches[key] = pool
        while len(pool) <= index:
            pool.append(self._draw_sketch_entry(state, level, len(pool)))
        return pool[index]

    def _draw_sketch_entry(self, state: str, level: int, position: int) -> Tree:
        for attempt in range(self.config.fill_attempts):
            stream = self.root_stream.child(
                "sketch", self.epoch, state, level, position, attempt
            )
            t = self.sample(state, level, stream)
            if isinstance(t, Tree):
                if not self.unrolled.member(t, state, level):
                    raise AssertionError(
                        "sampled tree fails membership from its own (state, level)"
                    )
                return t
            if t == EMPTY:
                raise EngineFail(
                    f"sample set requested for empty cell ({state}, {level})"
                )
            self.diag.sample_failures += 1
        raise EngineFail(
            f"could not fill sample set slot ({state}, {level}, {position}) "
            f"within {self.config.fill_attempts} attempts"
        )

    # -- estimates -----------------------------------------------------------

    def build(self) -> float:
        if self._built:
            return self.estimate(self.base.initial, self.n)
        for s in self.base.states:
            self.est_table[(s, 1)] = float(self.unrolled.leaf_count(s))
        for i in range(2, self.n + 1):
            if self.params.refresh_epochs:
                self.epoch = i
                self._ep_memo.clear()
            for s in sorted(self.base.states):
                self.est_table[(s, i)] = self._estimate_level_state(s, i)
            if not self.params.refresh_epochs and 2 <= i <= self.n - 2:
                # Materialize eagerly in level order so later levels never
                # recurse more than one level deep for their samples.
                for s in sorted(self.base.states):
                    if self.est_table[(s, i)] > 0.0:
                        self.sketch(s, i)
        self._built = True
        return self.estimate(self.base.initial, self.n)

    def _estimate_level_state(self, state: str, level: int) -> float:
        total = 0.0
        for (symbol, left), pairs in self.unrolled.groups(state, level):
            right = level - 1 - left
            live = [
                (q, r)
                for (q, r) in pairs
                if self.estimate(q, left) > 0.0 and self.estimate(r, right) > 0.0
            ]
            if not live:
                continue
            for pos, (q, r) in enumerate(live):
                weight = self.estimate(q, left) * self.estimate(r, right)
                if pos == 0:
                    frac = 1.0
                elif self.params.fresh_trials:
                    frac = self._overlap_fresh(state, level, symbol, left, live, pos)
                else:
                    frac = self._overlap_pairs(state, level, symbol, left, live, pos)
                total += weight * frac
        return total

    def _overlap_pairs(self, state, level, symbol, left, live, pos) -> float:
        """Fraction of the channel's sketch-pair products not derivable by an
        earlier channel with the same symbol and split."""
        right = level - 1 - left
        q, r = live[pos]
        earlier = live[:pos]
        derive = self.base.derive_states
        lpool = self.sketch(q, left)
        rpool = self.sketch(r, right)

        def fresh(t1: Tree, t2: Tree) -> bool:
            s1 = derive(t1)
            s2 = derive(t2)
            return not any(q2 in s1 and r2 in s2 for (q2, r2) in earlier)

        if len(lpool) * len(rpool) <= self.params.pair_cap:
            good = sum(1 for t1 in lpool for t2 in rpool if fresh(t1, t2))
            return good / (len(lpool) * len(rpool))
        rand = self.root_stream.child(
            "overlap", self.epoch, state, level, symbol, left, pos
        ).rand()
        good = 0
        trials = self.params.h_trials
        for _ in range(trials):
            t1 = lpool[rand.below(len(lpool))]
            t2 = rpool[rand.below(len(rpool))]
            if fresh(t1, t2):
                good += 1
        return good / trials

    def _overlap_fresh(self, state, level, symbol, left, live, pos) -> float:
        """Overlap fraction from fresh sampler draws, with an oversampling
        allowance of failures."""
        right = level - 1 - left
        q, r = live[pos]
        earlier = live[:pos]
        derive = self.base.derive_states
        stream = self.root_stream.child(
            "overlap-fresh", self.epoch, state, level, symbol, left, pos
        )
        trials = self.params.h_trials
        budget = self.params.h_budget
        good = 0
        collected = 0
        attempt = 0
        while collected < trials:
            if attempt >= budget:
                raise EngineFail(
                    f"overlap estimation at ({state}, {level}) exhausted its "
                    f"{budget}-draw budget"
                )
            t1 = self.sample(q, left, stream.child("l", attempt))
            t2 = self.sample(r, right, stream.child("r", attempt))
            attempt += 1
            if not (isinstance(t1, Tree) and isinstance(t2, Tree)):
                continue
            collected += 1
            s1, s2 = derive(t1), derive(t2)
            if not any(q2 in s1 and r2 in s2 for (q2, r2) in earlier):
                good += 1
        return good / trials

    # -- completion estimates ------------------------------------------------

    def estimate_partition(self, t: Tree, state: str, level: int) -> float:
        """Estimated number of completions of the partial tree from
        (state, level); exact zero iff there are none, and exact one/zero for
        complete inputs.  Memoized per epoch."""
        if t.full_size != level:
            raise ValueError(
                f"partial tree has full size {t.full_size}, expected {level}"
            )
        if t.is_complete():
            ok = t.size == level and state in self.base.derive_states(t)
            return 1.0 if ok else 0.0
        key = (state, level, t)
        hit = self._ep_memo.get(key)
        if hit is not None:
            return hit
        built = build_partition_nfa(
            self.unrolled, t, state, lambda s, i: _SketchLabel(self, s, i)
        )
        nfa = built.nfa
        value = 0.0
        if nfa.transitions:
            counter = NfaCounter(
                nfa,
                self.params.nfa,
                self.root_stream.child("part", self.epoch, state, level, t.text()),
                fresh_trials=self.params.fresh_trials,
                fill_attempts=self.config.fill_attempts,
            )
            value = counter.run()
            self.diag.nfa_clamped += counter.diag.clamped
            self.diag.nfa_walk_caps += counter.diag.walk_cap_hits
            self.diag.nfa_exhausted += counter.diag.oracle_exhausted
        self._ep_memo[key] = value
        return value

    # -- sampling --------------------------------------------------------------

    def sample(self, state: str, level: int, stream: Stream):
        """One tree from (state, level): a Tree, FAIL, or EMPTY."""
        est = self.estimate(state, level)
        if est <= 0.0:
            return EMPTY
        if level == 1:
            symbols = sorted(set(self.base.leaf_symbols.get(state, ())))
            return leaf(symbols[stream.rand().below(len(symbols))])
        trace = SampleTrace()
        result = sample_tree(
            level,
            self.base.alphabet,
            lambda partial: self.estimate_partition(partial, state, level),
            est,
            stream,
            trace,
        )
        if trace.clamped:
            self.diag.clamped_accepts += 1
        return result


@dataclass
class CountResult:
    estimate: float
    certificate: dict
    engine: Optional[Engine] = None


def _certificate(config: Config, mode: str, extra: Optional[dict] = None) -> dict:
    cert = {
        "mode": mode,
        "profile": config.profile,
        "epsilon": config.epsilon,
        "delta": config.delta,
        "seed": config.seed,
    }
    if extra:
        cert.update(extra)
    return cert


def fpras_bta(automaton: TreeAutomaton, n: int, config: Config) -> CountResult:
    """Randomized (1 +- epsilon) slice count for a binary tree automaton."""
    automaton.require_binary()
    if n < 1:
        raise ValueError("slice size must be at least 1")
    if n % 2 == 0:
        return CountResult(0.0, _certificate(config, "fpras", {"exact": "even-size"}))
    engine = Engine(automaton, n, config)
    estimate = engine.build()
    cert = _certificate(config, "fpras", {"warnings": engine.diag.as_warnings()})
    return CountResult(estimate, cert, engine)


def fpras_ta(automaton: TreeAutomaton, n: int, config: Config) -> CountResult:
    """Slice count for a general tree automaton via the binary encoding at
    size 2n-1."""
    if n < 1:
        raise ValueError("slice size must be at least 1")
    if n == 1:
        exact = float(len(set(automaton.leaf_symbols.get(automaton.initial, ()))))
        return CountResult(exact, _certificate(config, "fpras", {"exact": "leaf-count"}))
    encoded = encode_binary(automaton)
    result = fpras_bta(encoded, 2 * n - 1, config)
    result.certificate["encoded"] = True
    return result


class LanguageSampler:
    """Draws uniform trees from the size-n slice after one counting run.

    Each draw retries the core sampler up to three times; every emitted tree
    is membership-checked before being returned.  For non-binary automata the
    draw happens in the encoded binary language and is decoded back.
    """

    def __init__(self, automaton: TreeAutomaton, n: int, config: Config):
        self.automaton = automaton
        self.n = n
        self.config = config
        self.encoded = not automaton.is_binary()
        work = encode_binary(automaton) if self.encoded else automaton
        target = 2 * n - 1 if self.encoded else n
        self.work_n = target
        self.empty = target % 2 == 0
        self.engine: Optional[Engine] = None
        if not self.empty:
            self.engine = Engine(work, target, self.config)
            self.engine.build()
            if self.engine.estimate(work.initial, target) <= 0.0:
                self.empty = True
        self._draw_stream = Stream.from_seed(config.seed).child("draws")
        self._next = 0

    def estimate(self) -> float:
        if self.empty or self.engine is None:
            return 0.0
        return self.engine.estimate(self.engine.base.initial, self.work_n)

    def draw(self):
        """A uniform tree, FAIL, or EMPTY."""
        index = self._next
        self._next += 1
        if self.empty or self.engine is None:
            return EMPTY
        for attempt in range(3):
            t = self.engine.sample(
                self.engine.base.initial,
                self.work_n,
                self._draw_stream.child(index, attempt),
            )
            if isinstance(t, Tree):
                out = decode_tree(t) if self.encoded else t
                if out.size != self.n or not self.automaton.accepts(out):
                    raise AssertionError("sampler emitted a non-member tree")
                return out
            if t == EMPTY:
                return EMPTY
        return FAIL


def sample_language(automaton: TreeAutomaton, n: int, config: Config) -> LanguageSampler:
    return sample_language_handle(automaton, n, config)


def sample_language_handle(automaton: TreeAutomaton, n: int, config: Config) -> LanguageSampler:
    return LanguageSampler(automaton, n, config)


class FpausSampler:
    """Almost-uniform sampler: retries draws enough times that the bottom
    symbol is returned with probability at most delta on nonempty slices, and
    always on empty ones."""

    def __init__(self, automaton: TreeAutomaton, n: int, config: Config):
        self.handle = LanguageSampler(automaton, n, config)
        self.retries = max(2, math.ceil(math.log2(1.0 / config.delta)) + 1)

    def draw(self):
        if self.handle.empty:
            return BOT
        for _ in range(self.retries):
            t = self.handle.draw()
            if isinstance(t, Tree):
                return t
            if t == EMPTY:
                return BOT
        return BOT


def fpaus(automaton: TreeAutomaton, n: int, config: Config) -> FpausSampler:
    return FpausSampler(automaton, n, config)
