"""Labels, the neighborhood difference, and the two dissemination engines."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .graph import BLOCK_NAMES, CounterexampleParams, Graph, resolve_sizes

__all__ = [
    "ONE",
    "UNLABELED",
    "ZERO",
    "BlockCounts",
    "ExpertAssignment",
    "Labeling",
    "Outcome",
    "Round",
    "Trace",
    "Verdict",
    "delta",
    "delta_all",
    "disseminate",
    "disseminate_iterative",
    "disseminate_noniterative",
    "expected_delta",
    "majority_outcome",
    "trace_records",
]

ONE = 1
ZERO = 0
UNLABELED = -1

TRACE_VERTEX_CAP = 10_000
_PACK_BITS = 15


@dataclass(frozen=True, eq=False)
class ExpertAssignment:
    e1: np.ndarray
    e0: np.ndarray

    def __post_init__(self):
        for name in ("e1", "e0"):
            arr = np.unique(np.asarray(getattr(self, name), dtype=np.int64))
            object.__setattr__(self, name, arr)
        if np.intersect1d(self.e1, self.e0).size:
            raise ValueError("E1 and E0 overlap")

    @classmethod
    def empty(cls) -> "ExpertAssignment":
        return cls(np.empty(0, np.int64), np.empty(0, np.int64))

    def __eq__(self, other) -> bool:
        return (isinstance(other, ExpertAssignment)
                and np.array_equal(self.e1, other.e1)
                and np.array_equal(self.e0, other.e0))

    def __hash__(self):
        return hash((self.e1.tobytes(), self.e0.tobytes()))

    @property
    def size(self) -> int:
        return int(self.e1.size + self.e0.size)

    def check(self, n: int) -> None:
        for arr in (self.e1, self.e0):
            if arr.size and (arr[0] < 0 or arr[-1] >= n):
                raise ValueError(f"expert index outside 0..{n - 1}")

    def initial_labels(self, n: int) -> np.ndarray:
        self.check(n)
        labels = np.full(n, UNLABELED, dtype=np.int8)
        labels[self.e1] = ONE
        labels[self.e0] = ZERO
        return labels

    def to_text(self) -> str:
        return ("E1: " + " ".join(map(str, self.e1)) + "\n"
                + "E0: " + " ".join(map(str, self.e0)) + "\n")

    @classmethod
    def from_text(cls, text: str) -> "ExpertAssignment":
        sets = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, rest = line.partition(":")
            sets[key.strip()] = [int(t) for t in rest.split()]
        if set(sets) != {"E1", "E0"}:
            raise ValueError("assignment text needs exactly the lines 'E1:' and 'E0:'")
        return cls(np.array(sets["E1"], np.int64), np.array(sets["E0"], np.int64))


@dataclass(frozen=True, eq=False)
class Labeling:
    labels: np.ndarray
    ones: int = field(init=False)
    zeros: int = field(init=False)
    unlabeled: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ones", int(np.count_nonzero(self.labels == ONE)))
        object.__setattr__(self, "zeros", int(np.count_nonzero(self.labels == ZERO)))
        object.__setattr__(self, "unlabeled", int(np.count_nonzero(self.labels == UNLABELED)))

    @property
    def n(self) -> int:
        return int(self.labels.size)

    def __eq__(self, other) -> bool:
        return isinstance(other, Labeling) and np.array_equal(self.labels, other.labels)


@dataclass(frozen=True, eq=False)
class Round:
    index: int
    ones: np.ndarray
    zeros: np.ndarray
    stalled: bool = False


@dataclass(frozen=True, eq=False)
class Trace:
    rounds: tuple[Round, ...]
    coins_used: int
    final: Labeling

    @property
    def stalled(self) -> bool:
        return any(r.stalled for r in self.rounds)


class Outcome(str, enum.Enum):
    ONE_MAJORITY = "OneMajority"
    ZERO_MAJORITY = "ZeroMajority"
    NO_STRICT_MAJORITY = "NoStrictMajority"


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    ones: int
    zeros: int


# ---------------------------------------------------------------------------


def _label_counts(graph: Graph, ones: np.ndarray, zeros: np.ndarray):
    """Per-vertex (#neighbors in ``ones``, #neighbors in ``zeros``)."""
    if graph.n < (1 << _PACK_BITS):
        packed = ones.astype(np.int32) + (zeros.astype(np.int32) << _PACK_BITS)
        s = graph.neighbor_sum(packed)
        return s & ((1 << _PACK_BITS) - 1), s >> _PACK_BITS
    return (graph.neighbor_sum(ones.astype(np.int32)),
            graph.neighbor_sum(zeros.astype(np.int32)))


def delta_all(graph: Graph, assignment: ExpertAssignment) -> np.ndarray:
    """|N(v) & E1| - |N(v) & E0| for every vertex, experts included."""
    assignment.check(graph.n)
    signed = np.zeros(graph.n, dtype=np.int32)
    signed[assignment.e1] = 1
    signed[assignment.e0] = -1
    return graph.neighbor_sum(signed)


def delta(graph: Graph, assignment: ExpertAssignment, v: int) -> int:
    if np.isin(v, assignment.e1) or np.isin(v, assignment.e0):
        raise ValueError(f"vertex {v} is an expert")
    nb = graph.neighbors(v)
    return int(np.isin(nb, assignment.e1).sum() - np.isin(nb, assignment.e0).sum())


def _flip(rng: np.random.Generator, vertices: np.ndarray, labels: np.ndarray) -> None:
    # one fair coin per vertex, ascending vertex order
    labels[vertices] = rng.integers(0, 2, size=vertices.size).astype(np.int8)


def disseminate_noniterative(graph: Graph, assignment: ExpertAssignment,
                             tie_seed: int) -> Labeling:
    return disseminate(graph, assignment, "noniterative", tie_seed).final


def disseminate_iterative(graph: Graph, assignment: ExpertAssignment,
                          tie_seed: int) -> Trace:
    return disseminate(graph, assignment, "iterative", tie_seed)


def disseminate(graph: Graph, assignment: ExpertAssignment, mode: str,
                tie_seed: int) -> Trace:
    """Run one dissemination and return its trace.

    Non-iterative mode is a single round in which every non-expert without a
    strict majority of expert neighbors flips a coin.  Iterative mode repeats
    rounds against all labeled vertices; a vertex with no labeled neighbor
    waits, and a round that labels nobody ends the process with coins for
    whoever is left.
    """
    labels = assignment.initial_labels(graph.n)
    rng = np.random.default_rng(tie_seed)

    if mode == "noniterative":
        d = delta_all(graph, assignment)
        free = labels == UNLABELED
        labels[free & (d > 0)] = ONE
        labels[free & (d < 0)] = ZERO
        tied = np.flatnonzero(free & (d == 0))
        _flip(rng, tied, labels)
        rnd = Round(1, np.flatnonzero(free & (labels == ONE)),
                    np.flatnonzero(free & (labels == ZERO)))
        return Trace((rnd,), int(tied.size), Labeling(labels))
    if mode != "iterative":
        raise ValueError(f"unknown dissemination mode {mode!r}")

    a, b = _label_counts(graph, labels == ONE, labels == ZERO)
    rounds: list[Round] = []
    coins = 0
    while True:
        free = labels == UNLABELED
        if not free.any():
            break
        idx = len(rounds) + 1
        new_one = np.flatnonzero(free & (a > b))
        new_zero = np.flatnonzero(free & (a < b))
        tied = np.flatnonzero(free & (a == b) & (a > 0))
        if new_one.size + new_zero.size + tied.size == 0:
            rest = np.flatnonzero(free)
            _flip(rng, rest, labels)
            coins += rest.size
            rounds.append(Round(idx, rest[labels[rest] == ONE], rest[labels[rest] == ZERO],
                                stalled=True))
            break
        labels[new_one] = ONE
        labels[new_zero] = ZERO
        _flip(rng, tied, labels)
        coins += tied.size
        got_one = np.union1d(new_one, tied[labels[tied] == ONE])
        got_zero = np.union1d(new_zero, tied[labels[tied] == ZERO])
        rounds.append(Round(idx, got_one, got_zero))
        if got_one.size + got_zero.size < free.sum():
            m1 = np.zeros(graph.n, dtype=bool)
            m0 = np.zeros(graph.n, dtype=bool)
            m1[got_one] = True
            m0[got_zero] = True
            da, db = _label_counts(graph, m1, m0)
            a = a + da
            b = b + db
    return Trace(tuple(rounds), coins, Labeling(labels))


def majority_outcome(labeling: Labeling) -> Verdict:
    if labeling.unlabeled:
        raise ValueError(f"{labeling.unlabeled} vertices are still unlabeled")
    n = labeling.n
    if 2 * labeling.ones > n:
        outcome = Outcome.ONE_MAJORITY
    elif 2 * labeling.zeros > n:
        outcome = Outcome.ZERO_MAJORITY
    else:
        outcome = Outcome.NO_STRICT_MAJORITY
    return Verdict(outcome, labeling.ones, labeling.zeros)


def trace_records(trace: Trace) -> Iterator[dict]:
    """One JSON-ready record per round; vertex lists are dropped for large graphs."""
    big = trace.final.n > TRACE_VERTEX_CAP
    for r in trace.rounds:
        rec = {"round": r.index, "new_ones": int(r.ones.size), "new_zeros": int(r.zeros.size),
               "stalled": r.stalled}
        if not big:
            rec["ones"] = r.ones.tolist()
            rec["zeros"] = r.zeros.tolist()
        yield rec


# ---------------------------------------------------------------------------
# block-level oracle for the counterexample
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockCounts:
    i1: int = 0
    j1: int = 0
    o1: int = 0
    p1: int = 0
    d1: int = 0
    i0: int = 0
    j0: int = 0
    o0: int = 0
    p0: int = 0
    d0: int = 0

    def diff(self, block: str) -> int:
        b = block.lower()
        return getattr(self, b + "1") - getattr(self, b + "0")

    @classmethod
    def from_assignment(cls, graph: Graph, assignment: ExpertAssignment) -> "BlockCounts":
        if not graph.is_counterexample:
            raise ValueError("block counts need a counterexample graph")
        kw = {}
        for name in BLOCK_NAMES:
            s, e = graph.blocks[name]
            kw[name.lower() + "1"] = int(((assignment.e1 >= s) & (assignment.e1 < e)).sum())
            kw[name.lower() + "0"] = int(((assignment.e0 >= s) & (assignment.e0 < e)).sum())
        return cls(**kw)


def _block_weights(params: CounterexampleParams) -> dict[tuple[str, str], float]:
    w = {}
    for x in "IJOP":
        w[x, x] = 1.0
    for x in "IJP":
        w["O", x] = w[x, "O"] = 1.0
    w["I", "J"] = w["J", "I"] = params.p_ij
    w["I", "P"] = w["P", "I"] = params.p_ip
    w["J", "P"] = w["P", "J"] = params.p_jp
    return w


def expected_delta(block: str, counts: BlockCounts, params: CounterexampleParams,
                   n: int) -> float:
    """Mean of delta(v) for a non-expert v in ``block`` given per-block expert
    counts: each block's (ones - zeros) weighted by its connection density to
    ``block``.  D is left out; a J vertex's pendant adds at most one."""
    if block not in ("I", "J", "O", "P"):
        raise ValueError(f"no block formula for {block!r}")
    sizes = dict(zip(BLOCK_NAMES, resolve_sizes(params, n).as_tuple()))
    for name in BLOCK_NAMES:
        b = name.lower()
        if getattr(counts, b + "1") + getattr(counts, b + "0") > sizes[name]:
            raise ValueError(f"more experts in {name} than it has vertices")
    w = _block_weights(params)
    return float(sum(w[block, other] * counts.diff(other) for other in "IJOP"))

