"""Random, weak and strong adversaries, placement strategies, and an exact
worst-case search for small graphs."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from ._rounding import expert_counts, round_half_up
from .dynamics import ExpertAssignment
from .graph import CapExceededError, Graph

__all__ = [
    "STRATEGIES",
    "AdversarySpec",
    "SearchResult",
    "StructureError",
    "assign",
    "exact_success_probability",
    "exhaustive_strong_search",
    "make_strategy",
    "partition_experts",
    "random_adversary",
    "strong_adversary",
    "weak_adversary",
    "weak_experts",
]

SEARCH_VERTEX_CAP = 16
COIN_STATE_CAP = 1 << 20


class StructureError(ValueError):
    """The graph lacks the structure a strategy needs."""


# ---------------------------------------------------------------------------
# strategies: (graph, n1, n0, **params) -> ExpertAssignment
# ---------------------------------------------------------------------------


def _require(graph: Graph, *blocks: str) -> None:
    missing = [b for b in blocks if b not in graph.blocks]
    if missing:
        raise StructureError(f"graph has no block(s) {missing}")


def _range(graph: Graph, name: str) -> np.ndarray:
    return np.arange(*graph.blocks[name])


def spread_order(graph: Graph, m: int, candidates: np.ndarray | None = None,
                 taken: np.ndarray | None = None) -> np.ndarray:
    """Greedily pick ``m`` vertices, each time the one whose closed
    neighborhood currently holds the fewest picks (lowest index on ties)."""
    load = np.zeros(graph.n, dtype=np.int64)
    allowed = np.zeros(graph.n, dtype=bool)
    allowed[candidates if candidates is not None else slice(None)] = True
    if taken is not None and len(taken):
        for u in taken:
            load[graph.neighbors(int(u))] += 1
            load[u] += 1
        allowed[taken] = False
    if m > allowed.sum():
        raise StructureError(f"cannot spread {m} experts over {int(allowed.sum())} vertices")
    picks = []
    big = np.iinfo(np.int64).max
    for _ in range(m):
        cost = np.maximum(load, graph.neighbor_max(load))
        cost = np.where(allowed, cost, big)
        u = int(np.argmin(cost))
        picks.append(u)
        allowed[u] = False
        load[graph.neighbors(u)] += 1
        load[u] += 1
    return np.array(picks, dtype=np.int64)


def blocks_I_O(graph: Graph, n1: int, n0: int) -> ExpertAssignment:
    if not graph.is_counterexample:
        raise StructureError("blocks_I_O needs the counterexample graph")
    return ExpertAssignment(_range(graph, "I"), _range(graph, "O"))


def prefix(graph: Graph, n1: int, n0: int, k1: int | None = None,
           k0: int | None = None) -> ExpertAssignment:
    k1 = n1 if k1 is None else k1
    k0 = n0 if k0 is None else k0
    if k1 + k0 > graph.n:
        raise StructureError(f"prefix({k1}, {k0}) does not fit in {graph.n} vertices")
    return ExpertAssignment(np.arange(k1), np.arange(k1, k1 + k0))


def star_center_first(graph: Graph, n1: int, n0: int) -> ExpertAssignment:
    """Center of the star first, everything else spread over the expander."""
    _require(graph, "star_center")
    center = _range(graph, "star_center")
    pool = _range(graph, "expander") if "expander" in graph.blocks else None
    rest = spread_order(graph, n1 + n0 - 1, candidates=pool, taken=center)
    picks = np.concatenate([center, rest])
    return ExpertAssignment(picks[:n1], picks[n1:])


def ones_on_star(graph: Graph, n1: int, n0: int) -> ExpertAssignment:
    """Every truthful expert on the star, the rest spread over the expander."""
    _require(graph, "star_center", "star_leaves")
    star = np.concatenate([_range(graph, "star_center"), _range(graph, "star_leaves")])
    if n1 > star.size:
        raise StructureError(f"star has {star.size} vertices, need {n1}")
    if "expander" in graph.blocks:
        pool = _range(graph, "expander")
    else:
        pool = np.setdiff1d(np.arange(graph.n), star)
    return ExpertAssignment(star[:n1], spread_order(graph, n0, candidates=pool))


def even_spread(graph: Graph, n1: int, n0: int) -> ExpertAssignment:
    picks = spread_order(graph, n1 + n0)
    return ExpertAssignment(picks[:n1], picks[n1:])


def random_placement(graph: Graph, n1: int, n0: int, seed: int = 0) -> ExpertAssignment:
    picks = np.random.default_rng(seed).choice(graph.n, size=n1 + n0, replace=False)
    return ExpertAssignment(picks[:n1], picks[n1:])


def block_skewed(graph: Graph, n1: int, n0: int, seed: int = 0) -> ExpertAssignment:
    """Uniform placement inside blocks, but with random per-block weights so
    experts pile up in some blocks and avoid others."""
    if not graph.blocks:
        raise StructureError("block_skewed needs named blocks")
    rng = np.random.default_rng(seed)
    names = sorted(graph.blocks)
    free = {b: _range(graph, b) for b in names}
    out = []
    for count in (n1, n0):
        avail = np.array([free[b].size for b in names])
        if count > avail.sum():
            raise StructureError("not enough vertices for block_skewed placement")
        want = np.minimum(rng.multinomial(count, rng.dirichlet(np.full(len(names), 0.5))), avail)
        while want.sum() < count:
            want[rng.choice(np.flatnonzero(want < avail))] += 1
        chosen = []
        for b, k in zip(names, want):
            pick = rng.choice(free[b], size=k, replace=False)
            free[b] = np.setdiff1d(free[b], pick)
            chosen.append(pick)
        out.append(np.concatenate(chosen))
    return ExpertAssignment(out[0], out[1])


def fixed(graph: Graph, n1: int, n0: int, e1=(), e0=()) -> ExpertAssignment:
    return ExpertAssignment(np.asarray(e1, np.int64), np.asarray(e0, np.int64))


STRATEGIES: dict[str, Callable[..., ExpertAssignment]] = {
    "blocks_I_O": blocks_I_O,
    "prefix": prefix,
    "star_center_first": star_center_first,
    "ones_on_star": ones_on_star,
    "even_spread": even_spread,
    "random_placement": random_placement,
    "block_skewed": block_skewed,
    "fixed": fixed,
}


@dataclass(frozen=True)
class Strategy:
    name: str
    params: Mapping = field(default_factory=dict)

    def __call__(self, graph: Graph, n1: int, n0: int) -> ExpertAssignment:
        return STRATEGIES[self.name](graph, n1, n0, **self.params)


def make_strategy(spec: Mapping | str | Strategy) -> Strategy:
    if isinstance(spec, Strategy):
        return spec
    if isinstance(spec, str):
        spec = {"name": spec}
    spec = dict(spec)
    name = spec.pop("name")
    if name not in STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}; known: {sorted(STRATEGIES)}")
    return Strategy(name, spec)


# ---------------------------------------------------------------------------
# adversaries
# ---------------------------------------------------------------------------


def _partition(rng: np.random.Generator, experts: np.ndarray, delta: float) -> ExpertAssignment:
    truthful = rng.random(experts.size) < 0.5 + delta
    return ExpertAssignment(experts[truthful], experts[~truthful])


def random_adversary(graph: Graph, mu: float, delta: float, seed: int) -> ExpertAssignment:
    m = round_half_up(mu * graph.n)
    rng = np.random.default_rng(seed)
    experts = np.sort(rng.choice(graph.n, size=m, replace=False))
    return _partition(rng, experts, delta)


def weak_experts(graph: Graph, strategy, mu: float) -> np.ndarray:
    """The expert set a weak adversary's strategy picks (before partitioning)."""
    m = round_half_up(mu * graph.n)
    placed = make_strategy(strategy)(graph, m, 0)
    experts = np.union1d(placed.e1, placed.e0)
    if experts.size != m:
        raise ValueError(f"strategy placed {experts.size} experts, expected {m}")
    return experts


def partition_experts(experts: np.ndarray, delta: float, seed: int) -> ExpertAssignment:
    """Send each expert to E1 independently with probability 1/2 + delta."""
    return _partition(np.random.default_rng(seed), np.asarray(experts, np.int64), delta)


def weak_adversary(graph: Graph, strategy, mu: float, delta: float,
                   seed: int) -> ExpertAssignment:
    return partition_experts(weak_experts(graph, strategy, mu), delta, seed)


def strong_adversary(graph: Graph, strategy, mu: float, delta: float) -> ExpertAssignment:
    n1, n0 = expert_counts(mu, delta, graph.n)
    a = make_strategy(strategy)(graph, n1, n0)
    a.check(graph.n)
    if (a.e1.size, a.e0.size) != (n1, n0):
        raise ValueError(f"strategy produced sizes ({a.e1.size}, {a.e0.size}), "
                         f"expected ({n1}, {n0})")
    return a


@dataclass(frozen=True)
class AdversarySpec:
    kind: str
    mu: float
    delta: float
    strategy: Mapping | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("random", "weak", "strong"):
            raise ValueError(f"unknown adversary kind {self.kind!r}")
        if not 0 < self.mu <= 1:
            raise ValueError(f"mu must lie in (0, 1], got {self.mu}")
        if not 0 < self.delta <= 0.5:
            raise ValueError(f"delta must lie in (0, 1/2], got {self.delta}")
        if self.kind != "random" and self.strategy is None:
            raise ValueError(f"a {self.kind} adversary needs a strategy")

    @classmethod
    def from_dict(cls, data: Mapping) -> "AdversarySpec":
        strat = data.get("strategy")
        if isinstance(strat, str):
            strat = {"name": strat}
        return cls(data["kind"], float(data["mu"]), float(data["delta"]),
                   strat, int(data.get("seed", 0)))

    def as_dict(self) -> dict:
        return {"kind": self.kind, "mu": self.mu, "delta": self.delta,
                "strategy": dict(self.strategy) if self.strategy else None,
                "seed": self.seed}


def assign(graph: Graph, spec: AdversarySpec, seed: int) -> ExpertAssignment:
    """Draw an assignment for ``spec``; ``seed`` drives its random parts."""
    if spec.kind == "random":
        return random_adversary(graph, spec.mu, spec.delta, seed)
    if spec.kind == "weak":
        return weak_adversary(graph, spec.strategy, spec.mu, spec.delta, seed)
    return strong_adversary(graph, spec.strategy, spec.mu, spec.delta)


# ---------------------------------------------------------------------------
# exact worst case on small graphs
# ---------------------------------------------------------------------------


def _bitmasks(graph: Graph) -> list[int]:
    return [sum(1 << int(w) for w in graph.neighbors(v)) for v in range(graph.n)]


def _binomial_above(base: int, coins: int, n: int) -> Fraction:
    """P(base + Bin(coins, 1/2) > n/2)."""
    need = n // 2 + 1 - base
    if need <= 0:
        return Fraction(1)
    if need > coins:
        return Fraction(0)
    return Fraction(sum(math.comb(coins, k) for k in range(need, coins + 1)), 1 << coins)


class _Exact:
    """Exact P(OneMajority) by walking the coin tree of one dissemination."""

    def __init__(self, nbr: list[int], n: int):
        self.nbr = nbr
        self.n = n
        self.full = (1 << n) - 1
        self.states = 0

    def noniterative(self, l1: int, l0: int) -> Fraction:
        ones = bin(l1).count("1")
        free = self.full & ~(l1 | l0)
        coins = 0
        for v in _bits(free):
            d = (self.nbr[v] & l1).bit_count() - (self.nbr[v] & l0).bit_count()
            if d > 0:
                ones += 1
            elif d == 0:
                coins += 1
        return _binomial_above(ones, coins, self.n)

    def iterative(self, l1: int, l0: int, memo: dict) -> Fraction:
        key = (l1, l0)
        if key in memo:
            return memo[key]
        free = self.full & ~(l1 | l0)
        if not free:
            res = Fraction(1) if 2 * l1.bit_count() > self.n else Fraction(0)
            memo[key] = res
            return res
        n1, n0, tied = l1, l0, []
        for v in _bits(free):
            a = (self.nbr[v] & l1).bit_count()
            b = (self.nbr[v] & l0).bit_count()
            if a > b:
                n1 |= 1 << v
            elif a < b:
                n0 |= 1 << v
            elif a:
                tied.append(v)
        if n1 == l1 and n0 == l0 and not tied:
            res = _binomial_above(l1.bit_count(), free.bit_count(), self.n)
            memo[key] = res
            return res
        self.states += 1 << len(tied)
        if self.states > COIN_STATE_CAP:
            raise CapExceededError(f"coin tree exceeds {COIN_STATE_CAP} states")
        total = Fraction(0)
        for outcome in range(1 << len(tied)):
            b1, b0 = n1, n0
            for i, v in enumerate(tied):
                if outcome >> i & 1:
                    b1 |= 1 << v
                else:
                    b0 |= 1 << v
            total += self.iterative(b1, b0, memo)
        res = total / (1 << len(tied))
        memo[key] = res
        return res


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _mask(vertices) -> int:
    return sum(1 << int(v) for v in vertices)


def _check_small(graph: Graph) -> None:
    if graph.n > SEARCH_VERTEX_CAP:
        raise CapExceededError(f"exhaustive search is capped at n <= {SEARCH_VERTEX_CAP}")
    if graph.mode == "random":
        raise ValueError("exhaustive search needs a deterministic graph, not a random-mode one")


def exact_success_probability(graph: Graph, assignment: ExpertAssignment,
                              mode: str) -> Fraction:
    """Exact probability that the final labeling has a strict One majority."""
    _check_small(graph)
    ex = _Exact(_bitmasks(graph), graph.n)
    l1, l0 = _mask(assignment.e1), _mask(assignment.e0)
    if mode == "noniterative":
        return ex.noniterative(l1, l0)
    if mode == "iterative":
        return ex.iterative(l1, l0, {})
    raise ValueError(f"unknown dissemination mode {mode!r}")


@dataclass(frozen=True)
class SearchResult:
    assignment: ExpertAssignment
    probability: Fraction
    checked: int


def exhaustive_strong_search(graph: Graph, mu: float, delta: float,
                             mode: str) -> SearchResult:
    """Try every strong-adversary assignment and return the one minimizing the
    exact probability of a One majority (ties: lexicographically smallest
    (E1, E0))."""
    _check_small(graph)
    if mode not in ("iterative", "noniterative"):
        raise ValueError(f"unknown dissemination mode {mode!r}")
    n1, n0 = expert_counts(mu, delta, graph.n)
    ex = _Exact(_bitmasks(graph), graph.n)
    memo: dict = {}
    best_key, best = None, None
    checked = 0
    for experts in itertools.combinations(range(graph.n), n1 + n0):
        for ones in itertools.combinations(experts, n1):
            zeros = tuple(v for v in experts if v not in ones)
            l1, l0 = _mask(ones), _mask(zeros)
            if mode == "noniterative":
                prob = ex.noniterative(l1, l0)
            else:
                ex.states = 0
                prob = ex.iterative(l1, l0, memo)
            checked += 1
            key = (prob, ones, zeros)
            if best_key is None or key < best_key:
                best_key, best = key, (ones, zeros)
    return SearchResult(ExpertAssignment(np.array(best[0], np.int64),
                                         np.array(best[1], np.int64)),
                        best_key[0], checked)
