"""Block-aware graphs and the generators used throughout the simulator.

A :class:`Graph` stores two kinds of edges:

* implicit structure -- vertex ranges that form cliques, and pairs of ranges
  that are completely joined to each other.  These never get materialized;
  neighbor counts over them are computed with range sums.
* explicit edges -- a symmetric CSR adjacency for everything else (random or
  derandomized bipartite blocks, pendant attachments, and all edges of the
  ordinary generators).

The counterexample graph lays its blocks out contiguously in the order
I, J, O, P, D.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping

import networkx as nx
import numpy as np
import scipy.sparse as sp

from ._rounding import round_half_up

__all__ = [
    "BLOCK_NAMES",
    "PSTAR",
    "BlockSizes",
    "CapExceededError",
    "CounterexampleParams",
    "Graph",
    "InfeasibleSizesError",
    "ValidationReport",
    "Violation",
    "disjoint_union",
    "generate_complete",
    "generate_counterexample",
    "generate_er",
    "generate_line",
    "generate_random_regular",
    "generate_star",
    "graph_from_spec",
    "read_edge_list",
    "resolve_sizes",
    "validate_params",
    "write_edge_list",
]

BLOCK_NAMES = ("I", "J", "O", "P", "D")
EDGE_LIST_CAP = 10_000
_ROW_CHUNK = 512


class InfeasibleSizesError(ValueError):
    """Block sizes (or a parity/degree requirement) cannot be met."""


class CapExceededError(ValueError):
    """An operation refused to run because the instance is above its size cap."""


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CounterexampleParams:
    mu: float
    delta: float
    eps1: float
    eps2: float
    d: float

    @property
    def base_ratio(self) -> float:
        return (0.5 - self.delta) / (0.5 + self.delta)

    @property
    def p_ij(self) -> float:
        return self.base_ratio + self.eps1

    @property
    def p_jp(self) -> float:
        return self.base_ratio + self.eps1

    @property
    def p_ip(self) -> float:
        return self.base_ratio - self.eps2

    def as_dict(self) -> dict:
        return {"mu": self.mu, "delta": self.delta, "eps1": self.eps1,
                "eps2": self.eps2, "d": self.d}

    @classmethod
    def from_dict(cls, data: Mapping) -> "CounterexampleParams":
        return cls(*(float(data[k]) for k in ("mu", "delta", "eps1", "eps2", "d")))


# The desk-scale parameter set used by the presets and acceptance checks.
PSTAR = CounterexampleParams(mu=0.4, delta=0.45, eps1=0.089, eps2=5e-4, d=0.004)


@dataclass(frozen=True)
class Violation:
    name: str
    lhs: float
    rhs: float

    def __str__(self) -> str:
        return f"{self.name} (lhs={self.lhs:.6g}, rhs={self.rhs:.6g})"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.violations]

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(f"violated: {v}" for v in self.violations)

    def as_dict(self) -> dict:
        return {"ok": self.ok,
                "violations": [{"name": v.name, "lhs": v.lhs, "rhs": v.rhs}
                               for v in self.violations]}


def _exact(x: float) -> Fraction:
    # Decimal reading of the float, so 0.01 * 0.2 * 0.2 / 4 equals 0.0001 exactly.
    return Fraction(repr(float(x)))


def validate_params(params: CounterexampleParams) -> ValidationReport:
    """Check every strict inequality the construction and its robustness
    argument rely on.  Boundary equality counts as a violation."""
    raw = params.as_dict()
    bad = [Violation(f"{k} is finite", v, float("inf"))
           for k, v in raw.items() if not math.isfinite(v)]
    if bad:
        return ValidationReport(tuple(bad))

    mu, de, e1, e2, d = (_exact(raw[k]) for k in ("mu", "delta", "eps1", "eps2", "d"))
    half = Fraction(1, 2)
    ratio = (half - de) / (half + de)
    push = 4 * de / (half + de) - 1

    # (name, smaller side, larger side): each entry must satisfy smaller < larger
    checks = [
        ("μ > 0", Fraction(0), mu),
        ("μ < 1/2", mu, half),
        ("δ > 1/6", Fraction(1, 6), de),
        ("δ < 1/2", de, half),
        ("ε₁ > 0", Fraction(0), e1),
        ("ε₂ > 0", Fraction(0), e2),
        ("d > 0", Fraction(0), d),
        ("ε₁ < 2δ/(1/2+δ)", e1, 2 * de / (half + de)),
        ("ε₂ < (1/2−δ)/(1/2+δ)", e2, ratio),
        ("ε₁ < δμ/2", e1, de * mu / 2),
        ("ε₁ < 4δ/(1/2+δ) − 1", e1, push),
        ("d < ε₁δ/(1/2+δ)", d, e1 * de / (half + de)),
        ("d < ε₁δμ/4", d, e1 * de * mu / 4),
        ("d < (1−μ−2δμ)/3", d, (1 - mu - 2 * de * mu) / 3),
        ("ε₂ < (d/6)(4δ/(1/2+δ) − 1 − ε₁)", e2, d / 6 * (push - e1)),
        ("ε₂ < (1/2−δ)/(1+2δ)", e2, (half - de) / (1 + 2 * de)),
    ]
    violations = [Violation(name, float(lo), float(hi))
                  for name, lo, hi in checks if not lo < hi]
    # probabilities; implied by the bounds above when those hold
    p_big, p_small = ratio + e1, ratio - e2
    if p_big > 1:
        violations.append(Violation("p_IJ ≤ 1", float(p_big), 1.0))
    if p_small < 0:
        violations.append(Violation("p_IP ≥ 0", 0.0, float(p_small)))
    return ValidationReport(tuple(violations))


@dataclass(frozen=True)
class BlockSizes:
    size_I: int
    size_J: int
    size_O: int
    size_P: int
    size_D: int

    @property
    def n(self) -> int:
        return self.size_I + self.size_J + self.size_O + self.size_P + self.size_D

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.size_I, self.size_J, self.size_O, self.size_P, self.size_D)

    def ranges(self) -> dict[str, tuple[int, int]]:
        out, start = {}, 0
        for name, size in zip(BLOCK_NAMES, self.as_tuple()):
            out[name] = (start, start + size)
            start += size
        return out


def resolve_sizes(params: CounterexampleParams, n: int) -> BlockSizes:
    if n <= 0:
        raise InfeasibleSizesError(f"n must be positive, got {n}")
    mu, de = params.mu, params.delta
    size_i = round_half_up(mu * (0.5 + de) * n)
    size_o = round_half_up(mu * n) - size_i
    size_d = round_half_up(params.d * n)
    if (n - size_d) % 2:
        down, up = size_d - 1, size_d + 1
        size_d = up if down < 0 or abs(up - params.d * n) <= abs(down - params.d * n) else down
    half = (n - size_d) // 2
    sizes = BlockSizes(size_i, half - size_i, size_o, half - size_o, size_d)
    if min(sizes.as_tuple()) < 0:
        raise InfeasibleSizesError(f"negative block size in {sizes}")
    if sizes.size_D > sizes.size_J:
        raise InfeasibleSizesError(
            f"|D|={sizes.size_D} exceeds |J|={sizes.size_J}; D needs distinct J neighbors")
    return sizes


# ---------------------------------------------------------------------------
# graph container
# ---------------------------------------------------------------------------

Range = tuple[int, int]


def _symmetric_csr(n: int, u: np.ndarray, v: np.ndarray) -> sp.csr_matrix:
    """CSR adjacency from one orientation of each undirected edge."""
    u = np.asarray(u, dtype=np.int32)
    v = np.asarray(v, dtype=np.int32)
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    data = np.ones(rows.size, dtype=np.int32)
    adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    adj.sum_duplicates()
    adj.sort_indices()
    return adj


def _empty_csr(n: int) -> sp.csr_matrix:
    return sp.csr_matrix((n, n), dtype=np.int32)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on vertices ``0..n-1``.

    ``blocks`` names vertex ranges for strategies and reporting. ``cliques``
    and ``full_pairs`` carry the implicit edges; ``adj`` the explicit ones.
    """

    n: int
    adj: sp.csr_matrix = None
    blocks: Mapping[str, Range] = field(default_factory=dict)
    cliques: tuple[Range, ...] = ()
    full_pairs: tuple[tuple[Range, Range], ...] = ()
    mode: str = "explicit"
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.adj is None:
            object.__setattr__(self, "adj", _empty_csr(self.n))
        if self.adj.shape != (self.n, self.n):
            raise ValueError(f"adjacency shape {self.adj.shape} does not match n={self.n}")

    # -- counting -----------------------------------------------------------

    def neighbor_sum(self, x: np.ndarray) -> np.ndarray:
        """For each vertex, the sum of ``x`` over its neighbors.

        ``x`` may be 1-d (one value per vertex) or 2-d (one column per
        quantity).  Integer input stays integer.
        """
        x = np.asarray(x)
        if x.dtype == bool:
            x = x.astype(np.int32)
        out = np.asarray(self.adj @ x)
        if out.dtype != x.dtype and np.issubdtype(x.dtype, np.integer):
            out = out.astype(np.result_type(x.dtype, np.int32))
        for s, e in self.cliques:
            out[s:e] += x[s:e].sum(axis=0) - x[s:e]
        for (s1, e1), (s2, e2) in self.full_pairs:
            out[s1:e1] += x[s2:e2].sum(axis=0)
            out[s2:e2] += x[s1:e1].sum(axis=0)
        return out

    def neighbor_max(self, x: np.ndarray) -> np.ndarray:
        """Per-vertex maximum of ``x`` over neighbors; ``x.min()`` where isolated."""
        x = np.asarray(x)
        floor = x.min() if x.size else 0
        out = np.full(self.n, floor, dtype=x.dtype)
        ptr = self.adj.indptr
        nonempty = np.flatnonzero(np.diff(ptr) > 0)
        if nonempty.size:
            out[nonempty] = np.maximum.reduceat(x[self.adj.indices], ptr[nonempty])
        for s, e in self.cliques:
            if e - s < 2:
                continue
            seg = x[s:e]
            order = np.argsort(seg, kind="stable")
            top, second = seg[order[-1]], seg[order[-2]]
            excl = np.full(e - s, top, dtype=x.dtype)
            excl[order[-1]] = second
            np.maximum(out[s:e], excl, out=out[s:e])
        for (s1, e1), (s2, e2) in self.full_pairs:
            if e2 > s2:
                np.maximum(out[s1:e1], x[s2:e2].max(), out=out[s1:e1])
            if e1 > s1:
                np.maximum(out[s2:e2], x[s1:e1].max(), out=out[s2:e2])
        return out

    def degrees(self) -> np.ndarray:
        return self.neighbor_sum(np.ones(self.n, dtype=np.int64))

    def degree(self, v: int) -> int:
        return int(self.neighbors(v).size)

    def count_into(self, block: str | Range) -> np.ndarray:
        """Number of neighbors each vertex has inside a block (name or range)."""
        s, e = self.blocks[block] if isinstance(block, str) else block
        ind = np.zeros(self.n, dtype=np.int64)
        ind[s:e] = 1
        return self.neighbor_sum(ind)

    def neighbors(self, v: int) -> np.ndarray:
        if not 0 <= v < self.n:
            raise IndexError(f"vertex {v} out of range for n={self.n}")
        parts = [self.adj.indices[self.adj.indptr[v]:self.adj.indptr[v + 1]]]
        for s, e in self.cliques:
            if s <= v < e:
                parts.append(np.arange(s, v))
                parts.append(np.arange(v + 1, e))
        for (s1, e1), (s2, e2) in self.full_pairs:
            if s1 <= v < e1:
                parts.append(np.arange(s2, e2))
            elif s2 <= v < e2:
                parts.append(np.arange(s1, e1))
        return np.sort(np.concatenate(parts).astype(np.int64))

    # -- edges --------------------------------------------------------------

    @property
    def num_edges(self) -> int:
        m = self.adj.nnz // 2
        m += sum((e - s) * (e - s - 1) // 2 for s, e in self.cliques)
        m += sum((e1 - s1) * (e2 - s2) for (s1, e1), (s2, e2) in self.full_pairs)
        return m

    def edges(self) -> Iterator[tuple[int, int]]:
        """All edges ``(u, v)`` with ``u < v`` in lexicographic order."""
        for u in range(self.n):
            nb = self.neighbors(u)
            for v in nb[nb > u]:
                yield u, int(v)

    def block_of(self, v: int) -> str | None:
        for name, (s, e) in self.blocks.items():
            if s <= v < e:
                return name
        return None

    def block_labels(self) -> np.ndarray:
        """Per-vertex block name (empty string where unnamed)."""
        out = np.full(self.n, "", dtype=object)
        for name, (s, e) in self.blocks.items():
            out[s:e] = name
        return out

    @property
    def is_counterexample(self) -> bool:
        return self.meta.get("kind") == "counterexample"

    # -- checks -------------------------------------------------------------

    def check_invariants(self, sample: int | None = None, seed: int = 0) -> None:
        """Raise ``AssertionError`` if any structural invariant fails.

        Above ``sample`` vertices only a random subset of explicit rows is
        scanned for overlap with the implicit structure.
        """
        adj = self.adj
        assert (adj.data == 1).all(), "multi-edges in explicit adjacency"
        assert adj.diagonal().sum() == 0, "self-loop"
        assert (adj != adj.T).nnz == 0, "asymmetric adjacency"

        rows = np.arange(self.n)
        if sample is not None and self.n > sample:
            rows = np.random.default_rng(seed).choice(self.n, size=sample, replace=False)
        for r in rows:
            nb = adj.indices[adj.indptr[r]:adj.indptr[r + 1]]
            for s, e in self.cliques:
                if s <= r < e:
                    assert not ((nb >= s) & (nb < e)).any(), f"explicit edge duplicates clique at {r}"
            for (s1, e1), (s2, e2) in self.full_pairs:
                if s1 <= r < e1:
                    assert not ((nb >= s2) & (nb < e2)).any(), f"explicit edge duplicates full block at {r}"
                if s2 <= r < e2:
                    assert not ((nb >= s1) & (nb < e1)).any(), f"explicit edge duplicates full block at {r}"

        if self.is_counterexample:
            s, e = self.blocks["D"]
            deg = self.degrees()
            assert (deg[s:e] == 1).all(), "D vertex with degree != 1"
            js, je = self.blocks["J"]
            partners = adj.indices[adj.indptr[s]:adj.indptr[e]]
            assert ((partners >= js) & (partners < je)).all(), "D neighbor outside J"
            assert np.unique(partners).size == partners.size, "two D vertices share a neighbor"
            os_, oe = self.blocks["O"]
            assert (deg[os_:oe] == self.n - (e - s) - 1).all(), "O not joined to all of V minus D"


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _bernoulli_bipartite(rng: np.random.Generator, a: Range, b: Range, p: float):
    """Each pair (x in a, y in b) independently present with probability p."""
    (a0, a1), (b0, b1) = a, b
    width = b1 - b0
    us, vs = [], []
    for r0 in range(a0, a1, _ROW_CHUNK):
        r1 = min(a1, r0 + _ROW_CHUNK)
        hit = rng.random((r1 - r0, width)) < p
        ri, ci = np.nonzero(hit)
        us.append(ri + r0)
        vs.append(ci + b0)
    if not us:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(us), np.concatenate(vs)


def _interval_bipartite(a: Range, b: Range, k: int):
    """Vertex i of side ``a`` sees the k consecutive positions of side ``b``
    starting at ceil(i*|b|/|a|), wrapping around."""
    (a0, a1), (b0, b1) = a, b
    na, nb = a1 - a0, b1 - b0
    if na == 0 or nb == 0 or k == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    i = np.arange(na, dtype=np.int64)
    starts = -((-i * nb) // na)
    cols = (starts[:, None] + np.arange(k, dtype=np.int64)[None, :]) % nb
    return np.repeat(i + a0, k), cols.ravel() + b0


def _regular_orientation(x: Range, y: Range, p: float) -> tuple[Range, Range, int]:
    """Pick which side gets exact interval degrees.

    The other side then sees floor/ceil(|A| k / |B|), off from p|A| by
    |A|(k - p|B|)/|B|; choose the orientation that keeps this drift smaller,
    preferring ``y`` as the exact side on ties.
    """
    sx, sy = x[1] - x[0], y[1] - y[0]

    def drift(na, nb):
        if nb == 0:
            return 0.0
        return abs(na * (round_half_up(p * nb) - p * nb) / nb)

    if drift(sx, sy) < drift(sy, sx):
        return x, y, round_half_up(p * sy)
    return y, x, round_half_up(p * sx)


def generate_counterexample(params: CounterexampleParams, n: int,
                            mode: str = "regular", seed: int = 0) -> Graph:
    if mode not in ("random", "regular"):
        raise ValueError(f"mode must be 'random' or 'regular', got {mode!r}")
    sizes = resolve_sizes(params, n)
    r = sizes.ranges()
    pairs = [("I", "J", params.p_ij), ("I", "P", params.p_ip), ("J", "P", params.p_jp)]

    us, vs = [], []
    rng = np.random.default_rng(seed)
    for x, y, p in pairs:
        if mode == "random":
            u, v = _bernoulli_bipartite(rng, r[x], r[y], p)
        else:
            side_a, side_b, k = _regular_orientation(r[x], r[y], p)
            u, v = _interval_bipartite(side_a, side_b, k)
        us.append(u)
        vs.append(v)
    (d0, d1), (j0, _) = r["D"], r["J"]
    us.append(np.arange(d0, d1))
    vs.append(np.arange(j0, j0 + (d1 - d0)))

    adj = _symmetric_csr(n, np.concatenate(us), np.concatenate(vs))
    return Graph(
        n=n,
        adj=adj,
        blocks=r,
        cliques=tuple(r[b] for b in ("I", "J", "O", "P")),
        full_pairs=tuple((r["O"], r[b]) for b in ("I", "J", "P")),
        mode=mode,
        meta={"kind": "counterexample", "params": params, "sizes": sizes, "seed": seed},
    )


def generate_er(n: int, p: float, seed: int = 0) -> Graph:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    us, vs = [], []
    for r0 in range(0, n, _ROW_CHUNK):
        r1 = min(n, r0 + _ROW_CHUNK)
        hit = rng.random((r1 - r0, n)) < p
        ri, ci = np.nonzero(hit)
        ri = ri + r0
        keep = ci > ri
        us.append(ri[keep])
        vs.append(ci[keep])
    u = np.concatenate(us) if us else np.empty(0, np.int64)
    v = np.concatenate(vs) if vs else np.empty(0, np.int64)
    return Graph(n=n, adj=_symmetric_csr(n, u, v), mode="random",
                 meta={"kind": "er", "p": p, "seed": seed})


def generate_line(n: int) -> Graph:
    if n < 1:
        raise ValueError("a path needs at least one vertex")
    u = np.arange(n - 1)
    return Graph(n=n, adj=_symmetric_csr(n, u, u + 1), meta={"kind": "line"})


def generate_star(leaves: int) -> Graph:
    if leaves < 1:
        raise ValueError("a star needs at least one leaf")
    center, rest = (0, 1), (1, leaves + 1)
    return Graph(n=leaves + 1, blocks={"star_center": center, "star_leaves": rest},
                 full_pairs=((center, rest),), meta={"kind": "star"})


def generate_complete(n: int) -> Graph:
    return Graph(n=n, cliques=((0, n),) if n > 1 else (), meta={"kind": "complete"})


def generate_random_regular(n: int, deg: int, seed: int = 0) -> Graph:
    if n * deg % 2:
        raise InfeasibleSizesError(f"n*deg must be even (n={n}, deg={deg})")
    if not 0 <= deg < n:
        raise InfeasibleSizesError(f"need 0 <= deg < n (n={n}, deg={deg})")
    g = nx.random_regular_graph(deg, n, seed=seed)
    e = np.array(sorted(g.edges()), dtype=np.int64).reshape(-1, 2)
    return Graph(n=n, adj=_symmetric_csr(n, e[:, 0], e[:, 1]), blocks={"expander": (0, n)},
                 mode="random", meta={"kind": "regular", "deg": deg, "seed": seed})


def disjoint_union(g1: Graph, g2: Graph) -> Graph:
    off = g1.n

    def shift(rng):
        return (rng[0] + off, rng[1] + off)

    blocks = dict(g1.blocks)
    for name, rng in g2.blocks.items():
        key = name
        while key in blocks:
            key += "'"
        blocks[key] = shift(rng)
    if "random" in (g1.mode, g2.mode):
        mode = "random"
    elif "regular" in (g1.mode, g2.mode):
        mode = "regular"
    else:
        mode = "explicit"
    return Graph(
        n=g1.n + g2.n,
        adj=sp.block_diag([g1.adj, g2.adj], format="csr", dtype=np.int32),
        blocks=blocks,
        cliques=g1.cliques + tuple(shift(c) for c in g2.cliques),
        full_pairs=g1.full_pairs + tuple((shift(a), shift(b)) for a, b in g2.full_pairs),
        mode=mode,
        meta={"kind": "union", "parts": (dict(g1.meta), dict(g2.meta))},
    )


# ---------------------------------------------------------------------------
# spec files and edge lists
# ---------------------------------------------------------------------------


def graph_from_spec(spec: Mapping | str) -> Graph:
    """Build a graph from a JSON-style description.

    >>> graph_from_spec({"type": "line", "n": 3}).num_edges
    2
    """
    if isinstance(spec, str):
        spec = json.loads(spec)
    kind = spec["type"]
    seed = int(spec.get("seed", 0))
    if kind == "counterexample":
        params = CounterexampleParams.from_dict(spec["params"]) if "params" in spec else PSTAR
        return generate_counterexample(params, int(spec["n"]), spec.get("mode", "regular"), seed)
    if kind == "er":
        return generate_er(int(spec["n"]), float(spec["p"]), seed)
    if kind == "line":
        return generate_line(int(spec["n"]))
    if kind == "star":
        return generate_star(int(spec["leaves"]))
    if kind == "complete":
        return generate_complete(int(spec["n"]))
    if kind == "regular":
        return generate_random_regular(int(spec["n"]), int(spec["deg"]), seed)
    if kind == "union":
        parts = [graph_from_spec(p) for p in spec["parts"]]
        out = parts[0]
        for g in parts[1:]:
            out = disjoint_union(out, g)
        return out
    raise ValueError(f"unknown graph type {kind!r}")


def write_edge_list(graph: Graph, fh) -> None:
    """First line ``n m``, then one ``u v`` per edge with ``u < v``, sorted."""
    if graph.n > EDGE_LIST_CAP:
        raise CapExceededError(f"edge-list export is limited to n <= {EDGE_LIST_CAP}")
    fh.write(f"{graph.n} {graph.num_edges}\n")
    for u, v in graph.edges():
        fh.write(f"{u} {v}\n")


def read_edge_list(fh) -> Graph:
    n, m = map(int, fh.readline().split())
    pairs = np.loadtxt(fh, dtype=np.int64, ndmin=2) if m else np.empty((0, 2), np.int64)
    if pairs.shape[0] != m:
        raise ValueError(f"header promises {m} edges, found {pairs.shape[0]}")
    return Graph(n=n, adj=_symmetric_csr(n, pairs[:, 0], pairs[:, 1]))
