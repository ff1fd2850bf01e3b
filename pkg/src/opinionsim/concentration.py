"""Chernoff bound, exact binomial tails, and an audit of the edge-distribution
property of G(n, p)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .graph import generate_er

__all__ = [
    "AuditReport",
    "SetRecord",
    "chernoff_bound",
    "chernoff_empirical_check",
    "exact_binomial_tail",
    "exception_bound",
    "lemma2_audit",
]


def chernoff_bound(n: int, p: float, dev: float) -> float:
    """Upper bound on P(|X - np| > dev*np) for X ~ Bin(n, p)."""
    if dev <= 0:
        raise ValueError("dev must be positive")
    return 2.0 * math.exp(-min(dev * dev, dev) * n * p / 4.0)


def _mass(n: int, p: float, ks) -> float:
    # scipy's mass function is accurate to a few ulps even where lgamma
    # differences would lose ~1e-12 at n in the thousands
    ks = np.asarray(list(ks), dtype=np.int64)
    if ks.size == 0:
        return 0.0
    return math.fsum(stats.binom.pmf(ks, n, p).tolist())


def exact_binomial_tail(n: int, p: float, mode: str, value: float) -> float:
    """Exact binomial probability: compensated summation of the mass function.

    ``mode`` is one of ``"ge"`` (P(X >= value)), ``"le"`` (P(X <= value)),
    ``"eq"`` (P(X == value)) or ``"two_sided"`` (P(|X - np| > value*np)).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if mode == "ge":
        k = int(math.ceil(value))
        return 1.0 if k <= 0 else _mass(n, p, range(k, n + 1))
    if mode == "le":
        k = int(math.floor(value))
        return 1.0 if k >= n else _mass(n, p, range(0, k + 1))
    if mode == "eq":
        return _mass(n, p, [int(value)]) if 0 <= value <= n else 0.0
    if mode == "two_sided":
        mean = n * p
        ks = [k for k in range(n + 1) if abs(k - mean) > value * mean]
        return _mass(n, p, ks)
    raise ValueError(f"unknown tail mode {mode!r}")


def chernoff_empirical_check(n: int, p: float, dev: float, trials: int,
                             seed: int) -> tuple[float, float, bool]:
    """Sample Bin(n, p) ``trials`` times; pass iff the frequency of
    |X - np| > dev*np stays below the bound plus 4*sqrt(bound/trials)."""
    if trials < 1:
        raise ValueError("need at least one trial")
    x = np.random.default_rng(seed).binomial(n, p, size=trials)
    mean = n * p
    freq = float(np.count_nonzero(np.abs(x - mean) > dev * mean)) / trials
    bound = chernoff_bound(n, p, dev)
    return freq, bound, freq <= bound + 4.0 * math.sqrt(bound / trials)


def exception_bound(eps: float) -> float:
    """Maximum size of an exception set allowed by the edge-distribution property."""
    return 4.0 * eps ** -3 * (math.log(1.0 / eps) + 2.0)


@dataclass(frozen=True)
class SetRecord:
    size: int
    exceptions: int
    bound: int


@dataclass
class AuditReport:
    n: int
    p: float
    eps: float
    bound: float
    records: list[SetRecord] = field(default_factory=list)

    @property
    def bound_int(self) -> int:
        return math.floor(self.bound)

    @property
    def violations(self) -> int:
        return sum(r.exceptions > self.bound_int for r in self.records)

    @property
    def max_exceptions(self) -> int:
        return max((r.exceptions for r in self.records), default=0)

    def as_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "eps": self.eps, "bound": self.bound_int,
                "sets": len(self.records), "max_exceptions": self.max_exceptions,
                "violations": self.violations}

    def table(self) -> str:
        lines = [f"G({self.n}, {self.p}) eps={self.eps} bound t={self.bound_int}",
                 f"{'set':>5} {'|S|':>6} {'|X_S|':>6}"]
        lines += [f"{i:>5} {r.size:>6} {r.exceptions:>6}" for i, r in enumerate(self.records)]
        lines.append(f"violations: {self.violations}")
        return "\n".join(lines)


def exception_set(graph, members: np.ndarray, p: float, eps: float) -> np.ndarray:
    """Vertices outside S whose edge count into S strays more than eps*p*|S|
    from p*|S|."""
    ind = np.zeros(graph.n, dtype=np.int64)
    ind[members] = 1
    into = graph.neighbor_sum(ind)
    outside = ind == 0
    target = p * members.size
    return np.flatnonzero(outside & (np.abs(into - target) > eps * target))


def lemma2_audit(n: int, p: float, eps: float, num_sets: int, seed: int,
                 sizes: list[int] | None = None) -> AuditReport:
    """Sample G(n, p) once, then ``num_sets`` uniform vertex sets of size at
    least eps*n, and record the exact exception set of each."""
    if p < eps:
        raise ValueError(f"the audit needs p >= eps (p={p}, eps={eps})")
    rng = np.random.default_rng(seed)
    graph = generate_er(n, p, seed=int(rng.integers(2**63)))
    t = exception_bound(eps)
    lo = max(1, math.ceil(eps * n))
    report = AuditReport(n, p, eps, t)
    for i in range(num_sets):
        size = sizes[i] if sizes is not None else int(rng.integers(lo, n + 1))
        if size < eps * n:
            raise ValueError(f"set size {size} is below eps*n")
        members = rng.choice(n, size=size, replace=False)
        report.records.append(
            SetRecord(size, int(exception_set(graph, members, p, eps).size), math.floor(t)))
    return report
