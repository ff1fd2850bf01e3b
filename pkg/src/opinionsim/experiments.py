"""Seeded Monte Carlo trials, summaries, and the canned replication scenarios.

Every trial draws three independent streams -- graph, adversary, ties -- from
``numpy.random.SeedSequence(root, spawn_key=(trial, tag))``; the 64-bit state
it generates seeds a PCG64 generator.  Results therefore depend only on the
config, never on how trials are scheduled.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .adversary import (AdversarySpec, exact_success_probability, partition_experts,
                        random_adversary, strong_adversary, weak_experts)
from .concentration import exact_binomial_tail
from .dynamics import ExpertAssignment, Outcome, disseminate, majority_outcome
from .graph import PSTAR, Graph, graph_from_spec

__all__ = [
    "CSV_HEADER",
    "ExperimentConfig",
    "ExperimentError",
    "ReplicationReport",
    "Summary",
    "TrialRecord",
    "derive_seed",
    "estimate_robustness",
    "preset_configs",
    "replicate",
    "run_experiment",
    "summarize",
]

CSV_HEADER = ["scenario", "mode", "trials", "one_majority", "zero_majority",
              "no_strict", "ci_low", "ci_high", "mean_rounds"]
_TAGS = {"graph": 0, "adversary": 1, "tie": 2}


class ExperimentError(RuntimeError):
    pass


def derive_seed(root: int, trial: int, tag: str) -> int:
    ss = np.random.SeedSequence(int(root), spawn_key=(int(trial), _TAGS[tag]))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    graph: Mapping
    adversary: AdversarySpec
    mode: str
    trials: int
    seed: int = 0
    resample_graph: bool | None = None
    scenario: str = "custom"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in ("iterative", "noniterative"):
            raise ValueError(f"unknown dissemination mode {self.mode!r}")
        if isinstance(self.adversary, Mapping):
            object.__setattr__(self, "adversary", AdversarySpec.from_dict(self.adversary))

    def as_dict(self) -> dict:
        return {"scenario": self.scenario, "graph": _plain(self.graph),
                "adversary": self.adversary.as_dict(), "mode": self.mode,
                "trials": self.trials, "seed": self.seed,
                "resample_graph": self.resample_graph}

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _plain(obj):
    if hasattr(obj, "as_dict"):
        return obj.as_dict()
    if isinstance(obj, Mapping):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    graph_seed: int
    adversary_seed: int
    tie_seed: int
    verdict: str
    ones: int
    zeros: int
    rounds: int
    coins: int
    wall_time: float = field(default=0.0, compare=False)

    def to_json(self, timing: bool = False) -> str:
        rec = asdict(self)
        if not timing:
            rec.pop("wall_time")
        return json.dumps(rec, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class Summary:
    scenario: str
    mode: str
    trials: int
    one_majority: float
    zero_majority: float
    no_strict: float
    ci_low: float
    ci_high: float
    mean_rounds: float
    mean_coins: float
    digest: str
    ci_method: str = "clopper-pearson 95% on one_majority"

    def csv_row(self) -> list:
        return [self.scenario, self.mode, self.trials, f"{self.one_majority:.6f}",
                f"{self.zero_majority:.6f}", f"{self.no_strict:.6f}",
                f"{self.ci_low:.6f}", f"{self.ci_high:.6f}", f"{self.mean_rounds:.4f}"]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))


def clopper_pearson(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    alpha = 1.0 - level
    lo = 0.0 if successes == 0 else stats.beta.ppf(alpha / 2, successes, trials - successes + 1)
    hi = 1.0 if successes == trials else stats.beta.ppf(1 - alpha / 2, successes + 1,
                                                        trials - successes)
    return float(lo), float(hi)


def summarize(records: Sequence[TrialRecord], config: ExperimentConfig) -> Summary:
    t = len(records)
    counts = {o.value: 0 for o in Outcome}
    for r in records:
        counts[r.verdict] += 1
    lo, hi = clopper_pearson(counts["OneMajority"], t)
    return Summary(
        scenario=config.scenario, mode=config.mode, trials=t,
        one_majority=counts["OneMajority"] / t,
        zero_majority=counts["ZeroMajority"] / t,
        no_strict=counts["NoStrictMajority"] / t,
        ci_low=lo, ci_high=hi,
        mean_rounds=sum(r.rounds for r in records) / t,
        mean_coins=sum(r.coins for r in records) / t,
        digest=config.digest(),
    )


def _has_randomness(spec: Mapping) -> bool:
    kind = spec.get("type")
    if kind == "union":
        return any(_has_randomness(p) for p in spec["parts"])
    return kind in ("er", "regular") or (kind == "counterexample" and spec.get("mode") == "random")


class _Runner:
    """Executes trials of one config, reusing whatever does not depend on the
    trial's seeds (a fixed graph, a strong placement, a weak expert set)."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        spec = dict(config.graph)
        self.resample = config.resample_graph
        if self.resample is None:
            self.resample = _has_randomness(spec)
        self.graph = None if self.resample else graph_from_spec(spec)
        self._placement = None

    def _assignment(self, graph: Graph, seed: int, shared: bool) -> ExpertAssignment:
        adv = self.config.adversary
        if adv.kind == "random":
            return random_adversary(graph, adv.mu, adv.delta, seed)
        placement = self._placement if shared else None
        if placement is None:
            if adv.kind == "strong":
                placement = strong_adversary(graph, adv.strategy, adv.mu, adv.delta)
            else:
                placement = weak_experts(graph, adv.strategy, adv.mu)
            if shared:
                self._placement = placement
        if adv.kind == "weak":
            return partition_experts(placement, adv.delta, seed)
        return placement

    def trial(self, i: int) -> TrialRecord:
        cfg = self.config
        gs, as_, ts = (derive_seed(cfg.seed, i, tag) for tag in ("graph", "adversary", "tie"))
        start = time.perf_counter()
        try:
            graph = self.graph
            if graph is None:
                graph = graph_from_spec({**dict(cfg.graph), "seed": gs})
            assignment = self._assignment(graph, as_, shared=self.graph is not None)
            trace = disseminate(graph, assignment, cfg.mode, ts)
            verdict = majority_outcome(trace.final)
        except Exception as exc:
            raise ExperimentError(f"trial {i} of scenario {cfg.scenario!r} failed: {exc}") from exc
        return TrialRecord(i, gs, as_, ts, verdict.outcome.value, verdict.ones, verdict.zeros,
                           len(trace.rounds), trace.coins_used,
                           time.perf_counter() - start)


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> tuple[list[TrialRecord], Summary]:
    runner = _Runner(config)
    if runner.graph is not None:
        # settle the shared placement before any worker starts
        runner._assignment(runner.graph, 0, shared=True)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(runner.trial, range(config.trials)))
    else:
        records = [runner.trial(i) for i in range(config.trials)]
    records.sort(key=lambda r: r.trial)
    return records, summarize(records, config)


def estimate_robustness(graph_spec: Mapping, adversary: AdversarySpec | Mapping, mode: str,
                        trials: int, seed: int = 0, **kw) -> Summary:
    return run_experiment(ExperimentConfig(graph_spec, adversary, mode, trials, seed, **kw))[1]


def write_records(records: Sequence[TrialRecord], fh, timing: bool = False) -> None:
    for r in records:
        fh.write(r.to_json(timing) + "\n")


def csv_text(summaries: Sequence[Summary], header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_HEADER)
    for s in summaries:
        w.writerow(s.csv_row())
    return buf.getvalue()


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

COUNTEREXAMPLE_GRAPH = {"type": "counterexample", "params": PSTAR.as_dict(), "n": 20000,
                        "mode": "regular", "seed": 0}
FIG1_BOTTOM = {"e1": [0, 1, 2, 3, 4, 5], "e0": [6, 9]}
# star + expander sizes are picked so that, with the center labeled 0, the
# star outweighs the expander's one-round surplus but not its iterated one
STAR_EXPANDER_GRAPH = {"type": "union", "parts": [
    {"type": "star", "leaves": 400},
    {"type": "regular", "n": 2000, "deg": 3, "seed": 11},
]}


def preset_configs(preset: str, trials: int | None = None,
                   seed: int = 0) -> list[tuple[str, ExperimentConfig]]:
    """(label, config) pairs for a named scenario, iterative first."""
    if preset == "counterexample":
        t = trials or 1000
        adv = AdversarySpec("strong", PSTAR.mu, PSTAR.delta, {"name": "blocks_I_O"})
        return [(m, ExperimentConfig(COUNTEREXAMPLE_GRAPH, adv, m, t, seed,
                                     scenario="counterexample"))
                for m in ("iterative", "noniterative")]
    if preset == "fig1":
        t = trials or 10_000
        line = {"type": "line", "n": 13}
        top = AdversarySpec("strong", 8 / 13, 0.25, {"name": "prefix", "k1": 6, "k0": 2})
        bottom = AdversarySpec("strong", 8 / 13, 0.25, {"name": "fixed", **FIG1_BOTTOM})
        return [("iterative", ExperimentConfig(line, top, "iterative", t, seed,
                                               scenario="fig1_top")),
                ("noniterative", ExperimentConfig(line, bottom, "noniterative", t, seed,
                                                  scenario="fig1_bottom"))]
    if preset == "star_expander":
        t = trials or 400
        mu = 100 / 2401
        out = []
        for m in ("iterative", "noniterative"):
            weak = AdversarySpec("weak", mu, 0.2, {"name": "star_center_first"})
            out.append((f"weak/{m}", ExperimentConfig(STAR_EXPANDER_GRAPH, weak, m, t, seed,
                                                      resample_graph=False,
                                                      scenario="star_expander_weak")))
        for m in ("iterative", "noniterative"):
            strong = AdversarySpec("strong", mu, 0.2, {"name": "ones_on_star"})
            out.append((f"strong/{m}", ExperimentConfig(STAR_EXPANDER_GRAPH, strong, m, t, seed,
                                                        resample_graph=False,
                                                        scenario="star_expander_strong")))
        return out
    raise ValueError(f"unknown preset {preset!r}; choose fig1, counterexample or star_expander")


@dataclass
class ReplicationReport:
    preset: str
    summaries: list[Summary]
    reference: dict

    def table(self) -> str:
        lines = [f"preset: {self.preset}",
                 f"{'scenario':<22}{'mode':<14}{'trials':>7}{'P(1-maj)':>10}"
                 f"{'P(0-maj)':>10}{'95% CI':>20}{'rounds':>8}"]
        for s in self.summaries:
            ci = f"[{s.ci_low:.3f}, {s.ci_high:.3f}]"
            lines.append(f"{s.scenario:<22}{s.mode:<14}{s.trials:>7}{s.one_majority:>10.4f}"
                         f"{s.zero_majority:>10.4f}{ci:>20}{s.mean_rounds:>8.2f}")
        for k, v in self.reference.items():
            lines.append(f"reference {k}: {v}")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {"preset": self.preset, "summaries": [asdict(s) for s in self.summaries],
                "reference": self.reference}


def _reference(preset: str) -> dict:
    if preset == "counterexample":
        return {"noniterative exact P(Bin(80,1/2) >= 41)": exact_binomial_tail(80, 0.5, "ge", 41),
                "iterative final counts": "ones=10040 zeros=9960"}
    if preset == "fig1":
        line = graph_from_spec({"type": "line", "n": 13})
        bottom = ExpertAssignment(np.array(FIG1_BOTTOM["e1"]), np.array(FIG1_BOTTOM["e0"]))
        top = ExpertAssignment(np.arange(6), np.array([6, 7]))
        return {"iterative exact P(1-maj)":
                str(exact_success_probability(line, top, "iterative")),
                "noniterative exact P(1-maj)":
                str(exact_success_probability(line, bottom, "noniterative"))}
    return {"note": "demonstration only; sizes chosen by simulation"}


def replicate(preset: str, trials: int | None = None, seed: int = 0,
              jobs: int = 1) -> ReplicationReport:
    summaries = [run_experiment(cfg, jobs)[1] for _, cfg in preset_configs(preset, trials, seed)]
    return ReplicationReport(preset, summaries, _reference(preset))
