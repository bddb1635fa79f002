"""Experiment configuration and the end-to-end table and figure builders."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import partial
from typing import Callable, Sequence

import numpy as np

from . import reference as ref
from .clustering import DEFAULT_K_RANGE
from .engine import (
    FILTERS,
    RoundFilter,
    RunConfig,
    RunData,
    derived_rng,
    run,
    take_rounds,
)
from .labeling import (
    BOOTSTRAPS,
    JURY_MODES,
    METHODS,
    THRESHOLD,
    AgentLabeling,
    MisclassSummary,
    classify_agents,
    expected_jury,
    select_jury,
)
from .metrics import (
    McsReport,
    SweepSpec,
    aggregate_mcs,
    baseline_sweep,
    default_sweep_counts,
    group_rates,
    mcs,
    misclassification,
)
from .model import INAUTHENTIC_TYPES, TYPE_ORDER, AgentType, NoiseLevel, Population
from .numerics import component_scores, correlation_matrix, decompose

REFERENCE_RUNS = 100
# Classification streams use a second key far above any round index, so they
# never coincide with the per-round simulation streams ``(run, round)``.
CLASSIFY_TAG = 2**31
METHOD_CODES = {"GMM": 0, "KM": 1}


def parse_population(text: str) -> Population:
    """Preset name (``All``, ``Full``, ``B_up``, ...) or counts ``A=100,B_up=100``."""
    if "=" not in text:
        return Population.preset(text)
    counts = {}
    for item in text.split(","):
        tag, _, count = item.partition("=")
        try:
            counts[AgentType.parse(tag.strip())] = int(count)
        except ValueError as exc:
            raise ValueError(f"bad population entry {item!r}: {exc}") from None
    return Population.from_counts(counts)


def parse_noise(text: str) -> NoiseLevel:
    """Preset name (``LOW``, ``MID``, ``HIGH``) or three probabilities ``p1,p2,p3``."""
    if "," not in text:
        return NoiseLevel.preset(text)
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"noise needs three probabilities, got {text!r}")
    return NoiseLevel(*(float(p) for p in parts))


def parse_k_range(text: str) -> range:
    lo, sep, hi = text.partition("..")
    if not sep:
        raise ValueError(f"k range must look like 2..20, got {text!r}")
    lo, hi = int(lo), int(hi)
    if not 1 <= lo <= hi:
        raise ValueError(f"invalid k range {text!r}")
    return range(lo, hi + 1)


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of one experiment; defaults are the reference configuration."""

    seed: int = 0
    population: str = "All"
    noise: str = "LOW"
    rounds: int = 500
    runs: int = REFERENCE_RUNS
    method: str = "GMM"
    bootstraps: int = BOOTSTRAPS
    threshold: int = THRESHOLD
    filter: str = "NONE"
    q: int = 2
    k_range: str = f"{DEFAULT_K_RANGE.start}..{DEFAULT_K_RANGE.stop - 1}"

    def __post_init__(self):
        if self.method.upper() not in (*METHODS, "BOTH"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 1 <= self.threshold <= self.bootstraps:
            raise ValueError(f"threshold {self.threshold} outside 1..{self.bootstraps}")
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        # Parse eagerly so bad values fail before any work starts.
        self.pop, self.noise_level, self.ks, self.round_filter  # noqa: B018

    @property
    def pop(self) -> Population:
        return parse_population(self.population)

    @property
    def noise_level(self) -> NoiseLevel:
        return parse_noise(self.noise)

    @property
    def ks(self) -> range:
        return parse_k_range(self.k_range)

    @property
    def round_filter(self) -> RoundFilter:
        return RoundFilter.preset(self.filter)

    @property
    def methods(self) -> tuple[str, ...]:
        m = self.method.upper()
        return METHODS if m == "BOTH" else (m,)

    def run_config(self) -> RunConfig:
        return RunConfig(self.pop, self.noise_level, self.rounds, self.runs, self.seed)

    def classify_options(self) -> dict:
        return {"bootstraps": self.bootstraps, "threshold": self.threshold, "q": self.q, "k_range": self.ks}

    def as_dict(self) -> dict:
        return asdict(self)


def classification_rng(seed: int, run_index: int, method: str) -> np.random.Generator:
    return derived_rng(seed, run_index, CLASSIFY_TAG + METHOD_CODES[method.upper()])


def classify_run(data: RunData, method: str, seed: int, **options) -> AgentLabeling:
    """Classify one run with the stream reserved for ``(seed, run, method)``."""
    return classify_agents(data, method, classification_rng(seed, data.run, method), **options)


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def classify_corpus(
    corpus: Sequence[RunData], method: str, seed: int, jobs: int = 1, **options
) -> list[AgentLabeling]:
    return _map(partial(classify_run, method=method, seed=seed, **options), list(corpus), jobs)


@dataclass(frozen=True, eq=False)
class MethodOutcome:
    """Labelings of a corpus by one method plus the per-type rate summary."""

    method: str
    labelings: list
    rates: list
    summary: MisclassSummary

    def group(self, pop: Population) -> dict:
        """Mean and sample SD across runs of the authentic and inauthentic rates."""
        per_run = [group_rates(r, pop) for r in self.rates]
        out = {}
        for g in ("authentic", "inauthentic"):
            values = [r[g] for r in per_run if r[g] is not None]
            if values:
                v = np.array(values)
                out[g] = {"mean": float(v.mean()), "sd": float(v.std(ddof=1)) if len(v) > 1 else 0.0}
        return out


def evaluate_method(
    corpus: Sequence[RunData], method: str, seed: int, jobs: int = 1, **options
) -> MethodOutcome:
    labelings = classify_corpus(corpus, method, seed, jobs, **options)
    pop = corpus[0].population
    rates = [misclassification(lab, pop) for lab in labelings]
    return MethodOutcome(method, labelings, rates, MisclassSummary.from_runs(rates))


def baseline_mcs(corpus: Sequence[RunData], f: RoundFilter) -> McsReport:
    return aggregate_mcs([mcs(d, None, f) for d in corpus], "baseline", f.name)


def selected_mcs(corpus: Sequence[RunData], labelings: Sequence[AgentLabeling], f: RoundFilter) -> McsReport:
    juries = [select_jury(lab) for lab in labelings]
    return aggregate_mcs([mcs(d, j, f) for d, j in zip(corpus, juries)], "selected", f.name)


def expected_mcs(corpus: Sequence[RunData], summary: MisclassSummary, mode: str, f: RoundFilter) -> McsReport:
    jury = expected_jury(corpus[0].population, summary, mode)
    return aggregate_mcs([mcs(d, jury, f) for d in corpus], jury.description, f.name)


def rates_record(rates: dict, pop: Population) -> dict:
    return {
        "per_type": {t.value: r for t, r in rates.items()},
        **group_rates(rates, pop),
    }


def summary_record(summary: MisclassSummary) -> dict:
    return {
        "runs": summary.runs,
        "mean": {t.value: v for t, v in summary.mean.items()},
        "sd": {t.value: v for t, v in summary.sd.items()},
    }


def summary_from_record(record: dict) -> MisclassSummary:
    mean = {AgentType.parse(k): float(v) for k, v in record["mean"].items()}
    sd = {AgentType.parse(k): float(v) for k, v in record["sd"].items()}
    return MisclassSummary(mean, sd, int(record.get("runs", 0)))


def compare(measured: float | None, reference: tuple[float, float], tolerance: float) -> dict:
    mean, sd = reference
    within = measured is not None and abs(measured - mean) <= tolerance
    return {"reference_mean": mean, "reference_sd": sd, "tolerance": tolerance, "within": within}


# -- reproduction targets -----------------------------------------------------


def scaled_runs(scale: float) -> int:
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return max(2, int(round(REFERENCE_RUNS * scale)))


def stream_seed(seed: int, *key: int) -> int:
    """Independent integer seed for one sub-experiment."""
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


class Workbench:
    """Caches corpora and method outcomes shared between targets."""

    def __init__(self, seed: int = 0, scale: float = 0.2, rounds: int = 500, jobs: int = 1, options=None):
        self.seed = seed
        self.runs = scaled_runs(scale)
        self.scale = scale
        self.rounds = rounds
        self.jobs = jobs
        self.options = dict(options or {})
        self._corpora: dict = {}
        self._outcomes: dict = {}

    def corpus(self, population: str, noise: str, rounds: int | None = None) -> list[RunData]:
        rounds = rounds or self.rounds
        key = (population, noise)
        if key not in self._corpora or self._corpora[key][0].rounds < rounds:
            pi = ("Full", *ref.POPULATIONS).index(population)
            ni = ref.NOISES.index(noise)
            config = RunConfig(
                parse_population(population), parse_noise(noise), rounds, self.runs,
                stream_seed(self.seed, pi, ni),
            )
            self._corpora[key] = run(config, self.jobs)
        return [take_rounds(d, rounds) for d in self._corpora[key]]

    def outcome(self, population: str, noise: str, method: str, rounds: int | None = None) -> MethodOutcome:
        rounds = rounds or self.rounds
        key = (population, noise, method, rounds)
        if key not in self._outcomes:
            corpus = self.corpus(population, noise, rounds)
            self._outcomes[key] = evaluate_method(corpus, method, self.seed, self.jobs, **self.options)
        return self._outcomes[key]

    def header(self, target: str) -> dict:
        return {
            "target": target,
            "seed": self.seed,
            "scale": self.scale,
            "runs": self.runs,
            "rounds": self.rounds,
            "options": {k: (f"{v.start}..{v.stop - 1}" if isinstance(v, range) else v) for k, v in self.options.items()},
        }


def table2(bench: Workbench, noises=ref.NOISES, populations=ref.POPULATIONS) -> dict:
    """Misclassification per method, group, noise and population."""
    cells = []
    for noise in noises:
        for population in populations:
            pop = parse_population(population)
            for method in METHODS:
                out = bench.outcome(population, noise, method)
                groups = out.group(pop)
                for g in ("authentic", "inauthentic"):
                    measured = groups[g]
                    cells.append({
                        "method": method,
                        "group": g,
                        "noise": noise,
                        "population": population,
                        "mean": measured["mean"],
                        "sd": measured["sd"],
                        **compare(measured["mean"], ref.MISCLASS[(method, g)][noise][population], ref.MISCLASS_TOLERANCE),
                    })
                cells.append({
                    "method": method,
                    "group": "per_type",
                    "noise": noise,
                    "population": population,
                    **summary_record(out.summary),
                })
    return {**bench.header("table2"), "cells": cells}


def table3(bench: Workbench, noises=ref.NOISES, populations=("B_up", "D_up", "L_up", "All")) -> dict:
    """Baseline and expected-jury MCS per population, filter, noise and method."""
    cells = []
    for population in populations:
        for noise in noises:
            corpus = bench.corpus(population, noise)
            for fname, f in FILTERS.items():
                expected = ref.MCS[population][fname][noise]
                rep = baseline_mcs(corpus, f)
                cells.append(_mcs_cell(population, noise, fname, "baseline", None, rep, expected["baseline"]))
                for method in METHODS:
                    summary = bench.outcome(population, noise, method).summary
                    for mode in JURY_MODES:
                        rep = expected_mcs(corpus, summary, mode, f)
                        cells.append(_mcs_cell(population, noise, fname, method, mode, rep, expected[method][mode]))
    return {**bench.header("table3"), "cells": cells}


def _mcs_cell(population, noise, fname, method, mode, rep: McsReport, reference) -> dict:
    return {
        "population": population,
        "noise": noise,
        "filter": fname,
        "method": method,
        "mode": mode,
        "mean": rep.mean,
        "sd": rep.sd,
        "runs": rep.runs,
        "undefined": rep.undefined,
        **compare(rep.mean, reference, ref.MCS_TOLERANCE),
    }


SWEEP_FIELDS = ("figure", "curve", "noise", "filter", "n_authentic", "mean", "sd", "runs", "undefined")


def _sweep_rows(figure, curve, noise, spec: SweepSpec, corpus) -> list[dict]:
    return [
        {
            "figure": figure,
            "curve": curve,
            "noise": noise,
            "filter": spec.filter.name,
            "n_authentic": m,
            "mean": rep.mean,
            "sd": rep.sd,
            "runs": rep.runs,
            "undefined": rep.undefined,
        }
        for m, rep in baseline_sweep(spec, corpus)
    ]


FIG1_CURVES = {
    "A": {},
    "B_up": {AgentType.B_UP: 100},
    "D_up": {AgentType.D_UP: 100},
    "L_up": {AgentType.L_UP: 100},
}


def fig1(bench: Workbench, counts: Sequence[int] | None = None) -> list[dict]:
    """Active-round MCS against the number of authentic agents, LOW noise."""
    counts = tuple(counts or default_sweep_counts())
    corpus = bench.corpus("Full", "LOW")
    f = FILTERS["ACTIVE"]
    rows = []
    for curve, inauth in FIG1_CURVES.items():
        rows += _sweep_rows("fig1", curve, "LOW", SweepSpec(counts, inauth, f, curve), corpus)
    return rows


def fig2(bench: Workbench, counts: Sequence[int] | None = None, noises=ref.NOISES) -> list[dict]:
    """MCS against the number of authentic agents for each inauthentic type and all jointly."""
    counts = tuple(counts or default_sweep_counts())
    f = FILTERS["NONE"]
    rows = []
    for noise in noises:
        corpus = bench.corpus("Full", noise)
        curves = {t.value: {t: 100} for t in INAUTHENTIC_TYPES}
        curves["all"] = {t: 100 for t in INAUTHENTIC_TYPES}
        for curve, inauth in curves.items():
            rows += _sweep_rows("fig2", curve, noise, SweepSpec(counts, inauth, f, curve), corpus)
    return rows


SCORE_FIELDS = ("noise", "agent_id", "true_type", "score_1", "score_2")


def fig3(bench: Workbench, noises=ref.NOISES) -> list[dict]:
    """Two-dimensional component scores of the first ``All`` run per noise level."""
    rows = []
    for noise in noises:
        data = bench.corpus("All", noise)[0]
        scores = component_scores(decompose(correlation_matrix(data.votes)), 2)
        for a, (s1, s2) in enumerate(scores):
            rows.append({
                "noise": noise,
                "agent_id": a,
                "true_type": data.population.types[a].value,
                "score_1": float(s1),
                "score_2": float(s2),
            })
    return rows


def robustness(bench: Workbench, rounds: Sequence[int] = (250, 500, 750, 1000)) -> dict:
    """Per-type false negatives on ``All`` at LOW noise for shorter and longer runs."""
    cells = []
    for r in rounds:
        for method in METHODS:
            out = bench.outcome("All", "LOW", method, r)
            for t in TYPE_ORDER[1:7]:
                cell = {
                    "rounds": r,
                    "method": method,
                    "type": t.value,
                    "mean": out.summary.mean[t],
                    "sd": out.summary.sd[t],
                }
                reference = ref.KM_ROBUSTNESS_LOW.get(t.value, {}).get(r)
                if method == "KM" and reference is not None:
                    cell.update(compare(cell["mean"], reference, 0.10))
                cells.append(cell)
    return {**bench.header("robustness"), "cells": cells}
