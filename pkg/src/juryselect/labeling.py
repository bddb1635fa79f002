"""Cluster labeling by lasso, bootstrap aggregation, and jury selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .clustering import (
    DEFAULT_K_RANGE,
    GAP_REFERENCES,
    ClusteringError,
    ClusteringResult,
    select_gmm,
    select_kmeans_gap,
)
from .engine import RunData, bootstrap_rounds
from .lasso import LassoError, LassoFit, logistic_lasso_cv
from .model import TYPE_ORDER, AgentType, Population
from .numerics import DecompositionError, component_scores, correlation_matrix, decompose

METHODS = ("GMM", "KM")
BOOTSTRAPS = 5
THRESHOLD = 4
JURY_MODES = ("best", "average", "worst")


class ClassificationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ClusterDesign:
    """Per-round mean vote of each cluster (r x k) and the per-round ``p1``."""

    matrix: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.response):
            raise ValueError(
                f"design {self.matrix.shape} does not match {len(self.response)} responses"
            )

    @property
    def k(self) -> int:
        return self.matrix.shape[1]


def cluster_mean_votes(votes: np.ndarray, assignments, k: int | None = None) -> np.ndarray:
    """Column ``j`` is the mean vote per round over agents in cluster ``j``."""
    votes = np.asarray(votes, dtype=np.float64)
    assignments = np.asarray(assignments, dtype=np.int64)
    if assignments.shape != (votes.shape[1],):
        raise ValueError(f"{len(assignments)} assignments for {votes.shape[1]} agents")
    if k is None:
        k = int(assignments.max()) + 1
    if assignments.min() < 0 or assignments.max() >= k:
        raise ValueError(f"cluster indices must lie in [0, {k})")
    sizes = np.bincount(assignments, minlength=k)
    if np.any(sizes == 0):
        raise ValueError(f"empty clusters: {np.flatnonzero(sizes == 0).tolist()}")
    onehot = np.zeros((votes.shape[1], k))
    onehot[np.arange(votes.shape[1]), assignments] = 1.0
    return votes @ onehot / sizes


def lasso_logistic(design: ClusterDesign, rng: np.random.Generator, **kwargs) -> LassoFit:
    if design.matrix.shape[0] < 20:
        raise ValueError(f"need at least 20 rounds, got {design.matrix.shape[0]}")
    return logistic_lasso_cv(design.matrix, design.response, rng, **kwargs)


def label_clusters(fit: LassoFit) -> np.ndarray:
    """True (authentic) for clusters whose coefficient is nonzero."""
    return fit.beta != 0.0


def aggregate_labels(boot_labels, threshold: int = THRESHOLD) -> np.ndarray:
    """Final authentic verdict: at least ``threshold`` authentic bootstrap labels."""
    boot_labels = np.asarray(boot_labels, dtype=bool)
    return boot_labels.sum(axis=0) >= threshold


@dataclass(frozen=True, eq=False)
class BootstrapLabels:
    """Outcome of one bootstrap: clustering, lasso fit and per-agent labels."""

    clustering: ClusteringResult
    fit: LassoFit
    cluster_labels: np.ndarray
    agent_labels: np.ndarray


@dataclass(frozen=True, eq=False)
class AgentLabeling:
    """Per-agent bootstrap labels (B x n, True = authentic) and final verdicts."""

    method: str
    boot_labels: np.ndarray
    threshold: int = THRESHOLD
    details: tuple = field(default=(), repr=False)

    @property
    def final(self) -> np.ndarray:
        return aggregate_labels(self.boot_labels, self.threshold)

    @property
    def n(self) -> int:
        return self.boot_labels.shape[1]


def classify_bootstrap(
    data: RunData,
    method: str,
    rng: np.random.Generator,
    q: int = 2,
    k_range=DEFAULT_K_RANGE,
    n_refs: int = GAP_REFERENCES,
) -> BootstrapLabels:
    """Resample rounds, embed, cluster, and label clusters by lasso."""
    boot = bootstrap_rounds(data, rng)
    scores = component_scores(decompose(correlation_matrix(boot.votes)), q)
    if method == "GMM":
        clusters = select_gmm(scores, rng, k_range)
    elif method == "KM":
        clusters = select_kmeans_gap(scores, rng, k_range, n_refs)
    else:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    design = ClusterDesign(
        cluster_mean_votes(boot.votes, clusters.assignments, clusters.k), boot.p1
    )
    fit = lasso_logistic(design, rng)
    labels = label_clusters(fit)
    return BootstrapLabels(clusters, fit, labels, labels[clusters.assignments])


def classify_agents(
    data: RunData,
    method: str,
    rng: np.random.Generator,
    bootstraps: int = BOOTSTRAPS,
    threshold: int = THRESHOLD,
    **kwargs,
) -> AgentLabeling:
    """Label every agent from ``bootstraps`` independent resamples.

    Bootstrap ``b`` draws only from the ``b``-th child stream of ``rng``, so
    the result does not depend on the order in which bootstraps run.
    """
    if data.rounds < 2:
        raise ValueError(f"need at least 2 rounds, got {data.rounds}")
    if not 1 <= threshold <= bootstraps:
        raise ValueError(f"threshold {threshold} outside 1..{bootstraps}")
    method = method.upper()
    details = []
    for b, sub in enumerate(rng.spawn(bootstraps)):
        try:
            details.append(classify_bootstrap(data, method, sub, **kwargs))
        except (ClusteringError, LassoError, DecompositionError) as exc:
            raise ClassificationError(f"bootstrap {b + 1} failed: {exc}") from exc
    boot = np.array([d.agent_labels for d in details])
    return AgentLabeling(method, boot, threshold, tuple(details))


@dataclass(frozen=True)
class Jury:
    """Sorted agent ids forming a jury."""

    agents: tuple[int, ...]
    description: str = ""

    @classmethod
    def of(cls, agents: Iterable[int], description: str = "") -> "Jury":
        return cls(tuple(sorted(int(a) for a in agents)), description)

    @classmethod
    def everyone(cls, pop: Population, description: str = "baseline") -> "Jury":
        return cls(tuple(range(pop.n)), description)

    def __len__(self) -> int:
        return len(self.agents)

    @property
    def ids(self) -> np.ndarray:
        return np.asarray(self.agents, dtype=np.int64)


def select_jury(labeling: AgentLabeling) -> Jury:
    return Jury.of(np.flatnonzero(labeling.final), f"{labeling.method} selection")


@dataclass(frozen=True)
class MisclassSummary:
    """Mean and sample SD of the per-type misclassification rate across runs."""

    mean: Mapping[AgentType, float]
    sd: Mapping[AgentType, float]
    runs: int = 0

    @classmethod
    def from_runs(cls, rates: list[Mapping[AgentType, float]]) -> "MisclassSummary":
        if not rates:
            raise ValueError("no runs to summarize")
        types = [t for t in TYPE_ORDER if t in rates[0]]
        mean, sd = {}, {}
        for t in types:
            values = np.array([r[t] for r in rates], dtype=np.float64)
            mean[t] = float(values.mean())
            sd[t] = float(values.std(ddof=1)) if len(values) > 1 else 0.0
        return cls(mean, sd, len(rates))

    def delta(self, t: AgentType, mode: str) -> float:
        if t not in self.mean:
            raise ValueError(f"summary has no entry for agent type {t.value}")
        m, s = self.mean[t], self.sd[t]
        if mode == "average":
            return m
        if mode == "best":
            return max(0.0, m - 2.0 * s)
        if mode == "worst":
            return min(m + 2.0 * s, 1.0)
        raise ValueError(f"unknown jury mode {mode!r}, expected one of {JURY_MODES}")


def keep_count(size: int, delta: float) -> int:
    """``min(floor(size * delta), size)``, robust to round-off just below an integer."""
    return min(int(math.floor(size * delta + 1e-9)), size)


def expected_jury(pop: Population, summary: MisclassSummary, mode: str) -> Jury:
    """Keep the first ``1 - delta_A`` share of authentic agents and the first
    ``delta_Y`` share of each inauthentic type ``Y``."""
    keep = []
    for t, size in pop.counts().items():
        delta = summary.delta(t, mode)
        share = 1.0 - delta if t.authentic else delta
        keep.extend(pop.members(t)[: keep_count(size, share)].tolist())
    return Jury.of(keep, f"expected {mode}")
