"""Majority votes, majority correctness scores and misclassification rates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .engine import NONE, RoundFilter, RunData, filter_rounds
from .labeling import AgentLabeling, Jury
from .model import AgentType, Population


def majority_vote(profile, jury: Jury | Iterable[int] | None = None) -> int:
    """-1 if the jury's votes sum below zero, else +1 (ties and empty juries give +1)."""
    profile = np.asarray(profile)
    ids = _ids(jury, len(profile))
    return -1 if int(profile[ids].astype(np.int64).sum()) < 0 else 1


def majority_votes(votes: np.ndarray, jury: Jury | Iterable[int] | None = None) -> np.ndarray:
    """Row-wise ``majority_vote`` over a rounds x agents matrix."""
    votes = np.asarray(votes)
    ids = _ids(jury, votes.shape[1])
    totals = votes[:, ids].astype(np.int64).sum(axis=1)
    return np.where(totals < 0, -1, 1).astype(np.int8)


def _ids(jury, n: int) -> np.ndarray:
    if jury is None:
        return np.arange(n)
    ids = jury.ids if isinstance(jury, Jury) else np.asarray(list(jury), dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise ValueError(f"jury contains agents outside 0..{n - 1}")
    return ids.astype(np.int64)


def mcs(data: RunData, jury: Jury | None = None, f: RoundFilter = NONE) -> float | None:
    """Percentage of filtered rounds whose jury majority equals ``p1``.

    Returns ``None`` when the filter keeps no rounds: the score is undefined.
    """
    kept = filter_rounds(data, f)
    if kept.rounds == 0:
        return None
    return 100.0 * float(np.mean(majority_votes(kept.votes, jury) == kept.p1))


@dataclass(frozen=True)
class McsReport:
    """Mean and sample SD of per-run MCS; ``undefined`` counts runs with no kept rounds."""

    mean: float | None
    sd: float | None
    runs: int
    undefined: int = 0
    jury: str = ""
    filter: str = "NONE"

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "runs": self.runs,
            "undefined": self.undefined,
            "jury": self.jury,
            "filter": self.filter,
        }


def aggregate_mcs(values: Sequence[float | None], jury: str = "", filter: str = "NONE") -> McsReport:
    """Sample mean and SD of the defined per-run values."""
    defined = np.array([v for v in values if v is not None], dtype=np.float64)
    undefined = len(values) - len(defined)
    mean = float(defined.mean()) if len(defined) else None
    sd = float(defined.std(ddof=1)) if len(defined) > 1 else None
    return McsReport(mean, sd, len(defined), undefined, jury, filter)


def misclassification(labeling: AgentLabeling, pop: Population) -> dict[AgentType, float]:
    """Per type: authentic agents labeled inauthentic, or inauthentic agents labeled authentic."""
    final = labeling.final
    if len(final) != pop.n:
        raise ValueError(f"labeling covers {len(final)} agents, population has {pop.n}")
    rates = {}
    for t in pop.counts():
        labels = final[pop.members(t)]
        wrong = ~labels if t.authentic else labels
        rates[t] = float(wrong.mean())
    return rates


def group_rates(rates: Mapping[AgentType, float], pop: Population) -> dict[str, float | None]:
    """Authentic rate and the agent-weighted inauthentic rate."""
    counts = pop.counts()
    inauth = [(rates[t], c) for t, c in counts.items() if not t.authentic]
    total = sum(c for _, c in inauth)
    return {
        "authentic": rates.get(AgentType.A),
        "inauthentic": sum(r * c for r, c in inauth) / total if total else None,
    }


@dataclass(frozen=True)
class SweepSpec:
    """Authentic counts to sweep against a fixed inauthentic composition."""

    authentic_counts: tuple[int, ...]
    inauthentic: Mapping[AgentType, int]
    filter: RoundFilter = NONE
    label: str = ""

    def __post_init__(self):
        counts = self.authentic_counts
        if not counts or any(c < 1 for c in counts) or list(counts) != sorted(set(counts)):
            raise ValueError(f"authentic counts must be positive and ascending, got {counts}")


def sweep_jury(pop: Population, n_authentic: int, inauthentic: Mapping[AgentType, int]) -> Jury:
    """First ``n_authentic`` authentic agents plus the first agents of each inauthentic type."""
    want = {AgentType.A: n_authentic, **inauthentic}
    ids = []
    for t, count in want.items():
        members = pop.members(t)
        if count > len(members):
            raise ValueError(f"{count} agents of type {t.value} requested, corpus has {len(members)}")
        ids.extend(members[:count].tolist())
    return Jury.of(ids, f"|A|={n_authentic}")


def baseline_sweep(spec: SweepSpec, corpus: Sequence[RunData]) -> list[tuple[int, McsReport]]:
    """MCS per authentic count on a shared corpus by subsetting its agents."""
    if not corpus:
        raise ValueError("empty corpus")
    pop = corpus[0].population
    out = []
    for m in spec.authentic_counts:
        jury = sweep_jury(pop, m, spec.inauthentic)
        values = [mcs(d, jury, spec.filter) for d in corpus]
        out.append((m, aggregate_mcs(values, jury.description, spec.filter.name)))
    return out


def default_sweep_counts(max_authentic: int = 1000) -> tuple[int, ...]:
    """1, 3, 5, 10, then steps of 25 up to ``max_authentic``."""
    head = [c for c in (1, 3, 5, 10) if c <= max_authentic]
    return tuple(head + list(range(25, max_authentic + 1, 25)))
