"""Multi-run experiments, vote datasets on disk, and round resampling/filters."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import groupby
from pathlib import Path
from typing import Callable

import numpy as np

from .model import (
    COMPETENCE_RANGE,
    AgentType,
    NoiseLevel,
    Population,
    simulate_round,
)

FORMAT_VERSION = 1


class DatasetError(ValueError):
    """A vote CSV or manifest could not be parsed."""

    def __init__(self, path, message: str, line: int | None = None, column: str | None = None):
        self.path = str(path)
        self.line = line
        self.column = column
        where = self.path
        if line is not None:
            where += f", line {line}"
        if column is not None:
            where += f", column {column!r}"
        super().__init__(f"{where}: {message}")


def round_rng(seed: int, run: int, round_index: int) -> np.random.Generator:
    """Independent stream for one round of one run."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(run, round_index)))


def derived_rng(seed: int, *key: int) -> np.random.Generator:
    """Stream for any job identified by integer ``key`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass(frozen=True)
class RunConfig:
    population: Population
    noise: NoiseLevel
    rounds: int = 1000
    runs: int = 1
    seed: int = 0
    competence: tuple[float, float] = COMPETENCE_RANGE

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")


@dataclass(frozen=True, eq=False)
class RunData:
    """Votes of one run: ``votes`` is rounds x agents, ``props`` rounds x 3."""

    votes: np.ndarray
    props: np.ndarray
    population: Population
    noise: NoiseLevel
    seed: int = 0
    run: int = 0
    competence: tuple[float, float] = COMPETENCE_RANGE
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.votes.ndim != 2 or self.props.shape != (self.votes.shape[0], 3):
            raise ValueError(
                f"votes {self.votes.shape} and props {self.props.shape} are not aligned"
            )
        if self.votes.shape[1] != self.population.n:
            raise ValueError(
                f"{self.votes.shape[1]} vote columns for a population of {self.population.n}"
            )

    @property
    def rounds(self) -> int:
        return self.votes.shape[0]

    @property
    def n(self) -> int:
        return self.votes.shape[1]

    @property
    def p1(self) -> np.ndarray:
        return self.props[:, 0]

    def select_agents(self, agents) -> "RunData":
        agents = np.asarray(agents, dtype=int)
        return replace(self, votes=self.votes[:, agents], population=self.population.subset(agents))

    def same_as(self, other: "RunData") -> bool:
        return (
            np.array_equal(self.votes, other.votes)
            and np.array_equal(self.props, other.props)
            and self.population == other.population
            and self.noise == other.noise
            and self.seed == other.seed
            and self.run == other.run
        )


def simulate_run(config: RunConfig, run_index: int) -> RunData:
    pop = config.population
    votes = np.empty((config.rounds, pop.n), dtype=np.int8)
    props = np.empty((config.rounds, 3), dtype=np.int8)
    for t in range(config.rounds):
        state, profile = simulate_round(
            pop, config.noise, round_rng(config.seed, run_index, t), config.competence
        )
        votes[t] = profile
        props[t] = state.p
    return RunData(votes, props, pop, config.noise, config.seed, run_index, config.competence)


def run(config: RunConfig, jobs: int = 1) -> list[RunData]:
    """Simulate ``config.runs`` independent runs; run ``i`` is keyed by ``(seed, i)``."""
    indices = range(config.runs)
    if jobs <= 1 or config.runs == 1:
        return [simulate_run(config, i) for i in indices]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(simulate_run, [config] * config.runs, indices))


def take_rounds(data: RunData, rounds: int) -> RunData:
    """Keep the first ``rounds`` rounds."""
    if rounds < 1 or rounds > data.rounds:
        raise ValueError(f"cannot take {rounds} rounds from a run of {data.rounds}")
    return replace(data, votes=data.votes[:rounds], props=data.props[:rounds])


def bootstrap_rounds(data: RunData, rng: np.random.Generator) -> RunData:
    """Resample rounds with replacement; props travel with their votes."""
    idx = rng.integers(0, data.rounds, size=data.rounds)
    return replace(data, votes=data.votes[idx], props=data.props[idx])


@dataclass(frozen=True)
class RoundFilter:
    """Named predicate over the per-round property record."""

    name: str
    predicate: Callable[[np.ndarray], np.ndarray]

    def mask(self, props: np.ndarray) -> np.ndarray:
        return np.asarray(self.predicate(props), dtype=bool)

    @classmethod
    def preset(cls, name: str) -> "RoundFilter":
        try:
            return FILTERS[name.upper()]
        except KeyError:
            raise ValueError(f"unknown round filter {name!r}") from None


def _no_filter(props):
    return np.ones(len(props), dtype=bool)


def _active(props):
    return (props[:, 1] == 1) & (props[:, 2] == 1)


NONE = RoundFilter("NONE", _no_filter)
ACTIVE = RoundFilter("ACTIVE", _active)
FILTERS = {"NONE": NONE, "ACTIVE": ACTIVE}


def filter_rounds(data: RunData, f: RoundFilter) -> RunData:
    """Rounds satisfying ``f`` in their original order (possibly none)."""
    keep = f.mask(data.props)
    return replace(data, votes=data.votes[keep], props=data.props[keep])


# -- on-disk format ---------------------------------------------------------


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def population_runs(pop: Population) -> list[list]:
    """Run-length encoding ``[[type_tag, count], ...]`` in agent-id order."""
    return [[t.value, len(list(g))] for t, g in groupby(pop.types)]


def population_from_runs(runs: list) -> Population:
    types: list[AgentType] = []
    for tag, count in runs:
        types.extend([AgentType.parse(tag)] * int(count))
    return Population(tuple(types))


def votes_csv(data: RunData) -> str:
    buf = io.StringIO()
    header = ["round", "p1", "p2", "p3"] + [f"agent_{a}" for a in range(data.n)]
    buf.write(",".join(header) + "\n")
    cells = np.where(np.hstack([data.props, data.votes]) > 0, "1", "-1")
    for t, row in enumerate(cells):
        buf.write(f"{t}," + ",".join(row) + "\n")
    return buf.getvalue()


def manifest(data: RunData) -> dict:
    counts = data.population.counts()
    return {
        "format_version": FORMAT_VERSION,
        "seed": data.seed,
        "run": data.run,
        "rounds": data.rounds,
        "n_agents": data.n,
        "noise": dict(zip(("prob_p1", "prob_p2", "prob_p3"), data.noise.as_tuple())),
        "competence": list(data.competence),
        "counts": {t.value: c for t, c in counts.items()},
        "agent_types": population_runs(data.population),
        **({"meta": data.meta} if data.meta else {}),
    }


def write_run(data: RunData, csv_path: str | os.PathLike) -> tuple[Path, Path]:
    """Write ``<name>.csv`` and its ``<name>.json`` manifest."""
    csv_path = Path(csv_path)
    json_path = csv_path.with_suffix(".json")
    atomic_write_text(csv_path, votes_csv(data))
    atomic_write_text(json_path, json.dumps(manifest(data), indent=2) + "\n")
    return csv_path, json_path


def _parse_vote(cell: str, path, line: int, column: str) -> int:
    if cell == "1":
        return 1
    if cell == "-1":
        return -1
    raise DatasetError(path, f"expected 1 or -1, got {cell!r}", line, column)


def read_run(csv_path: str | os.PathLike) -> RunData:
    """Parse a vote CSV and its sibling manifest back into a ``RunData``."""
    csv_path = Path(csv_path)
    json_path = csv_path.with_suffix(".json")
    try:
        meta = json.loads(json_path.read_text())
    except FileNotFoundError:
        raise DatasetError(json_path, "manifest not found") from None
    except json.JSONDecodeError as exc:
        raise DatasetError(json_path, f"invalid JSON ({exc.msg})", exc.lineno) from None
    if meta.get("format_version") != FORMAT_VERSION:
        raise DatasetError(json_path, f"unsupported format_version {meta.get('format_version')!r}")
    pop = population_from_runs(meta["agent_types"])

    try:
        fh = open(csv_path, newline="")
    except FileNotFoundError:
        raise DatasetError(csv_path, "file not found") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["round", "p1", "p2", "p3"] + [f"agent_{a}" for a in range(pop.n)]
        if header != expected:
            if header is None:
                raise DatasetError(csv_path, "empty file", 1)
            raise DatasetError(
                csv_path,
                f"header does not match manifest ({len(header)} columns, expected {len(expected)})",
                1,
            )
        rows = []
        for line, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise DatasetError(
                    csv_path, f"expected {len(expected)} fields, got {len(row)}", line
                )
            if row[0] != str(line - 2):
                raise DatasetError(csv_path, f"round index {row[0]!r} out of sequence", line, "round")
            rows.append(
                [_parse_vote(c, csv_path, line, expected[j + 1]) for j, c in enumerate(row[1:])]
            )
    if len(rows) != meta["rounds"]:
        raise DatasetError(
            csv_path, f"found {len(rows)} rounds, manifest says {meta['rounds']}", len(rows) + 1
        )
    if not rows:
        raise DatasetError(csv_path, "no rounds", 2)
    table = np.array(rows, dtype=np.int8)
    noise = NoiseLevel(**meta["noise"])
    return RunData(
        votes=table[:, 3:],
        props=table[:, :3],
        population=pop,
        noise=noise,
        seed=meta["seed"],
        run=meta["run"],
        competence=tuple(meta["competence"]),
        meta=meta.get("meta", {}),
    )
