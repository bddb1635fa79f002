"""Runs, on-disk format, resampling and round filters."""

from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from juryselect.engine import (
    ACTIVE,
    NONE,
    DatasetError,
    RoundFilter,
    RunConfig,
    RunData,
    bootstrap_rounds,
    filter_rounds,
    read_run,
    run,
    take_rounds,
    write_run,
)
from juryselect.model import LOW, MID, AgentType, Population


@pytest.fixture(scope="module")
def small_runs():
    return run(RunConfig(Population.preset("B_up"), LOW, rounds=60, runs=3, seed=4))


class TestRun:
    def test_shapes(self, small_runs):
        assert len(small_runs) == 3
        assert all(d.votes.shape == (60, 200) and d.props.shape == (60, 3) for d in small_runs)
        assert [d.run for d in small_runs] == [0, 1, 2]

    def test_deterministic(self, small_runs):
        again = run(RunConfig(Population.preset("B_up"), LOW, rounds=60, runs=3, seed=4))
        assert all(a.same_as(b) for a, b in zip(small_runs, again))

    def test_prefix_stable(self, small_runs):
        longer = run(RunConfig(Population.preset("B_up"), LOW, rounds=90, runs=1, seed=4))[0]
        assert take_rounds(longer, 60).same_as(small_runs[0])

    def test_parallel_matches_serial(self):
        config = RunConfig(Population.from_counts({"A": 5, "D_up": 5}), MID, rounds=20, runs=3, seed=1)
        serial, parallel = run(config), run(config, jobs=2)
        assert all(a.same_as(b) for a, b in zip(serial, parallel))

    def test_runs_differ(self, small_runs):
        assert not np.array_equal(small_runs[0].votes, small_runs[1].votes)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            RunConfig(Population.preset("B_up"), LOW, rounds=0)

    def test_select_agents(self, small_runs):
        sub = small_runs[0].select_agents([0, 150])
        assert sub.n == 2 and sub.population.types == (AgentType.A, AgentType.B_UP)


class TestFormat:
    def test_round_trip(self, small_runs, tmp_path):
        csv_path, json_path = write_run(small_runs[1], tmp_path / "r.csv")
        assert read_run(csv_path).same_as(small_runs[1])
        meta = json.loads(json_path.read_text())
        assert meta["counts"] == {"A": 100, "B_up": 100} and meta["format_version"] == 1

    def test_header(self, small_runs, tmp_path):
        csv_path, _ = write_run(small_runs[0], tmp_path / "r.csv")
        header = csv_path.read_text().splitlines()[0].split(",")
        assert header[:5] == ["round", "p1", "p2", "p3", "agent_0"] and header[-1] == "agent_199"

    def test_byte_identical_rewrite(self, small_runs, tmp_path):
        a, _ = write_run(small_runs[0], tmp_path / "a.csv")
        b, _ = write_run(run(RunConfig(Population.preset("B_up"), LOW, 60, 1, 4))[0], tmp_path / "b.csv")
        assert a.read_bytes() == b.read_bytes()

    def test_truncated_names_line(self, small_runs, tmp_path):
        csv_path, _ = write_run(small_runs[0], tmp_path / "r.csv")
        lines = csv_path.read_text().splitlines()
        csv_path.write_text("\n".join(lines[:10] + [lines[10][:40]]) + "\n")
        with pytest.raises(DatasetError) as err:
            read_run(csv_path)
        assert err.value.line == 11

    def test_bad_cell_names_column(self, small_runs, tmp_path):
        csv_path, _ = write_run(small_runs[0], tmp_path / "r.csv")
        lines = csv_path.read_text().splitlines()
        cells = lines[3].split(",")
        cells[6] = "0"
        lines[3] = ",".join(cells)
        csv_path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetError) as err:
            read_run(csv_path)
        assert (err.value.line, err.value.column) == (4, "agent_2")

    def test_missing_rows(self, small_runs, tmp_path):
        csv_path, _ = write_run(small_runs[0], tmp_path / "r.csv")
        lines = csv_path.read_text().splitlines()
        csv_path.write_text("\n".join(lines[:-5]) + "\n")
        with pytest.raises(DatasetError, match="manifest says 60"):
            read_run(csv_path)

    def test_missing_manifest(self, small_runs, tmp_path):
        csv_path, json_path = write_run(small_runs[0], tmp_path / "r.csv")
        json_path.unlink()
        with pytest.raises(DatasetError, match="manifest not found"):
            read_run(csv_path)


class TestResampling:
    def test_bootstrap_keeps_props_with_votes(self, small_runs):
        d = small_runs[0]
        b = bootstrap_rounds(d, np.random.default_rng(0))
        index = {tuple(np.r_[p, v]) for p, v in zip(d.props, d.votes)}
        assert all(tuple(np.r_[p, v]) in index for p, v in zip(b.props, b.votes))

    def test_bootstrap_unique_fraction(self):
        # Expected share of distinct rows in a bootstrap of size n is 1 - (1 - 1/n)^n.
        n = 500
        rng = np.random.default_rng(3)
        idx = [len(np.unique(rng.integers(0, n, n))) / n for _ in range(400)]
        assert abs(np.mean(idx) - (1 - (1 - 1 / n) ** n)) < 0.003
        assert abs(np.mean(idx) - 0.632) < 0.005

    def test_active_fraction_low(self):
        d = run(RunConfig(Population.from_counts({"A": 1}), LOW, rounds=20_000, runs=1, seed=0))[0]
        frac = ACTIVE.mask(d.props).mean()
        assert abs(frac - 0.675) < 3 * np.sqrt(0.675 * 0.325 / 20_000)


class TestFilters:
    def test_preset_lookup(self):
        assert RoundFilter.preset("active") is ACTIVE
        with pytest.raises(ValueError):
            RoundFilter.preset("sometimes")

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(*[st.sampled_from([-1, 1])] * 3), min_size=1, max_size=30))
    def test_active_keeps_exactly_p2_p3_up(self, rows):
        props = np.array(rows, dtype=np.int8)
        pop = Population.from_counts({"A": 1})
        d = RunData(np.ones((len(rows), 1), dtype=np.int8), props, pop, LOW)
        kept = filter_rounds(d, ACTIVE)
        assert np.all(kept.props[:, 1:] == 1)
        assert kept.rounds == sum(r[1] == 1 and r[2] == 1 for r in rows)
        assert filter_rounds(d, NONE).rounds == len(rows)
