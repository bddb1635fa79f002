"""Command-line interface: outputs, determinism and structured errors."""

from __future__ import annotations

import csv
import json

import pytest

from juryselect.cli import main
from juryselect.experiments import ExperimentConfig, parse_k_range, parse_noise, parse_population
from juryselect.model import AgentType, NoiseLevel

POP = "A=30,B_up=30"


def cli(*argv):
    return main([str(a) for a in argv])


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert cli("simulate", "--population", POP, "--rounds", 120, "--runs", 2, "--seed", 3, "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def classified(simulated, tmp_path_factory):
    out = tmp_path_factory.mktemp("cls")
    datasets = sorted(simulated.glob("run_*.csv"))
    code = cli("classify", *datasets, "--method", "both", "--k-range", "2..6", "--seed", 1, "--out", out)
    assert code == 0
    return out


class TestConfig:
    def test_defaults_are_reference(self):
        c = ExperimentConfig()
        assert (c.rounds, c.runs, c.bootstraps, c.threshold, c.q) == (500, 100, 5, 4, 2)
        assert c.ks == range(2, 21) and c.methods == ("GMM",)
        assert ExperimentConfig(method="both").methods == ("GMM", "KM")

    def test_parsers(self):
        pop = parse_population("A=10,B_up=5")
        assert pop.counts() == {AgentType.A: 10, AgentType.B_UP: 5}
        assert parse_population("All").n == 1000
        assert parse_noise("0.75,0.5,0.5") == NoiseLevel(0.75, 0.5, 0.5)
        assert parse_k_range("2..4") == range(2, 5)

    @pytest.mark.parametrize(
        "kwargs",
        [{"method": "DBSCAN"}, {"threshold": 6}, {"q": 0}, {"k_range": "5..2"}, {"noise": "0.5,0.5"}, {"population": "A=x"}],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            ExperimentConfig(**kwargs)


class TestSimulate:
    def test_files_and_shape(self, simulated):
        names = sorted(p.name for p in simulated.iterdir())
        assert names == ["run_000.csv", "run_000.json", "run_001.csv", "run_001.json"]
        with open(simulated / "run_000.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 121 and rows[0][:4] == ["round", "p1", "p2", "p3"] and len(rows[0]) == 4 + 60

    def test_rerun_is_byte_identical(self, simulated, tmp_path):
        assert cli("simulate", "--population", POP, "--rounds", 120, "--runs", 2, "--seed", 3, "--out", tmp_path) == 0
        for name in ("run_000.csv", "run_001.json"):
            assert (tmp_path / name).read_bytes() == (simulated / name).read_bytes()

    def test_missing_out_is_usage_error(self, capsys):
        assert cli("simulate", "--runs", 1) == 2
        assert error_of(capsys)["error"] == "usage"

    def test_bad_population_is_invalid_argument(self, tmp_path, capsys):
        assert cli("simulate", "--population", "A=ten", "--out", tmp_path) == 2
        assert error_of(capsys)["error"] == "invalid_argument"


class TestClassify:
    def test_outputs_for_both_methods(self, classified):
        for method in ("GMM", "KM"):
            with open(classified / f"run_000.{method}.labels.csv", newline="") as fh:
                rows = list(csv.DictReader(fh))
            assert len(rows) == 60
            assert list(rows[0]) == ["agent_id", "true_type", "boot_1", "boot_2", "boot_3", "boot_4", "boot_5", "final"]
            for row in rows:
                votes = sum(int(row[f"boot_{b}"]) for b in range(1, 6))
                assert row["final"] == str(int(votes >= 4))
            report = json.loads((classified / f"run_001.{method}.misclass.json").read_text())
            assert len(report["clusters"]) == 5 and report["config"]["method"] == method
            summary = json.loads((classified / f"summary.{method}.json").read_text())
            assert summary["runs"] == 2

    def test_truncated_dataset_reports_line(self, simulated, tmp_path, capsys):
        text = (simulated / "run_000.csv").read_text().splitlines()
        bad = tmp_path / "run_000.csv"
        bad.write_text("\n".join(text[:10] + [text[10][:15]]) + "\n")
        (tmp_path / "run_000.json").write_text((simulated / "run_000.json").read_text())
        assert cli("classify", bad, "--out", tmp_path / "o") == 3
        err = error_of(capsys)
        assert err["error"] == "parse_error" and err["line"] == 11

    def test_missing_dataset_is_parse_error(self, tmp_path, capsys):
        assert cli("classify", tmp_path / "none.csv", "--out", tmp_path) == 3
        assert error_of(capsys)["error"] == "parse_error"


class TestEvaluate:
    def test_all_sections(self, simulated, classified, tmp_path):
        datasets = sorted(simulated.glob("run_*.csv"))
        labels = [classified / f"{d.stem}.GMM.labels.csv" for d in datasets]
        out = tmp_path / "report.json"
        code = cli("evaluate", *datasets, "--labels", *labels, "--summary", classified / "summary.GMM.json", "--out", out)
        assert code == 0
        report = json.loads(out.read_text())
        assert set(report) >= {"baseline", "selected", "expected"}
        assert set(report["expected"]) == {"best", "average", "worst"}
        assert report["baseline"]["runs"] == 2
        assert len(report["selected"]["jury_sizes"]) == 2

    def test_label_count_mismatch(self, simulated, classified, tmp_path, capsys):
        d = simulated / "run_000.csv"
        short = tmp_path / "short.csv"
        lines = (classified / "run_000.GMM.labels.csv").read_text().splitlines()
        short.write_text("\n".join(lines[:-5]) + "\n")
        assert cli("evaluate", d, "--labels", short, "--out", tmp_path / "r.json") == 2
        assert error_of(capsys)["error"] == "invalid_argument"

    def test_expected_needs_summary(self, simulated, tmp_path, capsys):
        assert cli("evaluate", simulated / "run_000.csv", "--jury-mode", "best", "--out", tmp_path / "r.json") == 2
        assert "summary" in error_of(capsys)["message"]


class TestReproduce:
    def test_fig3_scores(self, tmp_path):
        assert cli("reproduce", "fig3", "--scale", 0.02, "--noise", "LOW", "--out", tmp_path) == 0
        with open(tmp_path / "fig3.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1000
        assert {r["noise"] for r in rows} == {"LOW"}

    def test_fig1_small_sweep(self, tmp_path):
        code = cli("reproduce", "fig1", "--scale", 0.02, "--rounds", 200, "--sweep", "1,25", "--out", tmp_path)
        assert code == 0
        with open(tmp_path / "fig1.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4 * 2
