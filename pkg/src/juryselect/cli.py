"""Command-line entry point: simulate, classify, evaluate, reproduce."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import reference as ref
from .engine import DatasetError, RoundFilter, atomic_write_text, read_run, run, take_rounds, write_run
from .labeling import (
    BOOTSTRAPS,
    JURY_MODES,
    THRESHOLD,
    AgentLabeling,
    ClassificationError,
    Jury,
    MisclassSummary,
)
from .experiments import (
    SCORE_FIELDS,
    SWEEP_FIELDS,
    ExperimentConfig,
    Workbench,
    baseline_mcs,
    classify_corpus,
    expected_mcs,
    fig1,
    fig2,
    fig3,
    rates_record,
    robustness,
    summary_from_record,
    summary_record,
    table2,
    table3,
)
from .metrics import aggregate_mcs, mcs, misclassification

EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_IO = 4
EXIT_CLASSIFY = 5


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _csv_text(fields, rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _add_config_flags(p, *, data=True, classify=True):
    if data:
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--population", default="All", help="preset (All, Full, B_up, D_up, L_up) or counts like A=100,B_up=100")
        p.add_argument("--noise", default="LOW", help="LOW, MID, HIGH or p1,p2,p3 probabilities")
        p.add_argument("--rounds", type=int, default=500)
        p.add_argument("--runs", type=int, default=100)
    if classify:
        p.add_argument("--method", default="GMM", choices=["GMM", "KM", "both"], type=str)
        p.add_argument("--bootstraps", type=int, default=BOOTSTRAPS)
        p.add_argument("--threshold", type=int, default=THRESHOLD)
        p.add_argument("--q", type=int, default=2)
        p.add_argument("--k-range", default="2..20")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def _config(args, **overrides) -> ExperimentConfig:
    fields = {}
    for name in ExperimentConfig.__dataclass_fields__:
        if hasattr(args, name):
            fields[name] = getattr(args, name)
    fields.update(overrides)
    return ExperimentConfig(**fields)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="juryselect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate runs and write vote CSVs with manifests")
    _add_config_flags(p, classify=False)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("classify", help="label agents of vote datasets")
    p.add_argument("datasets", nargs="+", help="vote CSV files (manifest JSON alongside)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rounds", type=int, default=None, help="use only the first ROUNDS rounds")
    _add_config_flags(p, data=False)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("evaluate", help="majority correctness of baseline and selected juries")
    p.add_argument("datasets", nargs="+", help="vote CSV files")
    p.add_argument("--labels", nargs="*", default=[], help="labels CSVs, one per dataset in order")
    p.add_argument("--summary", help="misclassification summary JSON for expected juries")
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--filter", default="NONE", choices=["NONE", "ACTIVE"])
    p.add_argument(
        "--jury-mode", nargs="+", default=["all"],
        choices=["all", "baseline", "selected", *JURY_MODES],
    )
    p.add_argument("--out", required=True, help="report JSON path")

    p = sub.add_parser("reproduce", help="run reference experiments end to end")
    p.add_argument(
        "targets", nargs="+",
        choices=["table2", "table3", "fig1", "fig2", "fig3", "robustness", "all"],
    )
    p.add_argument("--scale", type=float, default=0.2, help="fraction of the reference run count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rounds", type=int, default=500)
    p.add_argument("--noise", nargs="+", default=list(ref.NOISES), choices=list(ref.NOISES))
    p.add_argument("--populations", nargs="+", default=list(ref.POPULATIONS), choices=list(ref.POPULATIONS))
    p.add_argument("--sweep", default=None, help="authentic counts for fig1/fig2, e.g. 1,3,5,10,25,50")
    _add_config_flags(p, data=False)
    p.add_argument("--out", required=True, help="output directory")
    return parser


# -- commands -------------------------------------------------------------------


def cmd_simulate(args) -> dict:
    config = _config(args)
    out = Path(args.out)
    written = []
    for data in run(config.run_config(), args.jobs):
        csv_path, json_path = write_run(data, out / f"run_{data.run:03d}.csv")
        written += [str(csv_path), str(json_path)]
    return {"command": "simulate", "config": config.as_dict(), "files": written}


def labels_csv(labeling: AgentLabeling, pop) -> str:
    fields = ["agent_id", "true_type"] + [f"boot_{b + 1}" for b in range(labeling.boot_labels.shape[0])] + ["final"]
    final = labeling.final
    rows = []
    for a in range(labeling.n):
        row = {"agent_id": a, "true_type": pop.types[a].value, "final": int(final[a])}
        for b, labels in enumerate(labeling.boot_labels):
            row[f"boot_{b + 1}"] = int(labels[a])
        rows.append(row)
    return _csv_text(fields, rows)


def read_labels(path, n_agents: int) -> list[int]:
    """Agent ids whose final label is authentic."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise DatasetError(path, "file not found") from None
    with fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "final" not in reader.fieldnames or "agent_id" not in reader.fieldnames:
            raise DatasetError(path, "labels header must include agent_id and final", 1)
        keep, seen = [], 0
        for line, row in enumerate(reader, start=2):
            if row["final"] not in ("0", "1"):
                raise DatasetError(path, f"expected 0 or 1, got {row['final']!r}", line, "final")
            if row["agent_id"] != str(seen):
                raise DatasetError(path, f"agent_id {row['agent_id']!r} out of sequence", line, "agent_id")
            if row["final"] == "1":
                keep.append(seen)
            seen += 1
    if seen != n_agents:
        raise ValueError(f"{path}: labels cover {seen} agents, dataset has {n_agents}")
    return keep


def _load(paths, rounds):
    corpus = [read_run(p) for p in paths]
    if rounds is not None:
        corpus = [take_rounds(d, rounds) for d in corpus]
    return corpus


def cmd_classify(args) -> dict:
    config = _config(args, rounds=args.rounds or 0, runs=1, population="All", noise="LOW")
    corpus = _load(args.datasets, args.rounds)
    out = Path(args.out)
    echo = {k: v for k, v in config.as_dict().items() if k not in ("population", "noise", "runs", "filter", "rounds")}
    echo["rounds"] = args.rounds
    written = []
    for method in config.methods:
        labelings = classify_corpus(corpus, method, args.seed, args.jobs, **config.classify_options())
        all_rates = []
        for path, data, lab in zip(args.datasets, corpus, labelings):
            stem = out / f"{Path(path).stem}.{method}"
            rates = misclassification(lab, data.population)
            all_rates.append(rates)
            report = {
                "command": "classify",
                "config": {**echo, "method": method},
                "dataset": str(path),
                "run": data.run,
                "rounds": data.rounds,
                "clusters": [d.clustering.k for d in lab.details],
                "misclassification": rates_record(rates, data.population),
            }
            atomic_write_text(f"{stem}.labels.csv", labels_csv(lab, data.population))
            atomic_write_text(f"{stem}.misclass.json", _dump(report))
            written += [f"{stem}.labels.csv", f"{stem}.misclass.json"]
        if len({d.population for d in corpus}) == 1:
            summary = {"command": "classify", "config": {**echo, "method": method}, "datasets": [str(p) for p in args.datasets],
                       **summary_record(MisclassSummary.from_runs(all_rates))}
            path = out / f"summary.{method}.json"
            atomic_write_text(path, _dump(summary))
            written.append(str(path))
    return {"command": "classify", "files": written}


def _read_summary(path) -> MisclassSummary:
    path = Path(path)
    try:
        record = json.loads(path.read_text())
    except FileNotFoundError:
        raise DatasetError(path, "file not found") from None
    except json.JSONDecodeError as exc:
        raise DatasetError(path, f"invalid JSON ({exc.msg})", exc.lineno) from None
    try:
        return summary_from_record(record)
    except (KeyError, ValueError) as exc:
        raise DatasetError(path, f"not a misclassification summary ({exc})") from None


def cmd_evaluate(args) -> dict:
    corpus = _load(args.datasets, args.rounds)
    pops = {d.population for d in corpus}
    if len(pops) != 1:
        raise ValueError("datasets must share one population")
    pop = pops.pop()
    f = RoundFilter.preset(args.filter)
    modes = set(args.jury_mode)
    if "all" in modes:
        modes = {"baseline", *JURY_MODES} if args.summary else {"baseline"}
        if args.labels:
            modes.add("selected")
    report = {
        "command": "evaluate",
        "config": {
            "datasets": [str(p) for p in args.datasets],
            "labels": [str(p) for p in args.labels],
            "summary": args.summary,
            "rounds": args.rounds,
            "filter": f.name,
            "jury_mode": sorted(modes),
        },
    }
    if "baseline" in modes:
        report["baseline"] = baseline_mcs(corpus, f).as_dict()
    if "selected" in modes:
        if len(args.labels) != len(corpus):
            raise ValueError(f"{len(args.labels)} label files for {len(corpus)} datasets")
        juries = [Jury.of(read_labels(p, pop.n), "selected") for p in args.labels]
        report["selected"] = aggregate_mcs([mcs(d, j, f) for d, j in zip(corpus, juries)], "selected", f.name).as_dict()
        report["selected"]["jury_sizes"] = [len(j) for j in juries]
    wanted = [m for m in JURY_MODES if m in modes]
    if wanted:
        if not args.summary:
            raise ValueError("expected juries need --summary")
        summary = _read_summary(args.summary)
        missing = [t.value for t in pop.counts() if t not in summary.mean]
        if missing:
            raise ValueError(f"summary lacks agent types {missing}")
        report["expected"] = {m: expected_mcs(corpus, summary, m, f).as_dict() for m in wanted}
    atomic_write_text(args.out, _dump(report))
    return {"command": "evaluate", "files": [args.out]}


def _sweep_counts(text):
    if text is None:
        return None
    return [int(c) for c in text.split(",")]


def cmd_reproduce(args) -> dict:
    # Only the classification knobs apply; noise and populations are lists here.
    config = _config(args, runs=1, noise="LOW", population="All")
    targets = ["table2", "table3", "fig1", "fig2", "fig3", "robustness"] if "all" in args.targets else list(dict.fromkeys(args.targets))
    bench = Workbench(args.seed, args.scale, args.rounds, args.jobs, config.classify_options())
    out = Path(args.out)
    written = []
    sweep = _sweep_counts(args.sweep)
    for target in targets:
        if target == "table2":
            path = out / "table2.json"
            atomic_write_text(path, _dump(table2(bench, args.noise, args.populations)))
        elif target == "table3":
            path = out / "table3.json"
            pops = [p for p in ("B_up", "D_up", "L_up", "All") if p in args.populations]
            atomic_write_text(path, _dump(table3(bench, args.noise, pops)))
        elif target == "fig1":
            path = out / "fig1.csv"
            atomic_write_text(path, _csv_text(SWEEP_FIELDS, fig1(bench, sweep)))
        elif target == "fig2":
            path = out / "fig2.csv"
            atomic_write_text(path, _csv_text(SWEEP_FIELDS, fig2(bench, sweep, args.noise)))
        elif target == "fig3":
            path = out / "fig3.csv"
            atomic_write_text(path, _csv_text(SCORE_FIELDS, fig3(bench, args.noise)))
        else:
            path = out / "robustness.json"
            atomic_write_text(path, _dump(robustness(bench)))
        written.append(str(path))
    return {"command": "reproduce", "files": written}


COMMANDS = {
    "simulate": cmd_simulate,
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
    "reproduce": cmd_reproduce,
}


def _fail(kind: str, message: str, code: int, **extra) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        result = COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except DatasetError as exc:
        return _fail("parse_error", str(exc), EXIT_PARSE, path=exc.path, line=exc.line, column=exc.column)
    except OSError as exc:
        return _fail("io_error", exc.strerror or str(exc), EXIT_IO, path=exc.filename)
    except ClassificationError as exc:
        return _fail("classification_failed", str(exc), EXIT_CLASSIFY)
    except ValueError as exc:
        return _fail("invalid_argument", str(exc), EXIT_USAGE)
    sys.stdout.write(_dump(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
