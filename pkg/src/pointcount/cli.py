"""Command-line harness: ``build-gestures``, ``run``, ``compare`` and ``report``.

All outputs are plain text (JSON or tab-separated values) and contain no
timestamps, so identical configurations give byte-identical files.
Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .datagen import Convention
from .evaluation import one_way_anova
from .gestures import ArmConfigurationError, ArmModel, GestureTable, build_gesture_table
from .network import FREE_RUNNING, save_checkpoint
from .training import PRETRAINING_OPTIONS, RunReport, TrainSpec, desk_scale, run_experiment

log = logging.getLogger("pointcount")

OUTPUT_ENV = "POINTCOUNT_OUTPUT"
GESTURE_FILE = "gestures.json"
RESULTS_FORMAT_VERSION = 1

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    """Resolved settings of one command; every field defaults to the published set-up."""

    study: int = 1
    condition: int | None = None
    pretraining: str = "none"
    convention: str = Convention.STAY_AT_LAST.value
    loop: bool = False
    feedback: str = FREE_RUNNING
    seed: int = 0
    repetitions: int = 15
    sub_epochs: int = 20000
    test_sets: int = 50
    desk_scale: float = 1.0
    workers: int = 1
    output_dir: str = "results"
    gestures: str | None = None
    name: str | None = None
    arm: dict = field(default_factory=dict)

    def train_spec(self) -> TrainSpec:
        if self.study == 1:
            condition = 1 if self.condition is None else self.condition
        else:
            if self.condition is not None and self.condition not in (3, 4):
                raise UsageError("study 2 uses condition 3 (no loop) or 4 (loop); prefer --loop/--no-loop")
            condition = self.condition if self.condition is not None else (4 if self.loop else 3)
        spec = TrainSpec(study=self.study, condition=condition, convention=self.convention,
                         pretraining=self.pretraining, feedback=self.feedback, sub_epochs=self.sub_epochs,
                         repetitions=self.repetitions, test_sets=self.test_sets, base_seed=self.seed)
        return desk_scale(spec, self.desk_scale) if self.desk_scale != 1.0 else spec

    def run_name(self, spec: TrainSpec) -> str:
        if self.name:
            return self.name
        name = f"study{spec.study}_c{spec.condition}_{spec.convention.short}"
        if spec.study == 2:
            name += f"_{spec.pretraining}"
        return f"{name}_seed{spec.base_seed}"


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    values: dict = {}
    if path:
        try:
            values = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        known = {f.name for f in fields(ExperimentConfig)}
        unknown = set(values) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if os.environ.get(OUTPUT_ENV) and "output_dir" not in values:
        values["output_dir"] = os.environ[OUTPUT_ENV]
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _tsv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_tsv(path: Path) -> list[dict]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _pct(summary) -> str:
    if summary is None:
        return "-"
    mean, sd = summary
    return f"{100 * mean:.1f} ({100 * sd:.1f})"


def cmd_build_gestures(cfg: ExperimentConfig, out: str | None = None) -> Path:
    try:
        arm = ArmModel.from_dict(cfg.arm) if cfg.arm else ArmModel()
        table = build_gesture_table(arm)
    except (ArmConfigurationError, TypeError) as exc:
        raise UsageError(f"arm configuration error: {exc}") from exc
    path = Path(out) if out else Path(cfg.output_dir) / GESTURE_FILE
    _write_atomic(path, json.dumps(table.to_dict(), indent=1) + "\n")
    print(f"variance fraction (3 components): {table.variance_fraction:.6f}")
    print(f"gesture table written to {path}")
    return path


def _needs_gestures(spec: TrainSpec) -> bool:
    cs = spec.condition_spec
    return cs.use_gesture_input or cs.use_gesture_output or spec.uses_stage1b


def _load_table(cfg: ExperimentConfig, spec: TrainSpec) -> tuple[GestureTable, str]:
    path = Path(cfg.gestures) if cfg.gestures else Path(cfg.output_dir) / GESTURE_FILE
    if path.exists():
        return GestureTable.load(path), str(path)
    if _needs_gestures(spec):
        raise UsageError(f"gesture table {path} not found; create it with `pointcount build-gestures` first")
    # Gesture-free conditions still need a table to lay out the data streams.
    return build_gesture_table(ArmModel.from_dict(cfg.arm) if cfg.arm else ArmModel()), "built-in default"


def write_run(report: RunReport, run_dir: Path, meta: dict) -> None:
    """Write every result file of a run into a scratch directory, then move it into place."""
    spec = report.spec
    run_dir.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".partial-", dir=run_dir.parent))
    try:
        (scratch / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
        rows = []
        for r in report.repetitions:
            rows.append([r.repetition, r.seed, _fmt(r.report.counting_accuracy), _fmt(r.report.gesture_accuracy),
                         _fmt(r.report.off_silence),
                         _fmt(r.stage1b_report.gesture_accuracy if r.stage1b_report else None),
                         _fmt(r.stage1a_recites)])
        (scratch / "repetitions.tsv").write_text(_tsv(rows, ["repetition", "seed", "counting", "gesture",
                                                             "off_silence", "stage1b_gesture", "stage1a_recites"]))
        (scratch / "summary.tsv").write_text(_tsv([summary_row(report)], SUMMARY_HEADER))
        (scratch / "traces").mkdir()
        (scratch / "checkpoints").mkdir()
        for r in report.repetitions:
            r.trace.save(scratch / "traces" / f"rep{r.repetition:02d}.tsv")
            if r.stage1a_trace is not None:
                r.stage1a_trace.save(scratch / "traces" / f"rep{r.repetition:02d}_stage1a.tsv")
            if r.stage1b_trace is not None:
                r.stage1b_trace.save(scratch / "traces" / f"rep{r.repetition:02d}_stage1b.tsv")
            save_checkpoint(r.net, scratch / "checkpoints" / f"rep{r.repetition:02d}.json")
        if run_dir.exists():
            shutil.rmtree(run_dir)
        scratch.rename(run_dir)
    finally:
        if scratch.exists():
            shutil.rmtree(scratch)


SUMMARY_HEADER = ["study", "condition", "convention", "loop", "pretraining", "repetitions", "sub_epochs",
                  "test_sets", "counting_mean", "counting_sd", "gesture_mean", "gesture_sd",
                  "stage1b_gesture_mean", "stage1b_gesture_sd"]


def summary_row(report: RunReport) -> list:
    spec = report.spec
    c, g, b = report.summary("counting"), report.summary("gesture"), report.summary("stage1b_gesture")
    return [spec.study, spec.condition, spec.convention.short, int(spec.block_config.use_jordan_loop),
            spec.pretraining, spec.repetitions, spec.sub_epochs, spec.test_sets,
            *(_fmt(x[i]) if x else "" for x in (c, g, b) for i in (0, 1))]


def cmd_run(cfg: ExperimentConfig) -> Path:
    try:
        spec = cfg.train_spec()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    table, table_source = _load_table(cfg, spec)
    run_dir = Path(cfg.output_dir) / "runs" / cfg.run_name(spec)
    log.info("running %s (%d repetitions x %d sub-epochs)", run_dir.name, spec.repetitions, spec.sub_epochs)
    report = run_experiment(spec, table, workers=cfg.workers)
    meta = {
        "format": "pointcount.run",
        "version": RESULTS_FORMAT_VERSION,
        "package_version": __version__,
        "spec": spec.to_dict(),
        "desk_scale": cfg.desk_scale,
        "full_scale": cfg.desk_scale == 1.0 and spec.repetitions == 15 and spec.sub_epochs == 20000
                       and spec.test_sets == 50,
        "gesture_table": table_source,
        "gesture_variance_fraction": table.variance_fraction,
    }
    write_run(report, run_dir, meta)
    row = dict(zip(SUMMARY_HEADER, summary_row(report)))
    print(f"{run_dir.name}: counting {_pct(report.summary('counting'))}  gesture {_pct(report.summary('gesture'))}")
    log.debug("summary %s", row)
    return run_dir


def _run_values(run: Path, metric: str) -> list[float]:
    path = run / "repetitions.tsv"
    if not path.exists():
        raise UsageError(f"{run} is not a run directory (no repetitions.tsv)")
    vals = [r[metric] for r in _read_tsv(path)]
    if not vals or any(v == "" for v in vals):
        raise UsageError(f"run {run.name} has no {metric} metric")
    if len(vals) < 2:
        raise UsageError(f"run {run.name} needs at least two repetitions for ANOVA")
    return [float(v) for v in vals]


def cmd_compare(runs: list[str], metric: str = "counting", out: str | None = None) -> list[dict]:
    if len(runs) < 2:
        raise UsageError("compare needs at least two result sets")
    paths = [Path(r) for r in runs]
    names = [p.name for p in paths]
    groups = [_run_values(p, metric) for p in paths]
    comparisons = [(f"{names[i]} vs {names[j]}", [groups[i], groups[j]])
                   for i, j in itertools.combinations(range(len(paths)), 2)]
    if len(paths) > 2:
        comparisons.append(("all", groups))
    rows = []
    for label, gs in comparisons:
        res = one_way_anova(*gs)
        rows.append({"comparison": label, "metric": metric, "F": res.F, "df_between": res.df_between,
                     "df_within": res.df_within, "p": res.p})
        print(f"{label}: F({res.df_between}, {res.df_within}) = {res.F:.4g}, p = {res.p:.4g}")
    header = ["comparison", "metric", "F", "df_between", "df_within", "p"]
    text = _tsv([[r["comparison"], metric, _fmt(r["F"]), r["df_between"], r["df_within"], _fmt(r["p"])]
                 for r in rows], header)
    _write_atomic(Path(out) if out else paths[0].parent.parent / f"compare_{metric}.tsv", text)
    return rows


def cmd_report(results_dir: str) -> Path:
    root = Path(results_dir)
    runs = sorted(p for p in (root / "runs").glob("*") if (p / "summary.tsv").exists()) \
        if (root / "runs").is_dir() else []
    if not runs:
        raise UsageError(f"no completed runs under {root / 'runs'}; use `pointcount run` first")
    rows = []
    for run in runs:
        s = _read_tsv(run / "summary.tsv")[0]
        pct = lambda m: _pct((float(s[m + "_mean"]), float(s[m + "_sd"] or "nan"))) if s[m + "_mean"] else "-"  # noqa: E731
        rows.append([run.name, s["study"], s["condition"], s["convention"], "L" if s["loop"] == "1" else "NL",
                     s["pretraining"], s["repetitions"], s["sub_epochs"], pct("counting"), pct("gesture")])
    header = ["run", "study", "condition", "convention", "loop", "pretraining", "repetitions", "sub_epochs",
              "counting", "gesture"]
    table_path = root / "results_table.tsv"
    _write_atomic(table_path, _tsv(rows, header))
    series_dir = root / "series"
    for run in runs:
        for trace in sorted((run / "traces").glob("rep??.tsv")):
            lines = ["# sub_epoch\tcounting_loss"]
            with trace.open() as fh:
                for line in fh:
                    if line.startswith("#"):
                        continue
                    cols = line.rstrip("\n").split("\t")
                    lines.append(f"{cols[0]}\t{cols[2]}")
            _write_atomic(series_dir / f"{run.name}_{trace.stem}.tsv", "\n".join(lines) + "\n")
    print(Path(table_path).read_text(), end="")
    return table_path


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pointcount", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON file with ExperimentConfig fields")
        p.add_argument("--output-dir", dest="output_dir", help=f"results directory (env {OUTPUT_ENV})")

    p = sub.add_parser("build-gestures", help="synthesise the canonical gesture table")
    common(p)
    p.add_argument("--out", help="file to write (default OUTPUT_DIR/gestures.json)")

    p = sub.add_parser("run", help="train and test one experiment row")
    common(p)
    p.add_argument("--study", type=int, choices=(1, 2))
    p.add_argument("--condition", type=int, choices=range(1, 9))
    p.add_argument("--pretraining", choices=PRETRAINING_OPTIONS)
    p.add_argument("--convention", choices=[c.value for c in Convention])
    p.add_argument("--loop", dest="loop", action="store_true", default=None)
    p.add_argument("--no-loop", dest="loop", action="store_false")
    p.add_argument("--feedback", choices=("free_running", "teacher_forced"))
    p.add_argument("--seed", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--sub-epochs", dest="sub_epochs", type=int)
    p.add_argument("--test-sets", dest="test_sets", type=int)
    p.add_argument("--desk-scale", dest="desk_scale", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--gestures", help="gesture table file (default OUTPUT_DIR/gestures.json)")
    p.add_argument("--name", help="run directory name")

    p = sub.add_parser("compare", help="one-way ANOVA between runs")
    p.add_argument("runs", nargs="+", help="run directories")
    p.add_argument("--metric", default="counting", choices=("counting", "gesture", "stage1b_gesture"))
    p.add_argument("--out", help="TSV file to write")

    p = sub.add_parser("report", help="consolidate runs into tables and loss series")
    p.add_argument("results_dir", nargs="?", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "compare":
            cmd_compare(args.runs, args.metric, args.out)
        elif args.command == "report":
            cmd_report(args.results_dir or os.environ.get(OUTPUT_ENV, "results"))
        else:
            overrides = {k: v for k, v in vars(args).items()
                         if k not in ("command", "config", "verbose", "out") and v is not None}
            cfg = load_config(args.config, overrides)
            if args.command == "build-gestures":
                cmd_build_gestures(cfg, args.out)
            else:
                cmd_run(cfg)
    except UsageError as exc:
        print(f"pointcount: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"pointcount: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
