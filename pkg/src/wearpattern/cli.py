"""Command-line front end: synth | ingest | cluster | select-k | evaluate | patterns | stats | report.

Exit status is 0 on success, 1 on data errors and 2 on usage errors.
Every command that writes a directory also writes ``run.log`` with the
resolved configuration, so a run can be repeated exactly.
"""
from __future__ import annotations

import argparse
import datetime as dt
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import clustering, evaluation, patterns, stats, synth
from .clustering import Algorithm, SomGrid
from .config import ConfigError, Option, format_resolved, parse_config_text, resolve
from .errors import ParameterError, WearPatternError
from .timeseries import (
    HR_HI,
    HR_LO,
    Corpus,
    FixedSeries,
    Kind,
    denormalize,
    night_shift_filter,
    normalize,
    parse_samples,
    read_corpus_csv,
    resample,
    slice_days,
    write_corpus_csv,
    write_samples_csv,
)

log = logging.getLogger("wearpattern")

HR_FILE = "corpus_hr.csv"
STEPS_FILE = "corpus_steps.csv"
ALGOS = tuple(a.value for a in Algorithm)
SWEEPABLE = ("kmeans", "kshape", "kernel-kmeans", "ward")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if str(text).lower() in ("", "none", "auto") else float(text)


SEED = Option("seed", int, 0, "random seed")
OUT = Option("out", str, None, "output directory")
IN = Option("input", str, None, "corpus directory")
LO = Option("lo", float, HR_LO, "heart-rate value mapped to 0")
HI = Option("hi", float, HR_HI, "heart-rate value mapped to 1")
MIN_COV = Option("min_coverage", float, 0.5, "drop days with less slot coverage")
NIGHT = [
    Option("night_threshold", float, 500.0, "night-window steps marking an active night"),
    Option("night_fraction", float, 0.5, "share of active nights that excludes a user"),
]

COMMANDS: dict[str, list[Option]] = {
    "synth": [
        Option("users", int, 100), Option("days", int, 14), SEED,
        Option("noise", float, 0.02, "Gaussian noise sigma, normalized units"),
        Option("cadence", int, 30, "minutes per slot", (10, 30, 60)),
        Option("peak_hour", int, 18), Option("weekend_scale", float, 0.8),
        Option("mix", str, "Valley=0.44,Downward=0.295,Peak=0.263,Unclassified=0.002"),
        Option("user_offset", float, 0.03), Option("night_active", float, 0.0),
        Option("start_date", str, "2021-01-04"), LO, HI, OUT,
    ],
    "ingest": [
        Option("input", str, None, "raw samples file"),
        Option("format", str, "csv", choices=("csv", "jsonl")),
        Option("cadence", int, 30, "minutes per slot"),
        Option("offsets", str, None, "CSV user_id,utc_offset_minutes"),
        OUT,
    ],
    "cluster": [
        Option("algo", str, None, choices=ALGOS), IN, OUT, SEED,
        Option("k", int, 3), Option("eps", _opt_float, None), Option("min_pts", int, 5),
        Option("gamma", _opt_float, None), Option("iterations", int, 10_000),
        Option("grid", str, "auto", "SOM grid as ROWSxCOLS or auto"),
        Option("unit", str, "user-day", choices=("user-day", "user-mean")),
        LO, HI, MIN_COV,
    ],
    "select-k": [
        Option("algo", str, "kmeans", choices=SWEEPABLE), IN, OUT, SEED,
        Option("k_min", int, 2), Option("k_max", int, 10), Option("jobs", int, 1),
        LO, HI, MIN_COV,
    ],
    "evaluate": [
        Option("model", str, None, "directory holding model.json"),
        Option("truth", str, None, "CSV user_id,planted_pattern"),
        Option("ann1", str, None), Option("ann2", str, None), OUT,
    ],
    "patterns": [
        IN, OUT, LO, HI, MIN_COV,
        Option("smoothing_radius", int, patterns.SMOOTHING_RADIUS),
        Option("slope_tol", float, patterns.SLOPE_TOL),
        Option("position_band", float, patterns.POSITION_BAND),
        *NIGHT,
    ],
    "stats": [IN, OUT, Option("alpha", float, 0.05)],
    "report": [
        IN, OUT, SEED, Option("algo", str, "som", choices=ALGOS),
        Option("k", int, 3), Option("k_min", int, 2), Option("k_max", int, 10),
        Option("iterations", int, 10_000), Option("truth", str, None),
        Option("alpha", float, 0.05), LO, HI, MIN_COV,
    ],
}

REQUIRED = {
    "synth": ("out",), "ingest": ("input", "out"), "cluster": ("algo", "input", "out"),
    "select-k": ("input", "out"), "evaluate": ("model", "truth"), "patterns": ("input", "out"),
    "stats": ("input", "out"), "report": ("input", "out"),
}


class UsageError(Exception):
    pass


class Outputs:
    """Single writer for a run's output directory; each file lands via temp file + rename."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.written: list[str] = []

    def write(self, name: str, text: str) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.written.append(name)
        return path

    def write_with(self, name: str, writer, *args) -> Path:
        buf = io.StringIO()
        writer(*args, buf)
        return self.write(name, buf.getvalue())

    def write_json(self, name: str, obj) -> Path:
        return self.write(name, json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wearpattern", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, options in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value file; flags override it")
        for o in options:
            kw = {"dest": o.key, "default": None, "help": o.help or None, "type": o.type}
            if o.choices:
                kw["choices"] = o.choices
            flags = [o.flag]
            if o.key == "input":
                flags.append("--in")
            sp.add_argument(*flags, **kw)
    return p


def _resolve(args) -> dict:
    options = COMMANDS[args.command]
    file_values = {}
    if args.config:
        try:
            file_values = parse_config_text(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    cfg = resolve(options, vars(args), file_values)
    missing = [k for k in REQUIRED[args.command] if cfg.get(k) is None]
    if missing:
        raise UsageError(f"{args.command}: missing required option(s): "
                         + ", ".join("--" + m.replace("_", "-") for m in missing))
    return cfg


def _start_log(command: str, cfg: dict) -> list[str]:
    lines = [format_resolved(command, cfg)]
    log.info("resolved config:\n%s", lines[0])
    return lines


# -- corpus helpers ---------------------------------------------------------------

def _load(directory: str) -> tuple[Corpus, Corpus | None]:
    root = Path(directory)
    hr_path = root / HR_FILE
    if not hr_path.exists():
        raise ParameterError(f"{hr_path} not found")
    with open(hr_path, encoding="utf-8") as fh:
        hr = read_corpus_csv(fh, Kind.HEART_RATE)
    steps = None
    if (root / STEPS_FILE).exists():
        with open(root / STEPS_FILE, encoding="utf-8") as fh:
            steps = read_corpus_csv(fh, Kind.STEPS)
    if not hr.series:
        raise ParameterError(f"{hr_path} holds no series")
    return hr, steps


def _normalized(hr: Corpus, cfg: dict) -> Corpus:
    kept = hr.with_min_coverage(cfg["min_coverage"])
    if not kept.series:
        raise ParameterError("no days left after the coverage filter")
    return Corpus([normalize(s, cfg["lo"], cfg["hi"]) for s in kept.series], hr.kind, dict(hr.meta))


def _user_means(corpus: Corpus) -> Corpus:
    by_user: dict[str, list[FixedSeries]] = {}
    for s in corpus.series:
        by_user.setdefault(s.user_id, []).append(s)
    out = []
    for u, days in sorted(by_user.items()):
        first = days[0]
        out.append(FixedSeries(u, first.local_date, np.mean([d.slots for d in days], axis=0), first.slot_minutes,
                               float(np.mean([d.coverage for d in days])), first.normalized, first.kind))
    return Corpus(out, corpus.kind, dict(corpus.meta))


def _parse_grid(text: str, num_users: int, iterations: int) -> SomGrid:
    if text == "auto":
        return SomGrid.for_users(num_users, iterations=iterations)
    try:
        rows, cols = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"grid must be ROWSxCOLS or auto, got {text!r}") from None
    return SomGrid(rows, cols, iterations=iterations)


def _fit(algo: str, X, cfg: dict, num_users: int):
    grid = None
    if algo == "som":
        grid = _parse_grid(cfg.get("grid", "auto"), num_users, cfg["iterations"])
    return clustering.fit(algo, X, k=cfg.get("k"), seed=cfg["seed"], eps=cfg.get("eps"),
                          min_pts=cfg.get("min_pts", 5), gamma=cfg.get("gamma"), grid=grid)


def _write_model(out: Outputs, prefix: str, model, corpus: Corpus, X) -> None:
    out.write(f"{prefix}model.json", model.to_json(series_keys=corpus.keys()))
    for summary in clustering.cluster_summary(model, X):
        out.write_with(f"{prefix}cluster_means/cluster_{summary.label:03d}.csv",
                       clustering.write_mean_curve_csv, summary)
    lines = ["user_id,date,cluster"]
    lines += [f"{s.user_id},{s.local_date},{lab}" for s, lab in zip(corpus.series, model.labels.tolist())]
    out.write(f"{prefix}labels.csv", "\n".join(lines) + "\n")


def _parse_mix(text: str) -> dict:
    mix = {}
    for part in text.split(","):
        if not part.strip():
            continue
        name, _, frac = part.partition("=")
        try:
            mix[patterns.PatternLabel(name.strip())] = float(frac)
        except ValueError:
            raise ConfigError(f"bad mix entry {part!r}") from None
    return mix


# -- commands ---------------------------------------------------------------------

def cmd_synth(cfg, out: Outputs, logs):
    spec = synth.CorpusSpec(
        n_users=cfg["users"], days_per_user=cfg["days"], pattern_mix=_parse_mix(cfg["mix"]),
        noise_sigma=cfg["noise"], cadence_minutes=cfg["cadence"], activity_peak_hour=cfg["peak_hour"],
        weekend_activity_scale=cfg["weekend_scale"], seed=cfg["seed"],
        start_date=dt.date.fromisoformat(cfg["start_date"]), user_offset=cfg["user_offset"],
        night_active_fraction=cfg["night_active"])
    sc = synth.gen_corpus(spec)
    raw_hr = Corpus([denormalize(s, cfg["lo"], cfg["hi"]) for s in sc.hr.series], Kind.HEART_RATE)
    out.write_with(HR_FILE, write_corpus_csv, raw_hr)
    out.write_with(STEPS_FILE, write_corpus_csv, sc.steps)
    out.write_with("labels.csv", synth.write_labels_csv, sc.planted)
    buf = io.StringIO()
    synth.write_labels_csv(sc.day_trend, buf, "planted_day_trend")
    out.write("day_trends.csv", buf.getvalue())
    out.write_with("samples.csv", write_samples_csv, sc.samples(cfg["lo"], cfg["hi"]))
    logs.append(f"users = {spec.n_users}\nseries = {len(sc.hr)}\n")


def _read_offsets(path):
    if path is None:
        return {}
    offsets = {}
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            parts = [p.strip() for p in line.split(",")]
            if i == 0 and parts[0] == "user_id" or not parts[0]:
                continue
            offsets[parts[0]] = int(parts[1])
    return offsets


def cmd_ingest(cfg, out: Outputs, logs):
    with open(cfg["input"], "rb") as fh:
        samples = parse_samples(fh, cfg["format"])
    if not samples:
        raise ParameterError("input holds no samples")
    offsets = _read_offsets(cfg["offsets"])
    for kind, name in ((Kind.HEART_RATE, HR_FILE), (Kind.STEPS, STEPS_FILE)):
        days = slice_days(samples, offsets, kind=kind)
        series = [resample(v, cfg["cadence"], offsets.get(u, 0)) for (u, _), v in days.items()]
        if series:
            out.write_with(name, write_corpus_csv, Corpus(series, kind))
        logs.append(f"{kind.value}_days = {len(series)}\n")


def cmd_cluster(cfg, out: Outputs, logs):
    hr, _ = _load(cfg["input"])
    corpus = _normalized(hr, cfg)
    if cfg["unit"] == "user-mean":
        corpus = _user_means(corpus)
    X = corpus.matrix()
    model = _fit(cfg["algo"], X, cfg, len(corpus.users()))
    _write_model(out, "", model, corpus, X)
    logs.append(f"series = {len(X)}\nclusters = {model.n_clusters}\n")


def cmd_select_k(cfg, out: Outputs, logs):
    hr, _ = _load(cfg["input"])
    X = _normalized(hr, cfg).matrix()
    hi = min(cfg["k_max"], len(X))
    if cfg["k_min"] < 1 or cfg["k_min"] > hi:
        raise ParameterError(f"empty k range {cfg['k_min']}..{cfg['k_max']} for {len(X)} series")
    report = evaluation.k_sweep(X, cfg["algo"], range(cfg["k_min"], hi + 1), seed=cfg["seed"], jobs=cfg["jobs"])
    out.write_with("sweep.csv", report.write_sweep_csv)
    out.write("selection.json", report.to_json())


def _truth_for_model(model_dict: dict, truth: dict) -> list:
    series = model_dict.get("series")
    if series is None:
        raise ParameterError("model.json lacks series keys; cannot align ground truth")
    missing = sorted({u for u, _ in series if u not in truth})
    if missing:
        raise ParameterError(f"no ground truth for users: {', '.join(missing[:5])}")
    return [truth[u] for u, _ in series]


def cmd_evaluate(cfg, out: Outputs | None, logs):
    model_path = Path(cfg["model"])
    if model_path.is_dir():
        model_path = model_path / "model.json"
    model_dict = json.loads(model_path.read_text(encoding="utf-8"))
    model = clustering.ClusterModel.from_dict(model_dict)
    with open(cfg["truth"], encoding="utf-8") as fh:
        truth = synth.read_labels_csv(fh)
    scores = evaluation.extrinsic_scores(model.labels, _truth_for_model(model_dict, truth))
    report = evaluation.EvalReport(model.algorithm.value, extrinsic=scores)
    if cfg["ann1"] or cfg["ann2"]:
        if not (cfg["ann1"] and cfg["ann2"]):
            raise ConfigError("--ann1 and --ann2 go together")
        with open(cfg["ann1"], encoding="utf-8") as f1, open(cfg["ann2"], encoding="utf-8") as f2:
            a1, a2 = synth.read_labels_csv(f1), synth.read_labels_csv(f2)
        shared = sorted(set(a1) & set(a2))
        report.annotator_kappa = evaluation.cohens_kappa([a1[u] for u in shared], [a2[u] for u in shared])
    text = report.to_json()
    if out is not None:
        out.write("evaluation.json", text)
    else:
        sys.stdout.write(text)


def cmd_patterns(cfg, out: Outputs, logs):
    hr, steps = _load(cfg["input"])
    corpus = _normalized(hr, cfg)
    if steps is not None:
        night = night_shift_filter(corpus.users(), steps.series, cfg["night_threshold"], cfg["night_fraction"])
        if night.excluded:
            corpus = Corpus([s for s in corpus.series if s.user_id not in night.excluded], corpus.kind)
        logs.append(f"night_active_excluded = {len(night.excluded)}\n")
        out.write("excluded_users.csv", "user_id\n" + "".join(f"{u}\n" for u in sorted(night.excluded)))
    if not corpus.series:
        raise ParameterError("no days left to classify")
    sleep, day = patterns.classify_corpus(corpus, cfg["smoothing_radius"], cfg["slope_tol"],
                                          cfg["position_band"], cfg["min_coverage"])
    lines = ["user_id,date,sleep_pattern,day_pattern"]
    lines += [f"{u},{d},{sleep[(u, d)].value},{day[(u, d)].value}" for (u, d) in sleep]
    out.write("day_labels.csv", "\n".join(lines) + "\n")
    users: dict[str, list] = {}
    for (u, _), lab in sleep.items():
        users.setdefault(u, []).append(lab)
    day_users: dict[str, list] = {}
    for (u, _), lab in day.items():
        day_users.setdefault(u, []).append(lab)
    lines = ["user_id,sleep_pattern,day_pattern"]
    lines += [f"{u},{patterns.user_majority_pattern(users[u]).value},"
              f"{patterns.user_majority_pattern(day_users[u]).value}" for u in sorted(users)]
    out.write("user_patterns.csv", "\n".join(lines) + "\n")
    dists = []
    for cohort in patterns.COHORTS:
        try:
            dists.append(patterns.pattern_distribution(sleep, cohort))
        except patterns.EmptyCohortError:
            continue
    out.write_with("distributions.csv", patterns.write_distributions_csv, dists)
    tab = patterns.cross_tab(sleep, day)
    lines = ["sleep_pattern,day_pattern,count"]
    lines += [f"{s.value},{d.value},{tab.get((s, d), 0)}" for s in patterns.PRECEDENCE for d in patterns.PRECEDENCE
              if tab.get((s, d), 0)]
    out.write("cross_tab.csv", "\n".join(lines) + "\n")


def _per_day(corpus: Corpus, reducer, pick):
    return np.array([reducer(s.slots) for s in corpus.series if pick(s.local_date)])


def cmd_stats(cfg, out: Outputs, logs):
    hr, steps = _load(cfg["input"])
    comparisons = {}
    for tag, corpus, reducer in (("hr", hr, np.mean), ("steps", steps, np.sum)):
        if corpus is None:
            continue
        for kind in stats.BucketKind:
            out.write_with(f"profile_{tag}_{kind.value}.csv", stats.temporal_aggregate(corpus, kind).write_csv)
        weekday = _per_day(corpus, reducer, lambda d: not patterns.is_weekend(d))
        weekend = _per_day(corpus, reducer, patterns.is_weekend)
        if weekday.size and weekend.size:
            comparisons[f"{tag}_weekend_vs_weekday"] = stats.gated_comparison(weekday, weekend, cfg["alpha"])
        seasons = {s: _per_day(corpus, reducer, lambda d, s=s: patterns.season_of(d) == s)
                   for s in ("winter", "spring", "summer", "fall")}
        present = [s for s, v in seasons.items() if v.size]
        for i, a in enumerate(present):
            for b in present[i + 1:]:
                comparisons[f"{tag}_{a}_vs_{b}"] = stats.gated_comparison(seasons[a], seasons[b], cfg["alpha"])
    comparisons["hr_bands"] = stats.heart_rate_bands(hr.matrix().ravel())
    if steps is not None:
        week = stats.temporal_aggregate(steps, stats.BucketKind.DAY_OF_WEEK)
        try:
            comparisons["steps_sunday_over_weekday_mean"] = stats.weekend_weekday_ratio(week)
        except ParameterError:
            pass
        comparisons["steps_peak_hour"] = stats.temporal_aggregate(steps, stats.BucketKind.HOUR_OF_DAY).argmax()
    out.write_json("comparisons.json", comparisons)


def cmd_report(cfg, out: Outputs, logs):
    """Whole pipeline on one corpus directory: k sweeps, every engine, patterns, statistics."""
    hr, _ = _load(cfg["input"])
    corpus = _normalized(hr, cfg)
    X = corpus.matrix()
    num_users = len(corpus.users())
    hi = min(cfg["k_max"], len(X))
    for algo in ("kmeans", "kshape", "kernel-kmeans"):
        rep = evaluation.k_sweep(X, algo, range(cfg["k_min"], hi + 1), seed=cfg["seed"])
        out.write_with(f"select_k/{algo}_sweep.csv", rep.write_sweep_csv)
        out.write(f"select_k/{algo}_selection.json", rep.to_json())
    truth = None
    if cfg["truth"]:
        with open(cfg["truth"], encoding="utf-8") as fh:
            labels = synth.read_labels_csv(fh)
        truth = [labels[s.user_id] for s in corpus.series]
    rows = ["algorithm,n_clusters,rand_index,purity"]
    for algo in ALGOS:
        model = _fit(algo, X, {**cfg, "grid": "auto"}, num_users)
        if algo == cfg["algo"]:
            _write_model(out, "model/", model, corpus, X)
        if truth is not None:
            sc = evaluation.extrinsic_scores(model.labels, truth)
            rows.append(f"{algo},{model.n_clusters},{sc['rand_index']!r},{sc['purity']!r}")
    if truth is not None:
        out.write("extrinsic.csv", "\n".join(rows) + "\n")
    sub = {**cfg, "smoothing_radius": patterns.SMOOTHING_RADIUS, "slope_tol": patterns.SLOPE_TOL,
           "position_band": patterns.POSITION_BAND, "night_threshold": 500.0, "night_fraction": 0.5}
    cmd_patterns(sub, _Prefixed(out, "patterns/"), logs)
    cmd_stats(cfg, _Prefixed(out, "stats/"), logs)


class _Prefixed:
    """View of an :class:`Outputs` that writes under a subdirectory."""

    def __init__(self, base: Outputs, prefix: str):
        self.base, self.prefix = base, prefix

    def write(self, name, text):
        return self.base.write(self.prefix + name, text)

    def write_with(self, name, writer, *args):
        return self.base.write_with(self.prefix + name, writer, *args)

    def write_json(self, name, obj):
        return self.base.write_json(self.prefix + name, obj)


HANDLERS = {
    "synth": cmd_synth, "ingest": cmd_ingest, "cluster": cmd_cluster, "select-k": cmd_select_k,
    "evaluate": cmd_evaluate, "patterns": cmd_patterns, "stats": cmd_stats, "report": cmd_report,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
    except (ConfigError, UsageError) as exc:
        parser.print_usage(sys.stderr)
        print(f"wearpattern: error: {exc}", file=sys.stderr)
        return 2
    out = Outputs(Path(cfg["out"])) if cfg.get("out") else None
    logs = _start_log(args.command, cfg)
    try:
        HANDLERS[args.command](cfg, out, logs)
    except ConfigError as exc:
        print(f"wearpattern: error: {exc}", file=sys.stderr)
        return 2
    except (WearPatternError, OSError, ValueError, KeyError) as exc:
        print(f"wearpattern: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    if out is not None:
        logs.append("".join(f"wrote = {name}\n" for name in out.written))
        out.write("run.log", "".join(logs))
    return 0


execute = main

if __name__ == "__main__":
    sys.exit(main())
