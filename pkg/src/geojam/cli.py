"""``geojam`` command-line interface.

Every command follows the same order: parse flags, load and validate the
whole configuration, check inputs, compute, then write outputs.  Nothing is
written when an earlier step fails.

Exit codes: 0 success, 1 usage or configuration error, 2 data or schema
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import adaptive, evaluation, scenario, stationary
from .seeding import STAGE_FOREST, STAGE_SPLIT, derive_seed
from .signal import RfLinkConfig

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

OUT_ENV = "GEOJAM_OUT"  # default output directory
REPORT_JSON = "report.json"
REPORT_TXT = "report.txt"
MODEL_FILE = "model.json"
STATIONARY_FILE = "stationary.csv"
DETECTION_COLUMNS = (
    "epoch_s",
    "threshold_sjnr_db",
    "threshold_rss_db",
    "delta_sjnr_db",
    "delta_rss_db",
    "predicted",
    "is_jammed",
)


class ConfigError(ValueError):
    pass


class UsageError(Exception):
    pass


# -- configuration -------------------------------------------------------------


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none") else float(text)


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _seed(text: str) -> int:
    v = int(text)
    if v < 0:
        raise ValueError("seed must be non-negative")
    return v


_link, _grid = RfLinkConfig(), adaptive.DEFAULT_GRID
_stat, _tv, _ad = scenario.StationaryConfig(), scenario.TimeVariantConfig(), adaptive.AdaptiveConfig()

# key -> (parser, default)
KEYS: dict[str, tuple] = {
    "seed": (_seed, 0),
    "link.frequency": (float, _link.frequency),
    "link.bandwidth": (float, _link.bandwidth),
    "link.tx_power": (float, _link.tx_power),
    "link.tx_gain": (float, _link.tx_gain),
    "link.rx_gain": (float, _link.rx_gain),
    "link.noise_temperature": (float, _link.noise_temperature),
    "jammer.power": (float, _stat.jam_power),
    "jammer.gain": (float, _stat.attacker_gain),
    "stationary.n_positions": (int, _stat.n_positions),
    "stationary.samples_per_position": (int, _stat.samples_per_position),
    "stationary.voi_radius": (float, _stat.voi_radius),
    "stationary.jammed_count": (int, _stat.jammed_count),
    "timevariant.n_trajectories": (int, _tv.n_trajectories),
    "timevariant.duration": (float, _tv.duration),
    "timevariant.epoch_step": (float, _tv.epoch_step),
    "timevariant.jam_period": (int, _tv.jam_period),
    "timevariant.jam_duty": (float, _tv.jam_duty),
    "timevariant.voi_radius": (float, _tv.voi_radius),
    "timevariant.samples_per_epoch": (int, _tv.samples_per_epoch),
    "split.train_jammed": (int, 1809),
    "split.train_nonjammed": (int, 2191),
    "pca.enabled": (_bool, True),
    "pca.n_components": (int, 1),
    "forest.n_trees": (int, 100),
    "forest.max_depth": (int, 10),
    "adaptive.window": (int, _ad.window),
    "adaptive.alpha": (float, _ad.alpha),
    "adaptive.beta": (float, _ad.beta),
    "adaptive.min_warmup": (int, _ad.min_warmup),
    "adaptive.beta_sjnr": (_opt_float, None),
    "adaptive.beta_rss": (_opt_float, None),
    "calibrate.windows": (_int_list, _grid["windows"]),
    "calibrate.alphas": (_float_list, _grid["alphas"]),
    "calibrate.betas": (_float_list, _grid["betas"]),
}


@dataclass(frozen=True)
class RunConfig:
    """Fully validated settings for one invocation."""

    seed: int
    link: RfLinkConfig
    stationary: scenario.StationaryConfig
    timevariant: scenario.TimeVariantConfig
    train_jammed: int
    train_nonjammed: int
    use_pca: bool
    n_components: int
    n_trees: int
    max_depth: int
    adaptive: adaptive.AdaptiveConfig
    grid: dict = field(default_factory=dict)

    @property
    def split_seed(self) -> int:
        return derive_seed(self.seed, STAGE_SPLIT)

    @property
    def forest_seed(self) -> int:
        return derive_seed(self.seed, STAGE_FOREST)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {line_no}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}: line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}: line {line_no}: duplicate key {key!r}")
        try:
            values[key] = KEYS[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"{source}: line {line_no}: bad value for {key}: {exc}") from None
    return values


def build_config(values: dict) -> RunConfig:
    """Fill defaults and validate every sub-configuration."""
    unknown = set(values) - set(KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(sorted(unknown))}")
    v = {k: values.get(k, default) for k, (_, default) in KEYS.items()}
    try:
        link = RfLinkConfig(
            v["link.frequency"],
            v["link.bandwidth"],
            v["link.tx_power"],
            v["link.tx_gain"],
            v["link.rx_gain"],
            v["link.noise_temperature"],
        )
        stat = scenario.StationaryConfig(
            link,
            v["jammer.power"],
            v["jammer.gain"],
            v["stationary.n_positions"],
            v["stationary.samples_per_position"],
            v["stationary.voi_radius"],
            v["stationary.jammed_count"],
            v["seed"],
        )
        tv = scenario.TimeVariantConfig(
            link,
            v["jammer.power"],
            v["jammer.gain"],
            v["timevariant.n_trajectories"],
            v["timevariant.duration"],
            v["timevariant.epoch_step"],
            v["timevariant.jam_period"],
            v["timevariant.jam_duty"],
            v["timevariant.voi_radius"],
            v["timevariant.samples_per_epoch"],
            v["seed"],
        )
        ad = adaptive.AdaptiveConfig(
            v["adaptive.window"],
            v["adaptive.alpha"],
            v["adaptive.beta"],
            v["adaptive.min_warmup"],
            v["adaptive.beta_sjnr"],
            v["adaptive.beta_rss"],
        )
        grid = {"windows": v["calibrate.windows"], "alphas": v["calibrate.alphas"], "betas": v["calibrate.betas"]}
        for name, axis in grid.items():
            if not axis:
                raise ValueError(f"calibrate.{name} must not be empty")
        for w in grid["windows"]:
            adaptive.AdaptiveConfig(w, 0.0, 0.0, ad.min_warmup)
        for a in grid["alphas"]:
            adaptive.AdaptiveConfig(ad.window, a, 0.0, ad.min_warmup)
        for b in grid["betas"]:
            adaptive.AdaptiveConfig(ad.window, 0.0, b, ad.min_warmup)
        if v["pca.n_components"] < 1 or v["pca.n_components"] > 6:
            raise ValueError("pca.n_components must lie in [1, 6]")
        if v["forest.n_trees"] < 1:
            raise ValueError("forest.n_trees must be at least 1")
        if v["forest.max_depth"] < 1:
            raise ValueError("forest.max_depth must be at least 1")
        if v["split.train_jammed"] < 1 or v["split.train_nonjammed"] < 1:
            raise ValueError("split counts must be positive")
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(
        v["seed"],
        link,
        stat,
        tv,
        v["split.train_jammed"],
        v["split.train_nonjammed"],
        v["pca.enabled"],
        v["pca.n_components"],
        v["forest.n_trees"],
        v["forest.max_depth"],
        ad,
        grid,
    )


def load_config(path: str | None, overrides: dict) -> RunConfig:
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        values = parse_config_text(text, path)
    values.update(overrides)  # flags win
    return build_config(values)


def adaptive_conf_text(cfg: adaptive.AdaptiveConfig) -> str:
    lines = [
        f"adaptive.window = {cfg.window}",
        f"adaptive.alpha = {cfg.alpha!r}",
        f"adaptive.beta = {cfg.beta!r}",
        f"adaptive.min_warmup = {cfg.min_warmup}",
    ]
    return "\n".join(lines) + "\n"


# -- output helpers ------------------------------------------------------------


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _write_report(out: Path, sections: list[dict], extra_csv: dict[str, str] | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / REPORT_JSON, _json({"sections": sections}))
    _write_text(out / REPORT_TXT, "\n".join(evaluation.render(s) for s in sections))
    for name, text in (extra_csv or {}).items():
        _write_text(out / name, text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _g(x) -> str:
    """Shortest exact float text; undefined (None/NaN) becomes an empty field."""
    if x is None or math.isnan(x):
        return ""
    return format(float(x), ".17g")


def _require_timevariant(data_dir: str) -> scenario.TimeVariantDataset:
    ds = scenario.read_timevariant(data_dir)
    if not ds.trajectories:
        raise scenario.DataError(f"{data_dir}: manifest lists no trajectories")
    return ds


# -- commands ------------------------------------------------------------------


def cmd_gen_stationary(cfg: RunConfig, out: Path) -> None:
    records = scenario.gen_stationary(cfg.stationary)
    out.mkdir(parents=True, exist_ok=True)
    scenario.write_csv(records, out / STATIONARY_FILE, kind="stationary")
    manifest = {
        "file": STATIONARY_FILE,
        "seed": cfg.seed,
        "n_records": len(records),
        "n_jammed": sum(r.is_jammed for r in records),
    }
    _write_text(out / "manifest.json", _json(manifest))


def cmd_gen_timevariant(cfg: RunConfig, out: Path) -> None:
    ds = scenario.gen_timevariant(cfg.timevariant)
    scenario.write_timevariant(ds, out)


def _stationary_records(data: str):
    path = Path(data)
    if path.is_dir():
        path = path / STATIONARY_FILE
    records = scenario.read_csv(path)
    if records and not isinstance(records[0], scenario.StationaryRecord):
        raise scenario.SchemaError(f"{path}: expected the stationary schema")
    if not records:
        raise scenario.DataError(f"{path}: no records")
    return records


def cmd_train_stationary(cfg: RunConfig, data: str, out: Path) -> None:
    records = _stationary_records(data)
    runs = {}
    for use_pca in (True, False):
        runs[use_pca] = evaluation.run_stationary(
            records,
            use_pca,
            cfg.n_components,
            cfg.n_trees,
            cfg.max_depth,
            cfg.split_seed,
            cfg.forest_seed,
            cfg.train_jammed,
            cfg.train_nonjammed,
        )
    chosen = runs[cfg.use_pca]
    docs = [evaluation.stationary_doc(runs[cfg.use_pca]), evaluation.stationary_doc(runs[not cfg.use_pca])]
    comparison = {
        "kind": "comparison",
        "with_pca": {"accuracy": runs[True].confusion.accuracy, "auc": runs[True].roc.auc},
        "without_pca": {"accuracy": runs[False].confusion.accuracy, "auc": runs[False].roc.auc},
    }
    metrics = evaluation.metrics_csv("with_pca", runs[True].metrics) + evaluation.metrics_csv(
        "without_pca", runs[False].metrics
    ).split("\n", 1)[1]
    out.mkdir(parents=True, exist_ok=True)
    stationary.save_detector(chosen.detector, out / MODEL_FILE)
    _write_report(
        out, docs + [comparison], {"metrics.csv": metrics, "roc.csv": evaluation.roc_csv(chosen.roc)}
    )


def detection_csv(trace: adaptive.DetectionTrace, records) -> str:
    rows = [
        [_g(r.epoch), _g(ts), _g(tr), _g(ds), _g(dr), int(p), r.is_jammed]
        for r, ts, tr, ds, dr, p in zip(
            records,
            trace.threshold_sjnr,
            trace.threshold_rss,
            trace.delta_sjnr,
            trace.delta_rss,
            trace.predicted,
        )
    ]
    return _csv_text(DETECTION_COLUMNS, rows)


def cmd_detect_adaptive(cfg: RunConfig, data_dir: str, out: Path) -> None:
    ds = _require_timevariant(data_dir)
    res = evaluation.run_adaptive(ds.trajectories, cfg.adaptive)
    det_dir = out / "detections"
    det_dir.mkdir(parents=True, exist_ok=True)
    for i, (records, trace) in enumerate(zip(ds.trajectories, res.traces)):
        if trace is not None:
            _write_text(det_dir / scenario.trajectory_filename(i), detection_csv(trace, records))
    _write_report(out, [evaluation.adaptive_doc(res)], {"metrics.csv": evaluation.metrics_csv("adaptive", res.metrics)})


def cmd_eval_cross(cfg: RunConfig, model: str, data_dir: str, out: Path) -> None:
    try:
        det = stationary.load_detector(model)
    except OSError as exc:
        raise scenario.DataError(f"cannot read model {model}: {exc.strerror}") from None
    except (ValueError, KeyError) as exc:
        raise scenario.SchemaError(f"{model}: invalid model file ({exc})") from None
    ds = _require_timevariant(data_dir)
    res = evaluation.cross_domain_eval(det, ds.trajectories)
    non_empty = [i for i, t in enumerate(ds.trajectories) if t]
    per_traj = _csv_text(
        ("trajectory_id", "n_epochs", "accuracy", "f1"),
        [
            [i, len(ds.trajectories[i]), _g(m["accuracy"]), _g(m["f1"])]
            for i, m in zip(non_empty, res.per_trajectory)
        ],
    )
    doc = evaluation.cross_doc(res)
    _write_report(out, [doc], {"trajectories.csv": per_traj})


def cmd_calibrate(cfg: RunConfig, data_dir: str, out: Path) -> None:
    ds = _require_timevariant(data_dir)
    series = [evaluation.trajectory_series(t) for t in ds.trajectories if t]
    if not series:
        raise scenario.DataError(f"{data_dir}: every trajectory is empty")
    g = cfg.grid
    best, rows = adaptive.calibrate(series, g["windows"], g["alphas"], g["betas"], cfg.adaptive.min_warmup)
    best_row = next(r for r in rows if (r.window, r.alpha, r.beta) == (best.window, best.alpha, best.beta))
    table = _csv_text(
        ("window", "alpha", "beta", "mean_f1", "accuracy", "n_scored"),
        [[r.window, _g(r.alpha), _g(r.beta), _g(r.mean_f1), _g(r.accuracy), r.n_scored] for r in rows],
    )
    doc = {
        "kind": "calibration",
        "best": {**asdict(best_row), "min_warmup": best.min_warmup},
        "rows": [{**asdict(r), "mean_f1": None if math.isnan(r.mean_f1) else r.mean_f1} for r in rows],
    }
    _write_report(out, [doc], {"calibration.csv": table, "best.conf": adaptive_conf_text(best)})


def cmd_report(run_dirs: list[str], out: Path) -> None:
    sections = []
    for d in run_dirs:
        path = Path(d) / REPORT_JSON
        if not path.is_file():
            raise scenario.DataError(f"missing run artifact: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            part = doc["sections"]
            for s in part:
                evaluation.render(s)
        except (ValueError, KeyError, TypeError) as exc:
            raise scenario.SchemaError(f"{path}: malformed report ({exc})") from None
        sections.extend(part)
    _write_report(out, sections)


# -- argument parsing ------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=str, help="global seed (overrides the config file)")
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="geojam", description="GEO uplink jamming simulation and detection")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-stationary", help="generate the stationary-attacker dataset")
    _common(p)

    p = sub.add_parser("gen-timevariant", help="generate time-variant attacker trajectories")
    _common(p)
    p.add_argument("--trajectories", type=str, help="number of trajectories")

    p = sub.add_parser("train-stationary", help="train and evaluate the PCA + random forest detector")
    _common(p)
    p.add_argument("data", help="stationary CSV file or directory containing it")
    p.add_argument("--pca", dest="pca", action="store_true", default=None, help="project onto PCA (default)")
    p.add_argument("--no-pca", dest="pca", action="store_false", help="use the z-scored features directly")
    p.add_argument("--trees", type=str, help="number of trees")
    p.add_argument("--max-depth", type=str, help="maximum tree depth")

    p = sub.add_parser("detect-adaptive", help="run the adaptive threshold detector")
    _common(p)
    p.add_argument("data_dir", help="time-variant dataset directory")
    p.add_argument("--window", type=str)
    p.add_argument("--alpha", type=str)
    p.add_argument("--beta", type=str)

    p = sub.add_parser("eval-cross", help="apply a stationary model to time-variant trajectories")
    _common(p)
    p.add_argument("model", help="model.json from train-stationary")
    p.add_argument("data_dir", help="time-variant dataset directory")

    p = sub.add_parser("calibrate", help="grid-search the adaptive detector parameters")
    _common(p)
    p.add_argument("data_dir", help="time-variant dataset directory")
    p.add_argument("--window", type=str, help="comma-separated window grid")
    p.add_argument("--alpha", type=str, help="comma-separated alpha grid")
    p.add_argument("--beta", type=str, help="comma-separated beta grid")

    p = sub.add_parser("report", help="combine run reports into one")
    _common(p)
    p.add_argument("runs", nargs="+", help="run output directories")
    return parser


_FLAG_KEYS = {
    "seed": "seed",
    "trajectories": "timevariant.n_trajectories",
    "trees": "forest.n_trees",
    "max_depth": "forest.max_depth",
}


def _overrides(args) -> dict:
    raw = {}
    for attr, key in _FLAG_KEYS.items():
        if getattr(args, attr, None) is not None:
            raw[key] = getattr(args, attr)
    if getattr(args, "pca", None) is not None:
        raw["pca.enabled"] = "true" if args.pca else "false"
    grid = args.command == "calibrate"
    for attr, single, multi in (
        ("window", "adaptive.window", "calibrate.windows"),
        ("alpha", "adaptive.alpha", "calibrate.alphas"),
        ("beta", "adaptive.beta", "calibrate.betas"),
    ):
        if getattr(args, attr, None) is not None:
            raw[multi if grid else single] = getattr(args, attr)
    values = {}
    for key, text in raw.items():
        try:
            values[key] = KEYS[key][0](text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    return values


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "out")


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config, _overrides(args))
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args)
    try:
        if args.command == "gen-stationary":
            cmd_gen_stationary(cfg, out)
        elif args.command == "gen-timevariant":
            cmd_gen_timevariant(cfg, out)
        elif args.command == "train-stationary":
            cmd_train_stationary(cfg, args.data, out)
        elif args.command == "detect-adaptive":
            cmd_detect_adaptive(cfg, args.data_dir, out)
        elif args.command == "eval-cross":
            cmd_eval_cross(cfg, args.model, args.data_dir, out)
        elif args.command == "calibrate":
            cmd_calibrate(cfg, args.data_dir, out)
        elif args.command == "report":
            cmd_report(args.runs, out)
    except ArithmeticError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (scenario.DataError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run())
