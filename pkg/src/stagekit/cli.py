"""Command-line entry point.

Every subcommand resolves its settings from built-in defaults, then an
optional JSON ``--config`` file, then explicit flags, and echoes the result
to ``config-<command>.json`` in the run directory. The wall-clock timestamp
lives only under that file's ``timestamp`` key, so all other artifacts are
reproducible byte for byte.

Exit codes: 0 success, 2 bad arguments or configuration, 3 data error,
4 numerical failure. Failures print a JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as dt
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cohort import (
    DEFAULT_PROPORTIONS, STAGE_NAMES, CohortError, GeneratorSpec, generate_synthetic, load_csv,
    make_folds, write_csv,
)
from .evaluation import SEVERITY_REFERENCE_LINES, confusion_and_metrics, cross_validate, error_analysis
from .ga import SCHEMAS, config_for, schema_for, tune_classifier
from .importance import fit_group_forest, oob_importance, prevalence_difference
from .ranktests import screen_features
from .registry import DEFAULTS, PRESETS, ModelSpec, dumps_model, param_hash, preset

CONFIG_SCHEMA_VERSION = 1
EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", message, EXIT_CONFIG)
        self.print_usage(sys.stderr)
        sys.exit(EXIT_CONFIG)


def _emit_error(kind, message, code):
    record = {"error": kind, "message": str(message), "exit_code": code}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


# ------------------------------------------------------------ defaults

_COMMON = {"seed": 0, "workers": None, "out_dir": None}
_DATA = {"data": None, "label_column": "stage", "group_column": "group"}
_MODEL = {"model": None, "preset": None, "params": {}, "tuned": None}

COMMAND_DEFAULTS = {
    "simulate": {"seed": 0, "n": 2000, "proportions": list(DEFAULT_PROPORTIONS),
                 "overlap": 0.8, "out": "cohort.csv"},
    "screen": {**_COMMON, **_DATA, "alpha": 0.05, "mode": "stage"},
    "tune": {**_COMMON, **_DATA, "model": None, "params": {}, "population": 20,
             "generations": 50, "crossover_fraction": 0.8, "elite_count": None, "folds": 3,
             "inner_seed": 0},
    "train": {**_COMMON, **_DATA, **_MODEL},
    "eval": {**_COMMON, **_DATA, **_MODEL, "folds": 10, "repeats": 100, "screen_alpha": None},
    "importance": {**_COMMON, **_DATA, "trees": 100, "min_leaf": 1, "costs": None},
    "report": {"run_dir": None, "out_dir": None},
}


def _json_arg(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"not valid JSON: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = _Parser(prog="stagekit", description="Stage estimation toolkit for ordinal "
                     "symptom-score cohorts: screening, tuning, training, evaluation, importance.")
    parser.add_argument("--version", action="version", version=f"stagekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, data=True):
        p.add_argument("--config", default=None, help="JSON file of settings for this command")
        p.add_argument("--seed", type=int, default=S, help="master random seed (default 0)")
        p.add_argument("--workers", type=int, default=S,
                       help="worker processes (default: available cores); results do not depend on it")
        p.add_argument("--out-dir", dest="out_dir", default=S,
                       help="run directory (default: runs/<command>-<config hash>)")
        if data:
            p.add_argument("--data", default=S, help="cohort CSV")
            p.add_argument("--label-column", dest="label_column", default=S, help="default: stage")
            p.add_argument("--group-column", dest="group_column", default=S,
                           help="HC/PD column, used when present (default: group)")

    def model_opts(p):
        p.add_argument("--model", default=S, choices=sorted(DEFAULTS), help="model family")
        p.add_argument("--preset", default=S, choices=sorted(PRESETS),
                       help="reference hyperparameters for a family")
        p.add_argument("--params", type=_json_arg, default=S,
                       help='JSON object of family parameters, e.g. \'{"n_rounds": 50}\'')
        p.add_argument("--tuned", default=S, help="tune artifact whose best parameters to use")

    p = sub.add_parser("simulate", help="write a synthetic cohort CSV")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--n", type=int, default=S, help="rows (default 2000)")
    p.add_argument("--proportions", type=float, nargs=3, default=S,
                   help="normal/early/moderate shares (default 0.1662 0.7990 0.0348)")
    p.add_argument("--overlap", type=float, default=S, help="score jitter sd (default 0.8)")
    p.add_argument("--out", default=S, help="output CSV (default cohort.csv)")

    p = sub.add_parser("screen", help="rank-test every feature against the labels")
    common(p)
    p.add_argument("--alpha", type=float, default=S, help="significance level (default 0.05)")
    p.add_argument("--mode", choices=["stage", "group"], default=S,
                   help="Kruskal-Wallis over stages or rank-sum HC vs PD (default stage)")

    p = sub.add_parser("tune", help="genetic search of a family's hyperparameters")
    common(p)
    p.add_argument("--model", default=S, choices=sorted(SCHEMAS), help="model family")
    p.add_argument("--params", type=_json_arg, default=S, help="fixed non-searched parameters")
    p.add_argument("--population", type=int, default=S, help="default 20")
    p.add_argument("--generations", type=int, default=S, help="default 50")
    p.add_argument("--crossover-fraction", dest="crossover_fraction", type=float, default=S)
    p.add_argument("--elite-count", dest="elite_count", type=int, default=S,
                   help="default 2 (8 for rusboost)")
    p.add_argument("--folds", type=int, default=S, help="inner CV folds (default 3)")
    p.add_argument("--inner-seed", dest="inner_seed", type=int, default=S)

    p = sub.add_parser("train", help="fit one model on the whole cohort")
    common(p)
    model_opts(p)

    p = sub.add_parser("eval", help="repeated stratified cross-validation")
    common(p)
    model_opts(p)
    p.add_argument("--folds", type=int, default=S, help="default 10")
    p.add_argument("--repeats", type=int, default=S, help="default 100")
    p.add_argument("--screen-alpha", dest="screen_alpha", type=float, default=S,
                   help="screen features inside each training split at this level")

    p = sub.add_parser("importance", help="HC vs PD out-of-bag permutation importance")
    common(p)
    p.add_argument("--trees", type=int, default=S, help="default 100")
    p.add_argument("--min-leaf", dest="min_leaf", type=int, default=S)
    p.add_argument("--costs", type=float, nargs=2, default=S, help="HC and PD weights")

    p = sub.add_parser("report", help="collect a run directory into summary CSVs")
    p.add_argument("run_dir", help="run directory to read")
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", dest="out_dir", default=S, help="default: <run_dir>/report")
    return parser


# ------------------------------------------------------------ config


def resolve_config(command, args) -> dict:
    cfg = copy.deepcopy(COMMAND_DEFAULTS[command])
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        loaded.pop("schema_version", None)
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {unknown}")
        cfg.update(loaded)
    cfg.update(given)
    if "workers" in cfg and cfg["workers"] is None:
        cfg["workers"] = os.cpu_count() or 1
    if "workers" in cfg and cfg["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    return cfg


def resolve_model(cfg) -> ModelSpec:
    """--preset, then --model, then --tuned artifact, then --params overrides."""
    family, params = None, {}
    if cfg.get("preset"):
        spec = preset(cfg["preset"])
        family, params = spec.family, dict(spec.params)
    if cfg.get("tuned"):
        doc = _read_json(cfg["tuned"])
        if family is not None and family != doc["family"]:
            raise ConfigError("tuned artifact family differs from the preset family")
        family, params = doc["family"], dict(doc["params"])
    if cfg.get("model"):
        if family is not None and family != cfg["model"]:
            raise ConfigError(f"--model {cfg['model']} conflicts with family {family}")
        family = cfg["model"]
    if family is None:
        raise ConfigError("choose a model with --model, --preset or --tuned")
    params.update(cfg.get("params") or {})
    try:
        return ModelSpec(family, params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise CohortError(f"cannot read {path}: {exc}") from None


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj):
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n",
                    encoding="utf-8")


def config_hash(command, cfg) -> str:
    stable = {k: v for k, v in cfg.items() if k not in ("workers", "out_dir")}
    text = json.dumps(_clean({"command": command, **stable}), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def run_directory(command, cfg) -> Path:
    out = cfg.get("out_dir") or os.path.join("runs", f"{command}-{config_hash(command, cfg)}")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def echo_config(run_dir: Path, command, cfg, suffix=""):
    doc = {"schema_version": CONFIG_SCHEMA_VERSION, "command": command, "config": cfg,
           "version": __version__,
           "timestamp": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")}
    write_json(run_dir / f"config-{command}{suffix}.json", doc)


def load_cohort(cfg):
    if not cfg.get("data"):
        raise ConfigError("--data is required")
    path = Path(cfg["data"])
    if not path.is_file():
        raise FileNotFoundError(f"no such cohort file: {path}")
    with path.open(encoding="utf-8") as fh:
        header = [h.strip() for h in fh.readline().split(",")]
    group = cfg["group_column"] if cfg["group_column"] in header else None
    return load_csv(path, label_column=cfg["label_column"], group_column=group)


# ------------------------------------------------------------ commands


def cmd_simulate(cfg):
    p = np.asarray(cfg["proportions"], dtype=float)
    if p.shape != (3,) or np.any(p < 0) or not p.sum() > 0:
        raise ConfigError("proportions must be three non-negative numbers")
    spec = GeneratorSpec(n=int(cfg["n"]), class_proportions=tuple(p / p.sum()),
                         overlap=float(cfg["overlap"]), seed=int(cfg["seed"]))
    cohort = generate_synthetic(spec)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(cohort, out)
    echo = out.with_name(out.stem + ".config.json")
    doc = {"schema_version": CONFIG_SCHEMA_VERSION, "command": "simulate", "config": cfg,
           "version": __version__,
           "timestamp": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")}
    write_json(echo, doc)
    return {"cohort": str(out), "class_counts": cohort.class_counts()}


def cmd_screen(cfg):
    cohort = load_cohort(cfg)
    res = screen_features(cohort, alpha=cfg["alpha"], mode=cfg["mode"])
    run = run_directory("screen", cfg)
    echo_config(run, "screen", cfg)
    table = res.table()
    write_json(run / "screen.json", {
        "test": res.test, "alpha": res.alpha, "mode": cfg["mode"],
        "n": cohort.n, "n_dropped": cohort.n_dropped,
        "rows": table.to_dict(orient="records"),
    })
    return {"run_dir": str(run), "selected": len(res.selected), "features": cohort.m}


def cmd_tune(cfg):
    if not cfg.get("model"):
        raise ConfigError("--model is required")
    cohort = load_cohort(cfg)
    schema = schema_for(cfg["model"])
    try:
        ga_cfg = config_for(
            cfg["model"], population_size=cfg["population"], generations=cfg["generations"],
            crossover_fraction=cfg["crossover_fraction"], seed=cfg["seed"],
            elite_count=schema.elite_count if cfg["elite_count"] is None else cfg["elite_count"],
        )
        ModelSpec(cfg["model"], dict(cfg["params"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg["elite_count"] = ga_cfg.elite_count
    run = run_directory("tune", cfg)
    echo_config(run, "tune", cfg, f"-{cfg['model']}")
    res = tune_classifier(cohort, cfg["model"], ga_cfg, folds=cfg["folds"],
                          inner_seed=cfg["inner_seed"], base_params=cfg["params"],
                          workers=cfg["workers"])
    doc = res.to_dict()
    doc["gene_names"] = list(schema.names)
    doc["bounds"] = {"lower": list(ga_cfg.lower), "upper": list(ga_cfg.upper)}
    write_json(run / f"tune-{cfg['model']}.json", doc)
    return {"run_dir": str(run), "params": res.params, "fitness": res.fitness}


def _save_model(run, model, spec, seed):
    text = dumps_model(model, spec, seed)
    digest = hashlib.sha256(text.encode()).hexdigest()
    models = run / "models"
    models.mkdir(exist_ok=True)
    name = f"{digest[:16]}.json"
    (models / name).write_text(text + "\n", encoding="utf-8")
    return f"models/{name}", digest


def cmd_train(cfg):
    spec = resolve_model(cfg)
    cohort = load_cohort(cfg)
    cfg["resolved_model"] = spec.to_dict()
    run = run_directory("train", cfg)
    echo_config(run, "train", cfg, f"-{spec.family}")
    X, y = cohort.features.astype(float), cohort.stage_labels
    model = spec.fit(X, y, seed=cfg["seed"])
    rel, digest = _save_model(run, model, spec, cfg["seed"])
    rep = confusion_and_metrics(y, model.predict(X))
    out = {"family": spec.family, "params": spec.resolved(), "model_file": rel,
           "model_sha256": digest, "param_hash": param_hash(model),
           "training_report": rep.to_dict()}
    write_json(run / f"train-{spec.family}.json", out)
    return {"run_dir": str(run), "model_file": rel}


def cmd_eval(cfg):
    spec = resolve_model(cfg)
    cohort = load_cohort(cfg)
    cfg["resolved_model"] = spec.to_dict()
    try:
        plan = make_folds(cohort, folds=cfg["folds"], repeats=cfg["repeats"], seed=cfg["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    run = run_directory("eval", cfg)
    echo_config(run, "eval", cfg, f"-{spec.family}")
    res = cross_validate(cohort, spec, plan, seed=cfg["seed"], workers=cfg["workers"],
                         screen_alpha=cfg["screen_alpha"])
    doc = res.to_dict()
    doc["protocol"] = {"folds": cfg["folds"], "repeats": cfg["repeats"], "seed": cfg["seed"]}
    doc["error_analysis"] = error_analysis(res.repeats[0], cohort).to_dict(orient="records")
    doc["severity_reference_lines"] = list(SEVERITY_REFERENCE_LINES)
    first = res.repeats[0]
    if first.severity is not None:
        doc["severity"] = {"rows": first.rows.tolist(), "true": first.true.tolist(),
                           "expected_class": first.severity.tolist()}
    write_json(run / f"eval-{spec.family}.json", doc)
    return {"run_dir": str(run), "accuracy": res.aggregate["accuracy"],
            "recall": res.aggregate["recall"]}


def cmd_importance(cfg):
    cohort = load_cohort(cfg)
    if cohort.group_labels is None:
        raise CohortError(f"importance needs the {cfg['group_column']!r} column (HC/PD)")
    run = run_directory("importance", cfg)
    echo_config(run, "importance", cfg)
    forest = fit_group_forest(cohort, n_trees=cfg["trees"], seed=cfg["seed"],
                              costs=cfg["costs"], min_leaf=cfg["min_leaf"])
    rep = oob_importance(cohort, None, forest, seed=cfg["seed"])
    doc = rep.to_dict()
    doc["prevalence_difference"] = prevalence_difference(cohort).to_dict(orient="records")
    write_json(run / "importance.json", doc)
    return {"run_dir": str(run), "top_feature": rep.table().iloc[0]["feature"],
            "oob_accuracy": rep.oob_accuracy}


# ------------------------------------------------------------ report


def _write_csv(path, header, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    return "" if v is None else repr(float(v)) if isinstance(v, float) else v


def _report_screen(doc, out):
    stat = "chi_sq" if doc["test"] == "kruskal" else "z_stat"
    rows = [[r["feature"], _fmt(r[stat]), _fmt(r["p_value"]), r["selected"]] for r in doc["rows"]]
    path = out / "screening.csv"
    _write_csv(path, ["feature", stat, "p_value", "selected"], rows)
    return [path]


def _report_tune(docs, out):
    rows = []
    for family, doc in docs:
        for t in doc["trace"]:
            best, mean = t["best"], t["mean"]
            rows.append([family, t["generation"], _fmt(best), _fmt(mean),
                         _fmt(None if best is None else 1 - best),
                         _fmt(None if mean is None else 1 - mean)])
    path = out / "ga_trace.csv"
    _write_csv(path, ["model", "generation", "best_fitness", "mean_fitness", "best_error",
                      "mean_error"], rows)
    return [path]


def _report_eval(docs, out):
    header = ["model", "accuracy"]
    for c in (1, 2, 3):
        header += [f"{STAGE_NAMES[c]}_{k}" for k in ("precision", "recall", "f_measure")]
    header.append("brier")
    rows, err_rows = [], []
    for family, doc in docs:
        a = doc["aggregate"]
        row = [family, _fmt(100 * a["accuracy"])]
        for c in range(3):
            row += [_fmt(100 * a[k][c]) for k in ("precision", "recall", "f_measure")]
        row.append(_fmt(a["brier"]))
        rows.append(row)
        for e in doc.get("error_analysis", []):
            err_rows.append([family, e["true"], e["predicted"], e["count"], _fmt(e["min_total"]),
                             _fmt(e["median_total"]), _fmt(e["max_total"])])
    p1, p2 = out / "performance.csv", out / "error_analysis.csv"
    _write_csv(p1, header, rows)
    _write_csv(p2, ["model", "true", "predicted", "count", "min_total", "median_total",
                    "max_total"], err_rows)
    return [p1, p2]


def _report_importance(doc, out):
    order = sorted(range(len(doc["features"])), key=lambda j: doc["ranks"][j])
    p1, p2, p3 = (out / "importance.csv", out / "importance_confusion.csv",
                  out / "prevalence.csv")
    _write_csv(p1, ["rank", "feature", "score"],
               [[doc["ranks"][j], doc["features"][j], _fmt(doc["scores"][j])] for j in order])
    m = doc["confusion"]["matrix"]
    _write_csv(p2, ["true", "predicted_PD", "predicted_HC"], [["PD", *m[0]], ["HC", *m[1]]])
    _write_csv(p3, ["feature", "pd_percent", "hc_percent", "difference"],
               [[r["feature"], _fmt(r["pd_percent"]), _fmt(r["hc_percent"]), _fmt(r["difference"])]
                for r in doc["prevalence_difference"]])
    return [p1, p2, p3]


def cmd_report(cfg):
    run = Path(cfg["run_dir"])
    if not run.is_dir():
        raise FileNotFoundError(f"no such run directory: {run}")
    out = Path(cfg["out_dir"]) if cfg.get("out_dir") else run / "report"
    errors, emitted = [], []

    def load(path):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            if not isinstance(doc, dict):
                raise ValueError("not a JSON object")
            return doc
        except (OSError, ValueError) as exc:
            errors.append({"artifact": path.name, "problem": f"malformed: {exc}"})
            return None

    found = {
        "screen": sorted(run.glob("screen.json")),
        "tune": sorted(run.glob("tune-*.json")),
        "eval": sorted(run.glob("eval-*.json")),
        "importance": sorted(run.glob("importance.json")),
    }
    missing = [k for k, v in found.items() if not v]
    if len(missing) == len(found):
        raise CohortError(f"{run} holds no artifacts (looked for {', '.join(missing)})")
    out.mkdir(parents=True, exist_ok=True)
    writers = {
        "screen": lambda docs: _report_screen(docs[0][1], out),
        "tune": lambda docs: _report_tune(docs, out),
        "eval": lambda docs: _report_eval(docs, out),
        "importance": lambda docs: _report_importance(docs[0][1], out),
    }
    for kind, paths in found.items():
        docs = []
        for path in paths:
            doc = load(path)
            if doc is not None:
                docs.append((path.stem.split("-", 1)[-1], doc))
        if not docs:
            continue
        try:
            emitted += [p.name for p in writers[kind](docs)]
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            errors.append({"artifact": ", ".join(p.name for p in paths),
                           "problem": f"malformed: missing or invalid field {exc}"})
    index = {"run_dir": str(run), "files": sorted(emitted), "missing": missing,
             "errors": errors, "severity_reference_lines": list(SEVERITY_REFERENCE_LINES)}
    write_json(out / "index.json", index)
    return {"report_dir": str(out), "files": sorted(emitted), "errors": errors}


COMMANDS = {
    "simulate": cmd_simulate, "screen": cmd_screen, "tune": cmd_tune, "train": cmd_train,
    "eval": cmd_eval, "importance": cmd_importance, "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args.command, args)
        summary = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        _emit_error("config", exc, EXIT_CONFIG)
        return EXIT_CONFIG
    except (CohortError, FileNotFoundError) as exc:
        _emit_error("data", exc, EXIT_DATA)
        return EXIT_DATA
    except (FloatingPointError, np.linalg.LinAlgError, RuntimeError, OverflowError) as exc:
        _emit_error("numerical", exc, EXIT_NUMERIC)
        return EXIT_NUMERIC
    except ValueError as exc:
        _emit_error("data", exc, EXIT_DATA)
        return EXIT_DATA
    print(json.dumps(_clean(summary), sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
