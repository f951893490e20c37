"""Command-line front end.

Subcommands ``nmi``, ``fit``, ``compare``, ``simulate``, ``synth`` and
``report``.  Each reads one JSON config (see the README for the layout),
applies command-line overrides on top of it, and writes machine-readable
artifacts into ``--out``.  Exit codes: 0 success, 1 usage or config error,
2 data error, 3 numerical failure.  ``NMIARMAX_LOG_LEVEL`` sets log
verbosity (``WARNING`` by default).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from ._version import __version__
from .errors import ConfigError, DataError, NmiArmaxError, NumericalError
from .infotheory import DependencyMatrix
from .linmodels import FitReport, PolyModel, predict_one_step, simulate
from .pipeline import (
    PipelineConfig,
    compare_models,
    load_data,
    run_inference,
    run_selection,
)
from .statespace import SSModel, simulate_ss

log = logging.getLogger("nmiarmax")

LOG_ENV = "NMIARMAX_LOG_LEVEL"


class _Parser(argparse.ArgumentParser):
    """Usage errors raise instead of exiting with argparse's code 2."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def resolve_names(requested, available) -> list[str]:
    """Match user-typed column names to dataset columns.

    Exact matches win, then case-insensitive ones, then a unique column whose
    lower-cased name is a prefix of the request or vice versa (so
    ``lighting`` finds ``Light``).
    """
    out = []
    for name in requested:
        if name in available:
            out.append(name)
            continue
        low = name.lower()
        hits = [a for a in available if a.lower() == low]
        if not hits:
            hits = [a for a in available if low.startswith(a.lower()) or a.lower().startswith(low)]
        if len(hits) != 1:
            raise ConfigError(f"input {name!r} does not name exactly one column of {list(available)}")
        out.append(hits[0])
    return out


# -- config assembly -------------------------------------------------------------


def _raw_config(args) -> tuple[dict, str]:
    if args.config:
        if not os.path.isfile(args.config):
            raise ConfigError(f"config file not found: {args.config}")
        with open(args.config) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
        return raw, os.path.dirname(os.path.abspath(args.config))
    if not getattr(args, "data", None):
        raise ConfigError("give --config, or --data with --target")
    if not args.target:
        raise ConfigError("--data needs --target naming the output column")
    with open(args.data, newline="") as fh:
        header = [h.strip() for h in next(csv.reader(fh), [])]
    if args.target not in header:
        raise DataError(f"{args.data}: target column {args.target!r} not in header {header}")
    roles = {args.target: "output"}
    roles.update({h: "candidate_input" for h in header if h and h != args.target})
    return {"dataset": {"path": os.path.abspath(args.data), "roles": roles}}, os.getcwd()


def build_config(args) -> PipelineConfig:
    """Config file first, then command-line flags on top."""
    raw, base = _raw_config(args)
    raw = json.loads(json.dumps(raw))
    fit = raw.setdefault("fit", {})
    if getattr(args, "order", None) is not None:
        fit["orders"] = [args.order, args.order, args.order]
    if getattr(args, "delay", None) is not None:
        fit["delays"] = args.delay
    if getattr(args, "train_fraction", None) is not None:
        raw["split"] = {"mode": "fraction", "train_fraction": args.train_fraction}
    info = raw.setdefault("infotheory", {})
    if getattr(args, "n_bins", None) is not None:
        info["n_bins"] = args.n_bins
    if getattr(args, "strategy", None):
        info["strategy"] = args.strategy
    if getattr(args, "top_k", None) is not None:
        raw["selection"] = {"rule": "top_k", "k": args.top_k}
    if getattr(args, "threshold", None) is not None:
        raw["selection"] = {"rule": "threshold", "tau": args.threshold}
    if getattr(args, "zoo", None) is not None:
        raw["zoo"] = _csv_list(args.zoo)
    if getattr(args, "serial", False):
        raw["parallel"] = False
    roles = raw.get("dataset", {}).get("roles", {})
    if getattr(args, "inputs", None):
        usable = [k for k, v in roles.items() if v != "output"]
        raw["inputs"] = resolve_names(_csv_list(args.inputs), usable)
    try:
        return PipelineConfig.from_dict(raw, base_dir=base)
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from None


def _outdir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from None
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory not writable: {path}")
    return path


def _write_json(path: str, doc: dict):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")
    log.info("wrote %s", path)


def _write_text(path: str, text: str):
    with open(path, "w") as fh:
        fh.write(text.rstrip("\n") + "\n")
    log.info("wrote %s", path)


def _nan_to_none(x):
    return None if isinstance(x, float) and not np.isfinite(x) else x


def _clean(doc):
    """Recursively replace non-finite floats by None for strict JSON."""
    if isinstance(doc, dict):
        return {k: _clean(v) for k, v in doc.items()}
    if isinstance(doc, (list, tuple)):
        return [_clean(v) for v in doc]
    return _nan_to_none(doc)


# -- subcommands -------------------------------------------------------------------


def cmd_nmi(args) -> int:
    config = build_config(args)
    out = _outdir(args.out)
    data = load_data(config)
    # the matrix is always computed, even when inputs are fixed explicitly
    sel = run_selection(replace(config, inputs=None), data)
    matrix = sel.matrix
    matrix.to_csv(os.path.join(out, "nmi_matrix.csv"))
    _write_json(os.path.join(out, "nmi_matrix.json"), {**matrix.to_dict(), "config": config.to_dict()})
    _write_json(os.path.join(out, "selection.json"), _clean({**sel.to_dict(), "config": config.to_dict()}))
    ranking = "\n".join(f"{i + 1:>3}  {n:<20}{v:.4f}" for i, (n, v) in enumerate(sel.ranking))
    _write_text(os.path.join(out, "ranking.txt"), ranking)
    print(matrix.format_grid())
    print()
    print(f"inputs ranked by {matrix.metric} with {sel.target}:")
    print(ranking)
    return 0


def _write_predictions(path, model, table):
    y = table.column(model.output_name)
    k = model.start_index
    free = simulate(model, table, init=y[:k])
    one = predict_one_step(model, table)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "measured", "free_run", "one_step"])
        for i in range(k, y.size):
            w.writerow([i, repr(float(y[i])), repr(float(free[i])), repr(float(one[i - k]))])
    log.info("wrote %s", path)


def cmd_fit(args) -> int:
    config = build_config(args)
    out = _outdir(args.out)
    data = load_data(config)
    sel = run_selection(config, data)
    report = run_inference(config, sel, data)
    eff = config.to_dict()
    _write_json(os.path.join(out, "selection.json"), _clean({**sel.to_dict(), "config": eff}))
    _write_json(os.path.join(out, "model.json"), report.model.to_dict())
    _write_json(os.path.join(out, "fit_report.json"), _clean({**report.to_dict(), "config": eff}))
    _write_text(os.path.join(out, "fit_report.txt"), report.format_text())
    _write_predictions(os.path.join(out, "predictions_train.csv"), report.model, data.train)
    for label, table in data.tests:
        _write_predictions(os.path.join(out, f"predictions_{label}.csv"), report.model, table)
    print(report.format_text())
    return 0


def cmd_compare(args) -> int:
    config = build_config(args)
    out = _outdir(args.out)
    data = load_data(config)
    inputs = config.inputs if config.inputs is not None else run_selection(config, data).selected
    table = compare_models(config, inputs=inputs, data=data)
    text = table.format_text()
    _write_text(os.path.join(out, "comparison.txt"), text)
    table.to_csv(os.path.join(out, "comparison.csv"))
    _write_json(os.path.join(out, "comparison.json"), _clean(table.to_dict(timing=not args.no_timing)))
    print(text)
    return 0


def load_model(path: str):
    """Read a PolyModel or SSModel JSON document."""
    if not os.path.isfile(path):
        raise ConfigError(f"model file not found: {path}")
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
    if doc.get("kind") == "FitReport":
        doc = doc["model"]
    if doc.get("kind") == "SSModel":
        return SSModel.from_dict(doc)
    if doc.get("kind") == "PolyModel":
        return PolyModel.from_dict(doc)
    raise DataError(f"{path}: not a model document (kind={doc.get('kind')!r})")


def read_columns(path: str, names) -> np.ndarray:
    """Named numeric columns of a CSV file as an ``(N, len(names))`` array."""
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    missing = [n for n in names if n not in header]
    if missing:
        raise DataError(f"{path}: model inputs {missing} not in header {header}")
    idx = [header.index(n) for n in names]
    out = np.empty((len(rows), len(names)))
    for i, row in enumerate(rows):
        off = 1 if len(row) == len(header) + 1 else 0
        try:
            out[i] = [float(row[j + off]) for j in idx]
        except (ValueError, IndexError):
            raise DataError(f"{path}: row {i + 2} is not numeric in the model's input columns") from None
    if not np.all(np.isfinite(out)):
        raise DataError(f"{path}: non-finite input values")
    return out


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    out = _outdir(args.out)
    x = read_columns(args.data, model.input_names)
    y = simulate_ss(model, x) if isinstance(model, SSModel) else simulate(model, x)
    path = os.path.join(out, "simulated.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "simulated"])
        for i, v in enumerate(y):
            w.writerow([i, repr(float(v))])
    log.info("wrote %s", path)
    print(f"simulated {y.size} samples of {model.output_name} -> {path}")
    return 0


def cmd_synth(args) -> int:
    from .synth import building_surrogate, canonical_armax, generate, spec_from_dict, RNG_ALGORITHM

    out = _outdir(args.out)
    if args.surrogate:
        table = building_surrogate(seed=args.seed, days=args.days)
        truth = {"generator": "building_surrogate", "seed": args.seed, "days": args.days, "rng": RNG_ALGORITHM}
    else:
        if args.spec:
            if not os.path.isfile(args.spec):
                raise ConfigError(f"generator spec not found: {args.spec}")
            with open(args.spec) as fh:
                try:
                    d = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"{args.spec}: invalid JSON ({exc})") from None
            if args.seed is not None:
                d["seed"] = args.seed
            spec = spec_from_dict(d)
        else:
            spec = canonical_armax(seed=args.seed or 0, n_samples=args.n_samples, noise_std=args.noise_std)
        table, truth = generate(spec)
    path = os.path.join(out, args.name + ".csv")
    table.to_csv(path)
    truth = {"kind": "Truth", "version": __version__, **truth, "columns": list(table.names)}
    truth["roles"] = {r.name: r.role for r in table.roles}
    _write_json(os.path.join(out, args.name + ".truth.json"), truth)
    print(f"wrote {table.n_rows} rows x {table.n_columns} columns to {path}")
    return 0


def render(doc: dict) -> str:
    """Human-readable text for any JSON artifact this tool writes."""
    kind = doc.get("kind")
    if kind == "DependencyMatrix":
        return DependencyMatrix.from_dict(doc).format_grid()
    if kind == "SelectionReport":
        lines = [f"target {doc['target']}, rule {doc['rule']}"]
        lines += [f"{i + 1:>3}  {r['name']:<20}{r['value']:.4f}" for i, r in enumerate(doc["ranking"])]
        lines.append(f"selected: {', '.join(doc['selected'])}")
        return "\n".join(lines)
    if kind == "FitReport":
        m = doc["model"]
        model = SSModel.from_dict(m) if m.get("kind") == "SSModel" else PolyModel.from_dict(m)
        from .linmodels import TestScore

        scores = tuple(
            TestScore(s["label"], _none_nan(s["free_run"]), _none_nan(s["one_step"]), s["n_scored"])
            for s in doc["test_fits"]
        )
        rep = FitReport(
            model=model,
            method=doc["method"],
            iterations_used=doc["iterations_used"],
            converged=doc["converged"],
            residual_variance=doc["residual_variance"],
            train_fit_pct=_none_nan(doc["train_fit_pct"]),
            train_fit_one_step=doc.get("train_fit_one_step"),
            test_fits=scores,
            ridge_lambda=doc.get("ridge_lambda", 0.0),
        )
        return rep.format_text()
    if kind == "ComparisonTable":
        from .pipeline import ComparisonRow, ComparisonTable

        rows = tuple(
            ComparisonRow(
                r["label"],
                r["family"],
                r["order_spec"],
                r["train_fit"],
                tuple(_none_nan(v) for v in r["test_fits"]),
                tuple(_none_nan(v) for v in r["test_fits_one_step"]),
                r.get("wall_time", 0.0),
                r.get("error"),
                r.get("stable"),
            )
            for r in doc["rows"]
        )
        return ComparisonTable(tuple(doc["inputs"]), tuple(doc["test_labels"]), rows).format_text()
    if kind in ("PolyModel", "SSModel"):
        return json.dumps(doc, indent=2)
    raise DataError(f"don't know how to render a document of kind {kind!r}")


def _none_nan(v):
    return float("nan") if v is None else v


def cmd_report(args) -> int:
    texts = []
    for path in args.artifacts:
        if not os.path.isfile(path):
            raise ConfigError(f"artifact not found: {path}")
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: invalid JSON ({exc})") from None
        texts.append(f"== {path}\n{render(doc)}")
    text = "\n\n".join(texts)
    if args.out:
        _write_text(os.path.join(_outdir(args.out), "report.txt"), text)
    print(text)
    return 0


# -- argument parsing ----------------------------------------------------------------


def _pipeline_flags(p):
    p.add_argument("--config", help="JSON pipeline config")
    p.add_argument("--data", help="single CSV to use instead of a config (needs --target)")
    p.add_argument("--target", help="output column when using --data")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--n-bins", type=int, help="histogram bins for NMI")
    p.add_argument("--strategy", choices=("equal_frequency", "equal_width"))
    p.add_argument("--train-fraction", type=float, help="chronological split fraction")
    p.add_argument("--top-k", type=int, help="select the k best-ranked inputs")
    p.add_argument("--threshold", type=float, help="select inputs with NMI >= threshold")
    p.add_argument("--inputs", help="comma-separated explicit inputs (bypasses selection)")
    p.add_argument("--order", type=int, help="na = nb = nc")
    p.add_argument("--delay", type=int, help="input delay in samples")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nmiarmax", description="NMI-guided ARMAX identification of thermal dynamics")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help=f"overrides ${LOG_ENV}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("nmi", help="dependency matrix and input ranking")
    _pipeline_flags(p)
    p.set_defaults(func=cmd_nmi)

    p = sub.add_parser("fit", help="select inputs and fit ARMAX")
    _pipeline_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="fit and score a model zoo")
    _pipeline_flags(p)
    p.add_argument("--zoo", help="comma-separated entries, e.g. ARMAX4,ARX4,SS6")
    p.add_argument("--serial", action="store_true", help="fit zoo entries one at a time")
    p.add_argument("--no-timing", action="store_true", help="omit wall-time fields from the JSON")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="free-run a saved model on an input CSV")
    p.add_argument("--model", required=True, help="model.json (or fit_report.json)")
    p.add_argument("--data", required=True, help="CSV holding the model's input columns")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("synth", help="generate a synthetic data set")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--spec", help="generator spec JSON (default: canonical ARMAX fixture)")
    g.add_argument("--surrogate", action="store_true", help="building-like sensor log")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-samples", type=int, default=10_000)
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--days", type=int, default=8)
    p.add_argument("--name", default="synth", help="file stem for the CSV and truth JSON")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="render JSON artifacts as text")
    p.add_argument("artifacts", nargs="+")
    p.add_argument("--out", help="also write report.txt here")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"nmiarmax: error: {exc}", file=sys.stderr)
        return 1
    level = (args.log_level or os.environ.get(LOG_ENV) or "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    if args.command == "synth" and args.seed is None and not args.spec:
        args.seed = 0
    try:
        return args.func(args)
    except NmiArmaxError as exc:
        print(f"nmiarmax: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        print(f"nmiarmax: error: {NumericalError(str(exc))}", file=sys.stderr)
        return NumericalError.exit_code
    except OSError as exc:
        print(f"nmiarmax: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
