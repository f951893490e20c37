"""NMI-guided input selection followed by ARMAX inference, plus model comparison.

The selection stage ranks candidate inputs by their normalized mutual
information with the output on training data only; the inference stage fits
ARMAX on the chosen inputs and scores it on every test set.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from ._version import __version__
from .dataset import SplitSpec, TimeSeriesTable, load_csv, split_tests, standardize
from .errors import ConfigError, DataError, NmiArmaxError
from .infotheory import METRICS, STRATEGIES, DependencyMatrix, dependency_matrix, rank_inputs
from .linmodels import FitOptions, FitReport, TestScore, evaluate, finite_or_none, fit_armax, format_pct
from .statespace import SSOptions, evaluate_ss, fit_ss, warmup_length

DEFAULT_ZOO = ("ARMAX4", "SS1", "SS6", "SS15", "SS30", "RegARMAX4", "ARX4", "ARX10", "ARX30")


@dataclass(frozen=True)
class DatasetConfig:
    """Where the data lives and what each column is.

    Either ``path`` (one file, cut by the split spec) or ``train_path`` plus
    ``test_paths`` (separate files).  Relative paths resolve against
    ``base_dir``.
    """

    roles: Mapping[str, str]
    path: str | None = None
    train_path: str | None = None
    test_paths: tuple[str, ...] = ()
    sample_period: float = 1.0
    missing: str = "drop"
    timestamp_column: str | None = None
    base_dir: str = "."

    def resolve(self, p: str) -> str:
        return p if os.path.isabs(p) else os.path.normpath(os.path.join(self.base_dir, p))

    @property
    def output(self) -> str:
        outs = [k for k, v in self.roles.items() if v == "output"]
        if len(outs) != 1:
            raise ConfigError("dataset roles must name exactly one output column")
        return outs[0]

    @property
    def candidates(self) -> list[str]:
        return [k for k, v in self.roles.items() if v == "candidate_input"]

    def to_dict(self) -> dict:
        d = {
            "roles": dict(self.roles),
            "sample_period": self.sample_period,
            "missing": self.missing,
            "timestamp_column": self.timestamp_column,
        }
        if self.path is not None:
            d["path"] = self.path
        else:
            d["train_path"] = self.train_path
            d["test_paths"] = list(self.test_paths)
        return d


@dataclass(frozen=True)
class SelectionRule:
    rule: str = "top_k"
    k: int = 1
    tau: float = 0.0

    def __post_init__(self):
        if self.rule not in ("top_k", "threshold"):
            raise ConfigError(f"selection rule must be 'top_k' or 'threshold', got {self.rule!r}")
        if self.rule == "top_k" and self.k < 1:
            raise ConfigError("top_k needs k >= 1")

    def to_dict(self) -> dict:
        return {"rule": self.rule, "k": self.k} if self.rule == "top_k" else {"rule": self.rule, "tau": self.tau}


@dataclass(frozen=True)
class ZooEntry:
    """One model family/order in a comparison run."""

    family: str
    order: int
    label: str = ""

    def __post_init__(self):
        fam = self.family.upper()
        canon = {"ARMAX": "ARMAX", "ARX": "ARX", "REGARMAX": "RegARMAX", "SS": "SS"}
        if fam not in canon:
            raise ConfigError(f"unknown model family {self.family!r}")
        object.__setattr__(self, "family", canon[fam])
        if self.order < 1:
            raise ConfigError(f"model order must be >= 1, got {self.order}")
        if not self.label:
            object.__setattr__(self, "label", f"{canon[fam]}{self.order}")

    @classmethod
    def parse(cls, spec) -> ZooEntry:
        if isinstance(spec, ZooEntry):
            return spec
        if isinstance(spec, Mapping):
            return cls(spec["family"], int(spec["order"]), spec.get("label", ""))
        text = str(spec).strip()
        head = text.rstrip("0123456789")
        digits = text[len(head):]
        if not digits:
            raise ConfigError(f"zoo entry {text!r} needs an order, e.g. ARMAX4 or SS15")
        return cls(head, int(digits))

    def order_spec(self, fit: FitOptions) -> str:
        d = fit.delays
        if self.family == "SS":
            return f"n={self.order}"
        nc = 0 if self.family == "ARX" else self.order
        return f"na={self.order} nb={self.order} nc={nc} delay={d if isinstance(d, int) else list(d)}"


@dataclass(frozen=True)
class PipelineConfig:
    dataset: DatasetConfig
    split: SplitSpec | None = None
    standardize: bool = False
    n_bins: int | None = None
    strategy: str = "equal_frequency"
    metric: str = "NMI_sqrt"
    selection: SelectionRule = SelectionRule()
    inputs: tuple[str, ...] | None = None
    fit: FitOptions = FitOptions(detrend=True)
    ridge_lambda: float | str = "gcv"
    zoo: tuple[ZooEntry, ...] = tuple(ZooEntry.parse(z) for z in DEFAULT_ZOO)
    parallel: bool = True

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")
        roles = self.dataset.roles
        _ = self.dataset.output
        if self.inputs is not None:
            unknown = [n for n in self.inputs if n not in roles or roles[n] == "output"]
            if unknown:
                raise ConfigError(f"explicit inputs {unknown} are not non-output dataset columns")
            object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "zoo", tuple(ZooEntry.parse(z) for z in self.zoo))

    @classmethod
    def from_dict(cls, d: Mapping, base_dir: str = ".") -> PipelineConfig:
        known = {"dataset", "split", "standardize", "infotheory", "selection", "inputs", "fit", "ridge_lambda", "zoo", "parallel"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "dataset" not in d:
            raise ConfigError("config needs a 'dataset' section")
        ds = dict(d["dataset"])
        if "roles" not in ds:
            raise ConfigError("dataset section needs 'roles'")
        if "path" not in ds and "train_path" not in ds:
            raise ConfigError("dataset section needs 'path' or 'train_path'")
        dataset = DatasetConfig(
            roles=dict(ds["roles"]),
            path=ds.get("path"),
            train_path=ds.get("train_path"),
            test_paths=tuple(ds.get("test_paths", ())),
            sample_period=float(ds.get("sample_period", 1.0)),
            missing=ds.get("missing", "drop"),
            timestamp_column=ds.get("timestamp_column"),
            base_dir=base_dir,
        )
        info = d.get("infotheory", {})
        sel = d.get("selection", {})
        fit = dict(d.get("fit", {}))
        fit.setdefault("detrend", True)
        kwargs = dict(
            dataset=dataset,
            split=SplitSpec.from_dict(d["split"]) if "split" in d else None,
            standardize=bool(d.get("standardize", False)),
            n_bins=info.get("n_bins"),
            strategy=info.get("strategy", "equal_frequency"),
            metric=info.get("metric", "NMI_sqrt"),
            selection=SelectionRule(**sel),
            inputs=tuple(d["inputs"]) if d.get("inputs") is not None else None,
            fit=FitOptions.from_dict(fit),
            ridge_lambda=d.get("ridge_lambda", "gcv"),
            parallel=bool(d.get("parallel", True)),
        )
        if "zoo" in d:
            kwargs["zoo"] = tuple(d["zoo"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        d = {
            "dataset": self.dataset.to_dict(),
            "standardize": self.standardize,
            "infotheory": {"n_bins": self.n_bins, "strategy": self.strategy, "metric": self.metric},
            "selection": self.selection.to_dict(),
            "inputs": list(self.inputs) if self.inputs is not None else None,
            "fit": self.fit.to_dict(),
            "ridge_lambda": self.ridge_lambda,
            "zoo": [z.label for z in self.zoo],
            "parallel": self.parallel,
        }
        if self.split is not None:
            d["split"] = self.split.to_dict()
        return d


def load_config(path) -> PipelineConfig:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return PipelineConfig.from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)))


@dataclass(frozen=True, eq=False)
class Data:
    train: TimeSeriesTable
    tests: tuple[tuple[str, TimeSeriesTable], ...]
    stats: object = None


def load_data(config: PipelineConfig) -> Data:
    """Training table and labelled test tables, standardized if configured."""
    ds = config.dataset
    load = lambda p: load_csv(ds.resolve(p), ds.roles, ds.sample_period, ds.missing, ds.timestamp_column)
    if ds.path is not None:
        table = load(ds.path)
        train, tests = split_tests(table, config.split or SplitSpec())
    else:
        if not ds.test_paths:
            raise ConfigError("dataset with train_path needs at least one entry in test_paths")
        train = load(ds.train_path)
        tests = [load(p) for p in ds.test_paths]
    labelled = tuple((f"test{i + 1}", t) for i, t in enumerate(tests))
    return prepare_data(config, train, labelled)


def prepare_data(config: PipelineConfig, train: TimeSeriesTable, tests) -> Data:
    tests = tuple((lab, t) for lab, t in tests)
    if not config.standardize:
        return Data(train, tests)
    train_s, stats = standardize(train)
    return Data(train_s, tuple((lab, standardize(t, stats)[0]) for lab, t in tests), stats)


@dataclass(frozen=True, eq=False)
class SelectionReport:
    target: str
    candidates: tuple[str, ...]
    ranking: tuple[tuple[str, float], ...]
    selected: tuple[str, ...]
    rule: dict
    matrix: DependencyMatrix | None = None
    fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "kind": "SelectionReport",
            "version": __version__,
            "target": self.target,
            "candidates": list(self.candidates),
            "ranking": [{"name": n, "value": v} for n, v in self.ranking],
            "selected": list(self.selected),
            "rule": self.rule,
            "fallback": self.fallback,
            "matrix": self.matrix.to_dict() if self.matrix is not None else None,
        }


def apply_rule(ranking, rule: SelectionRule, degenerate=()) -> tuple[list[str], bool]:
    usable = [(n, v) for n, v in ranking if n not in degenerate]
    if not usable:
        raise DataError("every candidate input has zero entropy; nothing to select")
    if rule.rule == "top_k":
        return [n for n, _ in usable[: rule.k]], False
    chosen = [n for n, v in usable if v >= rule.tau]
    if not chosen and usable[0][1] > 0:
        return [usable[0][0]], True
    return chosen, False


def run_selection(config: PipelineConfig, data: Data | None = None) -> SelectionReport:
    """Rank candidates by dependency with the output on the training split."""
    target = config.dataset.output
    if config.inputs is not None:
        return SelectionReport(target, config.inputs, (), config.inputs, {"rule": "explicit"})
    data = data or load_data(config)
    train = data.train
    candidates = tuple(config.dataset.candidates)
    if not candidates:
        raise ConfigError("no candidate_input columns to select from")
    matrix = dependency_matrix(train, config.n_bins, config.strategy, config.metric, columns=(target, *candidates))
    ranking = rank_inputs(matrix, target, candidates)
    selected, fallback = apply_rule(ranking, config.selection, matrix.degenerate)
    return SelectionReport(
        target=target,
        candidates=candidates,
        ranking=tuple(ranking),
        selected=tuple(selected),
        rule=config.selection.to_dict(),
        matrix=matrix,
        fallback=fallback,
    )


def score_tests(model, tests, ss: bool = False) -> tuple[TestScore, ...]:
    scores = []
    for label, table in tests:
        free, one = (evaluate_ss if ss else evaluate)(model, table)
        skip = warmup_length(model) if ss else model.start_index
        scores.append(TestScore(label, free, one, table.n_rows - skip))
    return tuple(scores)


def run_inference(config: PipelineConfig, selection: SelectionReport, data: Data | None = None) -> FitReport:
    """ARMAX fit on the selected inputs, scored on every test set."""
    if not selection.selected:
        raise DataError("selection is empty; nothing to fit")
    data = data or load_data(config)
    report = fit_armax(data.train, config.fit, output=selection.target, inputs=list(selection.selected))
    return report.with_tests(score_tests(report.model, data.tests))


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    family: str
    order_spec: str
    train_fit: float | None
    test_fits: tuple[float, ...]
    test_fits_one_step: tuple[float, ...]
    wall_time: float
    error: str | None = None
    stable: bool | None = None


@dataclass(frozen=True, eq=False)
class ComparisonTable:
    inputs: tuple[str, ...]
    test_labels: tuple[str, ...]
    rows: tuple[ComparisonRow, ...]
    prediction_mode: str = "free_run"
    config: dict = field(default_factory=dict)

    def row(self, label: str) -> ComparisonRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def to_dict(self, timing: bool = True) -> dict:
        rows = []
        for r in self.rows:
            d = asdict(r)
            d["train_fit"] = finite_or_none(r.train_fit)
            d["test_fits"] = [finite_or_none(v) for v in r.test_fits]
            d["test_fits_one_step"] = [finite_or_none(v) for v in r.test_fits_one_step]
            if not timing:
                d.pop("wall_time")
            rows.append(d)
        return {
            "kind": "ComparisonTable",
            "version": __version__,
            "inputs": list(self.inputs),
            "test_labels": list(self.test_labels),
            "prediction_mode": self.prediction_mode,
            "rows": rows,
            "config": self.config,
        }

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["index", "method", "order", "train_fit"]
            head += [f"{l}_fit" for l in self.test_labels] + [f"{l}_one_step" for l in self.test_labels]
            w.writerow(head + ["stable", "wall_time", "error"])
            for i, r in enumerate(self.rows):
                tf = list(r.test_fits) or [""] * len(self.test_labels)
                to = list(r.test_fits_one_step) or [""] * len(self.test_labels)
                w.writerow([i, r.label, r.order_spec, "" if r.train_fit is None else r.train_fit, *tf, *to, "" if r.stable is None else int(r.stable), r.wall_time, r.error or ""])

    def format_text(self) -> str:
        """Data sets down, methods across, free-run fit in percent."""
        labels = [r.label for r in self.rows]
        width = max(12, *(len(l) + 2 for l in labels))
        lines = [f"{'data set':<12}" + "".join(l.rjust(width) for l in labels)]

        def cell(r, v):
            return ("error" if r.error else "-").rjust(width) if v is None else f"{format_pct(v)}%".rjust(width)

        lines.append(f"{'train':<12}" + "".join(cell(r, r.train_fit) for r in self.rows))
        for i, lab in enumerate(self.test_labels):
            lines.append(f"{lab:<12}" + "".join(cell(r, r.test_fits[i] if r.test_fits else None) for r in self.rows))
        unstable = [r.label for r in self.rows if r.stable is False]
        if unstable:
            lines += ["", f"unstable models (free-run fit may diverge): {', '.join(unstable)}"]
        errors = [f"  {r.label}: {r.error}" for r in self.rows if r.error]
        if errors:
            lines += ["", "errors:"] + errors
        return "\n".join(lines)


def fit_entry(entry: ZooEntry, config: PipelineConfig, data: Data, inputs: Sequence[str]) -> ComparisonRow:
    """Fit and score one zoo entry; failures become an annotated row."""
    target = config.dataset.output
    t0 = time.perf_counter()
    try:
        if entry.family == "SS":
            model, rep = fit_ss(
                data.train, entry.order, SSOptions(detrend=config.fit.detrend), output=target, inputs=inputs
            )
            scores = score_tests(model, data.tests, ss=True)
        else:
            n = entry.order
            nc = 0 if entry.family == "ARX" else n
            lam = config.ridge_lambda if entry.family == "RegARMAX" else 0.0
            opts = replace(config.fit, orders=(n, n, nc), ridge_lambda=lam)
            rep = fit_armax(data.train, opts, output=target, inputs=inputs, method=entry.label)
            scores = score_tests(rep.model, data.tests)
        err, stable = None, rep.stable
        train_fit = rep.train_fit_pct
        tf = tuple(s.free_run for s in scores)
        to = tuple(s.one_step for s in scores)
    except (NmiArmaxError, np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
        err = f"{type(exc).__name__}: {exc}"
        train_fit, tf, to, stable = None, (), (), None
    return ComparisonRow(
        entry.label, entry.family, entry.order_spec(config.fit), train_fit, tf, to, time.perf_counter() - t0, err, stable
    )


def compare_models(config: PipelineConfig, inputs: Sequence[str] | None = None, data: Data | None = None) -> ComparisonTable:
    """Fit every zoo entry on the same training data and score on the same test sets.

    Inputs default to the explicit config inputs, else the selection result.
    Entries run concurrently; the table keeps the configured order.
    """
    if not config.zoo:
        raise ConfigError("model zoo is empty")
    data = data or load_data(config)
    if inputs is None:
        inputs = run_selection(config, data).selected
    inputs = tuple(inputs)
    work = lambda entry: fit_entry(entry, config, data, inputs)
    if config.parallel and len(config.zoo) > 1:
        with ThreadPoolExecutor(max_workers=min(8, len(config.zoo))) as pool:
            rows = tuple(pool.map(work, config.zoo))
    else:
        rows = tuple(work(e) for e in config.zoo)
    return ComparisonTable(
        inputs=inputs,
        test_labels=tuple(lab for lab, _ in data.tests),
        rows=rows,
        config=config.to_dict(),
    )
