"""Loading, splitting and standardizing multivariate sensor logs."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

ROLES = ("output", "candidate_input", "excluded")
MISSING_POLICIES = ("drop", "ffill")


@dataclass(frozen=True)
class ColumnRole:
    name: str
    role: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError(f"unknown role {self.role!r} for column {self.name!r}")


@dataclass(frozen=True, eq=False)
class TimeSeriesTable:
    """Uniformly sampled table of named real columns.

    ``values`` has shape ``(n_rows, n_columns)`` and is read-only.  Timestamps,
    when present, are metadata; modeling works on integer sample indices.
    """

    names: tuple[str, ...]
    values: np.ndarray
    sample_period: float = 1.0
    units: tuple[str, ...] = ()
    roles: tuple[ColumnRole, ...] = ()
    timestamps: tuple[str, ...] | None = None
    dropped_rows: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DataError(f"table values must be 2-D, got shape {values.shape}")
        names = tuple(self.names)
        if len(names) != values.shape[1]:
            raise DataError(f"{len(names)} names for {values.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DataError(f"duplicate column names in {names}")
        if values.shape[0] < 2:
            raise DataError(f"a table needs at least 2 rows, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise DataError("table contains NaN or infinite values")
        if not (self.sample_period > 0 and math.isfinite(self.sample_period)):
            raise DataError(f"sample_period must be positive, got {self.sample_period}")
        units = tuple(self.units) if self.units else ("",) * len(names)
        if len(units) != len(names):
            raise DataError("units must match columns")
        if self.timestamps is not None and len(self.timestamps) != values.shape[0]:
            raise DataError("timestamps must match rows")
        role_names = [r.name for r in self.roles]
        unknown = set(role_names) - set(names)
        if unknown:
            raise DataError(f"roles reference unknown columns {sorted(unknown)}")
        if self.roles and sum(r.role == "output" for r in self.roles) != 1:
            raise ConfigError("exactly one column must have role 'output'")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "roles", tuple(self.roles))
        if self.timestamps is not None:
            object.__setattr__(self, "timestamps", tuple(self.timestamps))

    @classmethod
    def from_columns(cls, columns: Mapping[str, Sequence[float]], **kwargs) -> TimeSeriesTable:
        names = list(columns)
        values = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
        return cls(names=tuple(names), values=values, **kwargs)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return self.n_rows

    def __contains__(self, name):
        return name in self.names

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise DataError(f"no column named {name!r}; have {list(self.names)}") from None

    def __getitem__(self, name: str) -> np.ndarray:
        return self.column(name)

    def columns(self, names: Sequence[str]) -> np.ndarray:
        return np.column_stack([self.column(n) for n in names]) if names else np.empty((self.n_rows, 0))

    @property
    def output_name(self) -> str | None:
        for r in self.roles:
            if r.role == "output":
                return r.name
        return None

    @property
    def candidate_names(self) -> list[str]:
        return [r.name for r in self.roles if r.role == "candidate_input"]

    def select(self, names: Sequence[str]) -> TimeSeriesTable:
        idx = [self.names.index(n) for n in names]
        roles = tuple(r for r in self.roles if r.name in names)
        if roles and not any(r.role == "output" for r in roles):
            roles = ()
        return replace(
            self,
            names=tuple(names),
            values=self.values[:, idx],
            units=tuple(self.units[i] for i in idx),
            roles=roles,
        )

    def slice_rows(self, start: int, stop: int) -> TimeSeriesTable:
        ts = self.timestamps[start:stop] if self.timestamps is not None else None
        return replace(self, values=self.values[start:stop], timestamps=ts, dropped_rows=0)

    def with_values(self, values: np.ndarray) -> TimeSeriesTable:
        return replace(self, values=values)

    def equals(self, other: TimeSeriesTable) -> bool:
        return (
            self.names == other.names
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
            and self.sample_period == other.sample_period
            and self.roles == other.roles
            and self.timestamps == other.timestamps
        )

    def to_csv(self, path, timestamp_column: str | None = None):
        header = list(self.names)
        if timestamp_column and self.timestamps is not None:
            header = [timestamp_column] + header
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i, row in enumerate(self.values):
                cells = [repr(float(v)) for v in row]
                if timestamp_column and self.timestamps is not None:
                    cells = [self.timestamps[i]] + cells
                w.writerow(cells)


def _roles_from_schema(schema) -> tuple[ColumnRole, ...]:
    if isinstance(schema, Mapping):
        return tuple(ColumnRole(str(k), str(v)) for k, v in schema.items())
    return tuple(schema)


def _parse_cell(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        return math.nan
    return v


def load_csv(
    path,
    schema,
    sample_period: float = 1.0,
    missing: str = "drop",
    timestamp_column: str | None = None,
    units: Mapping[str, str] | None = None,
) -> TimeSeriesTable:
    """Read a comma-separated file into a :class:`TimeSeriesTable`.

    ``schema`` maps column name to role (``output``, ``candidate_input`` or
    ``excluded``); only schema columns are kept, in schema order.  Cells that
    do not parse as finite reals are handled by ``missing``: ``"drop"``
    removes the row, ``"ffill"`` carries the previous valid value forward
    (leading invalid rows are still dropped).  Files written with an unnamed
    leading row-index column (one more field per row than header names) are
    accepted and the index is ignored.
    """
    if missing not in MISSING_POLICIES:
        raise ConfigError(f"missing-data policy must be one of {MISSING_POLICIES}, got {missing!r}")
    roles = _roles_from_schema(schema)
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]

    names = [r.name for r in roles]
    missing_cols = [n for n in names if n not in header]
    if missing_cols:
        raise DataError(f"{path}: columns {missing_cols} not in header {header}")
    if timestamp_column and timestamp_column not in header:
        raise DataError(f"{path}: timestamp column {timestamp_column!r} not in header")
    if sum(r.role == "output" for r in roles) != 1:
        raise ConfigError("schema must name exactly one output column")

    idx = [header.index(n) for n in names]
    ts_idx = header.index(timestamp_column) if timestamp_column else None
    raw = np.empty((len(rows), len(names)))
    stamps = []
    for i, row in enumerate(rows):
        offset = 1 if len(row) == len(header) + 1 else 0
        if len(row) - offset != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} fields, header has {len(header)}")
        raw[i] = [_parse_cell(row[j + offset]) for j in idx]
        if ts_idx is not None:
            stamps.append(row[ts_idx + offset].strip())

    bad = ~np.all(np.isfinite(raw), axis=1)
    keep = ~bad
    if missing == "ffill" and bad.any():
        raw = raw.copy()
        for j in range(raw.shape[1]):
            col = raw[:, j]
            last = math.nan
            for i in range(len(col)):
                if np.isfinite(col[i]):
                    last = col[i]
                else:
                    col[i] = last
        keep = np.all(np.isfinite(raw), axis=1)
    values = raw[keep]
    if values.shape[0] < 2:
        raise DataError(f"{path}: fewer than 2 valid rows after missing-data handling")
    timestamps = tuple(s for s, k in zip(stamps, keep) if k) if ts_idx is not None else None
    unit_tuple = tuple((units or {}).get(n, "") for n in names)
    return TimeSeriesTable(
        names=tuple(names),
        values=values,
        sample_period=float(sample_period),
        units=unit_tuple,
        roles=roles,
        timestamps=timestamps,
        dropped_rows=int((~keep).sum()),
    )


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/test split.

    ``mode="fraction"`` puts the first ``train_fraction`` of rows in train and
    the rest in test.  ``mode="index_ranges"`` takes half-open ``train`` and
    ``test`` intervals; ``test`` may hold several intervals, one per test set.
    """

    mode: str = "fraction"
    train_fraction: float = 0.8
    train: tuple[int, int] | None = None
    test: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    @classmethod
    def ranges(cls, train, *test) -> SplitSpec:
        return cls(mode="index_ranges", train=tuple(train), test=tuple(tuple(t) for t in test))

    @classmethod
    def from_dict(cls, d: Mapping) -> SplitSpec:
        mode = d.get("mode", "fraction")
        if mode == "fraction":
            return cls(mode=mode, train_fraction=float(d.get("train_fraction", 0.8)))
        test = d.get("test", [])
        if test and not isinstance(test[0], (list, tuple)):
            test = [test]
        return cls.ranges(d["train"], *test)

    def to_dict(self) -> dict:
        if self.mode == "fraction":
            return {"mode": "fraction", "train_fraction": self.train_fraction}
        return {"mode": "index_ranges", "train": list(self.train), "test": [list(t) for t in self.test]}

    def intervals(self, n_rows: int) -> tuple[tuple[int, int], list[tuple[int, int]]]:
        if self.mode == "fraction":
            if not 0.0 < self.train_fraction < 1.0:
                raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
            cut = int(round(self.train_fraction * n_rows))
            return (0, cut), [(cut, n_rows)]
        if self.mode != "index_ranges":
            raise ConfigError(f"unknown split mode {self.mode!r}")
        if self.train is None or not self.test:
            raise ConfigError("index_ranges split needs a train range and at least one test range")
        spans = [tuple(self.train)] + [tuple(t) for t in self.test]
        for a, b in spans:
            if not 0 <= a <= b <= n_rows:
                raise ConfigError(f"range [{a}, {b}) out of bounds for {n_rows} rows")
        ordered = sorted(spans)
        if ordered != spans or any(ordered[i][1] > ordered[i + 1][0] for i in range(len(ordered) - 1)):
            raise ConfigError(f"ranges must be chronological and non-overlapping: {spans}")
        return spans[0], spans[1:]


def split_tests(table: TimeSeriesTable, spec: SplitSpec) -> tuple[TimeSeriesTable, list[TimeSeriesTable]]:
    """Split into a training slice and one slice per test interval."""
    (a, b), tests = spec.intervals(table.n_rows)
    spans = [(a, b)] + tests
    for lo, hi in spans:
        if hi - lo < 2:
            raise DataError(f"split slice [{lo}, {hi}) has fewer than 2 rows")
    return table.slice_rows(a, b), [table.slice_rows(lo, hi) for lo, hi in tests]


def split(table: TimeSeriesTable, spec: SplitSpec) -> tuple[TimeSeriesTable, TimeSeriesTable]:
    train, tests = split_tests(table, spec)
    return train, tests[0]


@dataclass(frozen=True)
class StandardizeStats:
    names: tuple[str, ...]
    mean: tuple[float, ...]
    std: tuple[float, ...]
    zero_variance: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "mean": list(self.mean),
            "std": list(self.std),
            "zero_variance": list(self.zero_variance),
        }


def standardize(
    table: TimeSeriesTable, stats: StandardizeStats | None = None, ddof: int = 0
) -> tuple[TimeSeriesTable, StandardizeStats]:
    """Return ``(v - mean) / std`` per column, plus the statistics used.

    With ``stats=None`` the statistics come from ``table`` itself (population
    std by default, ``ddof=1`` for sample std); pass the returned stats when
    transforming test data.  Zero-variance columns pass through unchanged and
    are listed in ``stats.zero_variance``.
    """
    if stats is None:
        mean = table.values.mean(axis=0)
        std = table.values.std(axis=0, ddof=ddof)
        zero = tuple(n for n, s in zip(table.names, std) if not s > 0)
        stats = StandardizeStats(table.names, tuple(map(float, mean)), tuple(map(float, std)), zero)
    else:
        lacking = set(table.names) - set(stats.names)
        if lacking:
            raise DataError(f"standardization stats missing columns {sorted(lacking)}")
    out = table.values.copy()
    for j, name in enumerate(table.names):
        k = stats.names.index(name)
        if name in stats.zero_variance or not stats.std[k] > 0:
            continue
        out[:, j] = (out[:, j] - stats.mean[k]) / stats.std[k]
    return table.with_values(out), stats
