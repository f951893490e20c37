"""Symbolization, entropy, mutual information and NMI dependency matrices.

Continuous series are binned into symbol sequences; all information measures
are plug-in estimates from the empirical (joint) histogram.  Cells with zero
count contribute nothing to the sums.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._version import __version__
from .dataset import TimeSeriesTable
from .errors import ConfigError, DataError, DegenerateEntropyError

STRATEGIES = ("equal_frequency", "equal_width")
METRICS = ("MI", "NMI_sqrt")
MAX_DEFAULT_BINS = 16


@dataclass(frozen=True)
class Binning:
    """Reusable bin descriptor.

    ``edges`` are the strictly increasing interior boundaries; a value ``v``
    falls in bin ``searchsorted(edges, v, side="right")``.  ``lo``/``hi`` record
    the range of the data the binning was built from.
    """

    strategy: str
    edges: tuple[float, ...]
    lo: float
    hi: float

    @property
    def n_bins(self) -> int:
        return len(self.edges) + 1

    def apply(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        return np.searchsorted(np.asarray(self.edges), v, side="right").astype(np.int64)

    def to_dict(self) -> dict:
        return {"strategy": self.strategy, "edges": list(self.edges), "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True, eq=False)
class SymbolSequence:
    symbols: np.ndarray
    n_bins: int
    binning: Binning | None = None
    degenerate: bool = False

    def __post_init__(self):
        s = np.asarray(self.symbols)
        if s.ndim != 1 or s.size == 0:
            raise DataError("a symbol sequence must be a non-empty 1-D array")
        if s.dtype != np.int64:
            if not np.issubdtype(s.dtype, np.integer) and not np.all(s == np.round(s)):
                raise DataError("symbols must be integers")
            s = s.astype(np.int64)
        if s.min() < 0 or s.max() >= self.n_bins:
            raise DataError(f"symbols must lie in [0, {self.n_bins})")
        s.setflags(write=False)
        object.__setattr__(self, "symbols", s)

    @classmethod
    def of(cls, symbols) -> SymbolSequence:
        """Wrap a raw integer sequence, sizing the alphabet from its maximum."""
        s = np.asarray(symbols, dtype=np.int64)
        return cls(s, int(s.max()) + 1 if s.size else 1)

    def __len__(self):
        return self.symbols.size


@dataclass(frozen=True, eq=False)
class JointHistogram:
    counts: np.ndarray
    total: int

    @property
    def p_joint(self) -> np.ndarray:
        return self.counts / self.total


def default_n_bins(n: int) -> int:
    return int(min(MAX_DEFAULT_BINS, max(2, math.floor(math.sqrt(n) / 2))))


def _categorical(v: np.ndarray) -> SymbolSequence:
    levels = np.unique(v)
    edges = tuple(float(x) for x in (levels[:-1] + levels[1:]) / 2)
    b = Binning("categorical", edges, float(levels[0]), float(levels[-1]))
    return SymbolSequence(b.apply(v), b.n_bins, b, degenerate=levels.size == 1)


def symbolize(values, n_bins: int | None = None, strategy: str = "equal_frequency") -> SymbolSequence:
    """Bin a real series into symbols ``0 .. n_bins-1``.

    ``equal_width`` splits ``[min, max]`` into equal intervals with the
    maximum in the top bin.  ``equal_frequency`` puts edges at empirical
    quantiles; identical values always share a bin, so heavily tied data may
    end up with fewer than ``n_bins`` occupied bins.  Under
    ``equal_frequency``, a series with at most ``n_bins`` distinct values
    (e.g. a 0/1 occupancy flag) is coded as-is, one symbol per level.

    A constant series gives a single-symbol sequence with ``degenerate=True``.
    """
    v = np.asarray(values, dtype=float).ravel()
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown binning strategy {strategy!r}; use one of {STRATEGIES}")
    if v.size == 0:
        raise DataError("cannot symbolize an empty series")
    if not np.all(np.isfinite(v)):
        raise DataError("cannot symbolize non-finite values")
    if n_bins is None:
        n_bins = default_n_bins(v.size)
    if n_bins < 2:
        raise ConfigError(f"n_bins must be at least 2, got {n_bins}")
    lo, hi = float(v.min()), float(v.max())

    if lo == hi:
        b = Binning(strategy, (), lo, hi)
        return SymbolSequence(np.zeros(v.size, dtype=np.int64), n_bins, b, degenerate=True)

    if strategy == "equal_width":
        inner = lo + (hi - lo) * np.arange(1, n_bins) / n_bins
        b = Binning(strategy, tuple(float(e) for e in inner), lo, hi)
        return SymbolSequence(b.apply(v), n_bins, b)

    if np.unique(v).size <= n_bins:
        return _categorical(v)
    ordered = np.sort(v, kind="stable")
    # first sorted position of bin k is ceil(k*N/n_bins)
    starts = -((-np.arange(1, n_bins) * v.size) // n_bins)
    inner = np.unique(ordered[starts])
    inner = inner[inner > lo]
    b = Binning(strategy, tuple(float(e) for e in inner), lo, hi)
    return SymbolSequence(b.apply(v), n_bins, b)


def _as_symbols(s) -> SymbolSequence:
    return s if isinstance(s, SymbolSequence) else SymbolSequence.of(s)


def _log(x, base):
    return np.log(x) / math.log(base)


def entropy(s, base: float = 2.0) -> float:
    """Plug-in Shannon entropy (bits by default)."""
    s = _as_symbols(s)
    # symbols are read-only, so the value can be cached on the sequence
    cache = s.__dict__.setdefault("_entropy", {})
    if base not in cache:
        counts = np.bincount(s.symbols)
        counts = counts[counts > 0]
        n = s.symbols.size
        cache[base] = max(-math.fsum((counts / n * _log(counts / n, base)).tolist()), 0.0)
    return cache[base]


def joint_histogram(a, b) -> JointHistogram:
    a, b = _as_symbols(a), _as_symbols(b)
    if len(a) != len(b):
        raise DataError(f"sequence lengths differ: {len(a)} vs {len(b)}")
    nb = b.n_bins
    flat = np.bincount(a.symbols * nb + b.symbols, minlength=a.n_bins * nb)
    return JointHistogram(flat.reshape(a.n_bins, nb), int(len(a)))


def mutual_information(a, b, base: float = 2.0) -> float:
    """Plug-in mutual information between two equal-length symbol sequences."""
    hist = joint_histogram(a, b)
    c = hist.counts.astype(float)
    n = float(hist.total)
    cu = c.sum(axis=1)
    cv = c.sum(axis=0)
    i, j = np.nonzero(c)
    cij = c[i, j]
    # fsum is order-independent, so swapping a and b gives the same bits
    mi = math.fsum((cij / n * _log(cij * n / (cu[i] * cv[j]), base)).tolist())
    return mi if mi > 0.0 else 0.0


def nmi_sqrt(a, b, base: float = 2.0) -> float:
    """Mutual information normalized by the geometric mean of the entropies.

    Raises :class:`DegenerateEntropyError` when either side has zero entropy.
    """
    a, b = _as_symbols(a), _as_symbols(b)
    ha, hb = entropy(a, base), entropy(b, base)
    if ha <= 0.0 or hb <= 0.0:
        raise DegenerateEntropyError("NMI undefined: a sequence has zero entropy")
    value = mutual_information(a, b, base) / math.sqrt(ha * hb)
    return min(max(value, 0.0), 1.0)


@dataclass(frozen=True, eq=False)
class DependencyMatrix:
    """Pairwise dependency scores between table columns.

    The diagonal is 0 by convention: only relations between distinct
    variables are of interest, even though ``I(U;U) = H(U)``.
    ``degenerate`` lists columns with zero entropy; their NMI cells are 0.
    """

    labels: tuple[str, ...]
    values: np.ndarray
    metric: str
    degenerate: tuple[str, ...] = ()
    n_bins: int | None = None
    strategy: str | None = None
    bins_used: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "degenerate", tuple(self.degenerate))

    def value(self, row: str, col: str) -> float:
        return float(self.values[self.labels.index(row), self.labels.index(col)])

    def row(self, label: str) -> dict[str, float]:
        i = self.labels.index(label)
        return {lab: float(self.values[i, j]) for j, lab in enumerate(self.labels)}

    def to_dict(self) -> dict:
        return {
            "kind": "DependencyMatrix",
            "version": __version__,
            "metric": self.metric,
            "labels": list(self.labels),
            "values": self.values.tolist(),
            "degenerate": list(self.degenerate),
            "n_bins": self.n_bins,
            "strategy": self.strategy,
            "bins_used": dict(self.bins_used),
        }

    @classmethod
    def from_dict(cls, d) -> DependencyMatrix:
        return cls(
            labels=tuple(d["labels"]),
            values=np.asarray(d["values"], dtype=float),
            metric=d["metric"],
            degenerate=tuple(d.get("degenerate", ())),
            n_bins=d.get("n_bins"),
            strategy=d.get("strategy"),
            bins_used=dict(d.get("bins_used", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label"] + list(self.labels))
            for lab, row in zip(self.labels, self.values):
                w.writerow([lab] + [repr(float(x)) for x in row])

    def format_grid(self, digits: int = 3) -> str:
        width = max(max(len(l) for l in self.labels), digits + 3)
        head = " " * width + " " + " ".join(l.rjust(width) for l in self.labels)
        lines = [head]
        for lab, row in zip(self.labels, self.values):
            cells = " ".join(f"{x:.{digits}f}".rjust(width) for x in row)
            lines.append(f"{lab.rjust(width)} {cells}")
        return "\n".join(lines)


def dependency_matrix(
    table: TimeSeriesTable,
    n_bins: int | None = None,
    strategy: str = "equal_frequency",
    metric: str = "NMI_sqrt",
    columns: Sequence[str] | None = None,
) -> DependencyMatrix:
    """Score every column pair of ``table`` with MI or square-root NMI."""
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; use one of {METRICS}")
    labels = tuple(columns) if columns is not None else table.names
    if len(labels) < 2:
        raise DataError("a dependency matrix needs at least 2 columns")
    if n_bins is None:
        n_bins = default_n_bins(table.n_rows)
    if table.n_rows < n_bins:
        raise DataError(f"need at least n_bins={n_bins} rows, have {table.n_rows}")

    seqs = [symbolize(table.column(l), n_bins, strategy) for l in labels]
    ent = [entropy(s) for s in seqs]
    degenerate = tuple(l for l, h in zip(labels, ent) if h <= 0.0)
    k = len(labels)
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            mi = mutual_information(seqs[i], seqs[j])
            if metric == "MI":
                val = mi
            elif ent[i] <= 0.0 or ent[j] <= 0.0:
                val = 0.0
            else:
                val = min(max(mi / math.sqrt(ent[i] * ent[j]), 0.0), 1.0)
            out[i, j] = out[j, i] = val
    bins_used = {l: int(np.unique(s.symbols).size) for l, s in zip(labels, seqs)}
    return DependencyMatrix(labels, out, metric, degenerate, n_bins, strategy, bins_used)


def rank_inputs(
    matrix: DependencyMatrix, target: str, candidates: Sequence[str] | None = None
) -> list[tuple[str, float]]:
    """Candidates ordered by their score against ``target``, highest first.

    Ties keep the matrix column order.
    """
    if target not in matrix.labels:
        raise DataError(f"unknown target {target!r}; labels are {list(matrix.labels)}")
    row = matrix.row(target)
    names = [l for l in matrix.labels if l != target] if candidates is None else list(candidates)
    unknown = [n for n in names if n not in row]
    if unknown:
        raise DataError(f"unknown candidates {unknown}")
    return sorted(((n, row[n]) for n in names if n != target), key=lambda t: -t[1])
