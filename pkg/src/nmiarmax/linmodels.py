"""ARX / ARMAX polynomial models: estimation, simulation and scoring.

A model relates output ``y`` to inputs ``x_i`` through backshift polynomials::

    y_t + a_1 y_{t-1} + ... + a_na y_{t-na}
        = sum_i (b_i0 x_i,t-d_i + ... + b_i,nb x_i,t-d_i-nb)
          + e_t + c_1 e_{t-1} + ... + c_nc e_{t-nc}

``a`` and ``c`` carry implicit leading ones; every input polynomial ``b_i``
has a free leading coefficient.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize
from scipy.signal import lfilter, lfiltic

from ._version import __version__
from .dataset import TimeSeriesTable
from .errors import ConfigError, DataError, DivergenceError, RankDeficientError

MIN_RELAXATION = 0.25
GCV_GRID = tuple(10.0 ** k for k in np.arange(-4.0, 2.0 + 1e-9, 0.5))


@dataclass(frozen=True, eq=False)
class PolyModel:
    a: np.ndarray
    b: tuple[np.ndarray, ...]
    c: np.ndarray = field(default_factory=lambda: np.zeros(0))
    delays: tuple[int, ...] = ()
    noise_variance: float = 0.0
    input_names: tuple[str, ...] = ()
    output_name: str = "y"
    # operating point: the model acts on deviations from these levels
    output_offset: float = 0.0
    input_offsets: tuple[float, ...] = ()

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        c = np.array(self.c, dtype=float).ravel()
        b = tuple(np.array(bi, dtype=float).ravel() for bi in self.b)
        m = len(b)
        delays = tuple(int(d) for d in self.delays) if self.delays else (0,) * m
        names = tuple(self.input_names) if self.input_names else tuple(f"u{i}" for i in range(m))
        offsets = tuple(float(o) for o in self.input_offsets) if self.input_offsets else (0.0,) * m
        if not (len(delays) == len(names) == len(offsets) == m):
            raise ConfigError("b, delays, input_names and input_offsets must have one entry per input")
        if any(d < 0 for d in delays):
            raise ConfigError(f"delays must be nonnegative, got {delays}")
        if any(bi.size == 0 for bi in b):
            raise ConfigError("each input polynomial needs at least one coefficient")
        if not self.noise_variance >= 0:
            raise ConfigError("noise_variance must be nonnegative")
        for arr in (a, c, *b):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "input_names", names)
        object.__setattr__(self, "input_offsets", offsets)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))

    @property
    def n_inputs(self) -> int:
        return len(self.b)

    @property
    def na(self) -> int:
        return self.a.size

    @property
    def nb(self) -> tuple[int, ...]:
        return tuple(bi.size - 1 for bi in self.b)

    @property
    def nc(self) -> int:
        return self.c.size

    @property
    def start_index(self) -> int:
        """First sample whose regressor needs no pre-sample data."""
        lags = [d + n for d, n in zip(self.delays, self.nb)]
        return max([self.na] + lags)

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.a, *self.b, self.c])

    def to_dict(self) -> dict:
        return {
            "kind": "PolyModel",
            "version": __version__,
            "output_name": self.output_name,
            "input_names": list(self.input_names),
            "orders": {"na": self.na, "nb": list(self.nb), "nc": self.nc},
            "delays": list(self.delays),
            "a": self.a.tolist(),
            "b": [bi.tolist() for bi in self.b],
            "c": self.c.tolist(),
            "noise_variance": self.noise_variance,
            "output_offset": self.output_offset,
            "input_offsets": list(self.input_offsets),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> PolyModel:
        if d.get("kind", "PolyModel") != "PolyModel":
            raise DataError(f"not a PolyModel document: kind={d.get('kind')!r}")
        return cls(
            a=d["a"],
            b=tuple(d["b"]),
            c=d.get("c", []),
            delays=tuple(d.get("delays", ())),
            noise_variance=d.get("noise_variance", 0.0),
            input_names=tuple(d.get("input_names", ())),
            output_name=d.get("output_name", "y"),
            output_offset=d.get("output_offset", 0.0),
            input_offsets=tuple(d.get("input_offsets", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> PolyModel:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class FitOptions:
    """Estimation settings.

    ``orders`` is ``(na, nb, nc)`` with ``nb`` shared by all inputs (each
    input polynomial then has ``nb + 1`` coefficients).  ``delays`` is one
    int for all inputs or one per input.  ``ridge_lambda`` is a fixed
    penalty, 0 for none, or ``"gcv"`` to pick it by generalized
    cross-validation over ``GCV_GRID``.  ``detrend`` removes training means
    and stores them as the model's operating point.
    """

    orders: tuple[int, int, int] = (4, 4, 4)
    delays: int | tuple[int, ...] = 1
    max_els_iterations: int = 200
    convergence_tol: float = 1e-6
    ridge_lambda: float | str = 0.0
    detrend: bool = False
    divergence_bound: float = 1e6
    pem_refine: bool = False

    def __post_init__(self):
        orders = tuple(int(o) for o in self.orders)
        if len(orders) != 3 or min(orders) < 0:
            raise ConfigError(f"orders must be three nonnegative ints, got {self.orders}")
        object.__setattr__(self, "orders", orders)
        if not self.convergence_tol > 0:
            raise ConfigError("convergence_tol must be positive")
        if self.max_els_iterations < 0:
            raise ConfigError("max_els_iterations must be nonnegative")
        lam = self.ridge_lambda
        if isinstance(lam, str):
            if lam != "gcv":
                raise ConfigError(f"ridge_lambda must be a number or 'gcv', got {lam!r}")
        elif not lam >= 0:
            raise ConfigError("ridge_lambda must be nonnegative")
        d = self.delays
        if not isinstance(d, int):
            object.__setattr__(self, "delays", tuple(int(x) for x in d))

    def delays_for(self, n_inputs: int) -> tuple[int, ...]:
        if isinstance(self.delays, int):
            return (self.delays,) * n_inputs
        if len(self.delays) != n_inputs:
            raise ConfigError(f"{len(self.delays)} delays given for {n_inputs} inputs")
        return self.delays

    def to_dict(self) -> dict:
        d = asdict(self)
        d["orders"] = list(self.orders)
        d["delays"] = self.delays if isinstance(self.delays, int) else list(self.delays)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> FitOptions:
        d = dict(d)
        if "orders" in d:
            d["orders"] = tuple(d["orders"])
        return cls(**d)


@dataclass(frozen=True)
class TestScore:
    label: str
    free_run: float
    one_step: float
    n_scored: int


@dataclass(frozen=True, eq=False)
class FitReport:
    """Outcome of one estimation run.

    Fit percentages are free-run unless stated otherwise; they are at most
    100 and may be negative.  ``test_fit_pct`` is the free-run fit on the
    first test set; ``test_fits`` holds every test set in both modes.
    """

    model: object
    method: str
    iterations_used: int
    converged: bool
    residual_variance: float
    train_fit_pct: float
    train_fit_one_step: float | None = None
    test_fits: tuple[TestScore, ...] = ()
    prediction_mode: str = "free_run"
    ridge_lambda: float = 0.0
    options: dict = field(default_factory=dict)

    @property
    def test_fit_pct(self) -> float | None:
        return self.test_fits[0].free_run if self.test_fits else None

    @property
    def stable(self) -> bool:
        if isinstance(self.model, PolyModel):
            return check_stability(self.model).stable
        return bool(self.model.stable)

    def with_tests(self, scores: Sequence[TestScore]) -> FitReport:
        return replace(self, test_fits=tuple(scores))

    def to_dict(self) -> dict:
        return {
            "kind": "FitReport",
            "version": __version__,
            "method": self.method,
            "model": self.model.to_dict(),
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "stable": self.stable,
            "residual_variance": self.residual_variance,
            "train_fit_pct": finite_or_none(self.train_fit_pct),
            "train_fit_one_step": finite_or_none(self.train_fit_one_step),
            "test_fit_pct": finite_or_none(self.test_fit_pct),
            "test_fits": [{k: finite_or_none(v) for k, v in asdict(s).items()} for s in self.test_fits],
            "prediction_mode": self.prediction_mode,
            "ridge_lambda": self.ridge_lambda,
            "options": self.options,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def format_text(self) -> str:
        lines = [
            f"method            {self.method}",
            f"output            {self.model.output_name}",
            f"inputs            {', '.join(self.model.input_names) or '-'}",
            f"iterations        {self.iterations_used} ({'converged' if self.converged else 'not converged'})",
            f"stable            {'yes' if self.stable else 'no'}",
            f"residual variance {self.residual_variance:.6g}",
            f"ridge lambda      {self.ridge_lambda:.6g}",
            "",
            f"{'data set':<16}{'free-run fit %':>16}{'one-step fit %':>16}",
            f"{'train':<16}{_fmt(self.train_fit_pct):>16}{_fmt(self.train_fit_one_step):>16}",
        ]
        for s in self.test_fits:
            lines.append(f"{s.label:<16}{_fmt(s.free_run):>16}{_fmt(s.one_step):>16}")
        return "\n".join(lines)


def _fmt(v):
    return "-" if v is None else format_pct(v)


def format_pct(v: float) -> str:
    """Two decimals, switching to exponent form for diverged simulations."""
    return f"{v:.2f}" if abs(v) < 1e6 or not math.isfinite(v) else f"{v:.2e}"


def finite_or_none(v):
    """Map NaN and infinities to None so reports stay strict JSON."""
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


@dataclass(frozen=True)
class Stability:
    stable: bool
    magnitudes: tuple[float, ...]


# -- regressors and least squares ---------------------------------------------


def _regressors(y, x, na, nb, delays, start):
    """Columns ``[-y lags, x_i lags ...]`` for rows ``start .. N-1``."""
    n = y.size
    rows = n - start
    cols = [-y[start - k : n - k] for k in range(1, na + 1)]
    for i, d in enumerate(delays):
        for j in range(nb[i] + 1):
            lag = d + j
            cols.append(x[start - lag : n - lag, i])
    if not cols:
        return np.empty((rows, 0))
    return np.column_stack(cols)


def _lag_matrix(e, nc, start):
    """Columns ``e_{t-1} .. e_{t-nc}`` for rows ``start ..``; pre-sample e is 0."""
    n = e.size
    out = np.zeros((n - start, nc))
    for k in range(1, nc + 1):
        out[:, k - 1] = e[start - k : n - k]
    return out


def _table_arrays(table, output, inputs):
    y = np.asarray(table.column(output), dtype=float)
    x = table.columns(inputs) if inputs else np.empty((table.n_rows, 0))
    return y, x


def build_regressors(
    table: TimeSeriesTable,
    output: str,
    inputs: Sequence[str],
    orders: tuple[int, int],
    delays: int | Sequence[int],
) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares regressor matrix and target for an ARX structure.

    ``orders`` is ``(na, nb)``.  Row ``t`` holds
    ``[-y_{t-1} .. -y_{t-na}, x_{t-d} .. x_{t-d-nb} for each input]`` and the
    target is ``y_t``; rows whose lags would reach before the first sample are
    left out.
    """
    na, nb = orders[0], orders[1]
    delays = (delays,) * len(inputs) if isinstance(delays, int) else tuple(delays)
    y, x = _table_arrays(table, output, inputs)
    nbs = (nb,) * len(inputs)
    start = max([na] + [d + nb for d in delays])
    if table.n_rows <= start:
        raise DataError(f"need more than {start} rows for these orders and delays, have {table.n_rows}")
    return _regressors(y, x, na, nbs, delays, start), y[start:]


def _solve(phi, target, lam):
    """Least squares by orthogonal decomposition, optionally ridge-penalized."""
    p = phi.shape[1]
    if p == 0:
        return np.zeros(0)
    if lam > 0:
        aug = np.vstack([phi, math.sqrt(lam) * np.eye(p)])
        rhs = np.concatenate([target, np.zeros(p)])
        theta, *_ = scipy.linalg.lstsq(aug, rhs, lapack_driver="gelsy")
        return theta
    norms = np.linalg.norm(phi, axis=0)
    if np.any(norms == 0):
        raise RankDeficientError("regressor matrix has an all-zero column; choose different inputs or set ridge_lambda > 0")
    q, r, perm = scipy.linalg.qr(phi / norms, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag[-1] <= diag[0] * max(phi.shape) * np.finfo(float).eps * 10:
        raise RankDeficientError(
            f"regressor matrix is rank deficient ({p} columns); inputs may be collinear, "
            "reduce orders or set ridge_lambda > 0"
        )
    z = scipy.linalg.solve_triangular(r, q.T @ target)
    theta = np.empty(p)
    theta[perm] = z
    return theta / norms


def gcv_lambda(phi: np.ndarray, target: np.ndarray, grid: Sequence[float] = GCV_GRID) -> tuple[float, np.ndarray]:
    """Ridge penalty minimizing the generalized cross-validation score."""
    u, s, vt = np.linalg.svd(phi, full_matrices=False)
    uty = u.T @ target
    n = target.size
    resid_out = float(target @ target - uty @ uty)
    best = None
    for lam in grid:
        f = s**2 / (s**2 + lam)
        rss = float(np.sum(((1 - f) * uty) ** 2)) + max(resid_out, 0.0)
        df = float(f.sum())
        score = n * rss / (n - df) ** 2
        if best is None or score < best[0]:
            best = (score, lam)
    lam = best[1]
    theta = vt.T @ (s / (s**2 + lam) * uty)
    return lam, theta


def _reflect_unstable(c):
    """Mirror MA roots outside the unit circle to keep residual filtering stable."""
    if c.size == 0:
        return c
    roots = np.roots(np.concatenate([[1.0], c]))
    mags = np.abs(roots)
    if np.all(mags < 1.0):
        return c
    roots = np.where(mags >= 1.0, 1.0 / np.conj(roots), roots)
    roots = np.where(np.abs(roots) >= 1.0, 0.99 * roots, roots)
    return np.real(np.poly(roots))[1:]


# -- estimation ---------------------------------------------------------------


def _resolve_io(table, output, inputs):
    output = output or table.output_name
    if output is None:
        raise ConfigError("no output column given and the table has no output role")
    if inputs is None:
        inputs = table.candidate_names
    inputs = list(inputs)
    for n in [output, *inputs]:
        table.column(n)
    return output, inputs


def _center(y, x, detrend):
    if not detrend:
        return y, x, 0.0, (0.0,) * x.shape[1]
    y0 = float(y.mean())
    x0 = x.mean(axis=0) if x.shape[1] else np.zeros(0)
    return y - y0, x - x0, y0, tuple(float(v) for v in x0)


def _split_theta(theta, na, nb, nc):
    a = theta[:na]
    pos = na
    b = []
    for n in nb:
        b.append(theta[pos : pos + n + 1])
        pos += n + 1
    c = theta[pos : pos + nc]
    return a, tuple(b), c


def _residuals(y, phi_arx, theta, nx, nc, start):
    """Prediction errors of the ARMAX predictor, filtered through 1/C."""
    n = y.size
    v = y[start:] - phi_arx @ theta[:nx]
    e = np.zeros(n)
    c = theta[nx : nx + nc]
    e[start:] = lfilter([1.0], np.concatenate([[1.0], c]), v) if nc else v
    return e


def fit_arx(
    train: TimeSeriesTable,
    opts: FitOptions = FitOptions(),
    output: str | None = None,
    inputs: Sequence[str] | None = None,
) -> FitReport:
    """Least-squares ARX fit (the MA order in ``opts`` is ignored)."""
    na, nb, _ = opts.orders
    return fit_armax(train, replace(opts, orders=(na, nb, 0)), output, inputs, method="ARX")


def fit_armax(
    train: TimeSeriesTable,
    opts: FitOptions = FitOptions(),
    output: str | None = None,
    inputs: Sequence[str] | None = None,
    method: str | None = None,
) -> FitReport:
    """Extended least-squares ARMAX fit.

    Starts from the ARX solution, then alternates residual reconstruction
    with a least-squares solve on the regressors augmented by lagged
    residuals, until the largest parameter change of a full update drops
    below ``opts.convergence_tol`` or ``opts.max_els_iterations`` is reached.
    Updates are halved (down to a quarter step) while the step size fails to
    shrink, which breaks the two-cycles plain extended least squares can
    fall into.  Without convergence the iterate with the smallest residual
    variance is kept.  With ``nc = 0`` this is exactly the ARX fit.
    """
    output, inputs = _resolve_io(train, output, inputs)
    na, nb_shared, nc = opts.orders
    m = len(inputs)
    delays = opts.delays_for(m)
    nb = (nb_shared,) * m
    y_raw, x_raw = _table_arrays(train, output, inputs)
    y, x, y0, x0 = _center(y_raw, x_raw, opts.detrend)
    start = max([na] + [d + n for d, n in zip(delays, nb)])
    nx = na + sum(n + 1 for n in nb)
    if y.size - start < nx + nc + 1:
        raise DataError(f"too few rows ({y.size}) for {nx + nc} parameters with start index {start}")

    phi_arx = _regressors(y, x, na, nb, delays, start)
    target = y[start:]
    if opts.ridge_lambda == "gcv":
        lam, _ = gcv_lambda(phi_arx, target)
    else:
        lam = float(opts.ridge_lambda)
    theta = np.concatenate([_solve(phi_arx, target, lam), np.zeros(nc)])

    iterations, converged = 0, nc == 0
    if nc:
        relax, prev_step = 1.0, math.inf
        best = (math.inf, theta)
        for it in range(1, opts.max_els_iterations + 1):
            e = _residuals(y, phi_arx, theta, nx, nc, start)
            cost = float(np.mean(e[start:] ** 2))
            if cost < best[0]:
                best = (cost, theta)
            phi = np.hstack([phi_arx, _lag_matrix(e, nc, start)])
            full = _solve(phi, target, lam)
            full[nx:] = _reflect_unstable(full[nx:])
            if not np.all(np.isfinite(full)) or np.linalg.norm(full) > opts.divergence_bound:
                raise DivergenceError(
                    f"extended least squares diverged at iteration {it}; last stable parameters {theta.tolist()}",
                    last_stable=theta,
                )
            step = float(np.max(np.abs(full - theta)))
            # damp limit cycles: shrink the update whenever the step stops decreasing
            if step >= prev_step and relax > MIN_RELAXATION:
                relax /= 2.0
            prev_step = step
            theta, iterations = theta + relax * (full - theta), it
            theta[nx:] = _reflect_unstable(theta[nx:])
            if step < opts.convergence_tol:
                converged = True
                break
        if not converged:
            e = _residuals(y, phi_arx, theta, nx, nc, start)
            if float(np.mean(e[start:] ** 2)) > best[0]:
                theta = best[1]

    if opts.pem_refine and nc:
        theta = _pem_refine(y, phi_arx, theta, nx, nc, start)

    e = _residuals(y, phi_arx, theta, nx, nc, start)[start:]
    a, b, c = _split_theta(theta, na, nb, nc)
    model = PolyModel(
        a=a,
        b=b,
        c=c,
        delays=delays,
        noise_variance=float(np.mean(e**2)),
        input_names=tuple(inputs),
        output_name=output,
        output_offset=y0,
        input_offsets=x0,
    )
    free, one = evaluate(model, train)
    if method is None:
        method = "RegARMAX" if lam > 0 else ("ARMAX" if nc else "ARX")
    return FitReport(
        model=model,
        method=method,
        iterations_used=iterations,
        converged=converged,
        residual_variance=model.noise_variance,
        train_fit_pct=free,
        train_fit_one_step=one,
        ridge_lambda=lam,
        options=opts.to_dict(),
    )


def _pem_refine(y, phi_arx, theta, nx, nc, start):
    """Gauss-Newton polish of the one-step prediction error."""

    def resid(th):
        th = th.copy()
        th[nx:] = _reflect_unstable(th[nx:])
        return _residuals(y, phi_arx, th, nx, nc, start)[start:]

    sol = scipy.optimize.least_squares(resid, theta, method="lm", xtol=1e-12, ftol=1e-12)
    out = sol.x.copy()
    out[nx:] = _reflect_unstable(out[nx:])
    return out


def els_step(train: TimeSeriesTable, model: PolyModel, ridge_lambda: float = 0.0) -> PolyModel:
    """One extended least-squares update starting from ``model``."""
    y, x = _table_arrays(train, model.output_name, model.input_names)
    y = y - model.output_offset
    x = x - np.asarray(model.input_offsets)
    start = model.start_index
    nx = model.na + sum(n + 1 for n in model.nb)
    phi_arx = _regressors(y, x, model.na, model.nb, model.delays, start)
    e = _residuals(y, phi_arx, model.theta, nx, model.nc, start)
    phi = np.hstack([phi_arx, _lag_matrix(e, model.nc, start)])
    new = _solve(phi, y[start:], ridge_lambda)
    new[nx:] = _reflect_unstable(new[nx:])
    a, b, c = _split_theta(new, model.na, model.nb, model.nc)
    return replace(model, a=a, b=b, c=c)


# -- simulation and prediction --------------------------------------------------


def _input_matrix(model, inputs):
    if isinstance(inputs, TimeSeriesTable):
        x = inputs.columns(model.input_names)
    elif isinstance(inputs, Mapping):
        missing = [n for n in model.input_names if n not in inputs]
        if missing:
            raise DataError(f"inputs missing columns {missing}")
        x = np.column_stack([np.asarray(inputs[n], dtype=float) for n in model.input_names]) if model.n_inputs else None
    else:
        x = np.asarray(inputs, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        elif model.n_inputs and x.shape[0] == model.n_inputs and x.shape[1] != model.n_inputs:
            x = x.T
    if x is None:
        raise DataError("cannot infer the sample count of a model without inputs; pass an (N, 0) array")
    if x.shape[1] != model.n_inputs:
        raise DataError(f"model has {model.n_inputs} inputs, got {x.shape[1]} columns")
    return x


def _forced_response(model, x):
    """Sum over inputs of the delayed input polynomials applied to ``x``."""
    n = x.shape[0]
    w = np.zeros(n)
    for i, (d, bi) in enumerate(zip(model.delays, model.b)):
        g = np.concatenate([np.zeros(d), bi])
        w += lfilter(g, [1.0], x[:, i])
    return w


def simulate(model: PolyModel, inputs, init=None) -> np.ndarray:
    """Free-run (noise-free) output of ``model`` driven by ``inputs``.

    ``inputs`` is an ``(N, m)`` array, a mapping of input name to series, or
    a table holding the model's input columns.  Inputs before the first
    sample are taken as the operating point.  If ``init`` is given, the first
    ``len(init)`` outputs are set to those values and the recursion runs from
    there on its own past outputs; otherwise past outputs start at the
    operating point.
    """
    x = _input_matrix(model, inputs) - np.asarray(model.input_offsets)
    n = x.shape[0]
    w = _forced_response(model, x)
    den = np.concatenate([[1.0], model.a])
    init = np.zeros(0) if init is None else np.asarray(init, dtype=float).ravel()[:n] - model.output_offset
    k = init.size
    if k == 0:
        y = lfilter([1.0], den, w)
    else:
        y = np.empty(n)
        y[:k] = init
        if k < n:
            if model.na:
                past = init[::-1][: model.na]
                zi = lfiltic([1.0], den, past)
                y[k:], _ = lfilter([1.0], den, w[k:], zi=zi)
            else:
                y[k:] = w[k:]
    return y + model.output_offset


def predict_one_step(model: PolyModel, data, output=None) -> np.ndarray:
    """One-step-ahead predictions for rows ``model.start_index ..``.

    Uses measured past outputs and inputs; the moving-average part runs on
    residuals reconstructed recursively, with pre-sample residuals zero.
    """
    if isinstance(data, TimeSeriesTable):
        y = data.column(output or model.output_name)
        x = data.columns(model.input_names)
    else:
        y, x = data
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float).reshape(y.size, model.n_inputs)
    y = y - model.output_offset
    x = x - np.asarray(model.input_offsets)
    start = model.start_index
    if y.size <= start:
        raise DataError(f"need more than {start} samples for one-step prediction")
    phi = _regressors(y, x, model.na, model.nb, model.delays, start)
    nx = phi.shape[1]
    theta = np.concatenate([model.a, *model.b, model.c])
    e = _residuals(y, phi, theta, nx, model.nc, start)[start:]
    return y[start:] - e + model.output_offset


def model_fit(y, y_hat) -> float:
    """Normalized-RMSE fit in percent: ``100 (1 - |y - y_hat| / |y - mean(y)|)``."""
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.size == 0 or y.size != y_hat.size:
        raise DataError(f"model_fit needs equal nonzero lengths, got {y.size} and {y_hat.size}")
    denom = np.linalg.norm(y - y.mean())
    if denom == 0:
        raise DataError("model_fit is undefined for a constant measured series")
    return float(100.0 * (1.0 - np.linalg.norm(y - y_hat) / denom))


def evaluate(model: PolyModel, table: TimeSeriesTable) -> tuple[float, float]:
    """Free-run and one-step fit on ``table``.

    Free-run simulation is seeded with the first ``start_index`` measured
    outputs; both scores cover the samples after that.
    """
    y = table.column(model.output_name)
    k = model.start_index
    if y.size < k + 2:
        raise DataError(f"evaluation set has {y.size} rows, need at least {k + 2}")
    free = simulate(model, table, init=y[:k])
    one = predict_one_step(model, table)
    return model_fit(y[k:], free[k:]), model_fit(y[k:], one)


def check_stability(model: PolyModel) -> Stability:
    """Roots of ``z^na + a_1 z^(na-1) + ... + a_na``; stable iff all inside the unit circle."""
    if model.na == 0:
        return Stability(True, ())
    mags = np.sort(np.abs(np.roots(np.concatenate([[1.0], model.a]))))[::-1]
    return Stability(bool(np.all(mags < 1.0)), tuple(float(m) for m in mags))
