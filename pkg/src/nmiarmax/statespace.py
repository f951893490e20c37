"""Discrete-time innovation-form state-space models.

    x_{t+1} = A x_t + B u_t + K e_t
    y_t     = C x_t + D u_t + e_t

Estimation goes through Markov parameters of a long ARX model followed by a
Ho-Kalman realization of the chosen order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.signal

from ._version import __version__
from .dataset import TimeSeriesTable
from .errors import ConfigError, DataError, RankDeficientError
from .linmodels import FitReport, PolyModel, _center, _regressors, _resolve_io, _table_arrays, model_fit, simulate

DEFAULT_ORDERS = (1, 6, 15, 30)


def _mat(v, rows, cols, name):
    m = np.array(v, dtype=float) if np.size(v) else np.zeros((rows, cols))
    if m.size == rows * cols:
        m = m.reshape(rows, cols)
    if m.shape != (rows, cols):
        raise ConfigError(f"{name} must be {rows}x{cols}, got {m.shape}")
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class SSModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray | None = None
    K: np.ndarray | None = None
    input_names: tuple[str, ...] = ()
    output_name: str = "y"
    output_offset: float = 0.0
    input_offsets: tuple[float, ...] = ()

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n) or n < 1:
            raise ConfigError(f"A must be square with order >= 1, got {A.shape}")
        B = np.asarray(self.B, dtype=float)
        B = B.reshape(n, -1) if B.size else np.zeros((n, 0))
        m = B.shape[1]
        object.__setattr__(self, "A", _mat(A, n, n, "A"))
        object.__setattr__(self, "B", _mat(B, n, m, "B"))
        object.__setattr__(self, "C", _mat(self.C, 1, n, "C"))
        object.__setattr__(self, "D", _mat(self.D if self.D is not None else [], 1, m, "D"))
        object.__setattr__(self, "K", _mat(self.K if self.K is not None else [], n, 1, "K"))
        names = tuple(self.input_names) if self.input_names else tuple(f"u{i}" for i in range(m))
        offsets = tuple(float(o) for o in self.input_offsets) if self.input_offsets else (0.0,) * m
        if len(names) != m or len(offsets) != m:
            raise ConfigError("input_names and input_offsets must have one entry per input")
        object.__setattr__(self, "input_names", names)
        object.__setattr__(self, "input_offsets", offsets)

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    @property
    def stable(self) -> bool:
        return self.spectral_radius < 1.0

    def to_dict(self) -> dict:
        def pack(m):
            return {"rows": m.shape[0], "cols": m.shape[1], "data": m.ravel(order="C").tolist()}

        return {
            "kind": "SSModel",
            "version": __version__,
            "order": self.order,
            "output_name": self.output_name,
            "input_names": list(self.input_names),
            "A": pack(self.A),
            "B": pack(self.B),
            "C": pack(self.C),
            "D": pack(self.D),
            "K": pack(self.K),
            "spectral_radius": self.spectral_radius,
            "output_offset": self.output_offset,
            "input_offsets": list(self.input_offsets),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> SSModel:
        if d.get("kind") != "SSModel":
            raise DataError(f"not an SSModel document: kind={d.get('kind')!r}")

        def unpack(k):
            m = d[k]
            return np.asarray(m["data"], dtype=float).reshape(m["rows"], m["cols"])

        return cls(
            A=unpack("A"),
            B=unpack("B"),
            C=unpack("C"),
            D=unpack("D"),
            K=unpack("K"),
            input_names=tuple(d.get("input_names", ())),
            output_name=d.get("output_name", "y"),
            output_offset=d.get("output_offset", 0.0),
            input_offsets=tuple(d.get("input_offsets", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _inputs(model, inputs, n=None):
    if isinstance(inputs, TimeSeriesTable):
        u = inputs.columns(model.input_names)
    elif isinstance(inputs, Mapping):
        u = np.column_stack([np.asarray(inputs[k], dtype=float) for k in model.input_names]) if model.n_inputs else np.zeros((n or 0, 0))
    else:
        u = np.asarray(inputs, dtype=float)
        if u.ndim == 1:
            u = u[:, None] if model.n_inputs == 1 else u.reshape(-1, model.n_inputs)
    if u.ndim != 2 or u.shape[1] != model.n_inputs:
        raise DataError(f"model has {model.n_inputs} inputs, got array of shape {u.shape}")
    return u - np.asarray(model.input_offsets)


def simulate_ss(model: SSModel, inputs, x0=None, noise=None) -> np.ndarray:
    """Output of the state recursion from ``x0`` (zero by default).

    ``noise``, when given, is the innovation sequence ``e``; otherwise the
    simulation is noise-free.
    """
    u = _inputs(model, inputs)
    n = u.shape[0]
    x = np.zeros(model.order) if x0 is None else np.asarray(x0, dtype=float).reshape(model.order)
    e = np.zeros(n) if noise is None else np.asarray(noise, dtype=float).ravel()
    if e.size != n:
        raise DataError("noise length must match the input length")
    A, B, C, D, K = model.A, model.B, model.C[0], model.D[0], model.K[:, 0]
    y = np.empty(n)
    for t in range(n):
        y[t] = C @ x + D @ u[t] + e[t]
        x = A @ x + B @ u[t] + K * e[t]
    return y + model.output_offset


def predict_one_step_ss(model: SSModel, data, x0=None) -> np.ndarray:
    """Innovation-filter predictions ``C x_t + D u_t`` with ``x`` corrected by ``K``."""
    if isinstance(data, TimeSeriesTable):
        y = data.column(model.output_name)
        u = _inputs(model, data)
    else:
        y, u = data
        y = np.asarray(y, dtype=float)
        u = _inputs(model, u)
    y = y - model.output_offset
    x = np.zeros(model.order) if x0 is None else np.asarray(x0, dtype=float)
    A, B, C, D, K = model.A, model.B, model.C[0], model.D[0], model.K[:, 0]
    out = np.empty(y.size)
    for t in range(y.size):
        out[t] = C @ x + D @ u[t]
        x = A @ x + B @ u[t] + K * (y[t] - out[t])
    return out + model.output_offset


def similarity_transform(model: SSModel, T) -> SSModel:
    """Equivalent model in coordinates ``z = T x``."""
    T = np.asarray(T, dtype=float)
    Ti = np.linalg.inv(T)
    return replace(model, A=T @ model.A @ Ti, B=T @ model.B, C=model.C @ Ti, K=T @ model.K)


def from_polymodel(model: PolyModel) -> SSModel:
    """Observer-canonical realization of a polynomial model.

    The state dimension is ``max(na, nc, max_i(delay_i + nb_i))``; with zero
    initial state the output equals :func:`linmodels.simulate` with no
    ``init``.
    """
    n = max([model.na, model.nc, 1] + [d + k for d, k in zip(model.delays, model.nb)])
    a = np.zeros(n + 1)
    a[0] = 1.0
    a[1 : model.na + 1] = model.a
    c = np.zeros(n + 1)
    c[0] = 1.0
    c[1 : model.nc + 1] = model.c
    m = model.n_inputs
    g = np.zeros((n + 1, m))
    for i, (d, bi) in enumerate(zip(model.delays, model.b)):
        g[d : d + bi.size, i] = bi
    A = np.zeros((n, n))
    A[:, 0] = -a[1:]
    A[: n - 1, 1:] = np.eye(n - 1)
    B = g[1:] - np.outer(a[1:], g[0])
    K = (c[1:] - a[1:])[:, None]
    C = np.zeros((1, n))
    C[0, 0] = 1.0
    return SSModel(
        A=A,
        B=B,
        C=C,
        D=g[0][None, :],
        K=K,
        input_names=model.input_names,
        output_name=model.output_name,
        output_offset=model.output_offset,
        input_offsets=model.input_offsets,
    )


def markov_parameters(model: SSModel, count: int) -> np.ndarray:
    """``[D, CB, CAB, ..., CA^(count-2)B]`` stacked as a ``(count, m)`` array."""
    out = np.zeros((count, model.n_inputs))
    if count:
        out[0] = model.D[0]
    v = model.B.copy()
    for k in range(1, count):
        out[k] = (model.C @ v)[0]
        v = model.A @ v
    return out


@dataclass(frozen=True)
class Realization:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    singular_values: np.ndarray


def ho_kalman(markov: np.ndarray, order: int, block_rows: int | None = None) -> Realization:
    """Realize ``(A, B, C, D)`` of the given order from Markov parameters.

    ``markov[0]`` is the direct term, ``markov[k]`` the k-th impulse-response
    sample (shape ``(count, m)``).  The block-Hankel matrix of
    ``markov[1:]`` is truncated by SVD to rank ``order``; ``A`` comes from the
    shift structure of the observability factor.
    """
    h = np.asarray(markov, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    m = h.shape[1]
    avail = h.shape[0] - 1
    rows = block_rows if block_rows is not None else avail // 2
    cols = avail - rows + 1
    if rows < order + 1 or cols < order:
        raise ConfigError(f"need at least {2 * order + 1} Markov parameters for order {order}, have {h.shape[0]}")
    H = np.zeros((rows, cols * m))
    for i in range(rows):
        for j in range(cols):
            H[i, j * m : (j + 1) * m] = h[1 + i + j]
    U, s, Vt = np.linalg.svd(H, full_matrices=False)
    if s.size < order or s[order - 1] <= s[0] * 1e-12 or s[0] == 0:
        raise RankDeficientError(
            f"Hankel matrix has numerical rank below {order}; choose a lower state-space order"
        )
    root = np.sqrt(s[:order])
    O = U[:, :order] * root
    R = root[:, None] * Vt[:order]
    A = np.linalg.lstsq(O[:-1], O[1:], rcond=None)[0]
    return Realization(A=A, B=R[:, :m], C=O[:1], D=h[:1], singular_values=s)


@dataclass(frozen=True)
class SSOptions:
    """Settings for :func:`fit_ss`.

    ``arx_order`` defaults to ``2 * order + 5``.  ``detrend`` removes training
    means.  ``stabilize`` mirrors realized poles on or outside the unit
    circle to the inside.  ``refit_gains`` re-estimates ``B`` and ``D`` by
    least squares on the training output with ``A`` and ``C`` held fixed.
    ``pem_refine`` polishes all matrices by minimizing one-step prediction
    error.
    """

    arx_order: int | None = None
    detrend: bool = False
    direct_term: bool = True
    min_samples_factor: int = 10
    stabilize: bool = True
    refit_gains: bool = True
    pem_refine: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _lstsq_minnorm(phi, target):
    theta, *_ = scipy.linalg.lstsq(phi, target, cond=1e-13)
    return theta


def stabilizing_gain(A: np.ndarray, C: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Return ``K`` if the predictor ``A - K C`` is stable, else a Kalman gain.

    A truncated realization of the noise model need not give a stable
    predictor.  In that case ``K K^T`` (plus a small ridge) serves as the
    process-noise covariance with unit innovation variance, and the
    steady-state Kalman gain of that pair is used instead.
    """
    if np.max(np.abs(np.linalg.eigvals(A - K @ C))) < 1.0:
        return K
    n = A.shape[0]
    Q = K @ K.T + 1e-8 * max(1.0, float(np.trace(K @ K.T))) * np.eye(n)
    try:
        P = scipy.linalg.solve_discrete_are(A.T, C.T, Q, np.eye(1))
    except (np.linalg.LinAlgError, ValueError):
        return np.zeros_like(K) if np.max(np.abs(np.linalg.eigvals(A))) < 1.0 else K
    return A @ P @ C.T / ((C @ P @ C.T).item() + 1.0)


def stabilize_poles(A: np.ndarray, margin: float = 0.999) -> np.ndarray:
    """Mirror eigenvalues with modulus >= 1 to ``1 / conj(lambda)``.

    Stable eigenvalues and their eigenvectors are kept.  Mirrored values are
    capped at ``margin`` so poles on the circle move strictly inside.
    """
    lam, V = np.linalg.eig(A)
    bad = np.abs(lam) >= 1.0
    if not bad.any():
        return A
    if np.linalg.cond(V) > 1e10:
        # nearly defective: shrink the whole spectrum instead
        return A * (margin / np.max(np.abs(lam)))
    mirrored = 1.0 / np.conj(lam)
    mirrored = np.where(np.abs(mirrored) > margin, mirrored * margin / np.abs(mirrored), mirrored)
    lam = np.where(bad, mirrored, lam)
    return np.real(V @ np.diag(lam) @ np.linalg.inv(V))


def refit_input_gains(A, C, y, u, direct_term=True) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares ``B`` and ``D`` for fixed ``A``, ``C`` on centered data.

    The free-run output is linear in ``B``, ``D`` and the initial state, so
    one regression over the whole record fits all three; the state is
    discarded.
    """
    N, m = u.shape
    n = A.shape[0]
    G = np.empty((N, n))
    v = C[0].copy()
    for t in range(N):
        G[t] = v
        v = v @ A
    cols = []
    for i in range(m):
        for j in range(n):
            cols.append(np.concatenate([[0.0], scipy.signal.fftconvolve(G[:, j], u[:, i])[: N - 1]]))
    if direct_term:
        cols += [u[:, i] for i in range(m)]
    phi = np.column_stack(cols + [G])
    theta = _lstsq_minnorm(phi, y)
    B = theta[: n * m].reshape(m, n).T
    D = theta[n * m : n * m + m].reshape(1, m) if direct_term else np.zeros((1, m))
    return B, D


def fit_ss(
    train: TimeSeriesTable,
    order: int,
    opts: SSOptions = SSOptions(),
    output: str | None = None,
    inputs: Sequence[str] | None = None,
) -> tuple[SSModel, FitReport]:
    """Two-stage state-space estimate of the given order."""
    if order < 1:
        raise ConfigError(f"state-space order must be >= 1, got {order}")
    output, inputs = _resolve_io(train, output, inputs)
    m = len(inputs)
    needed = opts.min_samples_factor * order * (m + 2)
    if train.n_rows < needed:
        raise DataError(f"order {order} needs at least {needed} training rows, have {train.n_rows}")
    p = opts.arx_order or 2 * order + 5
    delay = 0 if opts.direct_term else 1
    y_raw, x_raw = _table_arrays(train, output, inputs)
    y, x, y0, x0 = _center(y_raw, x_raw, opts.detrend)
    start = max(p, delay + p)
    nb = (p,) * m
    if y.size - start <= p + m * (p + 1):
        raise DataError(f"too few rows ({y.size}) for the order-{p} ARX stage")
    phi = _regressors(y, x, p, nb, (delay,) * m, start)
    theta = _lstsq_minnorm(phi, y[start:])
    arx = PolyModel(a=theta[:p], b=tuple(theta[p + i * (p + 1) : p + (i + 1) * (p + 1)] for i in range(m)), delays=(delay,) * m)

    rows = max(order + 1, p)
    count = 2 * rows + 1
    markov = np.zeros((count, m))
    for i in range(m):
        impulse = np.zeros((count, m))
        impulse[0, i] = 1.0
        markov[:, i] = simulate(arx, impulse)
    real = ho_kalman(markov, order, block_rows=rows)
    A, B, C, D = real.A, real.B, real.C, real.D
    if opts.stabilize:
        A = stabilize_poles(A)
    if opts.refit_gains:
        B, D = refit_input_gains(A, C, y, x, opts.direct_term)

    # noise model 1/A(q) of the ARX stage; K fits its impulse response
    noise_ir = simulate(PolyModel(a=arx.a, b=([1.0],), delays=(0,)), np.eye(1, count, 0).ravel())
    obs = np.zeros((rows, order))
    v = C.copy()
    for k in range(rows):
        obs[k] = v[0]
        v = v @ A
    K = np.linalg.lstsq(obs, noise_ir[1 : rows + 1], rcond=None)[0][:, None]
    K = stabilizing_gain(A, C, K)

    model = SSModel(
        A=A,
        B=B,
        C=C,
        D=D,
        K=K,
        input_names=tuple(inputs),
        output_name=output,
        output_offset=y0,
        input_offsets=x0,
    )
    if opts.pem_refine:
        model = _pem_refine_ss(model, train)
    free, one = evaluate_ss(model, train)
    resid = y_raw - predict_one_step_ss(model, train)
    report = FitReport(
        model=model,
        method=f"SS{order}",
        iterations_used=1,
        converged=True,
        residual_variance=float(np.mean(resid**2)),
        train_fit_pct=free,
        train_fit_one_step=one,
        options=dict(opts.to_dict(), order=order, arx_order=p),
    )
    return model, report


def _pem_refine_ss(model: SSModel, train: TimeSeriesTable) -> SSModel:
    n, m = model.order, model.n_inputs
    y = train.column(model.output_name)
    u = train.columns(model.input_names)
    shapes = [(n, n), (n, m), (1, n), (1, m), (n, 1)]

    def unpack(p):
        mats, pos = [], 0
        for r, c in shapes:
            mats.append(p[pos : pos + r * c].reshape(r, c))
            pos += r * c
        return replace(model, A=mats[0], B=mats[1], C=mats[2], D=mats[3], K=mats[4])

    def resid(p):
        mdl = unpack(p)
        r = y - predict_one_step_ss(mdl, (y, u))
        return np.where(np.isfinite(r), r, 1e6)

    p0 = np.concatenate([model.A.ravel(), model.B.ravel(), model.C.ravel(), model.D.ravel(), model.K.ravel()])
    sol = scipy.optimize.least_squares(resid, p0, method="trf", max_nfev=50 * p0.size)
    refined = unpack(sol.x)
    if np.sum(resid(sol.x) ** 2) <= np.sum(resid(p0) ** 2):
        return refined
    return model


def initial_state(model: SSModel, table: TimeSeriesTable, window: int) -> np.ndarray:
    """Least-squares initial state from the first ``window`` samples."""
    y = table.column(model.output_name)[:window] - model.output_offset
    forced = simulate_ss(replace(model, output_offset=0.0), table)[:window]
    obs = np.zeros((window, model.order))
    v = model.C.copy()
    for k in range(window):
        obs[k] = v[0]
        v = v @ model.A
    return np.linalg.lstsq(obs, y - forced, rcond=None)[0]


def warmup_length(model: SSModel) -> int:
    return max(5, 2 * model.order)


def evaluate_ss(model: SSModel, table: TimeSeriesTable) -> tuple[float, float]:
    """Free-run and one-step fit, scored after a warm-up window.

    The initial state is estimated by least squares over the warm-up window,
    which plays the role the seeded outputs play for polynomial models.
    """
    w = warmup_length(model)
    y = table.column(model.output_name)
    if y.size < w + 2:
        raise DataError(f"evaluation set has {y.size} rows, need at least {w + 2} for order {model.order}")
    x0 = initial_state(model, table, w)
    free = simulate_ss(model, table, x0=x0)
    one = predict_one_step_ss(model, table, x0=x0)
    return model_fit(y[w:], free[w:]), model_fit(y[w:], one[w:])
