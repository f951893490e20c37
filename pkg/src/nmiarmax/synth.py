"""Synthetic ground-truth data and deliberately naive reference oracles.

Random numbers come from numpy's PCG64 bit generator seeded with the spec's
integer seed.  Uniform doubles are drawn with ``Generator.random`` and
Gaussian noise is produced from them by the Box-Muller transform
(``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`` and the matching sine), so the exact
stream can be reproduced outside numpy.  Draw order: input channels in
order, then the noise sequence.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.signal import lfilter

from .dataset import ColumnRole, TimeSeriesTable
from .errors import ConfigError, DataError
from .linmodels import PolyModel, check_stability

RNG_ALGORITHM = "PCG64 + Box-Muller"
INPUT_KINDS = ("white", "binary", "sinusoid", "step")


def box_muller(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` standard normal draws built from uniform pairs."""
    if n == 0:
        return np.zeros(0)
    pairs = (n + 1) // 2
    u = rng.random(2 * pairs)
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:n]


@dataclass(frozen=True)
class InputProcess:
    """One excitation channel.

    ``white``: Gaussian with ``std`` around ``mean``.  ``binary``: two-level
    telegraph signal between ``low`` and ``high`` that switches with
    probability ``switch_prob`` per sample.  ``sinusoid``: ``mean +
    amplitude * sin(2 pi t / period + phase)``.  ``step``: piecewise-constant
    ``schedule`` of ``(start_index, level)`` pairs.
    """

    kind: str = "white"
    std: float = 1.0
    mean: float = 0.0
    low: float = 0.0
    high: float = 1.0
    switch_prob: float = 0.05
    amplitude: float = 1.0
    period: float = 50.0
    phase: float = 0.0
    schedule: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.kind not in INPUT_KINDS:
            raise ConfigError(f"unknown input process {self.kind!r}; use one of {INPUT_KINDS}")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "white":
            return self.mean + self.std * box_muller(rng, n)
        if self.kind == "binary":
            flips = rng.random(n) < self.switch_prob
            state = np.cumsum(flips) % 2
            return np.where(state == 1, self.high, self.low).astype(float)
        t = np.arange(n, dtype=float)
        if self.kind == "sinusoid":
            return self.mean + self.amplitude * np.sin(2.0 * np.pi * t / self.period + self.phase)
        out = np.full(n, self.mean)
        for start, level in sorted(self.schedule):
            out[int(start):] = level
        return out

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["schedule"] = [list(p) for p in self.schedule]
        return d


@dataclass(frozen=True)
class GeneratorSpec:
    """Ground-truth model plus excitation.

    ``n_samples`` counts every generated sample; the first ``warmup`` are
    discarded, so the table has ``n_samples - warmup`` rows.
    """

    model: object
    inputs: tuple[InputProcess, ...] = ()
    noise_std: float = 0.0
    n_samples: int = 1000
    seed: int = 0
    warmup: int = 200
    allow_unstable: bool = False

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if self.noise_std < 0:
            raise ConfigError("noise_std must be nonnegative")
        if self.warmup < 0 or self.n_samples - self.warmup < 2:
            raise ConfigError(f"n_samples={self.n_samples} leaves fewer than 2 rows after warmup={self.warmup}")
        n_in = self.model.n_inputs if isinstance(self.model, PolyModel) else self.model.B.shape[1]
        if len(self.inputs) != n_in:
            raise ConfigError(f"model has {n_in} inputs but {len(self.inputs)} input processes were given")


def spec_from_dict(d: Mapping) -> GeneratorSpec:
    """Build a :class:`GeneratorSpec` from its JSON form.

    ``model`` is a serialized PolyModel or SSModel; ``inputs`` a list of
    input-process dicts as written by :meth:`InputProcess.to_dict`.
    """
    from .statespace import SSModel

    md = d.get("model")
    if not isinstance(md, Mapping):
        raise ConfigError("generator spec needs a 'model' object")
    model = SSModel.from_dict(md) if md.get("kind") == "SSModel" else PolyModel.from_dict(md)
    inputs = []
    for p in d.get("inputs", ()):
        p = dict(p)
        p["schedule"] = tuple(tuple(x) for x in p.get("schedule", ()))
        try:
            inputs.append(InputProcess(**p))
        except TypeError as exc:
            raise ConfigError(f"bad input process {p}: {exc}") from None
    extra = set(d) - {"model", "inputs", "noise_std", "n_samples", "seed", "warmup", "allow_unstable"}
    if extra:
        raise ConfigError(f"unknown generator spec keys {sorted(extra)}")
    return GeneratorSpec(
        model,
        tuple(inputs),
        noise_std=float(d.get("noise_std", 0.0)),
        n_samples=int(d.get("n_samples", 1000)),
        seed=int(d.get("seed", 0)),
        warmup=int(d.get("warmup", 200)),
        allow_unstable=bool(d.get("allow_unstable", False)),
    )


def _is_stable(model) -> bool:
    if isinstance(model, PolyModel):
        return check_stability(model).stable
    return model.spectral_radius < 1.0


def generate(spec: GeneratorSpec) -> tuple[TimeSeriesTable, dict]:
    """Simulate the spec's model with seeded noise.

    Returns the table (output first, then inputs; output role ``output``,
    inputs ``candidate_input``) and a truth record with the model, seed and
    generator settings.
    """
    from .statespace import SSModel, simulate_ss

    model = spec.model
    if not spec.allow_unstable and not _is_stable(model):
        raise ConfigError("model is unstable; set allow_unstable=True to generate anyway")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.n_samples
    x = np.column_stack([p.draw(rng, n) for p in spec.inputs]) if spec.inputs else np.zeros((n, 0))
    e = spec.noise_std * box_muller(rng, n)

    if isinstance(model, PolyModel):
        xd = x - np.asarray(model.input_offsets)
        y = np.zeros(n)
        den = np.concatenate([[1.0], model.a])
        for i, (d, bi) in enumerate(zip(model.delays, model.b)):
            y += lfilter(np.concatenate([np.zeros(d), bi]), den, xd[:, i])
        y += lfilter(np.concatenate([[1.0], model.c]), den, e)
        y += model.output_offset
        out_name, in_names = model.output_name, model.input_names
    elif isinstance(model, SSModel):
        y = simulate_ss(model, x, noise=e)
        out_name, in_names = model.output_name, model.input_names
    else:
        raise ConfigError(f"unsupported model type {type(model).__name__}")

    keep = slice(spec.warmup, n)
    names = (out_name, *in_names)
    values = np.column_stack([y[keep], x[keep]])
    roles = (ColumnRole(out_name, "output"),) + tuple(ColumnRole(nm, "candidate_input") for nm in in_names)
    table = TimeSeriesTable(names=names, values=values, roles=roles)
    truth = {
        "model": model.to_dict(),
        "inputs": [p.to_dict() for p in spec.inputs],
        "noise_std": spec.noise_std,
        "n_samples": spec.n_samples,
        "warmup": spec.warmup,
        "seed": spec.seed,
        "rng": RNG_ALGORITHM,
    }
    return table, truth


def canonical_armax(seed: int = 0, n_samples: int = 10_000, noise_std: float = 0.1) -> GeneratorSpec:
    """Second-order ARMAX recovery fixture with one white-noise input."""
    model = PolyModel(a=[-1.5, 0.7], b=([1.0, 0.5],), c=[0.3], delays=(1,), input_names=("u1",))
    return GeneratorSpec(model, (InputProcess("white"),), noise_std=noise_std, n_samples=n_samples, seed=seed)


def random_stable_polymodel(
    rng: np.random.Generator, na: int = 3, nb: int = 2, nc: int = 0, n_inputs: int = 2, max_radius: float = 0.9,
    unit_gain: bool = False,
) -> PolyModel:
    """Random model whose AR roots lie within ``max_radius``.

    With ``unit_gain`` each input channel is scaled so its impulse response
    has unit energy, which keeps simulated outputs of order one.
    """
    roots = []
    while len(roots) < na:
        r = max_radius * math.sqrt(rng.random())
        if na - len(roots) >= 2 and rng.random() < 0.5:
            ang = math.pi * rng.random()
            roots += [r * complex(math.cos(ang), math.sin(ang)), r * complex(math.cos(ang), -math.sin(ang))]
        else:
            roots.append(complex(r * (1 if rng.random() < 0.5 else -1), 0.0))
    a = np.real(np.poly(roots))[1:] if na else np.zeros(0)
    b = tuple(rng.normal(size=nb + 1) for _ in range(n_inputs))
    if unit_gain:
        impulse = np.zeros(2000)
        impulse[0] = 1.0
        den = np.concatenate([[1.0], a])
        b = tuple(bi / math.sqrt(float(np.sum(lfilter(bi, den, impulse) ** 2))) for bi in b)
    delays = tuple(int(d) for d in rng.integers(0, 3, size=n_inputs))
    c = np.real(np.poly(0.5 * rng.random(nc)))[1:] if nc else np.zeros(0)
    return PolyModel(a=a, b=b, c=c, delays=delays)


# -- oracles ---------------------------------------------------------------------


def _check_pair(a: Sequence[int], b: Sequence[int]):
    if len(a) != len(b):
        raise DataError(f"sequence lengths differ: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise DataError("empty sequences")


def _symbols(s):
    return [int(v) for v in getattr(s, "symbols", s)]


def oracle_entropy(s) -> float:
    s = _symbols(s)
    n = len(s)
    h = 0.0
    for count in Counter(s).values():
        p = count / n
        h -= p * math.log2(p)
    return h


def oracle_mi(a, b) -> float:
    """Mutual information in bits by explicit counting and a double loop."""
    a, b = _symbols(a), _symbols(b)
    _check_pair(a, b)
    n = len(a)
    us = sorted(set(a))
    vs = sorted(set(b))
    joint = {}
    for u, v in zip(a, b):
        joint[(u, v)] = joint.get((u, v), 0) + 1
    pu = {u: a.count(u) / n for u in us}
    pv = {v: b.count(v) / n for v in vs}
    total = 0.0
    for u in us:
        for v in vs:
            c = joint.get((u, v), 0)
            if c == 0:
                continue
            p = c / n
            total += p * math.log2(p / (pu[u] * pv[v]))
    return total


def oracle_simulate(model: PolyModel, inputs, init=None) -> np.ndarray:
    """Sample-by-sample free-run recursion with no vectorization."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    init = [] if init is None else list(np.asarray(init, dtype=float).ravel())
    y0 = model.output_offset
    y = [0.0] * n
    for t in range(n):
        if t < len(init):
            y[t] = init[t] - y0
            continue
        acc = 0.0
        for i in range(1, model.na + 1):
            if t - i >= 0:
                acc -= model.a[i - 1] * y[t - i]
        for k in range(model.n_inputs):
            for j in range(model.nb[k] + 1):
                s = t - model.delays[k] - j
                if s >= 0:
                    acc += model.b[k][j] * (x[s, k] - model.input_offsets[k])
        y[t] = acc
    return np.array(y) + y0


def building_surrogate(seed: int = 0, days: int = 8, minutes_per_sample: int = 5) -> TimeSeriesTable:
    """Office-room-like sensor log with a known dominant input.

    Temperature responds strongly to lighting (heat gain from lamps and
    sun-driven lighting) and weakly to occupancy; CO2 follows occupancy;
    relative humidity drifts slowly; humidity ratio is derived from
    temperature and humidity.  Columns mirror the occupancy data set so
    demos and CLI fixtures can exercise the same configs.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    per_day = 24 * 60 // minutes_per_sample
    n = days * per_day
    hour = (np.arange(n) % per_day) * minutes_per_sample / 60.0
    weekday = (np.arange(n) // per_day) % 7 < 5
    office = weekday & (hour >= 8.0) & (hour < 18.0)

    occ = np.zeros(n)
    present = False
    for t in range(n):
        p_on, p_off = (0.08, 0.03) if office[t] else (0.002, 0.3)
        present = (rng.random() < p_on) if not present else (rng.random() >= p_off)
        occ[t] = float(present)
    cloud = np.exp(lfilter([0.05], [1.0, -0.95], 0.6 * box_muller(rng, n)))
    sun = np.clip(np.sin(np.pi * (hour - 6.0) / 13.0), 0.0, None) * 350.0 * cloud
    light = sun + np.where(office & (occ > 0), 300.0, 0.0)
    light = np.clip(light + 10.0 * box_muller(rng, n) * (light > 0), 0.0, None)
    co2 = 450.0 + lfilter([8.0], [1.0, -0.95], occ) + 25.0 * box_muller(rng, n)
    walk = np.cumsum(0.25 * box_muller(rng, n))
    humidity = np.clip(27.0 + 4.0 * (walk - walk.mean()) / (walk.std() + 1e-12), 15.0, 45.0)

    drive = 0.004 * light + 0.1 * occ
    noise = lfilter([1.0, 0.4], [1.0, -0.7], 0.01 * box_muller(rng, n))
    temp = 20.0 + lfilter([0.3], [1.0, -0.7], drive) + noise
    sat = 0.6108 * np.exp(17.27 * temp / (temp + 237.3))
    ratio = 0.622 * (humidity / 100.0 * sat) / (101.325 - humidity / 100.0 * sat)

    names = ("Temperature", "Humidity", "Light", "CO2", "HumidityRatio", "Occupancy")
    values = np.column_stack([temp, humidity, light, co2, ratio, occ])
    roles = (ColumnRole("Temperature", "output"),) + tuple(ColumnRole(nm, "candidate_input") for nm in names[1:])
    return TimeSeriesTable(names=names, values=values, sample_period=60.0 * minutes_per_sample, roles=roles)
