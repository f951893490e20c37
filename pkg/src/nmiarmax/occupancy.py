"""UCI Occupancy Detection data: loading and the ordinal reproduction checks.

The data set ships as three files, ``datatraining.txt``, ``datatest.txt`` and
``datatest2.txt``, each a CSV with a quoted header, a leading unnamed row
index and one-minute samples of ``Temperature, Humidity, Light, CO2,
HumidityRatio, Occupancy``.  Point ``NMIARMAX_OCCUPANCY_DIR`` (or the
``data_dir`` argument) at the directory holding them.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

from .dataset import TimeSeriesTable, load_csv
from .errors import DataError
from .linmodels import FitOptions, fit_armax
from .pipeline import Data, DatasetConfig, PipelineConfig, SelectionRule, compare_models, run_selection, score_tests

ENV_VAR = "NMIARMAX_OCCUPANCY_DIR"
FILES = ("datatraining.txt", "datatest.txt", "datatest2.txt")
OUTPUT = "Temperature"
CANDIDATES = ("Humidity", "Light", "CO2", "HumidityRatio", "Occupancy")
ROLES = {OUTPUT: "output", **{c: "candidate_input" for c in CANDIDATES}}
UNITS = {
    "Temperature": "degC",
    "Humidity": "%",
    "Light": "lux",
    "CO2": "ppm",
    "HumidityRatio": "kg/kg",
    "Occupancy": "",
}


def find_data_dir(data_dir=None) -> str:
    data_dir = data_dir or os.environ.get(ENV_VAR)
    if not data_dir:
        raise DataError(f"occupancy data directory not given; set {ENV_VAR} to the folder holding {', '.join(FILES)}")
    missing = [f for f in FILES if not os.path.isfile(os.path.join(data_dir, f))]
    if missing:
        raise DataError(f"{data_dir}: missing occupancy files {missing}")
    return data_dir


def load_occupancy(data_dir=None) -> tuple[TimeSeriesTable, TimeSeriesTable, TimeSeriesTable]:
    """Training set and the two test sets, in file order."""
    data_dir = find_data_dir(data_dir)
    return tuple(
        load_csv(os.path.join(data_dir, f), ROLES, sample_period=60.0, timestamp_column="date", units=UNITS)
        for f in FILES
    )


def occupancy_config(data_dir=None, **overrides) -> PipelineConfig:
    data_dir = find_data_dir(data_dir)
    ds = DatasetConfig(
        roles=ROLES,
        train_path=FILES[0],
        test_paths=FILES[1:],
        sample_period=60.0,
        timestamp_column="date",
        base_dir=data_dir,
    )
    cfg = PipelineConfig(dataset=ds, selection=SelectionRule("top_k", 1))
    return replace(cfg, **overrides)


@dataclass(frozen=True)
class OrderingCheck:
    name: str
    passed: bool
    detail: str


def reproduce(data_dir=None, fit: FitOptions | None = None) -> list[OrderingCheck]:
    """Evaluate the four ordinal claims about the occupancy data.

    (a) Light has the largest NMI with Temperature among the candidates.
    (b) Single-input 4th-order ARMAX, delay 1: Light beats Occupancy and
        Humidity in free-run fit on test set 1.
    (c) {Light, CO2, Occupancy} beats {CO2, Occupancy} on test set 2.
    (d) With {Light, Occupancy, CO2}: ARMAX4 >= RegARMAX4 and ARMAX4 >= ARX4
        on test set 1.
    """
    config = occupancy_config(data_dir)
    if fit is not None:
        config = replace(config, fit=fit)
    train, test1, test2 = load_occupancy(data_dir)
    data = Data(train, (("test1", test1), ("test2", test2)))
    checks = []

    sel = run_selection(config, data)
    top = sel.ranking[0]
    checks.append(OrderingCheck("a", top[0] == "Light", f"ranking {[(n, round(v, 4)) for n, v in sel.ranking]}"))

    def fits(inputs):
        rep = fit_armax(train, config.fit, output=OUTPUT, inputs=list(inputs))
        return {s.label: s.free_run for s in score_tests(rep.model, data.tests)}

    siso = {c: fits([c]) for c in ("Light", "Occupancy", "Humidity")}
    ok_b = siso["Light"]["test1"] > siso["Occupancy"]["test1"] and siso["Light"]["test1"] > siso["Humidity"]["test1"]
    shown = ", ".join(f"{k}: {v['test1']:.2f}" for k, v in siso.items())
    checks.append(OrderingCheck("b", ok_b, f"test1 free-run fits {{{shown}}}"))

    three = fits(["Light", "CO2", "Occupancy"])["test2"]
    two = fits(["CO2", "Occupancy"])["test2"]
    checks.append(OrderingCheck("c", three > two, f"test2 fits three-input {three:.2f} vs two-input {two:.2f}"))

    zoo_cfg = replace(config, zoo=("ARMAX4", "RegARMAX4", "ARX4"))
    table = compare_models(zoo_cfg, inputs=("Light", "Occupancy", "CO2"), data=data)
    got = {r.label: (r.test_fits[0] if r.test_fits else float("nan")) for r in table.rows}
    ok_d = got["ARMAX4"] >= got["RegARMAX4"] and got["ARMAX4"] >= got["ARX4"]
    checks.append(OrderingCheck("d", ok_d, f"test1 fits {', '.join(f'{k}: {v:.2f}' for k, v in got.items())}"))
    return checks
