import glob
import json
import os

import numpy as np
import pytest

from nmiarmax.dataset import ColumnRole, TimeSeriesTable

SCHEMA_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "src", "nmiarmax", "schemas")


def make_table(output, **inputs):
    """Table with ``output`` as the output column and keyword inputs as candidates."""
    cols = {"y": np.asarray(output, dtype=float)}
    cols.update({k: np.asarray(v, dtype=float) for k, v in inputs.items()})
    roles = (ColumnRole("y", "output"),) + tuple(ColumnRole(k, "candidate_input") for k in inputs)
    return TimeSeriesTable.from_columns(cols, roles=roles)


@pytest.fixture(scope="session")
def schema_validator():
    jsonschema = pytest.importorskip("jsonschema")
    from referencing import Registry, Resource

    resources = {}
    for path in glob.glob(os.path.join(SCHEMA_DIR, "*.schema.json")):
        with open(path) as fh:
            resources[os.path.basename(path)] = Resource.from_contents(json.load(fh))
    registry = Registry().with_resources(list(resources.items()))

    def validate(doc, name):
        schema = resources[f"{name}.schema.json"].contents
        jsonschema.Draft202012Validator(schema, registry=registry).validate(doc)

    return validate


SURROGATE_ROLES = {
    "Temperature": "output",
    "Humidity": "candidate_input",
    "Light": "candidate_input",
    "CO2": "candidate_input",
    "HumidityRatio": "candidate_input",
    "Occupancy": "candidate_input",
}


def write_surrogate_config(directory, seed=1, days=6, **extra):
    """Surrogate sensor log plus a JSON config pointing at it; returns the config path."""
    from nmiarmax.synth import building_surrogate

    table = building_surrogate(seed=seed, days=days)
    table.to_csv(os.path.join(directory, "sensors.csv"))
    cfg = {
        "dataset": {"path": "sensors.csv", "roles": SURROGATE_ROLES, "sample_period": table.sample_period},
        "split": {"mode": "index_ranges", "train": [0, 1000], "test": [[1000, 1400], [1400, table.n_rows]]},
        "parallel": False,
        **extra,
    }
    path = os.path.join(directory, "config.json")
    with open(path, "w") as fh:
        json.dump(cfg, fh, indent=2)
    return path
