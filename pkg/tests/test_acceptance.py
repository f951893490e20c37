"""Acceptance criteria, one test each.

Every test prints a single ``criterion N ... PASS|FAIL`` line (visible under
``pytest -v -s`` and when this file is run as a script) and then asserts.
"""

import csv
import glob
import itertools
import json
import math
import os
import sys
import tempfile
import time

import numpy as np
import pytest

from nmiarmax import occupancy
from nmiarmax.cli import main as cli_main
from nmiarmax.dataset import load_csv
from nmiarmax.errors import DataError
from nmiarmax.infotheory import SymbolSequence, entropy, mutual_information, nmi_sqrt
from nmiarmax.linmodels import FitOptions, PolyModel, fit_armax, model_fit, simulate
from nmiarmax.pipeline import Data, load_config, load_data, run_selection
from nmiarmax.statespace import SSModel, fit_ss, similarity_transform, simulate_ss
from nmiarmax.synth import GeneratorSpec, InputProcess, canonical_armax, generate, oracle_mi, oracle_simulate, random_stable_polymodel

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURE = os.path.join(HERE, os.pardir, "fixtures", "office", "config.json")
SCHEMAS = os.path.join(HERE, os.pardir, "src", "nmiarmax", "schemas")


def report(number, title, passed, detail, elapsed):
    line = f"criterion {number} {title:<34} {'PASS' if passed else 'FAIL'}  ({elapsed:.2f} s) {detail}"
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()
    return passed


def timed(fn):
    t0 = time.perf_counter()
    passed, detail = fn()
    return passed, detail, time.perf_counter() - t0


# -- 1 ---------------------------------------------------------------------------------


def joint_tables(n, cells=9):
    """Every 3x3 joint count table with total ``n``."""
    for cut in itertools.combinations(range(n + cells - 1), cells - 1):
        prev, parts = -1, []
        for c in cut + (n + cells - 1,):
            parts.append(c - prev - 1)
            prev = c
        yield parts


def nmi_invariants_hold(a, b):
    if entropy(a) == 0 or entropy(b) == 0:
        return True
    v = nmi_sqrt(a, b)
    return 0.0 <= v <= 1.0 and v == nmi_sqrt(b, a) and abs(nmi_sqrt(a, a) - 1.0) < 1e-12


def criterion_1():
    worst, bad, count = 0.0, 0, 0

    def check(a, b):
        nonlocal worst, bad, count
        oracle = oracle_mi(a, b)
        a, b = SymbolSequence.of(a), SymbolSequence.of(b)
        mi = mutual_information(a, b)
        worst = max(worst, abs(mi - oracle))
        bad += (mi != mutual_information(b, a)) or not nmi_invariants_hold(a, b)
        count += 1

    # every pair of length <= 8 over three symbols, up to position order:
    # MI depends on the pair only through its joint count table
    for n in range(1, 9):
        for parts in joint_tables(n):
            a, b = [], []
            for k, c in enumerate(parts):
                a += [k // 3] * c
                b += [k % 3] * c
            check(a, b)
    # and literally every ordered pair up to length 4
    for n in range(1, 5):
        seqs = list(itertools.product(range(3), repeat=n))
        for a in seqs:
            for b in seqs:
                check(list(a), list(b))
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(9, 600))
        ka, kb = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        check(rng.integers(0, ka, n).tolist(), rng.integers(0, kb, n).tolist())
    return worst < 1e-12 and bad == 0, f"{count} pairs, max |MI - oracle| = {worst:.1e}, invariant violations {bad}"


def test_criterion_1_mi_oracle():
    passed, detail, dt = timed(criterion_1)
    passed = passed and dt < 10
    assert report(1, "MI/NMI oracle equivalence", passed, detail, dt)


# -- 2 ---------------------------------------------------------------------------------


def criterion_2():
    truth = np.array([-1.5, 0.7, 1.0, 0.5, 0.3])
    errors, converged = [], 0
    for seed in range(20):
        table, _ = generate(canonical_armax(seed=seed))
        rep = fit_armax(table, FitOptions(orders=(2, 1, 1), delays=1))
        errors.append(np.abs(rep.model.theta - truth))
        converged += rep.converged and rep.iterations_used <= 50
    med = np.median(errors, axis=0)
    passed = bool(np.all(med < 0.05)) and converged >= 18
    return passed, f"median |error| {np.array2string(med, precision=4)}, converged <= 50 it on {converged}/20"


def test_criterion_2_armax_recovery():
    passed, detail, dt = timed(criterion_2)
    passed = passed and dt < 30
    assert report(2, "ARMAX recovery", passed, detail, dt)


# -- 3 ---------------------------------------------------------------------------------


def criterion_3():
    cases = [
        (model_fit([1, 2, 3], [1, 2, 3]), 100.0),
        (model_fit([1, 2, 3], [2, 2, 2]), 0.0),
        (model_fit([1, 2, 3], [1, 1, 3]), 100 * (1 - 1 / math.sqrt(2))),
    ]
    worst = max(abs(got - want) for got, want in cases)
    return worst < 1e-9, f"values {[round(g, 4) for g, _ in cases]}, max deviation {worst:.1e}"


def test_criterion_3_model_fit():
    passed, detail, dt = timed(criterion_3)
    assert report(3, "model fit exactness", passed, detail, dt)


# -- 4 ---------------------------------------------------------------------------------


def criterion_4():
    try:
        checks = occupancy.reproduce()
    except DataError as exc:
        return False, f"occupancy data unavailable: {exc}"
    detail = "; ".join(f"({c.name}) {'ok' if c.passed else 'no'}: {c.detail}" for c in checks)
    return all(c.passed for c in checks), detail


def test_criterion_4_occupancy_orderings():
    passed, detail, dt = timed(criterion_4)
    passed = passed and dt < 120
    assert report(4, "occupancy orderings", passed, detail, dt)


# -- 5 ---------------------------------------------------------------------------------

TRUE_SS = SSModel(A=[[0.8, 0.2], [-0.3, 0.6]], B=[[1.0], [0.5]], C=[[1.0, -0.4]], D=[[0.0]], input_names=("u",))


def criterion_5():
    make = lambda n, seed: generate(
        GeneratorSpec(TRUE_SS, (InputProcess("white"),), noise_std=0.0, n_samples=n, seed=seed, warmup=0)
    )[0]
    model, _ = fit_ss(make(600, 0), 2)
    test = make(400, 5)
    rms = float(np.sqrt(np.mean((simulate_ss(model, test) - test.column("y")) ** 2)))
    rng = np.random.default_rng(0)
    u = rng.normal(size=(500, 1))
    worst = 0.0
    for _ in range(20):
        T = rng.normal(size=(2, 2)) + 2 * np.eye(2)
        worst = max(worst, float(np.max(np.abs(simulate_ss(similarity_transform(TRUE_SS, T), u) - simulate_ss(TRUE_SS, u)))))
    return rms < 1e-6 and worst < 1e-8, f"realized output RMS error {rms:.1e}, similarity deviation {worst:.1e}"


def test_criterion_5_state_space():
    passed, detail, dt = timed(criterion_5)
    passed = passed and dt < 5
    assert report(5, "state-space realization", passed, detail, dt)


# -- 6 ---------------------------------------------------------------------------------


def criterion_6():
    # unit-energy input channels keep outputs of order one; see the README
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        m = random_stable_polymodel(
            rng, na=int(rng.integers(1, 5)), nb=int(rng.integers(0, 4)), n_inputs=int(rng.integers(1, 4)), unit_gain=True
        )
        u = rng.normal(size=(200, m.n_inputs))
        init = rng.normal(size=m.start_index)
        worst = max(worst, float(np.max(np.abs(simulate(m, u) - oracle_simulate(m, u)))))
        worst = max(worst, float(np.max(np.abs(simulate(m, u, init) - oracle_simulate(m, u, init)))))
    return worst < 1e-12, f"100 models, max deviation {worst:.1e}"


def test_criterion_6_differential_simulation():
    passed, detail, dt = timed(criterion_6)
    assert report(6, "differential simulation", passed, detail, dt)


# -- 7 ---------------------------------------------------------------------------------


def criterion_7():
    config = load_config(FIXTURE)
    data = load_data(config)
    before = json.dumps(run_selection(config, data).to_dict())
    rng = np.random.default_rng(7)
    mutated = tuple((lab, t.with_values(t.values[::-1] * rng.uniform(0.5, 2.0, t.values.shape))) for lab, t in data.tests)
    leak_free = json.dumps(run_selection(config, Data(data.train, mutated)).to_dict()) == before

    runs = []
    with tempfile.TemporaryDirectory() as tmp:
        for tag in ("a", "b"):
            out = os.path.join(tmp, tag)
            codes = [
                cli_main(["nmi", "--config", FIXTURE, "--out", out]),
                cli_main(["fit", "--config", FIXTURE, "--out", out]),
                cli_main(["compare", "--config", FIXTURE, "--out", out, "--no-timing"]),
            ]
            files = {}
            for path in sorted(glob.glob(os.path.join(out, "*"))):
                with open(path, "rb") as fh:
                    files[os.path.basename(path)] = fh.read()
            # comparison.csv and comparison.txt carry no timing except the csv column
            files["comparison.csv"] = b"\n".join(l.rsplit(b",", 2)[0] for l in files["comparison.csv"].splitlines())
            runs.append((codes, files))
    identical = runs[0] == runs[1] and runs[0][0] == [0, 0, 0]
    return leak_free and identical, f"selection unchanged under test mutation: {leak_free}; {len(runs[0][1])} artifacts byte-identical: {identical}"


def test_criterion_7_pipeline_hygiene():
    passed, detail, dt = timed(criterion_7)
    assert report(7, "pipeline hygiene", passed, detail, dt)


# -- 8 ---------------------------------------------------------------------------------


def _validator():
    import jsonschema
    from referencing import Registry, Resource

    resources = {}
    for path in glob.glob(os.path.join(SCHEMAS, "*.schema.json")):
        with open(path) as fh:
            resources[os.path.basename(path)] = Resource.from_contents(json.load(fh))
    registry = Registry().with_resources(list(resources.items()))
    by_kind = {
        "DependencyMatrix": "dependency_matrix",
        "SelectionReport": "selection",
        "PolyModel": "poly_model",
        "SSModel": "ss_model",
        "FitReport": "fit_report",
        "ComparisonTable": "comparison",
        "Truth": "truth",
    }

    def validate(doc):
        schema = resources[f"{by_kind[doc['kind']]}.schema.json"].contents
        jsonschema.Draft202012Validator(schema, registry=registry).validate(doc)

    return validate


def criterion_8():
    validate = _validator()
    failures = []

    def expect(cond, what):
        if not cond:
            failures.append(what)

    with tempfile.TemporaryDirectory() as tmp:
        j = lambda *p: os.path.join(tmp, *p)
        quiet = open(os.devnull, "w")
        saved = sys.stdout, sys.stderr
        sys.stdout = sys.stderr = quiet
        try:
            expect(cli_main(["synth", "--surrogate", "--seed", "1", "--days", "6", "--name", "office", "--out", tmp]) == 0, "synth")
            data = j("office.csv")
            expect(cli_main(["nmi", "--data", data, "--target", "Temperature", "--out", j("nmi")]) == 0, "nmi")
            fit = ["fit", "--data", data, "--target", "Temperature", "--train-fraction", "0.6", "--out", j("fit")]
            expect(cli_main(fit + ["--inputs", "lighting,co2,occupancy", "--order", "4", "--delay", "1"]) == 0, "fit")
            zoo = "ARMAX4,ARX4,ARX10,ARX30,RegARMAX4,SS1,SS6,SS15,SS30"
            cmp_args = ["compare", "--data", data, "--target", "Temperature", "--train-fraction", "0.6", "--out", j("cmp")]
            expect(cli_main(cmp_args + ["--zoo", zoo]) == 0, "compare")
            expect(cli_main(cmp_args + ["--zoo", ""]) != 0, "empty zoo exits nonzero")
            expect(cli_main(["nmi", "--config", j("absent.json")]) == 1, "missing config exits 1")
            expect(cli_main(["simulate", "--model", j("fit", "model.json"), "--data", data, "--out", j("sim")]) == 0, "simulate")

            # identical series give an off-diagonal 1.0
            v = np.sin(np.arange(300) / 9.0).tolist()
            with open(j("twin.csv"), "w") as fh:
                fh.write("a,b\n" + "".join(f"{x!r},{x!r}\n" for x in v))
            expect(cli_main(["nmi", "--data", j("twin.csv"), "--target", "a", "--out", j("twin")]) == 0, "twin nmi")
            with open(j("twin", "nmi_matrix.csv"), newline="") as fh:
                rows = list(csv.reader(fh))
            expect(abs(float(rows[1][2]) - 1.0) < 1e-12, "identical series NMI 1.0")

            # impulse through a saved first-order model is geometric
            with open(j("geo.json"), "w") as fh:
                fh.write(PolyModel(a=[-0.5], b=([1.0],), delays=(0,), input_names=("u",)).to_json())
            with open(j("impulse.csv"), "w") as fh:
                fh.write("u\n1\n" + "0\n" * 9)
            expect(cli_main(["simulate", "--model", j("geo.json"), "--data", j("impulse.csv"), "--out", j("geo")]) == 0, "impulse")
            geo = load_csv(j("geo", "simulated.csv"), {"simulated": "output"}).column("simulated")
            expect(np.max(np.abs(geo - 0.5 ** np.arange(10))) < 1e-15, "geometric impulse response")
            with open(j("wrong.csv"), "w") as fh:
                fh.write("v\n1\n0\n")
            expect(cli_main(["simulate", "--model", j("geo.json"), "--data", j("wrong.csv"), "--out", j("geo")]) == 2, "mismatch exits 2")
        finally:
            sys.stdout, sys.stderr = saved
            quiet.close()

        # fit -> save -> simulate equals in-process simulation
        with open(j("fit", "model.json")) as fh:
            model = PolyModel.from_dict(json.load(fh))
        roles = {"Temperature": "output", **{n: "candidate_input" for n in model.input_names}}
        table = load_csv(data, roles)
        got = load_csv(j("sim", "simulated.csv"), {"simulated": "output"}).column("simulated")
        expect(np.max(np.abs(got - simulate(model, table.columns(model.input_names)))) < 1e-12, "simulate round trip")
        again = PolyModel.from_json(model.to_json())
        expect(np.array_equal(simulate(again, table), simulate(model, table)), "model JSON reload")
        with open(j("fit", "fit_report.json")) as fh:
            rep = json.load(fh)
        expect(rep["model"]["input_names"] == ["Light", "CO2", "Occupancy"], "explicit inputs recorded")
        expect(rep["options"]["orders"] == [4, 4, 4] and rep["options"]["delays"] == 1, "order and delay recorded")
        with open(j("cmp", "comparison.json")) as fh:
            expect(len(json.load(fh)["rows"]) == 9, "nine-row zoo")

        # every JSON validates, every CSV re-ingests
        n_json = n_csv = 0
        for path in glob.glob(j("**", "*.json"), recursive=True):
            with open(path) as fh:
                doc = json.load(fh)
            if "kind" in doc:
                try:
                    validate(doc)
                    n_json += 1
                except Exception as exc:
                    failures.append(f"{os.path.basename(path)} schema: {exc.__class__.__name__}")
        for path in glob.glob(j("**", "*.csv"), recursive=True):
            with open(path, newline="") as fh:
                header = next(csv.reader(fh))
            numeric = [h for h in header if h not in ("label", "method", "order", "error", "")]
            try:
                load_csv(path, {numeric[0]: "output", **{h: "candidate_input" for h in numeric[1:]}}, missing="ffill")
                n_csv += 1
            except Exception as exc:
                failures.append(f"{os.path.basename(path)} re-ingest: {exc}")
    detail = f"{n_json} JSON documents valid, {n_csv} CSV files re-ingested"
    return not failures, detail + ("" if not failures else f"; failed: {failures}")


def test_criterion_8_cli_contract():
    passed, detail, dt = timed(criterion_8)
    assert report(8, "CLI contract", passed, detail, dt)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
