import json

import numpy as np
import pytest

from nmiarmax.errors import ConfigError, DataError, RankDeficientError
from nmiarmax.linmodels import FitOptions, PolyModel, fit_armax, simulate
from nmiarmax.statespace import (
    SSModel,
    SSOptions,
    evaluate_ss,
    fit_ss,
    from_polymodel,
    ho_kalman,
    markov_parameters,
    predict_one_step_ss,
    similarity_transform,
    simulate_ss,
)
from nmiarmax.synth import InputProcess, GeneratorSpec, generate, random_stable_polymodel

TRUE_SS = SSModel(
    A=[[0.8, 0.2], [-0.3, 0.6]],
    B=[[1.0], [0.5]],
    C=[[1.0, -0.4]],
    D=[[0.0]],
    input_names=("u",),
)


def noiseless_ss_table(n=600, seed=0):
    # no warmup, so the true system starts from the zero state like the simulations below
    spec = GeneratorSpec(TRUE_SS, (InputProcess("white"),), noise_std=0.0, n_samples=n, seed=seed, warmup=0)
    return generate(spec)[0]


def test_zero_in_zero_out():
    np.testing.assert_array_equal(simulate_ss(TRUE_SS, np.zeros((20, 1))), np.zeros(20))


def test_scalar_impulse():
    m = SSModel(A=[[0.5]], B=[[1.0]], C=[[1.0]], D=[[0.0]])
    u = np.zeros((6, 1))
    u[0] = 1.0
    np.testing.assert_allclose(simulate_ss(m, u), [0, 1, 0.5, 0.25, 0.125, 0.0625], atol=1e-15)


def test_dimension_checks():
    with pytest.raises(ConfigError):
        SSModel(A=[[1.0, 0.0]], B=[[1.0]], C=[[1.0]])
    with pytest.raises(ConfigError):
        SSModel(A=[[0.5]], B=[[1.0]], C=[[1.0, 2.0]])


def test_companion_form_matches_polymodel():
    rng = np.random.default_rng(1)
    for _ in range(25):
        pm = random_stable_polymodel(rng, na=3, nb=2, nc=0, n_inputs=2)
        ss = from_polymodel(pm)
        u = rng.normal(size=(150, 2))
        assert np.max(np.abs(simulate_ss(ss, u) - simulate(pm, u))) < 1e-9


def test_similarity_invariance():
    rng = np.random.default_rng(2)
    u = rng.normal(size=(200, 1))
    T = rng.normal(size=(2, 2)) + 2 * np.eye(2)
    moved = similarity_transform(TRUE_SS, T)
    assert np.max(np.abs(simulate_ss(moved, u) - simulate_ss(TRUE_SS, u))) < 1e-8


def test_ho_kalman_exact():
    rng = np.random.default_rng(3)
    for order in (1, 2, 4):
        pm = random_stable_polymodel(rng, na=order, nb=order - 1, nc=0, n_inputs=1)
        pm = PolyModel(a=pm.a, b=pm.b, delays=(1,))
        truth = from_polymodel(pm)
        h = markov_parameters(truth, 4 * order + 3)
        r = ho_kalman(h, order)
        realized = SSModel(A=r.A, B=r.B, C=r.C, D=r.D)
        h2 = markov_parameters(realized, 2 * order + 1)
        assert np.max(np.abs(h2[1:] - h[1 : 2 * order + 1])) < 1e-8


def test_ho_kalman_rank_deficient():
    h = markov_parameters(SSModel(A=[[0.5]], B=[[1.0]], C=[[1.0]]), 20)
    with pytest.raises(RankDeficientError):
        ho_kalman(h, 3)


def test_noiseless_order2_recovery():
    train = noiseless_ss_table(600, seed=0)
    model, rep = fit_ss(train, 2)
    test = noiseless_ss_table(400, seed=5)
    truth = test.column("y")
    sim = simulate_ss(model, test)
    rms = np.sqrt(np.mean((sim - truth) ** 2))
    assert rms < 1e-6
    assert model.stable and rep.method == "SS2"


def test_order_one_below_armax_on_rich_dynamics():
    rng = np.random.default_rng(4)
    pm = PolyModel(a=np.real(np.poly([0.9 * np.exp(0.5j), 0.9 * np.exp(-0.5j), 0.6, -0.4]))[1:], b=([1.0, 0.4],), c=[0.3], delays=(1,), input_names=("u",))
    table, _ = generate(GeneratorSpec(pm, (InputProcess("white"),), noise_std=0.05, n_samples=3000, seed=7))
    _, ss1 = fit_ss(table, 1)
    armax = fit_armax(table, FitOptions(orders=(4, 4, 4)))
    assert ss1.train_fit_pct < armax.train_fit_pct


def test_train_fit_nondecreasing_in_order():
    pm = PolyModel(a=np.real(np.poly([0.9, 0.7 * np.exp(0.8j), 0.7 * np.exp(-0.8j), 0.5]))[1:], b=([1.0, 0.2],), c=[0.2], delays=(1,), input_names=("u",))
    table, _ = generate(GeneratorSpec(pm, (InputProcess("white"),), noise_std=0.05, n_samples=3000, seed=3))
    fits = [fit_ss(table, n)[1].train_fit_pct for n in (1, 2, 4)]
    assert fits[0] <= fits[1] + 1e-6 and fits[1] <= fits[2] + 1e-6


def test_too_short_for_order():
    with pytest.raises(DataError):
        fit_ss(noiseless_ss_table(60), 30)


def test_one_step_and_evaluate():
    train = noiseless_ss_table(600, seed=1)
    model, _ = fit_ss(train, 2)
    test = noiseless_ss_table(300, seed=8)
    free, one = evaluate_ss(model, test)
    assert free > 99.99 and one > 99.99
    assert predict_one_step_ss(model, test).shape == (300,)


def test_json_roundtrip(schema_validator):
    doc = json.loads(TRUE_SS.to_json())
    schema_validator(doc, "ss_model")
    back = SSModel.from_dict(doc)
    u = np.random.default_rng(0).normal(size=(40, 1))
    np.testing.assert_array_equal(simulate_ss(back, u), simulate_ss(TRUE_SS, u))
    assert doc["A"]["data"] == [0.8, 0.2, -0.3, 0.6]


def test_ss_options_arx_order():
    model, rep = fit_ss(noiseless_ss_table(600), 2, SSOptions(arx_order=12))
    assert model.order == 2
