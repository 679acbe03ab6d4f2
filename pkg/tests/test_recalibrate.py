import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fulllik import likelihoods as lk
from fulllik import metrics as mt
from fulllik import recalibrate as rc
from fulllik import transforms as tf
from fulllik.fitting import FitConfig
from oracles import isotonic_brute_force

FAST = FitConfig(lr=0.01, steps=1500, clip_norm=1.0, seed=0)


def _sample_labels(z, tau, seed):
    rng = np.random.default_rng(seed)
    p = lk.softmax_probs(z, tau)
    return (rng.random(len(z))[:, None] > np.cumsum(p, axis=1)).sum(axis=1)


def _classification_input(n, k=3, tau=1.0, seed=0, features=False):
    rng = np.random.default_rng(seed)
    z = rng.normal(0, 2.0, (n, k))
    f = rng.normal(size=(n, 4)) if features else None
    return rc.CalibrationInput(z, _sample_labels(z, tau, seed + 1000), features=f)


# ------------------------------------------------------------------ isotonic

@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=8),
       st.lists(st.floats(0.1, 3.0), min_size=8, max_size=8))
def test_pav_matches_brute_force(y, w):
    y = np.array(y)
    w = np.array(w[:len(y)])
    np.testing.assert_allclose(rc.pav(y, w), isotonic_brute_force(y, w), atol=1e-9)


def test_pav_exhaustive_small_patterns():
    for n in range(1, 9):
        for y in itertools.product((0.0, 1.0, 2.0), repeat=min(n, 6)):
            y = np.array(y)
            np.testing.assert_allclose(rc.pav(y), isotonic_brute_force(y), atol=1e-12)


@given(st.lists(st.tuples(st.floats(-3, 3, allow_nan=False), st.floats(-3, 3, allow_nan=False)),
                min_size=1, max_size=40))
def test_isotonic_nondecreasing(pairs):
    s = np.array([p[0] for p in pairs])
    t = np.array([p[1] for p in pairs])
    m = rc.fit_isotonic(s, t)
    grid = np.linspace(-4, 4, 101)
    assert np.all(np.diff(m(grid)) >= -1e-12)


def test_isotonic_identity_on_monotone_pairs():
    s = np.array([0.05, 0.2, 0.4, 0.7, 0.9])
    m = rc.fit_isotonic(s, s)
    np.testing.assert_array_equal(m(s), s)


# ------------------------------------------------------------ global scaling

def test_gs_recovers_half_on_twice_overconfident_logits():
    # labels follow softmax(z * 0.5): the logits are 2x overconfident
    rng = np.random.default_rng(3)
    z = rng.normal(0, 3.0, (20000, 3))
    val = rc.CalibrationInput(z, _sample_labels(z, 0.5, 4))
    rec = rc.fit_recalibrator("global_scaling", val, FAST)
    assert rec.params["tau"] == pytest.approx(0.5, abs=0.03)


def test_gs_near_one_when_calibrated():
    val = _classification_input(20000, seed=5)
    rec = rc.fit_recalibrator("global_scaling", val, FAST)
    assert 0.95 <= rec.params["tau"] <= 1.05


def test_gs_tau_one_is_identity():
    val = _classification_input(200, seed=6)
    rec = rc.fit_recalibrator("global_scaling", val, FitConfig(steps=1))
    provider, _ = rec.state
    provider.store[...] = provider.transforms[0].inverse(1.0)
    np.testing.assert_allclose(rc.apply_recalibrator(rec, val), lk.softmax_probs(val.outputs),
                               rtol=1e-12)


def test_temperature_limits():
    z = np.array([[2.0, 1.0]])
    np.testing.assert_allclose(lk.softmax_probs(z, 1e3), [[1.0, 0.0]], atol=1e-12)
    np.testing.assert_allclose(lk.softmax_probs(z, 1e-9), [[0.5, 0.5]], atol=1e-8)


# ----------------------------------------------------------------- apply

@pytest.mark.parametrize("kind", ["global_scaling", "linear_scaling", "linear_feature_scaling"])
def test_argmax_invariance_and_valid_rows(kind):
    val = _classification_input(300, tau=0.5, seed=7, features=True)
    test = _classification_input(200, tau=0.5, seed=8, features=True)
    rec = rc.fit_recalibrator(kind, val, FAST)
    p = rc.apply_recalibrator(rec, test)
    assert p.shape == test.outputs.shape
    assert np.array_equal(p.argmax(axis=1), test.outputs.argmax(axis=1))
    assert np.all((p >= 0) & (p <= 1))
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("kind", ["vector_scaling", "platt", "isotonic", "deep_scaling"])
def test_other_kinds_emit_probabilities(kind):
    val = _classification_input(300, tau=0.5, seed=9, features=True)
    rec = rc.fit_recalibrator(kind, val, FitConfig(lr=0.01, steps=300, seed=0))
    p = rc.apply_recalibrator(rec, val)
    assert p.shape == val.outputs.shape and np.all((p >= 0) & (p <= 1))
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_vector_scaling_can_change_argmax():
    # class 1 always wins on the logits but class 0 is the true label whenever
    # the gap is small; reweighting lifts class 0 above class 1 on such rows
    z = np.array([[1.0, 1.2]] * 60 + [[0.0, 3.0]] * 40)
    y = np.array([0] * 60 + [1] * 40)
    val = rc.CalibrationInput(z, y)
    rec = rc.fit_recalibrator("vector_scaling", val, FitConfig(lr=0.05, steps=2000))
    p = rc.apply_recalibrator(rec, val)
    assert np.all(z.argmax(axis=1) == 1)
    assert np.any(p.argmax(axis=1) == 0)


@pytest.mark.parametrize("kind", ["global_scaling", "linear_scaling", "linear_feature_scaling",
                                  "deep_scaling"])
def test_validation_nll_not_increased(kind):
    val = _classification_input(300, tau=0.5, seed=10, features=True)
    init = rc.fit_recalibrator(kind, val, FitConfig(steps=1, lr=1e-12))
    rec = rc.fit_recalibrator(kind, val, FAST)
    assert rc.validation_nll(rec, val) <= rc.validation_nll(init, val) + 1e-6
    # the one-step, tiny-lr fit sits at tau = 1: the raw softmax NLL
    raw = float(np.mean(lk.softmax_nll(val.outputs, 1.0, val.targets)))
    assert rc.validation_nll(init, val) == pytest.approx(raw, abs=1e-9)


def test_temperature_floor():
    # labels independent of huge logits push tau toward zero
    rng = np.random.default_rng(11)
    z = rng.normal(0, 50.0, (500, 3))
    val = rc.CalibrationInput(z, rng.integers(0, 3, 500), features=rng.normal(size=(500, 4)))
    floor = tf.shifted_softplus(rc.HEAD_SHIFT).lower
    for kind in ("global_scaling", "linear_scaling", "linear_feature_scaling"):
        rec = rc.fit_recalibrator(kind, val, FitConfig(lr=0.05, steps=500, seed=0))
        tau = rc._head_params(rec, val)[:, 0]
        assert np.all(tau >= floor) and floor > 0


def test_errors():
    z = np.random.default_rng(0).normal(size=(20, 3))
    with pytest.raises(ValueError):
        rc.fit_recalibrator("global_scaling", rc.CalibrationInput(z, np.zeros(20)))
    with pytest.raises(ValueError):
        rc.CalibrationInput(z, np.zeros(19))
    with pytest.raises(ValueError):
        rc.fit_recalibrator("nope", rc.CalibrationInput(z, np.arange(20) % 3))
    rec = rc.fit_recalibrator("global_scaling", rc.CalibrationInput(z, np.arange(20) % 3),
                              FitConfig(steps=5))
    with pytest.raises(ValueError):
        rc.apply_recalibrator(rec, rc.CalibrationInput(z[:, :2], np.arange(20) % 2))
    with pytest.raises(ValueError):
        rc.fit_recalibrator("linear_feature_scaling", rc.CalibrationInput(z, np.arange(20) % 3))


# ------------------------------------------------------------ comparisons

def test_null_case_within_noise_floor():
    val = _classification_input(3000, seed=12, features=True)
    test = _classification_input(3000, seed=13, features=True)
    table, _ = rc.compare_methods(val, test, cfg=FAST)
    rows = {r["method"]: r["ece"] for r in table}
    # ECE sampling noise at n=3000 with 15 bins is about 0.01-0.02
    for method, e in rows.items():
        assert e is not None and abs(e - rows["Uncalibrated"]) <= 0.02, method


def test_regression_gs_on_misscaled_sigma():
    def split(n, seed):
        r = np.random.default_rng(seed)
        mu = r.normal(size=n)
        return rc.CalibrationInput(mu, mu + 2.0 * r.normal(size=n), sigma=np.ones(n),
                                   task="regression")

    val, test = split(2000, 15), split(2000, 16)
    table, _ = rc.compare_methods(val, test, kinds=("isotonic", "global_scaling"), cfg=FAST)
    rows = {r["method"]: r["cal"] for r in table}
    assert rows["GS"] < 0.25 * rows["Uncalibrated"]
    assert rows["GS"] <= rows["Isotonic"] + 0.01
    assert table[2]["sigma"] == pytest.approx(2.0, rel=0.05)


def test_regression_deep_scaling_tracks_heteroskedastic_sigma():
    r = np.random.default_rng(17)
    x = r.uniform(-1, 1, (3000, 1))
    sig = 0.5 + np.abs(x[:, 0])
    mu = np.zeros(3000)
    val = rc.CalibrationInput(mu, sig * r.normal(size=3000), features=x, task="regression")
    rec = rc.fit_recalibrator("deep_scaling", val, FitConfig(lr=0.01, steps=1500, seed=0))
    pred = rc.apply_recalibrator(rec, val)["sigma"]
    assert np.corrcoef(pred, sig)[0, 1] > 0.9
    assert mt.cal_regression(mu, pred, val.targets) < 0.01
