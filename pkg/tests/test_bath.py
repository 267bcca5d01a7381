import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from morsedeco.bath import (EnvironmentSpec, bose_occupation, build_dissipator,
                            calibrate_lambda, ground_rate, largest_rates)
from morsedeco.errors import DegenerateCouplingError, DomainError
from morsedeco.morse import SpectralModel, harmonic_model


def env(model, t, lam=1.0):
    return EnvironmentSpec.for_model(model, t, lam)


def test_environment_validation():
    with pytest.raises(DomainError):
        EnvironmentSpec(-1.0, 0.1, 1.0)
    with pytest.raises(DomainError):
        EnvironmentSpec(1.0, -0.1, 1.0)


def test_bose_occupation_values(model):
    e = env(model, 10.0)
    w = model.omega01
    assert bose_occupation(w, e) == pytest.approx(1 / math.expm1(0.1))
    assert bose_occupation(w, env(model, 0.0)) == 0.0
    with pytest.raises(DomainError):
        bose_occupation(0.0, e)


def test_bose_high_temperature_limit(model):
    e = env(model, 1e4)
    assert bose_occupation(model.omega01, e) == pytest.approx(1e4 - 0.5, rel=1e-6)


def test_zero_temperature_has_no_absorption(model):
    d = build_dissipator(model, env(model, 0.0, 1e-6))
    assert not d.xa.any()
    assert not np.tril(d.rates).any()


def test_dissipator_structure(model):
    d = build_dissipator(model, env(model, 5.0, 1e-6))
    assert np.array_equal(np.tril(d.x_lower), np.zeros_like(d.x_lower))
    assert np.all(d.rates >= 0)
    assert np.all(np.diag(d.rates) == 0)


def test_rates_brute_force(model):
    lam, t = 1e-6, 5.0
    d = build_dissipator(model, env(model, t, lam))
    e, x = model.energies, model.x_matrix
    kT = t * model.omega01
    for i, k in [(0, 1), (3, 7), (10, 2), (40, 41), (54, 0)]:
        w = abs(e[i] - e[k])
        nbar = 1 / (math.exp(w / kT) - 1)
        occ = nbar + 1 if i < k else nbar
        ref = 2 * lam * x[i, k] ** 2 * w ** 3 * occ
        assert d.rates[i, k] == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("t", [0.3, 5.0, 10.0])
def test_detailed_balance(model, t):
    d = build_dissipator(model, env(model, t, 1e-6))
    e = model.energies
    kT = t * model.omega01
    i, k = np.triu_indices(model.n_bound, 1)
    ok = d.rates[i, k] > 1e-300
    lhs = d.rates[i, k][ok] / d.rates[k, i][ok]
    rhs = np.exp((e[k] - e[i])[ok] / kT)
    assert np.max(np.abs(lhs / rhs - 1)) < 1e-10


def test_coherence_rates_brute_force(model):
    d = build_dissipator(model, env(model, 5.0, 1e-6))
    g = d.rates
    for i, j in [(0, 0), (0, 1), (5, 9), (30, 2)]:
        ref = 0.5 * sum(g[k, i] + g[k, j] for k in range(model.n_bound))
        assert d.gamma_c[j, i] == pytest.approx(ref, rel=1e-12)


def test_calibration_reproduces_ratio(model):
    for ratio in (1e5, 4e3):
        lam = calibrate_lambda(model, ratio)
        assert model.omega01 / ground_rate(model, lam) == pytest.approx(ratio, rel=1e-12)
    assert calibrate_lambda(model, 4e3) / calibrate_lambda(model, 1e5) == pytest.approx(25.0)


def test_calibration_errors(model):
    with pytest.raises(DomainError):
        calibrate_lambda(model, 0.0)
    dark = SpectralModel(np.array([0.0, 1.0]), np.eye(2), np.zeros((2, 2)))
    with pytest.raises(DegenerateCouplingError):
        calibrate_lambda(dark, 10.0)


def test_harmonic_dissipator_is_amplitude_damping():
    m = harmonic_model(8, 1.0)
    d = build_dissipator(m, EnvironmentSpec(0.0, 0.05, 1.0))
    # xe is proportional to the lowering operator, with gamma01 = 2 lam
    a = np.diag(np.sqrt(np.arange(1, 8)), 1)
    assert np.allclose(d.xe, 0.05 * a)
    assert d.rates[0, 1] == pytest.approx(0.1)


def test_largest_rates_sorted(model):
    d = build_dissipator(model, env(model, 0.0, calibrate_lambda(model, 1e5)))
    top = largest_rates(d, 10)
    assert len(top) == 10
    r = [t[0] for t in top]
    assert r == sorted(r, reverse=True)
    assert all(k == i + 1 for _, k, i in top)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.05, max_value=50.0), st.floats(min_value=0.1, max_value=500.0))
def test_bose_detailed_balance_identity(t, w):
    assume(w / t < 600)
    e = EnvironmentSpec(t, 1.0, 1.0)
    n = bose_occupation(w, e)
    assert (n + 1) / n == pytest.approx(math.exp(w / t), rel=1e-9)
