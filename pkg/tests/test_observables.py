import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morsedeco.errors import DomainError, PositivityError
from morsedeco.morse import StateVector, coherent_state, eigenstate
from morsedeco.observables import (CSV_COLUMNS, TrajectoryRecord, autocorrelation, entropy,
                                   expectation, purity, read_trajectory_csv, trace_distance)


def random_mixture(n, rng):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    r = a @ a.conj().T
    return r / np.trace(r).real


def test_expectation_identity_and_diagonal(model):
    rho = eigenstate(model, 7).density_matrix()
    assert expectation(np.eye(model.n_bound), rho) == pytest.approx(1.0)
    assert expectation(model.x_matrix, rho) == pytest.approx(model.x_matrix[7, 7])


def test_momentum_of_real_state_vanishes(model):
    psi = coherent_state(model, 1.0)
    assert np.allclose(psi.amplitudes.imag, 0)
    # brute-force: sum over i(E_m - E_n) x_mn c_m c_n is antisymmetric in (m, n)
    c = psi.amplitudes.real
    e, x = model.energies, model.x_matrix
    brute = sum(0.5j * (e[m] - e[n]) * x[m, n] * c[m] * c[n]
                for m in range(len(c)) for n in range(len(c)))
    assert abs(brute) < 1e-9
    assert abs(expectation(model.p_matrix, psi.density_matrix())) < 1e-9


def test_expectation_errors():
    with pytest.raises(DomainError):
        expectation(np.eye(3), np.eye(2) / 2)
    with pytest.raises(DomainError):
        expectation(np.array([[0, 1j], [1j, 0]]), np.array([[0.5, 0.5], [0.5, 0.5]]))


def test_entropy_reference_values():
    assert abs(entropy(np.diag([1.0, 0, 0]))) < 1e-9
    assert entropy(np.eye(55) / 55) == pytest.approx(math.log(55))
    assert math.log(55) == pytest.approx(4.0073, abs=1e-4)
    assert entropy(np.diag([0.5, 0.5, 0.0])) == pytest.approx(math.log(2))


def test_entropy_clamp_and_error():
    assert entropy(np.diag([1 + 5e-7, -5e-7])) == pytest.approx(0.0, abs=1e-5)
    with pytest.raises(PositivityError):
        entropy(np.diag([1.01, -0.01]))


def test_purity_reference_values():
    psi = StateVector(np.array([0.6, 0.8j]))
    assert purity(psi.density_matrix()) == pytest.approx(1.0)
    assert purity(np.eye(55) / 55) == pytest.approx(1 / 55)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_purity_bounded_by_entropy(seed):
    # Renyi-2 entropy never exceeds von Neumann entropy
    rho = random_mixture(8, np.random.default_rng(seed))
    assert purity(rho) >= math.exp(-entropy(rho)) - 1e-12
    assert 1 / 8 - 1e-12 <= purity(rho) <= 1 + 1e-12


def test_autocorrelation(model):
    psi = coherent_state(model, 0.5)
    assert autocorrelation(psi.density_matrix(), psi) == pytest.approx(1.0)
    mixed = np.eye(model.n_bound) / model.n_bound
    assert autocorrelation(mixed, psi) == pytest.approx(1 / model.n_bound)
    phase = StateVector(psi.amplitudes * np.exp(-1j * model.energies * 0.3))
    ov = abs(np.vdot(psi.amplitudes, phase.amplitudes)) ** 2
    assert autocorrelation(phase.density_matrix(), psi) == pytest.approx(ov)


def test_trace_distance_reference_values():
    a = np.diag([1.0, 0.0])
    b = np.diag([0.0, 1.0])
    assert trace_distance(a, a) == 0
    assert trace_distance(a, b) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        trace_distance(a, np.eye(3) / 3)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_trace_distance_metric(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_mixture(5, rng) for _ in range(3))
    dab = trace_distance(a, b)
    assert 0 <= dab <= 1
    assert dab == pytest.approx(trace_distance(b, a))
    assert dab <= trace_distance(a, c) + trace_distance(c, b) + 1e-12


def test_csv_roundtrip(tmp_path):
    rec = TrajectoryRecord.empty(t0=0.5)
    for k in range(3):
        rec.append(times=0.1 * k, x_exp=k, p_exp=-k, energy=1.0, entropy=0.0, purity=1.0,
                   trace_err=0.0, min_eig=0.0, autocorr=1.0, herm_drift=0.0)
    rec.finalize()
    path = tmp_path / "t.csv"
    rec.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# morsedeco trajectory schema v1")
    assert lines[1].split(",")[:8] == ["t", "x_exp", "p_exp", "energy", "entropy",
                                        "purity", "trace_err", "min_eig"]
    cols = read_trajectory_csv(path)
    assert list(cols) == list(CSV_COLUMNS)
    assert np.allclose(cols["t_over_t0"], [0, 0.2, 0.4])
