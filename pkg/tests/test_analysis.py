import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morsedeco.analysis import (detect_decoherence_time, detect_revivals, envelope_peaks,
                                fit_exponential, ground_state_widths, locate_hills,
                                oscillation_amplitude, revival_time, sector_masses,
                                sector_uniformity, smooth, two_segment_fit)
from morsedeco.errors import DomainError, InconclusiveError
from morsedeco.morse import coherent_state
from morsedeco.wigner import GridSpec, PhaseSpaceGrid


def test_two_segment_recovers_exact_breakpoint():
    t = np.linspace(0, 100, 401)
    y = np.minimum(0.1 * t, 0.1 * 37.0 + 0.005 * (t - 37.0))
    tb, s1, s2, rms = two_segment_fit(t, y)
    assert abs(tb - 37.0) <= t[1] - t[0]
    assert s1 == pytest.approx(0.1, rel=1e-6)
    assert s2 == pytest.approx(0.005, rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=10, max_value=90), st.floats(min_value=0.02, max_value=1.0),
       st.floats(min_value=0.0, max_value=0.2))
def test_decoherence_time_synthetic(t_star, a, frac):
    t = np.linspace(0, 100, 201)
    b = frac * a
    s = np.minimum(a * t, a * t_star + b * (t - t_star))
    fit = detect_decoherence_time(t, s, window=1)
    assert abs(fit.t_d - t_star) <= t[1] - t[0]


def test_smoothing_preserves_lines():
    y = 3.0 + 0.5 * np.arange(50)
    assert np.allclose(smooth(y)[2:-2], y[2:-2])


def test_single_slope_is_inconclusive():
    t = np.linspace(0, 50, 100)
    with pytest.raises(InconclusiveError) as err:
        detect_decoherence_time(t, 0.2 * t)
    assert err.value.fit is not None


def test_decoherence_time_needs_samples():
    with pytest.raises(DomainError):
        detect_decoherence_time(np.arange(10.0), np.arange(10.0))


def test_purity_cross_check():
    t = np.linspace(0, 100, 501)
    s = np.minimum(0.05 * t, 0.05 * 40 + 0.002 * (t - 40))
    p = np.maximum(1 - 0.02 * t, 1 - 0.02 * 41 - 0.001 * (t - 41))
    fit = detect_decoherence_time(t, s, p)
    assert fit.cross_check_t_d == pytest.approx(41, abs=0.5)
    assert fit.consistent
    rep = fit.report("abc")
    assert set(rep) == {"t_d", "pre_slope", "post_slope", "residual", "method", "config_hash"}


def test_exponential_fit_exact():
    x = np.array([0.25, 0.5, 1.0, 1.5, 2.0])
    law = fit_exponential(list(zip(x, 93 * np.exp(-0.97 * x))))
    assert law.t_d0 == pytest.approx(93, rel=1e-10)
    assert law.kappa == pytest.approx(0.97, rel=1e-10)
    assert law.r_squared == pytest.approx(1.0)
    assert law.x0_range == (0.25, 2.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(min_value=1, max_value=200), min_size=4, max_size=8))
def test_exponential_fit_scaling(tds):
    pts = [(0.3 * k, td) for k, td in enumerate(tds)]
    a = fit_exponential(pts)
    b = fit_exponential([(x, 2 * td) for x, td in pts])
    assert b.t_d0 == pytest.approx(2 * a.t_d0, rel=1e-9)
    assert b.kappa == pytest.approx(a.kappa, abs=1e-9)


def test_exponential_fit_errors():
    with pytest.raises(DomainError):
        fit_exponential([(0, 1), (1, 2), (2, 3)])
    with pytest.raises(DomainError):
        fit_exponential([(0, 1), (1, 2), (2, 3), (3, 0)])


def test_revival_time_of_morse_spectrum(model):
    assert revival_time(model.energies) == pytest.approx(2 * math.pi)
    assert revival_time(np.arange(10.0)) == math.inf


def test_harmonic_revivals_every_period():
    omega = 3.0
    t = np.linspace(0, 10, 2001)
    c = np.exp(-2.0) * np.array([2.0 ** k / math.sqrt(math.factorial(k)) for k in range(30)])
    phases = np.exp(-1j * omega * np.outer(t, np.arange(30)))
    auto = np.abs(phases @ np.abs(c) ** 2) ** 2
    period = 2 * math.pi / omega
    revs = detect_revivals(t, auto, t_rev=period)
    assert len(revs) == int(10 / period)
    assert all(r.kind == "full" for r in revs)
    assert np.allclose([r.time for r in revs], period * np.arange(1, len(revs) + 1), atol=t[1])


def test_unitary_morse_revivals(model):
    psi = coherent_state(model, 0.5)
    w = np.abs(psi.amplitudes) ** 2
    t0 = 2 * math.pi / (2 * model.s)
    t = np.arange(0, 132 * t0, t0 / 20)
    auto = np.abs(np.exp(-1j * np.outer(t, model.energies)) @ w) ** 2
    revs = detect_revivals(t / t0, auto, t_rev=revival_time(model.energies) / t0, period=1.0)
    times = {r.kind: [] for r in revs}
    for r in revs:
        times[r.kind].append(r.time)
    for target, kind in ((27.5, "quarter"), (55.0, "half"), (110.0, "full")):
        assert min(abs(x - target) for x in times[kind]) < 2.0


def test_envelope_peaks_plain():
    t = np.linspace(0, 10, 1001)
    y = np.exp(-(t - 3) ** 2) + 0.5 * np.exp(-(t - 7) ** 2)
    pt, ph = envelope_peaks(t, y)
    assert np.allclose(pt, [3, 7], atol=0.01)
    assert ph[0] > ph[1]


def test_oscillation_amplitude():
    t = np.linspace(0, 20, 2001)
    y = 2.0 + 0.3 * np.sin(2 * math.pi * t)
    amp = oscillation_amplitude(t, y, 1.0)
    assert np.allclose(amp[100:-100], 0.3, atol=1e-3)


def _gauss_grid(centers, spec=GridSpec(nx=128, n_p=128), sx=0.1, sp=5.0):
    x, p = spec.xs[:, None], spec.ps[None, :]
    w = sum(np.exp(-((x - a) / sx) ** 2 / 2 - ((p - b) / sp) ** 2 / 2) for a, b in centers)
    g = PhaseSpaceGrid(spec, w)
    return PhaseSpaceGrid(spec, w / g.norm())


def test_locate_hills_two_packets():
    g = _gauss_grid([(0.5, 0.0), (-0.3, 10.0)])
    hills = locate_hills(g)
    assert len(hills) == 2
    got = sorted((h.x, h.p) for h in hills)
    assert abs(got[0][0] + 0.3) < 0.05 and abs(got[1][0] - 0.5) < 0.05


def test_ground_state_widths(model):
    sx, sp = ground_state_widths(model)
    assert sx * sp == pytest.approx(0.5, rel=0.02)
    assert sx == pytest.approx(0.0955, rel=0.02)


def test_sector_uniformity_ring_and_blob():
    spec = GridSpec(nx=200, n_p=200)
    omega = 110.0
    angles = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    ring = _gauss_grid([(0.2 + 0.5 * math.cos(a), 0.5 * omega / 2 * math.sin(a)) for a in angles], spec)
    dev, frac = sector_uniformity(ring, (0.2, 0.0), omega)
    assert dev < 0.1 and frac.sum() == pytest.approx(1.0)
    blob = _gauss_grid([(0.7, 0.0)], spec)
    dev, _ = sector_uniformity(blob, (0.2, 0.0), omega)
    assert dev > 0.5
    assert sector_masses(ring, (0.2, 0.0), omega).sum() == pytest.approx(ring.norm())
