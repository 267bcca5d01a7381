"""Thermal-oscillator environment: Bose factors, omega**3-weighted emission and
absorption operators, transition rates and coupling calibration."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCouplingError, DomainError


@dataclass(frozen=True)
class EnvironmentSpec:
    """Bath temperature in units of hbar*omega01/k and overall coupling lambda.

    ``omega01`` is the system's E_1 - E_0 and converts the temperature into
    per-transition Boltzmann factors.
    """

    temperature: float
    coupling: float
    omega01: float

    def __post_init__(self):
        if not self.temperature >= 0:
            raise DomainError(f"temperature must be >= 0, got {self.temperature!r}")
        if not self.coupling >= 0:
            raise DomainError(f"coupling must be >= 0, got {self.coupling!r}")
        if not self.omega01 > 0:
            raise DomainError(f"omega01 must be positive, got {self.omega01!r}")

    @classmethod
    def for_model(cls, model, temperature, coupling):
        return cls(float(temperature), float(coupling), model.omega01)

    @property
    def kT(self):
        return self.temperature * self.omega01


def bose_occupation(omega, env):
    """Mean thermal occupation 1/(exp(omega/kT) - 1); zero at T = 0."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("bose_occupation needs omega > 0")
    if env.temperature == 0:
        out = np.zeros_like(omega)
    else:
        with np.errstate(over="ignore"):
            out = 1.0 / np.expm1(omega / env.kT)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DissipatorOperators:
    """Matrices entering the dissipator, all in the energy eigenbasis.

    x_lower[m, n] = <m|X|n> for m < n (the lowering part), xe and xa its
    emission- and absorption-weighted versions.  rates[i, k] is the k -> i
    transition probability per unit time; gamma_c[j, i] the decay rate of the
    coherence <i|rho|j> in the secular equation.
    """

    x_lower: np.ndarray
    xe: np.ndarray
    xa: np.ndarray
    rates: np.ndarray
    gamma_c: np.ndarray

    def __post_init__(self):
        for name in ("x_lower", "xe", "xa", "rates", "gamma_c"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def is_zero(self):
        return not (self.xe.any() or self.xa.any())

    @property
    def size(self):
        return self.x_lower.shape[0]

    def pauli_generator(self):
        """Matrix G with dP/dt = G @ P."""
        return self.rates - np.diag(self.rates.sum(axis=0))


def transition_frequencies(energies):
    e = np.asarray(energies, dtype=float)
    return np.abs(e[:, None] - e[None, :])


def build_dissipator(model, env):
    n = model.n_bound
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    omega = transition_frequencies(model.energies)
    nbar = np.zeros((n, n))
    if env.temperature > 0:
        nbar[upper] = bose_occupation(omega[upper], env)
    x_lower = np.where(upper, np.real(model.x_matrix), 0.0)
    weight = env.coupling * omega ** 3
    xe = np.where(upper, x_lower * weight * (nbar + 1.0), 0.0)
    xa = np.where(upper, x_lower * weight * nbar, 0.0)

    # gamma[i, k], i < k: emission k -> i; i > k: absorption k -> i
    down = 2.0 * xe * x_lower
    up = 2.0 * xa * x_lower
    rates = down + up.T
    gamma_c = _coherence_rates(rates)
    return DissipatorOperators(x_lower, xe, xa, rates, gamma_c)


def _coherence_rates(rates):
    # Gamma_c[j, i] = 1/2 sum_k (gamma[k, i] + gamma[k, j]): half the total
    # outflow from each of the two levels
    out = rates.sum(axis=0)
    return 0.5 * (out[:, None] + out[None, :])


def ground_rate(model, coupling):
    """gamma_01 at zero temperature for a given coupling."""
    x01 = float(np.real(model.x_matrix[0, 1]))
    return 2.0 * coupling * x01 ** 2 * model.omega01 ** 3


def calibrate_lambda(model, ratio):
    """Coupling for which omega01 / gamma01 = ratio at zero temperature."""
    if not ratio > 0:
        raise DomainError(f"ratio must be positive, got {ratio!r}")
    x01 = float(np.real(model.x_matrix[0, 1]))
    if x01 == 0.0 or not math.isfinite(x01):
        raise DegenerateCouplingError("<0|X|1> vanishes; the ground transition is dark")
    return 1.0 / (2.0 * ratio * x01 ** 2 * model.omega01 ** 2)


def largest_rates(diss, count=10):
    """(rate, from_level, to_level) for the ``count`` fastest transitions."""
    r = diss.rates
    flat = np.argsort(r, axis=None)[::-1][:count]
    out = []
    for idx in flat:
        i, k = np.unravel_index(idx, r.shape)
        if r[i, k] > 0:
            out.append((float(r[i, k]), int(k), int(i)))
    return out
