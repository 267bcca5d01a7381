"""Expectation values, mixedness measures and the trajectory record."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PositivityError

POSITIVITY_TOL = 1e-6
CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = ("t", "x_exp", "p_exp", "energy", "entropy", "purity",
               "trace_err", "min_eig", "t_over_t0", "autocorr")


def _as_density(rho):
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError(f"density matrix must be square, got shape {rho.shape}")
    return rho


def _check_dims(a, b):
    if a.shape != b.shape:
        raise DomainError(f"dimension mismatch: {a.shape} vs {b.shape}")


def expectation(op_matrix, rho):
    """Tr(op rho) for Hermitian ``op``."""
    op = np.asarray(op_matrix)
    rho = _as_density(rho)
    _check_dims(op, rho)
    val = np.einsum("ij,ji->", op, rho)
    scale = max(1.0, float(np.abs(op).max()))
    if abs(val.imag) > 1e-9 * scale:
        raise DomainError(f"expectation has imaginary part {val.imag:.3e}; operator or "
                          "state is not Hermitian")
    return float(val.real)


def entropy_from_eigenvalues(evals, tol=POSITIVITY_TOL):
    evals = np.asarray(evals, dtype=float)
    lo = float(evals.min())
    if lo < -tol:
        raise PositivityError(f"eigenvalue {lo:.3e} below -{tol:g}")
    p = evals[evals > 0]
    return float(-np.sum(p * np.log(p)))


def entropy(rho, tol=POSITIVITY_TOL):
    """von Neumann entropy -Tr(rho ln rho); eigenvalues in [-tol, 0) count as 0."""
    rho = _as_density(rho)
    return entropy_from_eigenvalues(np.linalg.eigvalsh(rho), tol)


def purity(rho):
    rho = _as_density(rho)
    # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.vdot(rho, rho).real)


def autocorrelation(rho, initial):
    """<psi0|rho|psi0> for a StateVector, or Tr(rho0 rho) for a density matrix."""
    rho = _as_density(rho)
    amps = getattr(initial, "amplitudes", None)
    if amps is not None:
        if len(amps) != rho.shape[0]:
            raise DomainError(f"dimension mismatch: {len(amps)} vs {rho.shape[0]}")
        val = np.vdot(amps, rho @ amps).real
    else:
        rho0 = _as_density(initial)
        _check_dims(rho0, rho)
        val = np.vdot(rho0, rho).real
    return float(min(1.0, max(0.0, val)))


def trace_distance(a, b):
    """(1/2) sum |eigenvalues(a - b)|."""
    a = _as_density(a)
    b = _as_density(b)
    _check_dims(a, b)
    d = a - b
    d = 0.5 * (d + d.conj().T)
    return float(0.5 * np.abs(np.linalg.eigvalsh(d)).sum())


@dataclass
class TrajectoryRecord:
    """Sampled observables of one trajectory, aligned on ``times``."""

    times: np.ndarray
    x_exp: np.ndarray
    p_exp: np.ndarray
    energy: np.ndarray
    entropy: np.ndarray
    purity: np.ndarray
    trace_err: np.ndarray
    min_eig: np.ndarray
    autocorr: np.ndarray
    herm_drift: np.ndarray
    snapshots: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    t0: float = 1.0
    final_state: np.ndarray | None = None

    CHANNELS = ("times", "x_exp", "p_exp", "energy", "entropy", "purity",
                "trace_err", "min_eig", "autocorr", "herm_drift")

    @classmethod
    def empty(cls, t0=1.0):
        return cls(**{c: [] for c in cls.CHANNELS}, t0=t0)

    def append(self, **values):
        for c in self.CHANNELS:
            getattr(self, c).append(values[c])

    def finalize(self):
        for c in self.CHANNELS:
            setattr(self, c, np.asarray(getattr(self, c), dtype=float))
        for k, v in self.extra.items():
            self.extra[k] = np.asarray(v)
        return self

    def __len__(self):
        return len(self.times)

    @property
    def t_over_t0(self):
        return np.asarray(self.times) / self.t0

    def snapshot_near(self, t):
        if not self.snapshots:
            raise KeyError("record has no snapshots")
        key = min(self.snapshots, key=lambda s: abs(s - t))
        return key, self.snapshots[key]

    def write_csv(self, path):
        write_trajectory_csv(self, path)


def write_trajectory_csv(record, path):
    """One row per sample; a leading '#' line carries the schema version."""
    cols = {
        "t": record.times, "x_exp": record.x_exp, "p_exp": record.p_exp,
        "energy": record.energy, "entropy": record.entropy, "purity": record.purity,
        "trace_err": record.trace_err, "min_eig": record.min_eig,
        "t_over_t0": record.t_over_t0, "autocorr": record.autocorr,
    }
    with open(path, "w", newline="") as fh:
        fh.write(f"# morsedeco trajectory schema v{CSV_SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i in range(len(record.times)):
            w.writerow([repr(float(cols[c][i])) for c in CSV_COLUMNS])


def read_trajectory_csv(path):
    """Column name -> float array."""
    with open(path, newline="") as fh:
        header = fh.readline()
        if not header.startswith("# morsedeco trajectory schema"):
            raise ValueError(f"{path}: missing schema header")
        rows = list(csv.reader(fh))
    names = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(names))
    return {n: data[:, i] for i, n in enumerate(names)}


def max_entropy(n):
    return math.log(n)
