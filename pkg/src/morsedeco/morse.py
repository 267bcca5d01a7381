"""Bound-state physics of the dimensionless Morse oscillator.

The Hamiltonian is ``H = P**2 + (s + 1/2)**2 * (exp(-2X) - 2 exp(-X))`` with
``[X, P] = i``.  Everything downstream works in the basis of its bound
eigenstates ``phi_n``, n = 0 .. n_bound-1, with energies ``-(s - n)**2``.
"""
from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import gammaln, roots_legendre

from .errors import DissociationError, DomainError, QuadratureError

logger = logging.getLogger(__name__)

DEFAULT_DISSOCIATION_THRESHOLD = 1e-3
NO_MOLECULE_S = 54.54


def shape_param_from_physical(mass, dissociation_energy, range_param, hbar=1.0):
    """s = sqrt(2 m D) / (hbar alpha) - 1/2."""
    for name, value in (("mass", mass), ("dissociation_energy", dissociation_energy),
                        ("range_param", range_param), ("hbar", hbar)):
        if not value > 0:
            raise DomainError(f"{name} must be positive, got {value!r}")
    return math.sqrt(2.0 * mass * dissociation_energy) / (hbar * range_param) - 0.5


def n_bound(s):
    """Number of normalizable eigenstates: all integers m with 0 <= m < s."""
    if not s > 0:
        raise DomainError(f"shape parameter must be positive, got {s!r}")
    return int(math.ceil(s)) if float(s).is_integer() else int(math.floor(s)) + 1


def bound_energies(s):
    m = np.arange(n_bound(s))
    return -(s - m) ** 2.0


_T0_FREQUENCIES = {
    # curvature of V at the minimum under x'' = -V''(0) * 2 x
    "classical": lambda s: 2.0 * (s + 0.5),
    # dE/dn at n = 0: orbital frequency of the lowest quantized orbit
    "orbital": lambda s: 2.0 * s,
    # E_1 - E_0
    "spacing": lambda s: 2.0 * s - 1.0,
}


def oscillation_frequency(s, convention="classical"):
    if not s > 0:
        raise DomainError(f"shape parameter must be positive, got {s!r}")
    try:
        return _T0_FREQUENCIES[convention](s)
    except KeyError:
        raise ValueError(f"unknown t0 convention {convention!r}; "
                         f"choose from {sorted(_T0_FREQUENCIES)}") from None


def small_oscillation_period(s, convention="classical"):
    """Period t0 of small oscillations, 2 pi / omega.

    ``convention`` selects omega: ``classical`` uses 2(s + 1/2), the harmonic
    frequency at the bottom of the well; ``orbital`` uses 2s, the frequency of
    the lowest quantized orbit; ``spacing`` uses E_1 - E_0 = 2s - 1.
    """
    return 2.0 * math.pi / oscillation_frequency(s, convention)


def _log_norms(s, n):
    return 0.5 * (np.log(2.0 * s - 2.0 * n) + gammaln(n + 1.0) - gammaln(2.0 * s + 1.0 - n))


def eigenfunctions(s, x, count=None):
    """Real, unit-normalized bound eigenfunctions on the points ``x``.

    Returns an array of shape (count, len(x)).  The Laguerre recurrence is
    run for all orders at once and combined with the prefactor
    ``y**(s-n) exp(-y/2)`` in log space, y = (2s+1) exp(-x).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    nb = n_bound(s)
    count = nb if count is None else int(count)
    if not 0 < count <= nb:
        raise IndexError(f"requested {count} eigenfunctions, model has {nb}")
    n = np.arange(count, dtype=float)[:, None]
    alpha = 2.0 * s - 2.0 * n
    logy = math.log(2.0 * s + 1.0) - x
    y = np.exp(logy)

    lag = np.ones((count, x.size))
    captured_scale = np.zeros((count, x.size))
    running_scale = np.zeros((count, x.size))
    prev = np.ones((count, x.size))
    cur = 1.0 + alpha - y
    if count > 1:
        lag[1:] = cur[1:]
    for k in range(1, count - 1):
        nxt = ((2 * k + 1 + alpha - y) * cur - (k + alpha) * prev) / (k + 1)
        prev, cur = cur, nxt
        big = np.abs(cur) > 1e200
        if big.any():
            factor = np.where(big, np.abs(cur), 1.0)
            cur = cur / factor
            prev = prev / factor
            running_scale += np.log(factor)
        lag[k + 1] = cur[k + 1]
        captured_scale[k + 1] = running_scale[k + 1]
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(lag))
    logphi = _log_norms(s, n) + (s - n) * logy - 0.5 * y + logabs + captured_scale
    return np.sign(lag) * np.exp(logphi)


def eigenfunction(s, n, x):
    nb = n_bound(s)
    if not 0 <= n < nb:
        raise IndexError(f"state index {n} out of range 0..{nb - 1}")
    return eigenfunctions(s, x, count=n + 1)[n]


def tail_cutoff(s, tol=1e-14):
    """Upper x beyond which the weakest-bound state carries less than ``tol``.

    For small y the top state behaves as y**(s-n); its tail mass beyond
    y_c is N**2 L(0)**2 y_c**a / a with a = 2(s-n).
    """
    top = n_bound(s) - 1
    a = 2.0 * (s - top)
    log_norm2 = 2.0 * _log_norms(s, top)
    log_l0 = gammaln(top + a + 1.0) - gammaln(top + 1.0) - gammaln(a + 1.0)
    log_yc = (math.log(tol) + math.log(a) - log_norm2 - 2.0 * log_l0) / a
    return math.log(2.0 * s + 1.0) - log_yc


@dataclass(frozen=True)
class QuadSpec:
    """Composite Gauss-Legendre rule on [x_lo, x_hi]."""

    x_lo: float = -2.0
    x_hi: float = 12.0
    points_per_unit: int = 48
    order: int = 16

    def nodes(self):
        panels = max(1, int(math.ceil((self.x_hi - self.x_lo) * self.points_per_unit / self.order)))
        xg, wg = roots_legendre(self.order)
        edges = np.linspace(self.x_lo, self.x_hi, panels + 1)
        half = 0.5 * np.diff(edges)[:, None]
        mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
        return (mid + half * xg).ravel(), (half * wg).ravel()

    def refined(self):
        return replace(self, points_per_unit=2 * self.points_per_unit)


def default_quad_spec(s):
    return QuadSpec(x_lo=-2.0, x_hi=max(12.0, math.ceil(tail_cutoff(s))))


def _matrices_on(s, spec):
    x, w = spec.nodes()
    phi = eigenfunctions(s, x)
    pw = phi * w
    return pw @ phi.T, (pw * x) @ phi.T


def position_matrix(s, quad_spec=None, tol=1e-8, max_doublings=5):
    """<phi_m|X|phi_n> by quadrature, refined until doubling changes < tol.

    Returns the symmetric matrix and the quadrature spec it was computed on.
    """
    spec = default_quad_spec(s) if quad_spec is None else quad_spec
    overlap, xm = _matrices_on(s, spec)
    change = math.inf
    for _ in range(max_doublings):
        finer = spec.refined()
        overlap_f, xm_f = _matrices_on(s, finer)
        change = max(np.abs(xm_f - xm).max(), np.abs(overlap_f - overlap).max())
        spec, overlap, xm = finer, overlap_f, xm_f
        if change < tol:
            break
    else:
        raise QuadratureError(
            f"position matrix not converged: max entry change {change:.3e} "
            f"at {spec.points_per_unit} points/unit on [{spec.x_lo}, {spec.x_hi}]",
            max_change=change, points_per_unit=spec.points_per_unit)
    ortho = np.abs(overlap - np.eye(len(overlap))).max()
    logger.debug("position matrix: %d pts/unit, orthonormality error %.2e",
                 spec.points_per_unit, ortho)
    return 0.5 * (xm + xm.T), spec


def momentum_matrix(energies, x_matrix):
    """P = (i/2)[H, X] in the energy eigenbasis."""
    energies = np.asarray(energies, dtype=float)
    x_matrix = np.asarray(x_matrix)
    if x_matrix.shape != (energies.size, energies.size):
        raise DomainError(f"x_matrix shape {x_matrix.shape} does not match "
                          f"{energies.size} energies")
    return 0.5j * (energies[:, None] - energies[None, :]) * x_matrix


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectralModel:
    """A nondegenerate spectrum with its position operator.

    The dissipator and the integrators only need this much; the Morse model
    adds eigenfunctions on top.
    """

    energies: np.ndarray
    x_matrix: np.ndarray
    p_matrix: np.ndarray

    def __post_init__(self):
        for name in ("energies", "x_matrix", "p_matrix"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def n_bound(self):
        return len(self.energies)

    @property
    def omega01(self):
        return float(self.energies[1] - self.energies[0])

    @property
    def omega_max(self):
        return float(self.energies[-1] - self.energies[0])

    def hamiltonian(self):
        return np.diag(self.energies.astype(complex))


def harmonic_model(n, omega=1.0):
    """Equidistant synthetic model E_n = n omega with ladder X, <n-1|X|n> = sqrt(n)."""
    k = np.arange(1, n)
    x = np.diag(np.sqrt(k), 1) + np.diag(np.sqrt(k), -1)
    e = omega * np.arange(n, dtype=float)
    return SpectralModel(energies=e, x_matrix=x, p_matrix=momentum_matrix(e, x))


@dataclass(frozen=True)
class MorseModel(SpectralModel):
    s: float = NO_MOLECULE_S
    quad_spec: QuadSpec = field(default_factory=QuadSpec)

    @classmethod
    def build(cls, s=NO_MOLECULE_S, quad_spec=None, tol=1e-8):
        energies = bound_energies(s)
        xm, spec = position_matrix(s, quad_spec, tol=tol)
        return cls(energies=energies, x_matrix=xm,
                   p_matrix=momentum_matrix(energies, xm), s=float(s), quad_spec=spec)

    def eigenfunctions(self, x):
        return eigenfunctions(self.s, x, count=self.n_bound)

    def eigenfunction(self, n, x):
        if not 0 <= n < self.n_bound:
            raise IndexError(f"state index {n} out of range 0..{self.n_bound - 1}")
        return eigenfunction(self.s, n, x)

    @cached_property
    def basis_on_nodes(self):
        """(x, w, phi) on the model's quadrature nodes."""
        x, w = self.quad_spec.nodes()
        phi = self.eigenfunctions(x)
        phi.setflags(write=False)
        return x, w, phi

    def project(self, psi_values):
        """Amplitudes <phi_n|psi> of a wavefunction sampled on the quadrature nodes."""
        _, w, phi = self.basis_on_nodes
        return phi @ (w * psi_values)

    def truncated(self, count):
        """Keep the lowest ``count`` bound states (for cheap property checks)."""
        return replace(self, energies=self.energies[:count],
                       x_matrix=self.x_matrix[:count, :count],
                       p_matrix=self.p_matrix[:count, :count])

    def save(self, path):
        save_model(self, path)


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    norm_deficit: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _frozen(np.asarray(self.amplitudes, dtype=complex)))

    def density_matrix(self):
        a = self.amplitudes
        return np.outer(a, a.conj())

    def __len__(self):
        return len(self.amplitudes)


def eigenstate(model, n):
    if not 0 <= n < model.n_bound:
        raise IndexError(f"state index {n} out of range 0..{model.n_bound - 1}")
    a = np.zeros(model.n_bound, dtype=complex)
    a[n] = 1.0
    return StateVector(a, 0.0)


def coherent_state(model, x0, p0=0.0, threshold=DEFAULT_DISSOCIATION_THRESHOLD):
    """Displaced and boosted ground state, phi_0(x - x0) exp(i p0 x), projected
    onto the bound states and renormalized."""
    x, w, phi = model.basis_on_nodes
    packet = eigenfunction(model.s, 0, x - x0) * np.exp(1j * p0 * x)
    amps = phi @ (w * packet)
    weight = float(np.sum(np.abs(amps) ** 2))
    deficit = max(0.0, 1.0 - weight)
    if deficit >= threshold:
        raise DissociationError(
            f"coherent state (x0={x0}, p0={p0}) loses {deficit:.3e} of its norm to the "
            f"continuum (threshold {threshold:.1e})", norm_deficit=deficit)
    return StateVector(amps / math.sqrt(weight), deficit)


_CACHE_MAGIC = b"MORSEX1\x00"
_CACHE_HEADER = struct.Struct("<8sdqddqq")


def save_model(model, path):
    """Header (magic, s, N, x_lo, x_hi, points/unit, order) then row-major
    little-endian float64 x_matrix."""
    spec = model.quad_spec
    with open(path, "wb") as fh:
        fh.write(_CACHE_HEADER.pack(_CACHE_MAGIC, model.s, model.n_bound, spec.x_lo,
                                    spec.x_hi, spec.points_per_unit, spec.order))
        fh.write(np.ascontiguousarray(model.x_matrix, dtype="<f8").tobytes())


def load_model(path):
    raw = Path(path).read_bytes()
    magic, s, n, x_lo, x_hi, ppu, order = _CACHE_HEADER.unpack_from(raw)
    if magic != _CACHE_MAGIC:
        raise ValueError(f"{path}: not a model cache file")
    xm = np.frombuffer(raw, dtype="<f8", count=n * n, offset=_CACHE_HEADER.size).reshape(n, n)
    energies = bound_energies(s)
    if len(energies) != n:
        raise ValueError(f"{path}: header N={n} inconsistent with s={s}")
    return MorseModel(energies=energies, x_matrix=xm.astype(float),
                      p_matrix=momentum_matrix(energies, xm), s=s,
                      quad_spec=QuadSpec(x_lo, x_hi, ppu, order))


def load_or_build(s, cache_dir=None):
    """Build the model, reusing a cache file under ``cache_dir`` if present."""
    if cache_dir is None:
        return MorseModel.build(s)
    path = Path(cache_dir) / f"morse_s{s!r}.bin"
    if path.exists():
        return load_model(path)
    model = MorseModel.build(s)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, path)
    return model
