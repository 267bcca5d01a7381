"""Integration of the reduced dynamics at three levels of approximation.

``full``    Schroedinger-picture RWA master equation for the whole density matrix.
``secular`` interaction-picture equation where populations obey rate equations
            and every coherence decays on its own.
``pauli``   populations only.

All three are linear and time-independent, so a fixed-step RK4 step is a
constant linear map.  The ``propagator`` engine builds that map (raised to the
sample stride) once and applies it per sample; the ``step`` engine evaluates
the right-hand side four times per step.  Both execute the same RK4 recursion.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalAbort
from .morse import StateVector
from .observables import (POSITIVITY_TOL, TrajectoryRecord, autocorrelation,
                          entropy_from_eigenvalues)

logger = logging.getLogger(__name__)

LEVELS = ("full", "secular", "pauli")
ENGINES = ("auto", "step", "propagator")
STABILITY_K = 20
DEFAULT_K = 50
TRACE_ABORT = 1e-6


def _check_square(rho, n):
    if rho.shape[-2:] != (n, n):
        raise DomainError(f"density matrix shape {rho.shape} does not match basis size {n}")


def _dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


class FullGenerator:
    """Right-hand side of the full master equation with the products that do
    not depend on rho folded in advance.

    With L = x_lower the dissipator reads -(Y + Y^dagger) where
    Y = K rho - xa^T rho L - xe rho L^T and K = L^T xe + L xa^T.
    """

    def __init__(self, model, diss):
        n = model.n_bound
        if diss.size != n:
            raise DomainError(f"dissipator size {diss.size} does not match model size {n}")
        e = np.asarray(model.energies, dtype=float)
        self.n = n
        self.omega = e[:, None] - e[None, :]
        xl = diss.x_lower
        self.xl = xl
        self.xlt = np.ascontiguousarray(xl.T)
        self.xat = np.ascontiguousarray(diss.xa.T)
        self.xe = diss.xe
        self.k = xl.T @ diss.xe + xl @ diss.xa.T
        self.dissipative = not diss.is_zero

    def __call__(self, rho):
        out = -1j * self.omega * rho
        if self.dissipative:
            y = -self.k @ rho + self.xat @ rho @ self.xl + self.xe @ rho @ self.xlt
            out += y + _dagger(y)
        return out


def liouvillian_rhs(rho, model, diss):
    """d rho/dt of the full master equation; H_S is diagonal in this basis."""
    rho = np.asarray(rho, dtype=complex)
    _check_square(rho, model.n_bound)
    return FullGenerator(model, diss)(rho)


def _secular(rho, diss):
    pop = np.real(np.diagonal(rho, axis1=-2, axis2=-1))
    out = -diss.gamma_c.T * rho
    gain = pop @ diss.rates.T
    idx = np.arange(rho.shape[-1])
    out[..., idx, idx] += gain - np.diagonal(diss.rates) * pop
    return out


def secular_rhs(rho, diss):
    """Interaction picture: d rho_ij/dt = delta_ij sum_k gamma_ik rho_kk - Gamma_c[j, i] rho_ij."""
    rho = np.asarray(rho, dtype=complex)
    _check_square(rho, diss.size)
    return _secular(rho, diss)


def pauli_rhs(populations, rates):
    """dP_n/dt = sum_k (gamma_nk P_k - gamma_kn P_n)."""
    p = np.asarray(populations, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (p.size, p.size):
        raise DomainError(f"rate matrix {rates.shape} does not match {p.size} populations")
    if np.any(p < 0):
        raise DomainError("populations must be nonnegative")
    return _pauli(p, rates)


def _pauli(p, rates):
    off = rates - np.diag(np.diagonal(rates))
    return off @ p - off.sum(axis=0) * p


def thermal_populations(model, env):
    e = np.asarray(model.energies, dtype=float)
    if env.temperature == 0:
        p = np.zeros(len(e))
        p[0] = 1.0
        return p
    w = np.exp(-(e - e[0]) / env.kT)
    return w / w.sum()


def thermal_state(model, env):
    """Boltzmann state over the bound levels; the ground projector at T = 0."""
    return np.diag(thermal_populations(model, env)).astype(complex)


def rk4_factor(z):
    """Amplification of one RK4 step for y' = lambda y, z = lambda dt."""
    return 1 + z * (1 + z / 2 * (1 + z / 3 * (1 + z / 4)))


def rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_step_matrix(generator, dt):
    """RK4 map for y' = G y: I + A(I + A/2(I + A/3(I + A/4))), A = G dt."""
    a = dt * np.asarray(generator)
    eye = np.eye(a.shape[0])
    s = eye + a / 4
    s = eye + (a / 3) @ s
    s = eye + (a / 2) @ s
    return eye + a @ s


# real coordinates of a Hermitian matrix: diagonal, sqrt2 Re(upper), sqrt2 Im(upper);
# orthonormal with respect to the Frobenius inner product
def hermitian_pack(rho):
    n = rho.shape[-1]
    iu = np.triu_indices(n, 1)
    d = np.real(np.diagonal(rho, axis1=-2, axis2=-1))
    up = rho[..., iu[0], iu[1]]
    return np.concatenate([d, math.sqrt(2) * up.real, math.sqrt(2) * up.imag], axis=-1)


def hermitian_unpack(v, n):
    v = np.asarray(v, dtype=float)
    iu = np.triu_indices(n, 1)
    m = len(iu[0])
    rho = np.zeros(v.shape[:-1] + (n, n), dtype=complex)
    idx = np.arange(n)
    rho[..., idx, idx] = v[..., :n]
    z = (v[..., n:n + m] + 1j * v[..., n + m:]) / math.sqrt(2)
    rho[..., iu[0], iu[1]] = z
    rho[..., iu[1], iu[0]] = z.conj()
    return rho


def packed_generator(f, n, chunk=256):
    """Real matrix of a Hermiticity-preserving linear map in packed coordinates."""
    dim = n * n
    out = np.empty((dim, dim))
    for start in range(0, dim, chunk):
        stop = min(dim, start + chunk)
        basis = np.zeros((stop - start, dim))
        basis[np.arange(stop - start), np.arange(start, stop)] = 1.0
        out[:, start:stop] = hermitian_pack(f(hermitian_unpack(basis, n))).T
    return out


@dataclass(frozen=True)
class TrajectoryConfig:
    """Fixed-step RK4 settings.  ``t_max`` is in the model's time units."""

    dt: float
    t_max: float
    sample_stride: int = 1
    integrator: str = "rk4"
    level: str = "full"
    engine: str = "auto"
    positivity_tol: float = POSITIVITY_TOL

    def __post_init__(self):
        if self.integrator != "rk4":
            raise DomainError(f"unsupported integrator {self.integrator!r}")
        if self.level not in LEVELS:
            raise DomainError(f"level must be one of {LEVELS}, got {self.level!r}")
        if self.engine not in ENGINES:
            raise DomainError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt!r}")
        if not self.t_max > 0:
            raise DomainError(f"t_max must be positive, got {self.t_max!r}")
        if not self.positivity_tol >= 0:
            raise DomainError(f"positivity_tol must be >= 0, got {self.positivity_tol!r}")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise DomainError(f"sample_stride must be a positive integer, got {self.sample_stride!r}")

    @staticmethod
    def max_dt(model, k=STABILITY_K):
        return 2.0 * math.pi / (k * model.omega_max)

    def validate_for(self, model):
        # the secular and Pauli equations carry no Bohr phases, the bound
        # applies to the full equation only
        if self.level == "full" and self.dt > self.max_dt(model) * (1 + 1e-12):
            raise DomainError(
                f"dt={self.dt:.3e} exceeds the stability bound 2pi/({STABILITY_K} omega_max)"
                f" = {self.max_dt(model):.3e}")

    @classmethod
    def sampled(cls, model, t0, t_max_t0, samples_per_t0=10, k=DEFAULT_K, **kw):
        """Largest dt <= 2pi/(k omega_max) that puts samples exactly on
        multiples of t0/samples_per_t0."""
        interval = t0 / samples_per_t0
        stride = max(1, math.ceil(interval / cls.max_dt(model, k)))
        return cls(dt=interval / stride, t_max=t_max_t0 * t0, sample_stride=stride, **kw)

    @property
    def sample_interval(self):
        return self.dt * self.sample_stride

    @property
    def n_samples(self):
        return int(math.floor(self.t_max / self.sample_interval + 1e-9)) + 1

    def sample_times(self):
        return np.arange(self.n_samples) * self.sample_interval


_PROPAGATOR_CACHE: OrderedDict = OrderedDict()
_CACHE_LIMIT = 2


def _cache_key(level, model, diss, dt, stride):
    h = hashlib.sha256()
    for a in (model.energies, diss.x_lower, diss.xe, diss.xa):
        h.update(np.ascontiguousarray(a).tobytes())
    h.update(struct.pack("<ddq", dt, 0.0, stride))
    h.update(level.encode())
    return h.hexdigest()


def clear_propagator_cache():
    _PROPAGATOR_CACHE.clear()


class _Stepper:
    """Advances the internal state by one sample interval."""

    def advance(self, state):
        raise NotImplementedError

    def to_density(self, state, t):
        raise NotImplementedError


class _FullStep(_Stepper):
    def __init__(self, gen, dt, stride):
        self.gen, self.dt, self.stride = gen, dt, stride

    def initial(self, rho):
        return rho.copy()

    def advance(self, rho):
        for _ in range(self.stride):
            rho = rk4_step(self.gen, rho, self.dt)
        return rho

    def to_density(self, rho, t):
        return rho


class _FullPropagator(_Stepper):
    def __init__(self, matrix, n):
        self.matrix, self.n = matrix, n

    def initial(self, rho):
        return hermitian_pack(rho)

    def advance(self, v):
        return self.matrix @ v

    def to_density(self, v, t):
        return hermitian_unpack(v, self.n)


class _Elementwise(_Stepper):
    """rho_mn multiplied by a fixed factor each interval (no dissipation)."""

    def __init__(self, factor):
        self.factor = factor

    def initial(self, rho):
        return rho.copy()

    def advance(self, rho):
        return self.factor * rho

    def to_density(self, rho, t):
        return rho


class _Secular(_Stepper):
    """Interaction-picture state; rotated back to the Schroedinger picture at samples."""

    def __init__(self, omega, pop_map=None, coh_factor=None, step=None):
        self.omega = omega
        self.pop_map, self.coh_factor, self.step = pop_map, coh_factor, step

    def initial(self, rho):
        return rho.copy()

    def advance(self, rho):
        if self.step is not None:
            return self.step(rho)
        out = self.coh_factor * rho
        idx = np.arange(rho.shape[0])
        out[idx, idx] = self.pop_map @ np.real(np.diagonal(rho))
        return out

    def to_density(self, rho, t):
        return rho * np.exp(-1j * self.omega * t)


class _Pauli(_Stepper):
    def __init__(self, matrix=None, step=None):
        self.matrix, self.step = matrix, step

    def initial(self, rho):
        return np.real(np.diagonal(rho)).copy()

    def advance(self, p):
        return self.step(p) if self.step is not None else self.matrix @ p

    def to_density(self, p, t):
        return np.diag(p).astype(complex)


def _choose_engine(cfg, n):
    if cfg.engine != "auto":
        return cfg.engine
    if cfg.level != "full":
        return "propagator"
    steps = cfg.n_samples * cfg.sample_stride
    # building costs roughly n**2 right-hand sides plus a few (n**2)**3 products
    return "propagator" if steps > 10 * n * n else "step"


def make_stepper(cfg, model, diss):
    n = model.n_bound
    dt, stride = cfg.dt, cfg.sample_stride
    e = np.asarray(model.energies, dtype=float)
    omega = e[:, None] - e[None, :]
    engine = _choose_engine(cfg, n)

    if cfg.level == "full":
        gen = FullGenerator(model, diss)
        if engine == "step":
            return _FullStep(gen, dt, stride)
        if diss.is_zero:
            return _Elementwise(rk4_factor(-1j * omega * dt) ** stride)
        key = _cache_key("full", model, diss, dt, stride)
        mat = _PROPAGATOR_CACHE.get(key)
        if mat is None:
            logger.info("building %dx%d RK4 propagator (stride %d)", n * n, n * n, stride)
            step = rk4_step_matrix(packed_generator(gen, n), dt)
            mat = np.linalg.matrix_power(step, stride)
            _PROPAGATOR_CACHE[key] = mat
            while len(_PROPAGATOR_CACHE) > _CACHE_LIMIT:
                _PROPAGATOR_CACHE.popitem(last=False)
        else:
            _PROPAGATOR_CACHE.move_to_end(key)
        return _FullPropagator(mat, n)

    g = diss.pauli_generator()
    if cfg.level == "secular":
        if engine == "step":
            def step(rho):
                for _ in range(stride):
                    rho = rk4_step(lambda r: _secular(r, diss), rho, dt)
                return rho
            return _Secular(omega, step=step)
        pop_map = np.linalg.matrix_power(rk4_step_matrix(g, dt), stride)
        coh = rk4_factor(-diss.gamma_c.T * dt) ** stride
        return _Secular(omega, pop_map=pop_map, coh_factor=coh)

    if engine == "step":
        def pstep(p):
            for _ in range(stride):
                p = rk4_step(lambda q: g @ q, p, dt)
            return p
        return _Pauli(step=pstep)
    return _Pauli(matrix=np.linalg.matrix_power(rk4_step_matrix(g, dt), stride))


def _initial_density(initial, n):
    if isinstance(initial, StateVector):
        rho = initial.density_matrix()
    else:
        rho = np.array(initial, dtype=complex)
    _check_square(rho, n)
    tr = np.trace(rho).real
    if abs(tr - 1) > 1e-8:
        raise DomainError(f"initial state has trace {tr:.12f}, expected 1")
    return rho


def evolve(initial, cfg, model, diss, observers=None, snapshot_times=(),
           snapshot_sink=None, keep_final=True):
    """Integrate from ``initial`` and sample observables every ``sample_stride`` steps.

    ``observers`` maps extra channel names to ``f(rho, t)``.  Density matrices
    at the samples nearest to ``snapshot_times`` are kept in the record; every
    sample is also passed to ``snapshot_sink(t, rho)`` when given.

    Raises NumericalAbort on trace drift above 1e-6 or an eigenvalue below
    -cfg.positivity_tol, carrying the last state that passed both checks.
    """
    cfg.validate_for(model)
    n = model.n_bound
    rho0 = _initial_density(initial, n)
    ref = initial if isinstance(initial, StateVector) else rho0
    x_op = np.asarray(model.x_matrix, dtype=complex)
    p_op = np.asarray(model.p_matrix, dtype=complex)
    e = np.asarray(model.energies, dtype=float)
    observers = dict(observers or {})

    stepper = make_stepper(cfg, model, diss)
    record = TrajectoryRecord.empty(t0=1.0)
    record.extra = {k: [] for k in observers}
    interval = cfg.sample_interval
    wanted = sorted(float(t) for t in snapshot_times)
    snap_idx = {int(round(t / interval)) for t in wanted if 0 <= t <= cfg.t_max + interval / 2}

    state = stepper.initial(rho0)
    last_good = (0.0, rho0)
    warned = False
    for k in range(cfg.n_samples):
        t = k * interval
        if k:
            state = stepper.advance(state)
        raw = stepper.to_density(state, t)
        drift = float(np.abs(raw - raw.conj().T).max()) / 2
        rho = 0.5 * (raw + raw.conj().T)
        tr_err = float(abs(np.trace(rho).real - 1.0))
        evals = np.linalg.eigvalsh(rho)
        lo = float(evals[0])
        if tr_err > TRACE_ABORT or not np.isfinite(tr_err):
            raise NumericalAbort(
                f"trace error {tr_err:.3e} at t={t:.6g}; reduce dt (currently {cfg.dt:.3e})",
                last_good[0], last_good[1], record.finalize())
        if lo < -cfg.positivity_tol:
            raise NumericalAbort(
                f"density matrix eigenvalue {lo:.3e} below -{cfg.positivity_tol:g} at t={t:.6g}",
                last_good[0], last_good[1], record.finalize())
        if lo < -POSITIVITY_TOL and not warned:
            logger.warning("eigenvalue %.3e at t=%.6g exceeds the default positivity "
                           "tolerance %g", lo, t, POSITIVITY_TOL)
            warned = True
        record.append(
            times=t,
            x_exp=float(np.einsum("ij,ji->", x_op, rho).real),
            p_exp=float(np.einsum("ij,ji->", p_op, rho).real),
            energy=float(np.dot(e, np.real(np.diagonal(rho)))),
            entropy=entropy_from_eigenvalues(evals, max(cfg.positivity_tol, POSITIVITY_TOL)),
            purity=float(np.vdot(rho, rho).real),
            trace_err=tr_err, min_eig=lo,
            autocorr=autocorrelation(rho, ref),
            herm_drift=drift,
        )
        for name, fn in observers.items():
            record.extra[name].append(fn(rho, t))
        if k in snap_idx:
            record.snapshots[t] = rho.copy()
        if snapshot_sink is not None:
            snapshot_sink(t, rho)
        last_good = (t, rho)
    if keep_final:
        record.final_state = last_good[1]
    return record.finalize()


class SnapshotWriter:
    """Binary stream of (time, rho) records plus a JSON sidecar.

    Each record is a little-endian float64 time followed by the row-major
    matrix as interleaved (re, im) float64 pairs.
    """

    def __init__(self, path, meta):
        self.path = path
        self.meta = dict(meta)
        self.count = 0
        self._fh = open(path, "wb")

    def __call__(self, t, rho):
        self._fh.write(struct.pack("<d", float(t)))
        self._fh.write(np.ascontiguousarray(rho, dtype="<c16").tobytes())
        self.count += 1

    def close(self):
        self._fh.close()
        meta = dict(self.meta, records=self.count, record_bytes=8 + 16 * self.meta["N"] ** 2)
        with open(str(self.path) + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_snapshots(path, n):
    raw = np.fromfile(path, dtype="<f8")
    rec = 1 + 2 * n * n
    raw = raw.reshape(-1, rec)
    times = raw[:, 0].copy()
    mats = raw[:, 1:].copy().view("<c16").reshape(-1, n, n)
    return times, mats
