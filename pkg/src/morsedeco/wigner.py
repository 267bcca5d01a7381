"""Wigner quasiprobability of a bound-state density matrix, and frame output."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import CZT

from .errors import DomainError, WindowError

MIN_WINDOW_MASS = 0.999


@dataclass(frozen=True)
class GridSpec:
    x_min: float = -1.5
    x_max: float = 2.5
    p_min: float = -60.0
    p_max: float = 60.0
    nx: int = 256
    n_p: int = 256

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.p_max > self.p_min):
            raise DomainError("grid bounds must satisfy min < max")
        if self.nx < 2 or self.n_p < 2:
            raise DomainError("grid needs at least 2 points per axis")

    @property
    def xs(self):
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ps(self):
        return np.linspace(self.p_min, self.p_max, self.n_p)

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dp(self):
        return (self.p_max - self.p_min) / (self.n_p - 1)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in ("x_min", "x_max", "p_min", "p_max", "nx", "n_p") if k in d})


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """W(x, p) sampled on ``spec``; ``values[i, k]`` is W(xs[i], ps[k])."""

    spec: GridSpec
    values: np.ndarray
    t: float | None = None

    @property
    def xs(self):
        return self.spec.xs

    @property
    def ps(self):
        return self.spec.ps

    @property
    def cell(self):
        return self.spec.dx * self.spec.dp

    def norm(self):
        return float(self.values.sum() * self.cell)

    def overlap_purity(self):
        """2 pi integral of W**2, equal to Tr(rho**2) for a contained state."""
        return float(2.0 * math.pi * np.sum(self.values ** 2) * self.cell)

    def mean_x(self):
        return float(np.sum(self.xs[:, None] * self.values) * self.cell)

    def mean_p(self):
        return float(np.sum(self.ps[None, :] * self.values) * self.cell)

    def marginal_x(self):
        return self.values.sum(axis=1) * self.spec.dp


def position_density(rho, model, x):
    phi = model.eigenfunctions(x)
    return np.real(np.einsum("mi,mn,ni->i", phi, rho, phi))


def window_mass(rho, model, x_min, x_max):
    """Probability of finding the particle in [x_min, x_max]."""
    x, w, phi = model.basis_on_nodes
    dens = np.real(np.einsum("mi,mn,ni->i", phi, rho, phi))
    inside = (x >= x_min) & (x <= x_max)
    return float(np.sum(w[inside] * dens[inside])), x, w, dens


def _support(x, w, dens, tail=1e-12):
    c = np.cumsum(w * dens)
    total = c[-1]
    lo = x[np.searchsorted(c, tail * total)]
    hi = x[min(len(x) - 1, np.searchsorted(c, (1.0 - tail) * total))]
    return float(lo), float(hi)


def wigner_transform(rho, model, spec=None, t=None, min_mass=MIN_WINDOW_MASS):
    """W(x,p) = (1/2pi) int <x-u/2|rho|x+u/2> exp(iup) du on ``spec``.

    For each x the integrand is sampled at u_j = 2 j dx so that both
    arguments fall on one extended x grid; the sum over j is evaluated at all
    p of the grid with a chirp-z transform.
    """
    spec = spec or GridSpec()
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (model.n_bound, model.n_bound):
        raise DomainError(f"density matrix shape {rho.shape} does not match model")
    mass, xq, wq, dens = window_mass(rho, model, spec.x_min, spec.x_max)
    if mass < min_mass:
        raise WindowError(f"only {mass:.6f} of the position density lies in "
                          f"[{spec.x_min}, {spec.x_max}] (need {min_mass})", mass_inside=mass)
    lo, hi = _support(xq, wq, dens)
    ps = spec.ps
    dx, dp = spec.dx, spec.dp
    # |u|/2 never needs to exceed the distance from a window edge to the far end of the support
    half = max(spec.x_max - lo, hi - spec.x_min, dx)
    jmax = int(math.ceil(half / dx))
    ext = spec.x_min + dx * np.arange(-jmax, spec.nx + jmax)
    phi = model.eigenfunctions(ext)
    left = phi.T @ rho
    j = np.arange(-jmax, jmax + 1)
    du = 2.0 * dx
    czt = CZT(len(j), spec.n_p, w=np.exp(1j * du * dp), a=np.exp(-1j * du * spec.p_min))
    shift = np.exp(-1j * jmax * du * ps)
    w_out = np.empty((spec.nx, spec.n_p))
    worst_imag = 0.0
    for i in range(spec.nx):
        ia = i + jmax - j
        ib = i + jmax + j
        f = np.einsum("jn,nj->j", left[ia], phi[:, ib])
        row = czt(f) * shift * (du / (2.0 * math.pi))
        w_out[i] = row.real
        worst_imag = max(worst_imag, float(np.abs(row.imag).max()))
    if worst_imag > 1e-8:
        raise ArithmeticError(f"Wigner transform has imaginary residue {worst_imag:.3e}; "
                              "the density matrix is not Hermitian")
    return PhaseSpaceGrid(spec, w_out, t)


def negativity(grid):
    """Negative volume: integral of |min(W, 0)|."""
    return float(-np.minimum(grid.values, 0.0).sum() * grid.cell)


def write_pgm(grid, path, w_min=None, w_max=None):
    """16-bit binary PGM; rows run from p_max (top) to p_min, columns along x.

    Gray level g = round(65535 (W - w_min)/(w_max - w_min)); the mapping and
    the window go to ``path + '.json'``.
    """
    v = grid.values
    w_min = float(v.min()) if w_min is None else float(w_min)
    w_max = float(v.max()) if w_max is None else float(w_max)
    span = w_max - w_min if w_max > w_min else 1.0
    img = np.clip(np.rint((v - w_min) / span * 65535.0), 0, 65535).astype(">u2")
    img = img.T[::-1]
    height, width = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n65535\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())
    s = grid.spec
    meta = {"w_min": w_min, "w_max": w_max, "x_min": s.x_min, "x_max": s.x_max,
            "p_min": s.p_min, "p_max": s.p_max, "t": grid.t}
    with open(str(path) + ".json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta


def read_pgm(path):
    """(values as float array in [w_min, w_max] with [x, p] indexing, sidecar dict)."""
    raw = open(path, "rb").read()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    data = np.frombuffer(parts[4], dtype=">u2", count=width * height).reshape(height, width)
    with open(str(path) + ".json") as fh:
        meta = json.load(fh)
    vals = meta["w_min"] + data[::-1].T / maxval * (meta["w_max"] - meta["w_min"])
    return vals, meta


def write_frames(grids, paths):
    """Write frames on a common gray scale (global extrema over all frames)."""
    lo = min(float(g.values.min()) for g in grids)
    hi = max(float(g.values.max()) for g in grids)
    return [write_pgm(g, p, lo, hi) for g, p in zip(grids, paths)]
