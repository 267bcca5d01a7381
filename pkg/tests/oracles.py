"""Independent reference computations used by the tests.

Nothing here imports the package's Laguerre machinery: the Morse problem is
solved by brute-force finite differences on a uniform grid.
"""
import math

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh

# 8th-order central second-derivative stencil, offsets 0..4
_D2 = np.array([-205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
# 8th-order central first-derivative stencil, offsets 1..4
_D1 = np.array([4 / 5, -1 / 5, 4 / 105, -1 / 280])


def morse_potential(s, x):
    return (s + 0.5) ** 2 * (np.exp(-2 * x) - 2 * np.exp(-x))


def fd_morse(s, n_points=4000, x_lo=-1.2, x_hi=8.0, count=40):
    """Lowest ``count`` eigenpairs of P**2 + V on a uniform grid with
    Dirichlet walls.  Eigenvectors are normalized so that sum(phi**2) dx = 1
    and are positive in the classically forbidden region on the right, where
    every bound state decays without further nodes."""
    x = np.linspace(x_lo, x_hi, n_points + 2)[1:-1]
    h = x[1] - x[0]
    diags = [np.full(n_points - abs(k), -_D2[abs(k)] / h ** 2) for k in range(-4, 5)]
    diags[4] = diags[4] + morse_potential(s, x)
    ham = sparse.diags(diags, list(range(-4, 5)), format="csc")
    # shift-invert just below the (known) well depth picks the lowest levels
    vals, vecs = eigsh(ham, k=count, sigma=-(s + 0.5) ** 2, which="LM")
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    vecs = vecs / math.sqrt(h)
    big = np.abs(vecs) > 1e-3 * np.abs(vecs).max(axis=0)
    last = n_points - 1 - np.argmax(big[::-1], axis=0)
    signs = np.sign(vecs[last, np.arange(count)])
    return x, vals, vecs * signs


def fd_derivative(f, h):
    """8th-order central derivative along axis 0 with zero padding."""
    pad = np.zeros((4,) + f.shape[1:])
    g = np.concatenate([pad, f, pad])
    out = np.zeros_like(f)
    n = f.shape[0]
    for k, c in enumerate(_D1, start=1):
        out += c * (g[4 + k: 4 + k + n] - g[4 - k: 4 - k + n])
    return out / h


def fd_matrices(s, count=20, **kw):
    """(energies, X, P) restricted to the lowest ``count`` states."""
    x, vals, vecs = fd_morse(s, count=count, **kw)
    h = x[1] - x[0]
    xm = vecs.T @ (x[:, None] * vecs) * h
    pm = -1j * vecs.T @ fd_derivative(vecs, h) * h
    return vals, xm, pm


def amplitude_damping(alpha0, n0, gamma, omega, nbar, t):
    """Closed-form <a>(t) and <n>(t) for the thermal amplitude-damping equation
    d rho/dt = -i omega[n, rho] + gamma (nbar + 1) D[a] rho + gamma nbar D[a^dag] rho,
    D[L] rho = L rho L^dag - {L^dag L, rho}/2."""
    t = np.asarray(t, dtype=float)
    a = alpha0 * np.exp(-(gamma / 2 + 1j * omega) * t)
    n = n0 * np.exp(-gamma * t) + nbar * (1 - np.exp(-gamma * t))
    return a, n


def coherent_amplitudes(alpha, n):
    k = np.arange(n)
    logf = np.array([math.lgamma(j + 1) for j in k])
    c = np.exp(-abs(alpha) ** 2 / 2 - 0.5 * logf) * alpha ** k
    return c


def brute_force_rhs(rho, energies, x_lower, xe, xa):
    """Master-equation right-hand side term by term, with explicit loops over
    the four dissipator products."""
    n = len(energies)
    h = np.diag(np.asarray(energies, dtype=complex))
    xd = x_lower.conj().T
    terms = [xd @ xe @ rho, x_lower @ xa.conj().T @ rho,
             -(xa.conj().T @ rho @ x_lower), -(xe @ rho @ xd)]
    d = sum(terms)
    out = -1j * (h @ rho - rho @ h) - (d + d.conj().T)
    assert out.shape == (n, n)
    return out
