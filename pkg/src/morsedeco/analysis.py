"""Post-processing of trajectories: decoherence time, its x0 law, revivals,
Wigner hills and angular uniformity."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, maximum_filter, maximum_filter1d, uniform_filter1d
from scipy.signal import find_peaks

from .errors import DomainError, InconclusiveError
from .observables import trace_distance  # noqa: F401  (re-exported)

SLOPE_RATIO = 3.0
SMOOTH_WINDOW = 5
CROSS_CHECK_TOL = 0.15
REVIVAL_PROMINENCE = 0.1


@dataclass
class DecoherenceFit:
    t_d: float
    pre_slope: float
    post_slope: float
    residual: float
    source: str = "entropy"
    cross_check_t_d: float | None = None

    @property
    def slope_ratio(self):
        return abs(self.pre_slope) / abs(self.post_slope) if self.post_slope else math.inf

    @property
    def consistent(self):
        """Entropy and purity breakpoints agree within 15% (True if no cross-check)."""
        if self.cross_check_t_d is None:
            return True
        return abs(self.cross_check_t_d - self.t_d) <= CROSS_CHECK_TOL * abs(self.t_d)

    def report(self, config_hash=None, method="two-segment piecewise-linear"):
        return {"t_d": self.t_d, "pre_slope": self.pre_slope, "post_slope": self.post_slope,
                "residual": self.residual, "method": f"{method} ({self.source})",
                "config_hash": config_hash}


def smooth(values, window=SMOOTH_WINDOW):
    """Centered moving average; edges use the nearest value as padding."""
    values = np.asarray(values, dtype=float)
    if window <= 1:
        return values.copy()
    return uniform_filter1d(values, size=window, mode="nearest")


def two_segment_fit(t, y):
    """Continuous two-segment linear least squares with the breakpoint scanned
    over the interior samples.  Returns (t_break, slope1, slope2, rms)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(t)
    cands = np.arange(2, n - 2)
    if len(cands) == 0:
        raise DomainError("too few samples for a two-segment fit")
    tb = t[cands][:, None]
    a = np.minimum(t[None, :] - tb, 0.0)
    b = np.maximum(t[None, :] - tb, 0.0)
    # normal equations of y ~ c0 + c1 a + c2 b for every candidate at once
    ones = np.ones(n)
    g = np.empty((len(cands), 3, 3))
    g[:, 0, 0] = n
    g[:, 0, 1] = g[:, 1, 0] = a.sum(1)
    g[:, 0, 2] = g[:, 2, 0] = b.sum(1)
    g[:, 1, 1] = (a * a).sum(1)
    g[:, 2, 2] = (b * b).sum(1)
    g[:, 1, 2] = g[:, 2, 1] = 0.0
    rhs = np.stack([np.full(len(cands), ones @ y), a @ y, b @ y], axis=1)
    coef = np.linalg.solve(g, rhs[..., None])[..., 0]
    pred = coef[:, :1] + coef[:, 1:2] * a + coef[:, 2:3] * b
    sse = ((pred - y[None, :]) ** 2).sum(1)
    best = int(np.argmin(sse))
    return float(t[cands[best]]), float(coef[best, 1]), float(coef[best, 2]), \
        float(math.sqrt(sse[best] / n))


def _fit_series(t, y, source, window, slope_ratio):
    tb, s1, s2, rms = two_segment_fit(t, smooth(y, window))
    fit = DecoherenceFit(tb, s1, s2, rms, source)
    if not abs(s1) > slope_ratio * abs(s2):
        raise InconclusiveError(
            f"{source}: slopes {s1:.4g} / {s2:.4g} are not separated by a factor "
            f"{slope_ratio:g}", fit=fit)
    return fit


def detect_decoherence_time(times, entropy, purity=None, window=SMOOTH_WINDOW,
                            slope_ratio=SLOPE_RATIO, min_samples=50):
    """Breakpoint of S(t) between fast (decoherence) and slow (dissipation) change.

    With ``purity`` given, the same fit is done on Tr(rho**2) and its
    breakpoint is stored as ``cross_check_t_d``.
    """
    times = np.asarray(times, dtype=float)
    entropy = np.asarray(entropy, dtype=float)
    if times.shape != entropy.shape:
        raise DomainError("times and values must align")
    if len(times) < min_samples:
        raise DomainError(f"need at least {min_samples} samples, got {len(times)}")
    fit = _fit_series(times, entropy, "entropy", window, slope_ratio)
    if purity is not None:
        try:
            pfit = _fit_series(times, purity, "purity", window, slope_ratio)
            fit.cross_check_t_d = pfit.t_d
        except InconclusiveError as exc:
            fit.cross_check_t_d = exc.fit.t_d
    return fit


@dataclass
class ExponentialLaw:
    """t_d(x0) = t_d0 exp(-kappa x0)."""

    t_d0: float
    kappa: float
    x0_range: tuple
    r_squared: float

    def __call__(self, x0):
        return self.t_d0 * np.exp(-self.kappa * np.asarray(x0, dtype=float))

    def as_dict(self):
        d = asdict(self)
        d["x0_range"] = list(self.x0_range)
        return d


def fit_exponential(points):
    """Linear least squares of ln t_d against x0."""
    pts = sorted((float(x), float(t)) for x, t in points)
    if len(pts) < 4:
        raise DomainError(f"need at least 4 points, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    td = np.array([p[1] for p in pts])
    if np.any(td <= 0):
        raise DomainError("decoherence times must be positive")
    y = np.log(td)
    slope, intercept = np.polyfit(x, y, 1)
    pred = intercept + slope * x
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(((y - pred) ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return ExponentialLaw(float(math.exp(intercept)), float(-slope), (x[0], x[-1]), r2)


@dataclass(frozen=True)
class Revival:
    time: float
    kind: str
    height: float
    fraction: float


_KINDS = {0: "full", 1: "quarter", 2: "half", 3: "quarter"}


def revival_time(energies, n=0):
    """4 pi / |E''| at level n (second difference of the spectrum)."""
    e = np.asarray(energies, dtype=float)
    n = min(max(n, 1), len(e) - 2)
    curv = e[n + 1] - 2 * e[n] + e[n - 1]
    if curv == 0:
        return math.inf
    return 4.0 * math.pi / abs(curv)


def envelope_peaks(times, values, period=None, prominence=REVIVAL_PROMINENCE):
    """Peaks of the running maximum of ``values`` over ``period``.

    Returns (peak times, peak heights); each time is that of the largest raw
    sample inside the envelope peak's window.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if period:
        dt = times[1] - times[0]
        width = max(1, int(round(period / dt)))
        env = maximum_filter1d(values, size=width, mode="nearest")
    else:
        width = 1
        env = values
    idx, _ = find_peaks(np.concatenate([[-np.inf], env, [-np.inf]]), prominence=prominence)
    idx = idx - 1
    out_t, out_h = [], []
    for i in idx:
        lo, hi = max(0, i - width), min(len(values), i + width + 1)
        j = lo + int(np.argmax(values[lo:hi]))
        if out_t and abs(times[j] - out_t[-1]) < 1e-12:
            continue
        out_t.append(float(times[j]))
        out_h.append(float(values[j]))
    return np.array(out_t), np.array(out_h)


def detect_revivals(times, autocorr, t_rev, period=None, prominence=REVIVAL_PROMINENCE,
                    include_origin=False):
    """Revivals as envelope peaks of the autocorrelation, labelled by the
    nearest quarter fraction of a refined revival time.

    ``t_rev`` is the initial estimate (see ``revival_time``); it is refined by
    least squares over the labelled peaks.  ``period`` is the classical
    orbital period used for the envelope; None means raw peaks.
    """
    pt, ph = envelope_peaks(times, autocorr, period, prominence)
    keep = pt > (0 if include_origin else 0.5 * (period or 0) + 1e-12)
    pt, ph = pt[keep], ph[keep]
    if len(pt) == 0 or not math.isfinite(t_rev):
        return []
    frac = np.round(4 * pt / t_rev) / 4
    ok = frac > 0
    if ok.any():
        t_rev = float((frac[ok] * pt[ok]).sum() / (frac[ok] ** 2).sum())
    frac = np.round(4 * pt / t_rev) / 4
    out = []
    for t, h, f in zip(pt, ph, frac):
        if f <= 0:
            continue
        out.append(Revival(float(t), _KINDS[int(round(4 * f)) % 4], float(h), float(f)))
    return out


def oscillation_amplitude(times, signal, period):
    """Running half peak-to-peak amplitude of ``signal`` over one ``period``."""
    times = np.asarray(times, dtype=float)
    signal = np.asarray(signal, dtype=float)
    width = max(1, int(round(period / (times[1] - times[0]))))
    hi = maximum_filter1d(signal, size=width, mode="nearest")
    lo = -maximum_filter1d(-signal, size=width, mode="nearest")
    return 0.5 * (hi - lo)


@dataclass(frozen=True)
class Hill:
    x: float
    p: float
    height: float


def ground_state_widths(model):
    """(sigma_x, sigma_p) of the ground state."""
    x = np.asarray(model.x_matrix)
    p = np.asarray(model.p_matrix)
    sx = math.sqrt(max(0.0, float(np.real((x @ x)[0, 0] - x[0, 0] ** 2))))
    sp = math.sqrt(max(0.0, float(np.real((p @ p.conj().T)[0, 0]))))
    return sx, sp


def locate_hills(grid, sigma=(0.095, 5.2), rel_threshold=0.2, count=None):
    """Local maxima of W smoothed with a Gaussian of phase-space widths ``sigma``.

    The smoothing (close to a Husimi function for ground-state widths) removes
    interference fringes so that only the packets register.  Hills are sorted
    by height.
    """
    s = grid.spec
    ws = gaussian_filter(grid.values, (sigma[0] / s.dx, sigma[1] / s.dp), mode="constant")
    foot = (max(3, int(2 * sigma[0] / s.dx) | 1), max(3, int(2 * sigma[1] / s.dp) | 1))
    peak = (ws == maximum_filter(ws, size=foot, mode="constant")) & (ws > rel_threshold * ws.max())
    idx = np.argwhere(peak)
    hills = sorted((Hill(float(s.xs[i]), float(s.ps[k]), float(ws[i, k])) for i, k in idx),
                   key=lambda h: -h.height)
    return hills[:count] if count else hills


def sector_masses(grid, centroid, omega_cl, n_sectors=8):
    """Wigner mass in ``n_sectors`` equal angles around ``centroid`` = (x_c, p_c).

    Momentum is scaled by 2/omega_cl, the map that turns a small harmonic
    orbit of x' = 2p into a circle.
    """
    xc, pc = centroid
    dx_ = grid.xs[:, None] - xc
    dp_ = (grid.ps[None, :] - pc) * 2.0 / omega_cl
    ang = np.mod(np.arctan2(dp_, dx_), 2 * math.pi)
    sector = np.minimum((ang / (2 * math.pi) * n_sectors).astype(int), n_sectors - 1)
    masses = np.bincount(sector.ravel(), weights=grid.values.ravel(), minlength=n_sectors)
    return masses * grid.cell


def sector_uniformity(grid, centroid, omega_cl, n_sectors=8):
    """Largest relative deviation of the sector fractions from 1/n_sectors."""
    m = sector_masses(grid, centroid, omega_cl, n_sectors)
    frac = m / m.sum()
    return float(np.abs(frac * n_sectors - 1.0).max()), frac

