"""Execution of scenario configurations and parameter sweeps."""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import detect_decoherence_time, fit_exponential
from .bath import EnvironmentSpec, build_dissipator, calibrate_lambda, ground_rate
from .config import config_hash, with_defaults
from .dynamics import SnapshotWriter, TrajectoryConfig, evolve, thermal_state
from .errors import DomainError, InconclusiveError
from .morse import MorseModel, coherent_state, eigenstate, small_oscillation_period
from .wigner import GridSpec, negativity, wigner_transform, write_frames

logger = logging.getLogger(__name__)

_MODELS = {}


def get_model(s):
    if s not in _MODELS:
        _MODELS[s] = MorseModel.build(s)
    return _MODELS[s]


@dataclass
class Scenario:
    """Everything derived from a configuration before integration starts."""

    cfg: dict
    model: MorseModel
    coupling: float
    env: EnvironmentSpec
    t0: float
    traj: TrajectoryConfig
    initial: object

    @property
    def diss(self):
        return build_dissipator(self.model, self.env)

    def derived(self):
        return {
            "lambda": self.coupling,
            "omega01": self.model.omega01,
            "gamma01_T0": ground_rate(self.model, self.coupling),
            "t0": self.t0,
            "t0_convention": self.cfg["t0_convention"],
            "n_bound": self.model.n_bound,
            "dt": self.traj.dt,
            "sample_stride": self.traj.sample_stride,
            "n_samples": self.traj.n_samples,
            "quadrature": {"x_lo": self.model.quad_spec.x_lo, "x_hi": self.model.quad_spec.x_hi,
                           "points_per_unit": self.model.quad_spec.points_per_unit,
                           "order": self.model.quad_spec.order},
        }


def prepare(cfg):
    """Resolve model, coupling, initial state and time grid; raise DomainError
    for any physics precondition failure."""
    cfg = with_defaults(cfg)
    model = get_model(float(cfg["s"]))
    if "ratio" in cfg["coupling"]:
        lam = calibrate_lambda(model, cfg["coupling"]["ratio"])
    else:
        lam = float(cfg["coupling"]["lambda"])
    env = EnvironmentSpec.for_model(model, cfg["temperature"], lam)
    t0 = small_oscillation_period(model.s, cfg["t0_convention"])

    init = cfg["initial"]
    if "coherent" in init:
        xp = list(init["coherent"]) + [0.0]
        initial = coherent_state(model, xp[0], xp[1], threshold=cfg["dissociation_threshold"])
    elif "eigenstate" in init:
        n = init["eigenstate"]
        if n >= model.n_bound:
            raise DomainError(f"eigenstate {n} does not exist; the model has "
                              f"{model.n_bound} bound states")
        initial = eigenstate(model, n)
    else:
        if env.temperature == 0:
            logger.info("thermal initial state at T=0 is the ground state")
        initial = thermal_state(model, env)

    common = dict(level=cfg["level"], engine=cfg["engine"], positivity_tol=cfg["positivity_tol"])
    if "dt" in cfg:
        traj = TrajectoryConfig(dt=cfg["dt"], t_max=cfg["t_max_t0"] * t0,
                                sample_stride=cfg["sample_stride"], **common)
    else:
        traj = TrajectoryConfig.sampled(model, t0, cfg["t_max_t0"], cfg["samples_per_t0"],
                                        k=cfg["steps_per_period"], **common)
    traj.validate_for(model)
    return Scenario(cfg, model, lam, env, t0, traj, initial)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def simulate(sc, snapshot_sink=None):
    """Integrate a prepared scenario; frames requested by the config are kept as snapshots."""
    wig = sc.cfg["outputs"].get("wigner")
    snap_times = [t * sc.t0 for t in wig["frame_times_t0"]] if wig else []
    rec = evolve(sc.initial, sc.traj, sc.model, sc.diss, snapshot_times=snap_times,
                 snapshot_sink=snapshot_sink)
    rec.t0 = sc.t0
    return rec


def fit_record(sc, rec):
    a = sc.cfg["analysis"]
    return detect_decoherence_time(rec.t_over_t0, rec.entropy, rec.purity,
                                   window=a["smooth_window"], slope_ratio=a["slope_ratio"])


def run_scenario(cfg, out_dir):
    """Run one scenario and write its artifacts plus ``manifest.json`` to
    ``out_dir``.  Returns the manifest dict."""
    cfg = with_defaults(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc = prepare(cfg)
    outputs = cfg["outputs"]
    files = []

    writer = None
    if outputs.get("snapshots"):
        meta = {"N": sc.model.n_bound, "s": sc.model.s, "lambda": sc.coupling,
                "T": sc.env.temperature, "level": sc.traj.level, "dt": sc.traj.dt,
                "t0": sc.t0, "sample_stride": sc.traj.sample_stride}
        writer = SnapshotWriter(out / "snapshots.bin", meta)
    try:
        rec = simulate(sc, writer)
    finally:
        if writer is not None:
            writer.close()
    if writer is not None:
        files += ["snapshots.bin", "snapshots.bin.json"]

    if outputs.get("csv", True):
        rec.write_csv(out / "trajectory.csv")
        files.append("trajectory.csv")

    frames = []
    wig = outputs.get("wigner")
    if wig:
        spec = GridSpec.from_dict(wig.get("grid", {}))
        grids, paths = [], []
        for k, tt in enumerate(wig["frame_times_t0"]):
            t_key, rho = rec.snapshot_near(tt * sc.t0)
            g = wigner_transform(rho, sc.model, spec, t=t_key)
            grids.append(g)
            name = f"wigner_{k:02d}.pgm"
            paths.append(out / name)
            frames.append({"file": name, "t": t_key, "t_over_t0": t_key / sc.t0,
                           "negativity": negativity(g), "norm": g.norm(),
                           "overlap_purity": g.overlap_purity()})
            files += [name, name + ".json"]
        write_frames(grids, paths)

    fit_report = None
    if outputs.get("fit"):
        try:
            fit = fit_record(sc, rec)
            fit_report = fit.report(config_hash(cfg))
            fit_report["cross_check_t_d"] = fit.cross_check_t_d
            fit_report["consistent"] = fit.consistent
        except InconclusiveError as exc:
            fit_report = exc.fit.report(config_hash(cfg))
            fit_report["inconclusive"] = str(exc)
        _write_json(out / "fit.json", fit_report)
        files.append("fit.json")

    manifest = {
        "tool": "morsedeco", "version": __version__,
        "config": cfg, "config_hash": config_hash(cfg),
        "derived": sc.derived(),
        "summary": {"min_eig": float(rec.min_eig.min()),
                    "max_trace_err": float(rec.trace_err.max()),
                    "max_herm_drift": float(rec.herm_drift.max())},
        "frames": frames,
        "outputs": {f: sha256_file(out / f) for f in files},
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def point_config(cfg, parameter, value):
    c = copy.deepcopy(cfg)
    c.pop("sweep", None)
    if parameter == "x0":
        p0 = c["initial"].get("coherent", [0.0, 0.0])[1:] or [0.0]
        c["initial"] = {"coherent": [value, p0[0]]}
    elif parameter == "temperature":
        c["temperature"] = value
    elif parameter == "lambda":
        c["coupling"] = {"lambda": value}
    else:
        c["coupling"] = {"ratio": value}
    return c


def sweep_point(cfg):
    """Run one grid point and extract its decoherence time (no files written)."""
    sc = prepare(cfg)
    rec = simulate(sc)
    row = {"min_eig": float(rec.min_eig.min())}
    try:
        fit = fit_record(sc, rec)
        row.update(t_d=fit.t_d, residual=fit.residual, slope_ratio=fit.slope_ratio,
                   cross_check_t_d=fit.cross_check_t_d, status="ok")
    except InconclusiveError as exc:
        f = exc.fit
        row.update(t_d=f.t_d, residual=f.residual, slope_ratio=f.slope_ratio,
                   cross_check_t_d=None, status="inconclusive")
    return row


def run_sweep(cfg, out_dir, threads=1):
    """Decoherence time over a parameter grid; writes ``summary.csv``,
    ``law.json`` (x0 grids) and ``manifest.json``."""
    cfg = with_defaults(cfg)
    if "sweep" not in cfg:
        raise DomainError("configuration has no 'sweep' section")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    param = cfg["sweep"]["parameter"]
    values = sorted(cfg["sweep"]["values"])
    points = [point_config(cfg, param, v) for v in values]
    for p in points:
        prepare(p)
    if threads > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(sweep_point, points))
    else:
        rows = [sweep_point(p) for p in points]

    cols = [param, "t_d", "residual", "slope_ratio", "cross_check_t_d", "status"]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for v, r in zip(values, rows):
            w.writerow([repr(float(v))] + [("" if r[c] is None else r[c] if c == "status"
                                            else repr(float(r[c]))) for c in cols[1:]])
    files = ["summary.csv"]

    law = None
    if param == "x0":
        good = [(v, r["t_d"]) for v, r in zip(values, rows) if r["status"] == "ok"]
        flagged = [v for v, r in zip(values, rows) if r["status"] != "ok"]
        if len(good) >= 4:
            law = fit_exponential(good).as_dict()
        report = {"law": law, "points_used": [g[0] for g in good], "inconclusive": flagged}
        if law is None and len(values) >= 4:
            report["refused"] = f"only {len(good)} conclusive points; at least 4 required"
        _write_json(out / "law.json", report)
        files.append("law.json")

    manifest = {"tool": "morsedeco", "version": __version__, "config": cfg,
                "config_hash": config_hash(cfg), "points": rows,
                "outputs": {f: sha256_file(out / f) for f in files}}
    _write_json(out / "manifest.json", manifest)
    return manifest
