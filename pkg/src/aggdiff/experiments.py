"""Configured experiments: single runs, parameter sweeps and the r_c bisection.

A config is a flat mapping (YAML or JSON on disk) such as::

    experiment: decay_sweep
    D: 1.0
    gamma: 10.0
    kernel: {type: tophat, delta: 0.1}
    N: 40
    horizon: 500
    sweep: {cB: [0.5, 0.75, 1.0, 1.25, 1.5], D: [0.5, 1, 2, 4]}

Sweep axes are varied one at a time around the base values; each point is
an independent run, so points can be farmed out to worker processes
without changing the result.

Grid resolution matters a great deal for the slow transients studied
here: the escape of mass from a small peak is carried by exponentially
small tails whose size is set by the numerical diffusion of the upwind
scheme.  The figure experiments therefore default to a fixed coarse
``FIGURE_RESOLUTION``; single runs default to ``DEFAULT_RESOLUTION``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._version import __version__
from .ansatz import ansatz_from_config, build, random_ic, twin_equal, twin_unequal, single_peak
from .diagnostics import (
    Tracker,
    classify,
    decay_time,
    find_peaks,
    merge_time,
    peak_width,
    track,
    window_max,
)
from .dynamics import ModelParams, Trajectory, simulate
from .errors import BracketError, ConfigError, InvalidParameterError
from .io import load_mapping, time_tag, write_snapshot_csv
from .kernels import kernel_from_config
from .spatial import Field, make_grid

__all__ = [
    "ExperimentConfig",
    "SweepResult",
    "load_config",
    "run",
    "run_simulation",
    "run_random_ic",
    "run_single_peak_suite",
    "run_twin_equal_sweep",
    "run_decay_sweep",
    "rc_bisect",
    "rc_persists",
    "write_trajectory",
    "output_root",
    "FIGURE_RESOLUTION",
    "DEFAULT_RESOLUTION",
    "OUTPUT_ENV",
]

KINDS = ("simulate", "random_ic", "single_peak_suite", "twin_equal_sweep", "decay_sweep", "rc_bisect")

FIGURE_RESOLUTION = 40
DEFAULT_RESOLUTION = 512
OUTPUT_ENV = "AGGDIFF_OUTPUT_ROOT"

PARAM_KEYS = ("D", "gamma", "r", "kappa", "model", "sigma2")
RUN_KEYS = ("t_end", "horizon", "sample_every", "N", "L", "cfl", "dt_max", "tol", "seed")

# per-kind defaults layered under the user's mapping
_KIND_DEFAULTS = {
    "simulate": {"N": DEFAULT_RESOLUTION, "horizon": 10.0, "sample_every": 0.1},
    "random_ic": {
        "N": FIGURE_RESOLUTION,
        "horizon": 500.0,
        "sample_every": 1.0,
        "ic": {"kind": "random", "base": 0.5, "amplitude": 0.05},
        "snapshot_times": [1.0, 100.0, 460.0],
        "track_from": 1.0,
    },
    "single_peak_suite": {"N": FIGURE_RESOLUTION, "horizon": 20.0, "sample_every": 0.05,
                          "sweep": {"eps": [0.1, 0.2, 0.3]}},
    "twin_equal_sweep": {"N": FIGURE_RESOLUTION, "horizon": 100.0, "sample_every": 0.1, "eps": 0.2,
                         "sweep": {"x0": [0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]},
                         "merge_mode": "centres"},
    "decay_sweep": {"N": FIGURE_RESOLUTION, "horizon": 500.0, "sample_every": 0.25, "cB": 1.0,
                    "x0": 0.5, "sweep": {"cB": [0.5, 0.75, 1.0, 1.25, 1.5], "D": [0.5, 1.0, 2.0, 4.0]}},
    "rc_bisect": {"N": FIGURE_RESOLUTION, "horizon": 10.0, "sample_every": 0.05, "kappa": 5.0,
                  "cB": 1.0, "x0": 0.5, "bracket": [0.0, 1.0], "width": 0.005,
                  "persist_fraction": 0.5},
}

_BASE_DEFAULTS = {
    "D": 1.0,
    "gamma": 10.0,
    "r": 0.0,
    "kappa": 1.0,
    "model": "full",
    "kernel": {"type": "tophat", "delta": 0.1},
    "L": 1.0,
    "cfl": 0.4,
    "dt_max": 0.1,
    "tol": 1e-5,
    "seed": 0,
    "threshold": 0.1,
    "workers": 1,
    "output_dir": None,
}

KNOWN_KEYS = set(_BASE_DEFAULTS) | set(PARAM_KEYS) | set(RUN_KEYS) | {
    "experiment", "ic", "sweep", "eps", "x0", "cB", "bracket", "width", "persist_fraction",
    "snapshot_times", "track_from", "merge_mode", "t_end", "sigma2",
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.  Build with ``from_mapping``."""

    data: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, mapping: dict | None = None, **overrides) -> "ExperimentConfig":
        mapping = dict(mapping or {})
        mapping.update(overrides)
        unknown = set(mapping) - KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kind = mapping.get("experiment", "simulate")
        if kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {KINDS}")
        if "t_end" in mapping and "horizon" not in mapping:
            mapping["horizon"] = mapping.pop("t_end")
        mapping.pop("t_end", None)
        data = _merge(_merge(_BASE_DEFAULTS, _KIND_DEFAULTS[kind]), mapping)
        data["experiment"] = kind
        cfg = cls(data)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)

    @property
    def kind(self) -> str:
        return self.data["experiment"]

    @property
    def horizon(self) -> float:
        return float(self.data["horizon"])

    @property
    def axes(self) -> dict:
        return dict(self.data.get("sweep") or {})

    def validate(self):
        try:
            if not self.horizon > 0:
                raise ConfigError("horizon must be positive")
            if not float(self.data["sample_every"]) > 0:
                raise ConfigError("sample_every must be positive")
            self.params()
            self.grid()
        except (InvalidParameterError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        if self.kind in ("single_peak_suite", "twin_equal_sweep", "decay_sweep"):
            axes = self.axes
            if not axes or any(not list(v) for v in axes.values()):
                raise ConfigError("sweep axes must be non-empty")
        if self.kind == "random_ic" and self.horizon < 460:
            raise ConfigError("random_ic needs horizon >= 460")

    def params(self, **changes) -> ModelParams:
        d = self.data
        kw = {k: d[k] for k in ("D", "gamma", "r", "kappa", "model")}
        kw = {k: (v if k == "model" else float(v)) for k, v in kw.items()}
        if d.get("sigma2") is not None:
            kw["sigma2"] = float(d["sigma2"])
        kw["kernel"] = kernel_from_config(d["kernel"])
        kw.update(changes)
        return ModelParams(**kw)

    def grid(self):
        return make_grid(float(self.data["L"]), int(self.data["N"]))

    def with_overrides(self, **changes) -> "ExperimentConfig":
        d = {k: v for k, v in self.data.items()}
        d.update(changes)
        return ExperimentConfig.from_mapping(d)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    @property
    def hash(self) -> str:
        """Short digest of everything that can change results."""
        d = {k: v for k, v in self.data.items() if k not in ("output_dir", "workers")}
        blob = json.dumps(d, sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def run_kwargs(self) -> dict:
        d = self.data
        return {"tol": float(d["tol"]), "cfl": float(d["cfl"]), "dt_max": float(d["dt_max"])}


def load_config(path, **overrides) -> ExperimentConfig:
    return ExperimentConfig.from_mapping(load_mapping(path), **overrides)


@dataclass
class SweepResult:
    kind: str
    rows: list
    config_hash: str
    version: str = __version__
    extra: dict = field(default_factory=dict)
    trajectories: dict = field(default_factory=dict, repr=False, compare=False)

    def column(self, name):
        return [row.get(name) for row in self.rows]

    def row_for(self, **match):
        for row in self.rows:
            if all(row.get(k) == v for k, v in match.items()):
                return row
        raise KeyError(match)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "config_hash": self.config_hash,
            "version": self.version,
            "rows": self.rows,
            **self.extra,
        }

    def write(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        keys = []
        for row in self.rows:
            keys.extend(k for k in row if k not in keys and not isinstance(row[k], (list, dict)))
        with open(directory / "sweep.csv", "w") as fh:
            fh.write(",".join(keys + ["config_hash"]) + "\n")
            for row in self.rows:
                fh.write(",".join(_fmt(row.get(k)) for k in keys) + f",{self.config_hash}\n")
        with open(directory / "result.json", "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "."))


def point_seed(seed: int, index: int) -> int:
    """Independent integer seed for sweep point ``index``."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


# ---------------------------------------------------------------- helpers


def _initial_field(cfg: ExperimentConfig, grid, seed):
    ic = dict(cfg.get("ic") or {})
    kind = str(ic.get("kind", "")).lower()
    if kind in ("random", "random_ic"):
        return random_ic(grid, float(ic.get("base", 0.5)), float(ic.get("amplitude", 0.05)), seed)
    if kind in ("uniform", "constant"):
        return Field(np.full(grid.N, float(ic.get("value", 0.5))), grid)
    if not kind:
        raise ConfigError("config needs an 'ic' mapping with a 'kind'")
    try:
        spec = ansatz_from_config(ic, L=grid.L, sigma=cfg.params().sigma)
        return build(spec, grid)
    except (InvalidParameterError, KeyError, ValueError) as exc:
        raise ConfigError(f"bad initial condition {ic!r}: {exc}") from exc


def _simulate(cfg, u0, p, horizon=None, **kw):
    opts = cfg.run_kwargs()
    opts.update(kw)
    return simulate(u0, p, cfg.horizon if horizon is None else horizon, float(cfg["sample_every"]), **opts)


def _peak_pair(peaks):
    """Two tallest peaks ordered by location, padded with None."""
    top = sorted(peaks, key=lambda pk: -pk.height)[:2]
    top.sort(key=lambda pk: pk.location)
    out = []
    for i in range(2):
        out.extend([top[i].height, top[i].location] if i < len(top) else [None, None])
    return out


def write_trajectory(traj: Trajectory, directory, *, snapshot_times=None, sigma=None):
    """Write ``trajectory.csv`` and ``snapshots/t_<time>.csv`` files."""
    directory = Path(directory)
    (directory / "snapshots").mkdir(parents=True, exist_ok=True)
    sigma = traj.params.sigma if sigma is None else sigma
    with open(directory / "trajectory.csv", "w") as fh:
        fh.write("t,mass,E,dissipation,peak1_h,peak1_x,peak2_h,peak2_x\n")
        for k, t in enumerate(traj.times):
            o = traj.observables[k]
            pk = _peak_pair(find_peaks(traj.field_at(k), sigma=sigma))
            vals = [t, o.get("mass"), o.get("E"), o.get("dissipation")] + pk
            fh.write(",".join(_fmt(None if v is None else float(v)) for v in vals) + "\n")
    times = traj.times if snapshot_times is None else snapshot_times
    for t in times:
        k = traj.index_at(t)
        write_snapshot_csv(directory / "snapshots" / f"t_{time_tag(traj.times[k])}.csv", traj.field_at(k))


def _expect(cfg, kind):
    if cfg.kind != kind:
        raise ConfigError(f"expected an {kind!r} config, got {cfg.kind!r}")


def _map(fn, items, workers):
    items = list(items)
    if workers and workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=int(workers)) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


# ---------------------------------------------------------------- single run


def run_simulation(cfg: ExperimentConfig, *, keep=True):
    """Run the configured initial condition and classify the outcome."""
    grid = cfg.grid()
    p = cfg.params()
    seed = int(cfg["seed"])
    u0 = _initial_field(cfg, grid, seed)
    traj = _simulate(cfg, u0, p, seed=seed)
    ic = dict(cfg.get("ic") or {})
    centres = None
    if str(ic.get("kind", "")).lower().startswith("twin"):
        x0 = float(ic.get("x0", 0.5))
        centres = (-x0, x0)
    track_from = float(cfg.get("track_from") or 0.0)
    verdict = classify(traj, cfg.horizon, threshold=float(cfg["threshold"]), start_time=track_from,
                       centres=centres, merge_mode=cfg.get("merge_mode") or "centres")
    row = {
        "params": p.to_config(),
        "seed": seed,
        **verdict.to_dict(),
        "final_peaks": [
            {"location": pk.location, "height": pk.height, "width_at_half": pk.width_at_half}
            for pk in find_peaks(traj.final, sigma=p.sigma)
        ],
        "config_hash": cfg.hash,
        "version": __version__,
    }
    return traj, verdict, row


# ---------------------------------------------------------------- figure experiments


def run_random_ic(cfg: ExperimentConfig) -> SweepResult:
    """Aggregation from a perturbed uniform state, classified from ``track_from`` on."""
    _expect(cfg, "random_ic")
    grid = cfg.grid()
    p = cfg.params()
    seed = int(cfg["seed"])
    ic = cfg["ic"]
    u0 = random_ic(grid, float(ic.get("base", 0.5)), float(ic.get("amplitude", 0.05)), seed)
    snaps = [float(t) for t in cfg.get("snapshot_times") or []]
    traj = _simulate(cfg, u0, p, sample_times=snaps, seed=seed)
    t1 = float(cfg["track_from"])
    thr = float(cfg["threshold"])
    verdict = classify(traj, cfg.horizon, threshold=thr, start_time=t1)
    tracks = track(traj, start_time=t1, height_min=thr)
    row = {"seed": seed, "n_peaks_start": len(tracks), **verdict.to_dict()}
    if len(tracks) >= 2:
        order = np.argsort(tracks.heights[:, -1])
        small = int(order[0]) if len(tracks) else 0
        for t in snaps:
            k = int(np.argmin(np.abs(tracks.times - t)))
            row[f"small_h_t{time_tag(t)}"] = float(tracks.heights[small, k])
    for t in snaps:
        k = traj.index_at(t)
        row[f"n_peaks_t{time_tag(t)}"] = len(find_peaks(traj.field_at(k), thr, sigma=p.sigma))
    return SweepResult("random_ic", [row], cfg.hash, trajectories={seed: traj})


def _secondary_series(traj, L, width):
    """Window maximum at the antipode x = +-L of a centred single peak."""
    return np.array([window_max(traj.field_at(k), L, width) for k in range(len(traj))])


def _single_peak_point(args):
    cfg, eps = args
    grid = cfg.grid()
    p = cfg.params()
    u0 = build(single_peak(eps, L=grid.L, sigma=p.sigma), grid)
    traj = _simulate(cfg, u0, p)
    w = peak_width(p.sigma)
    thr = float(cfg["threshold"])
    sec = _secondary_series(traj, grid.L, w)
    kmax = int(np.argmax(sec))
    t = np.asarray(traj.times)
    formed = bool(sec[kmax] > max(2.0 * eps, thr)) and kmax > 0
    t_sec = decay_time((t[kmax:], sec[kmax:]), thr) if formed else None
    fin = traj.final
    outside = np.abs(grid.x) > 0.5 * w + p.kernel.support
    m = traj.series("mass")
    return {
        "eps": eps,
        "final_peaks": len(find_peaks(fin, thr, sigma=p.sigma)),
        "exterior_max": float(np.max(fin.values[outside])),
        "exterior_mass": float(np.sum(fin.values[outside]) * grid.dx),
        "secondary_formed": formed,
        "secondary_max": float(sec[kmax]),
        "secondary_decay_time": t_sec,
        "mass_drift": float(np.max(np.abs(m - m[0])) / m[0]),
        "min_u": float(np.min(traj.values)),
    }, traj


def run_single_peak_suite(cfg: ExperimentConfig) -> SweepResult:
    """Single cosine peak on a floor eps: record what happens to the floor.

    The exterior is everything farther than half the analytic peak width
    plus the kernel reach from the origin.
    """
    _expect(cfg, "single_peak_suite")
    eps_list = [float(e) for e in cfg.axes.get("eps", [])]
    out = _map(_single_peak_point, [(cfg, e) for e in eps_list], cfg["workers"])
    rows = sorted((r for r, _ in out), key=lambda r: r["eps"])
    trajs = {r["eps"]: tr for r, tr in out}
    return SweepResult("single_peak_suite", rows, cfg.hash, trajectories=trajs)


def _twin_point(args):
    cfg, x0 = args
    grid = cfg.grid()
    p = cfg.params()
    eps = float(cfg["eps"])
    thr = float(cfg["threshold"])
    mode = cfg.get("merge_mode") or "centres"
    u0 = build(twin_equal(eps, x0, L=grid.L, sigma=p.sigma), grid)
    traj = _simulate(cfg, u0, p)
    tm = merge_time(traj, (-x0, x0), thr, mode=mode)
    verdict = classify(traj, cfg.horizon, threshold=thr, centres=(-x0, x0), merge_mode=mode)
    fin = find_peaks(traj.final, thr, sigma=p.sigma)
    hs = sorted(pk.height for pk in fin)
    return {
        "x0": x0,
        "merge_time": tm,
        **verdict.to_dict(),
        "final_peaks": len(fin),
        "height_ratio": (hs[0] / hs[-1]) if len(hs) >= 2 else None,
    }, traj


def run_twin_equal_sweep(cfg: ExperimentConfig) -> SweepResult:
    _expect(cfg, "twin_equal_sweep")
    x0s = [float(v) for v in cfg.axes.get("x0", [])]
    out = _map(_twin_point, [(cfg, x) for x in x0s], cfg["workers"])
    rows = sorted((r for r, _ in out), key=lambda r: r["x0"])
    return SweepResult("twin_equal_sweep", rows, cfg.hash, trajectories={r["x0"]: tr for r, tr in out})


def smaller_peak_run(cfg, p, cB, x0, horizon, *, stop_on_decay=True):
    """Run unequal twins and follow the smaller peak (started at +x0)."""
    grid = cfg.grid()
    thr = float(cfg["threshold"])
    u0 = build(twin_unequal(cB, x0, L=grid.L, sigma=p.sigma), grid)
    peaks = find_peaks(u0, thr, sigma=p.sigma)
    tracker = Tracker(peaks, grid, sigma=p.sigma, height_min=thr)
    k_small = min(range(len(peaks)), key=lambda k: abs(peaks[k].location - x0))
    state = {"n": 0}

    def stop(traj):
        while state["n"] < len(traj):
            tracker.update(traj.times[state["n"]], traj.field_at(state["n"]))
            state["n"] += 1
        return stop_on_decay and tracker.last_heights[k_small] < thr

    traj = _simulate(cfg, u0, p, horizon=horizon, stop=stop)
    tracks = tracker.result()
    return traj, tracks, k_small


def _decay_point(args):
    cfg, axis, value = args
    cB = float(cfg["cB"])
    p = cfg.params()
    if axis == "cB":
        cB = float(value)
    elif axis == "D":
        p = p.with_(D=float(value))
    else:
        raise ConfigError(f"decay sweep axis must be 'cB' or 'D', got {axis!r}")
    traj, tracks, k = smaller_peak_run(cfg, p, cB, float(cfg["x0"]), cfg.horizon)
    td = decay_time(tracks.series(k), float(cfg["threshold"]))
    return {
        "axis": axis,
        "value": float(value),
        "cB": cB,
        "D": p.D,
        "start_height": float(tracks.heights[k, 0]),
        "decay_time": td,
        "verdict": "transient" if td is not None else "undecided",
        "event": "decay" if td is not None else None,
        "event_time": td,
        "horizon": cfg.horizon,
    }


def run_decay_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Decay time of the smaller of two unequal peaks, one axis at a time."""
    _expect(cfg, "decay_sweep")
    points = [(cfg, axis, v) for axis, vals in cfg.axes.items() for v in vals]
    rows = _map(_decay_point, points, cfg["workers"])
    rows.sort(key=lambda r: (r["axis"], r["value"]))
    return SweepResult("decay_sweep", rows, cfg.hash)


def rc_persists(cfg: ExperimentConfig, r: float) -> dict:
    """Does the smaller peak survive to the horizon with growth rate r?

    Survival means the tracked height at the horizon is at least
    ``persist_fraction`` of its initial height and never fell below the
    threshold along the way.
    """
    p = cfg.params(r=float(r))
    _, tracks, k = smaller_peak_run(cfg, p, float(cfg["cB"]), float(cfg["x0"]), cfg.horizon,
                                    stop_on_decay=False)
    h = tracks.heights[k]
    frac = float(cfg["persist_fraction"])
    ok = bool(h[-1] >= frac * h[0] and np.min(h) >= float(cfg["threshold"]))
    return {"r": float(r), "persists": ok, "h0": float(h[0]), "h_end": float(h[-1]), "h_min": float(np.min(h))}


def rc_bisect(cfg: ExperimentConfig, *, record: list | None = None) -> float:
    """Bisect on r for the growth rate at which the smaller peak starts to persist.

    Both bracket ends are evaluated first; the low end must decay and the
    high end persist, otherwise ``BracketError``.  Returns the midpoint of
    the final bracket once narrower than ``width``.
    """
    _expect(cfg, "rc_bisect")
    lo, hi = (float(v) for v in cfg["bracket"])
    width = float(cfg["width"])
    if not (hi > lo and width > 0):
        raise ConfigError("need bracket[1] > bracket[0] and width > 0")
    log = record if record is not None else []
    v_lo = rc_persists(cfg, lo)
    v_hi = rc_persists(cfg, hi)
    log.extend([v_lo, v_hi])
    if v_lo["persists"] or not v_hi["persists"]:
        raise BracketError(
            f"bracket [{lo}, {hi}] does not separate decay from persistence",
            low_verdict=v_lo,
            high_verdict=v_hi,
        )
    while hi - lo >= width:
        mid = 0.5 * (lo + hi)
        v = rc_persists(cfg, mid)
        log.append(v)
        if v["persists"]:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def run(cfg: ExperimentConfig):
    """Dispatch on ``cfg.kind``; returns a SweepResult."""
    kind = cfg.kind
    if kind == "simulate":
        traj, verdict, row = run_simulation(cfg)
        return SweepResult("simulate", [row], cfg.hash, trajectories={0: traj})
    if kind == "random_ic":
        return run_random_ic(cfg)
    if kind == "single_peak_suite":
        return run_single_peak_suite(cfg)
    if kind == "twin_equal_sweep":
        return run_twin_equal_sweep(cfg)
    if kind == "decay_sweep":
        return run_decay_sweep(cfg)
    record = []
    rc = rc_bisect(cfg, record=record)
    return SweepResult("rc_bisect", record, cfg.hash, extra={"r_c": rc})
