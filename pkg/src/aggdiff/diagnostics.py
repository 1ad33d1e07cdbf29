"""Peak detection, tracking, decay/merge times and run classification.

Thresholds are absolute densities (default 0.1), so detection does not
rescale with the overall level of the profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks as _scipy_find_peaks

from .errors import InvalidParameterError
from .spatial import Field, periodic_distance, wrap

__all__ = [
    "Peak",
    "Verdict",
    "PeakTracks",
    "Tracker",
    "find_peaks",
    "track",
    "decay_time",
    "merge_time",
    "classify",
    "window_max",
    "value_at",
    "DEFAULT_SIGMA",
]

DEFAULT_SIGMA = 0.1 / math.sqrt(3.0)
DEFAULT_THRESHOLD = 0.1


def peak_width(sigma: float = DEFAULT_SIGMA) -> float:
    """Analytic support width sqrt(2) pi sigma of a cosine bump."""
    return math.sqrt(2.0) * math.pi * sigma


@dataclass(frozen=True)
class Peak:
    location: float
    height: float
    width_at_half: float
    id: int | None = None

    def labelled(self, i: int) -> "Peak":
        return Peak(self.location, self.height, self.width_at_half, i)


@dataclass(frozen=True)
class Verdict:
    kind: str  # "asymptotic_candidate", "transient", "undecided"
    event: str | None = None  # "decay" or "merge" for transients
    event_time: float | None = None
    horizon: float | None = None

    def __post_init__(self):
        if self.kind not in ("asymptotic_candidate", "transient", "undecided"):
            raise InvalidParameterError(f"unknown verdict kind {self.kind!r}")
        if self.kind == "transient" and self.event not in ("decay", "merge"):
            raise InvalidParameterError("transient verdicts need event 'decay' or 'merge'")
        if self.event_time is not None and self.horizon is not None:
            if self.event_time > self.horizon * (1 + 1e-12):
                raise InvalidParameterError("event_time exceeds horizon")

    @property
    def label(self) -> str:
        if self.kind == "transient":
            return f"Transient({self.event.capitalize()}, t={self.event_time:.4g})"
        if self.kind == "undecided":
            return f"Undecided(horizon={self.horizon:g})"
        return "AsymptoticCandidate"

    def to_dict(self) -> dict:
        return {
            "verdict": self.kind,
            "event": self.event,
            "event_time": self.event_time,
            "horizon": self.horizon,
        }


# ------------------------------------------------------------------ detection


def _half_width(u, i, dx):
    """Full width at half height around index i, walking with periodic wrap."""
    N = u.size
    half = 0.5 * u[i]
    widths = []
    for direction in (-1, 1):
        k, prev = 0, u[i]
        while k < N // 2:
            k += 1
            cur = u[(i + direction * k) % N]
            if cur < half:
                widths.append((k - 1 + (prev - half) / (prev - cur)) * dx)
                break
            prev = cur
        else:
            widths.append(k * dx)
    return float(widths[0] + widths[1])


def find_peaks(
    u: Field,
    height_min: float = DEFAULT_THRESHOLD,
    min_separation: float | None = None,
    sigma: float = DEFAULT_SIGMA,
) -> list:
    """Local maxima of a periodic profile.

    Plateaus count as one maximum at their centre.  Maxima closer than
    ``min_separation`` (default half the analytic peak width) are merged,
    keeping the taller, and each location is refined by fitting a parabola
    through the three cells around the maximum.
    """
    if not height_min > 0:
        raise InvalidParameterError("height_min must be positive")
    grid = u.grid
    if min_separation is None:
        min_separation = 0.5 * peak_width(sigma)
    if min_separation < 2.0 * grid.dx:
        raise InvalidParameterError("min_separation must be at least two cells")
    a = u.values
    N = a.size
    # start at a global minimum and pad with it, so a maximum or plateau
    # reaching the seam still has a lower neighbour on both sides
    s = int(np.argmin(a))
    rolled = np.concatenate(([a[s]], np.roll(a, -s), [a[s]]))
    idx, _ = _scipy_find_peaks(rolled, height=height_min)
    cand = []
    for j in idx:
        i = (j - 1 + s) % N
        left, mid, right = a[(i - 1) % N], a[i], a[(i + 1) % N]
        denom = left - 2.0 * mid + right
        off = 0.5 * (left - right) / denom if denom != 0 else 0.0
        loc = float(wrap(grid.x[i] + off * grid.dx, grid.L))
        cand.append(Peak(loc, float(mid), _half_width(a, i, grid.dx)))
    cand.sort(key=lambda pk: -pk.height)
    kept = []
    for pk in cand:
        if all(periodic_distance(pk.location, q.location, grid.L) >= min_separation for q in kept):
            kept.append(pk)
    kept.sort(key=lambda pk: pk.location)
    return [pk.labelled(i) for i, pk in enumerate(kept)]


def window_max(u: Field, centre: float, width: float) -> float:
    """Largest value over cells whose centres lie within width/2 of centre."""
    d = periodic_distance(u.grid.x, centre, u.grid.L)
    inside = d <= 0.5 * width
    if not np.any(inside):
        inside = d == d.min()
    return float(np.max(u.values[inside]))


def value_at(u: Field, x: float) -> float:
    """Periodic linear interpolation of the cell-centre values at x."""
    g = u.grid
    return float(np.interp(wrap(x, g.L), g.x, u.values, period=2.0 * g.L))


# ------------------------------------------------------------------ tracking


@dataclass
class PeakTracks:
    """Per-peak height and location series, one row per tracked peak."""

    times: np.ndarray
    heights: np.ndarray  # shape (n_peaks, n_times)
    locations: np.ndarray
    detected: np.ndarray  # False where the window fallback was used
    initial: list = field(default_factory=list)

    def __len__(self):
        return self.heights.shape[0]

    def series(self, k: int):
        return self.times, self.heights[k]

    def smallest(self) -> int:
        """Index of the peak that started lowest."""
        return int(np.argmin(self.heights[:, 0]))

    def largest(self) -> int:
        return int(np.argmax(self.heights[:, 0]))

    def nearest(self, x: float, L: float) -> int:
        return int(np.argmin([periodic_distance(pk.location, x, L) for pk in self.initial]))


class Tracker:
    """Incremental greedy tracker.

    Each update matches every track, tallest first, to the nearest unclaimed
    detected peak within ``max_jump``.  A track with no match reports the
    window maximum around its last location and keeps that location.
    """

    def __init__(self, initial_peaks, grid, *, sigma=DEFAULT_SIGMA, height_min=DEFAULT_THRESHOLD,
                 window=None, max_jump=None):
        self.grid = grid
        self.initial = list(initial_peaks)
        self.sigma = sigma
        self.height_min = height_min
        self.window = peak_width(sigma) if window is None else window
        self.max_jump = self.window if max_jump is None else max_jump
        self.locations = [pk.location for pk in self.initial]
        self.last_heights = [pk.height for pk in self.initial]
        self.times, self.H, self.X, self.hit = [], [], [], []

    def update(self, t: float, u: Field):
        detected = find_peaks(u, self.height_min, sigma=self.sigma) if self.initial else []
        claimed = set()
        heights = list(self.last_heights)
        hit = [False] * len(self.initial)
        for k in sorted(range(len(self.initial)), key=lambda k: -self.last_heights[k]):
            best, best_d = None, self.max_jump
            for j, pk in enumerate(detected):
                if j in claimed:
                    continue
                d = periodic_distance(pk.location, self.locations[k], self.grid.L)
                if d <= best_d:
                    best, best_d = j, d
            if best is not None:
                claimed.add(best)
                self.locations[k] = detected[best].location
                heights[k] = detected[best].height
                hit[k] = True
            else:
                heights[k] = window_max(u, self.locations[k], self.window)
        self.last_heights = heights
        self.times.append(float(t))
        self.H.append(heights)
        self.X.append(list(self.locations))
        self.hit.append(hit)
        return heights

    def result(self) -> PeakTracks:
        n = len(self.initial)
        shape = (n, len(self.times))
        H = np.array(self.H, dtype=float).T.reshape(shape)
        X = np.array(self.X, dtype=float).T.reshape(shape)
        D = np.array(self.hit, dtype=bool).T.reshape(shape)
        return PeakTracks(np.array(self.times), H, X, D, self.initial)


def track(trajectory, initial_peaks=None, *, start_time=0.0, sigma=None,
          height_min=DEFAULT_THRESHOLD) -> PeakTracks:
    """Follow peaks through a trajectory from ``start_time`` onward.

    ``initial_peaks`` defaults to the peaks detected in the first sample at
    or after ``start_time``.
    """
    if sigma is None:
        sigma = trajectory.params.sigma
    times = np.asarray(trajectory.times)
    k0 = int(np.searchsorted(times, start_time - 1e-12))
    first = trajectory.field_at(k0)
    if initial_peaks is None:
        initial_peaks = find_peaks(first, height_min, sigma=sigma)
    tr = Tracker(initial_peaks, trajectory.grid, sigma=sigma, height_min=height_min)
    for k in range(k0, len(times)):
        tr.update(times[k], trajectory.field_at(k))
    return tr.result()


# ------------------------------------------------------------------ event times


def _first_crossing(times, values, threshold):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    below = np.nonzero(values < threshold)[0]
    if below.size == 0:
        return None
    k = int(below[0])
    if k == 0:
        return float(times[0])
    h0, h1 = values[k - 1], values[k]
    frac = (h0 - threshold) / (h0 - h1)
    return float(times[k - 1] + frac * (times[k] - times[k - 1]))


def decay_time(series, threshold: float = DEFAULT_THRESHOLD):
    """First time a height series drops below ``threshold``.

    ``series`` is a ``(times, heights)`` pair.  The crossing is linearly
    interpolated between samples; None if it never happens.
    """
    if not threshold > 0:
        raise InvalidParameterError("threshold must be positive")
    times, heights = series
    return _first_crossing(times, heights, threshold)


def merge_time(trajectory, centres, threshold: float = DEFAULT_THRESHOLD, mode: str = "centres"):
    """Time at which two peaks are judged to have merged.

    ``mode="centres"``: the density at either of the fixed initial centre
    coordinates falls below threshold (the peaks have moved off them).
    ``mode="midpoint"``: the density at the point midway between the
    centres, on the shorter arc, falls below threshold.
    """
    a, b = centres
    L = trajectory.grid.L
    if mode == "centres":
        probes = [a, b]
    elif mode == "midpoint":
        probes = [float(wrap(a + 0.5 * wrap(b - a, L), L))]
    else:
        raise InvalidParameterError(f"unknown merge mode {mode!r}")
    g = trajectory.grid
    vals = [
        min(float(np.interp(wrap(x, L), g.x, s, period=2.0 * L)) for x in probes)
        for s in trajectory.states
    ]
    return _first_crossing(trajectory.times, vals, threshold)


# ------------------------------------------------------------------ classification


def _stationary(trajectory, horizon, tol):
    t = np.asarray(trajectory.times)
    T = t[-1]
    t0 = T - 0.1 * (T - t[0])
    k = int(np.argmin(np.abs(t - t0)))
    if k == len(t) - 1 or t[-1] <= t[k]:
        return False
    span = t[-1] - t[k]
    a, b = trajectory.states[k], trajectory.states[-1]
    scale = 0.5 * (np.sum(np.abs(a)) + np.sum(np.abs(b)))
    if scale == 0:
        return True
    if np.sum(np.abs(b - a)) / scale / span >= tol:
        return False
    if trajectory.params.model == "closure":
        E = trajectory.series("E")
        if np.all(np.isfinite(E[[k, -1]])):
            Eref = 0.5 * (abs(E[k]) + abs(E[-1]))
            if abs(E[-1] - E[k]) / span >= tol * max(Eref, 1e-300):
                return False
    return True


def classify(
    trajectory,
    horizon: float | None = None,
    *,
    threshold: float = DEFAULT_THRESHOLD,
    start_time: float = 0.0,
    centres=None,
    merge_mode: str = "centres",
    tol: float = 1e-6,
) -> Verdict:
    """Sort a run into transient, asymptotic candidate or undecided.

    Peaks present at ``start_time`` are tracked; the first one whose height
    drops below ``threshold`` makes the run a decay transient.  When
    ``centres`` is given a merge is also checked with ``merge_time``.  With
    no event, the run is an asymptotic candidate if the relative L1 change
    per unit time over the last tenth of the run (and, for the closure
    model, the relative energy slope) is below ``tol``.
    """
    if horizon is None:
        horizon = trajectory.times[-1]
    events = []
    tracks = track(trajectory, start_time=start_time, height_min=threshold)
    for k in range(len(tracks)):
        td = decay_time(tracks.series(k), threshold)
        if td is not None and td <= horizon:
            events.append((td, "decay"))
    if centres is not None:
        tm = merge_time(trajectory, centres, threshold, mode=merge_mode)
        if tm is not None and tm <= horizon:
            events.append((tm, "merge"))
    if events:
        t_ev, kind = min(events)
        return Verdict("transient", kind, t_ev, horizon)
    if _stationary(trajectory, horizon, tol):
        return Verdict("asymptotic_candidate", horizon=horizon)
    return Verdict("undecided", horizon=horizon)
