"""Right-hand sides, time steppers and the trajectory driver.

Two models share one finite-volume layout (fluxes on faces i+1/2, cell
averages at centres):

* ``"full"``: u_t = D u_xx - gamma (u (K*u)_x)_x + r u (1 - u/kappa)
* ``"closure"``: u_t = -gamma (u (u + sigma2/2 u_xx)_x)_x + r u (1 - u/kappa)

Advective fluxes use first-order upwinding of u, so the semi-discrete
systems conserve mass exactly (for r = 0) and keep u >= 0.

Time stepping
-------------
``rk4``
    classical explicit RK4 on the full model, dt bounded by ``stable_dt``.
``imex``
    linearly implicit backward Euler with the transport velocity (full
    model) or the mobility (closure model) frozen at the old level.  For
    the full model the matrix is an M-matrix with zero column sums, so
    each step is positivity preserving and conservative for any dt.  For
    the closure model the fourth-order part is implicit and the concave
    -u**2 part of the energy explicit (a convex splitting), which makes
    every step energy-decreasing.  ``simulate`` wraps these with
    step-doubling error control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from ._banded import cyclic_banded_solve
from .energetics import _dissipation_array, _energy_array, chemical_potential
from .errors import InvalidParameterError, NumericalBlowupError
from .kernels import Kernel, make_top_hat, table_for
from .spatial import Field, Grid, _d1, _d2, _d3

__all__ = [
    "ModelParams",
    "Trajectory",
    "rhs_full",
    "rhs_closure",
    "step",
    "stable_dt",
    "simulate",
    "default_observers",
]

BLOWUP_FACTOR = 10.0


@dataclass(frozen=True)
class ModelParams:
    D: float = 1.0
    gamma: float = 10.0
    r: float = 0.0
    kappa: float = 1.0
    kernel: Kernel = field(default_factory=lambda: make_top_hat(0.1))
    model: str = "full"  # "full" or "closure"
    sigma2: float | None = None  # overrides the kernel's second moment

    def __post_init__(self):
        if self.model not in ("full", "closure"):
            raise InvalidParameterError(f"model must be 'full' or 'closure', got {self.model!r}")
        if not self.D >= 0:
            raise InvalidParameterError("D must be >= 0")
        if not self.gamma > 0:
            raise InvalidParameterError("gamma must be > 0")
        if not self.r >= 0:
            raise InvalidParameterError("r must be >= 0")
        if not self.kappa > 0:
            raise InvalidParameterError("kappa must be > 0")
        if self.sigma2 is not None and not self.sigma2 > 0:
            raise InvalidParameterError("sigma2 must be > 0")

    @property
    def s2(self) -> float:
        """Second moment used by the closure model and the energy."""
        return self.sigma2 if self.sigma2 is not None else self.kernel.second_moment

    @property
    def sigma(self) -> float:
        return math.sqrt(self.s2)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def check_grid(self, grid: Grid):
        if self.model == "closure" and not math.pi * self.sigma < math.sqrt(2.0) * grid.L:
            raise InvalidParameterError("closure model needs pi*sigma < sqrt(2)*L")
        if self.model == "full":
            table_for(self.kernel, grid)

    def to_config(self) -> dict:
        d = {
            "D": self.D,
            "gamma": self.gamma,
            "r": self.r,
            "kappa": self.kappa,
            "kernel": self.kernel.to_config(),
            "model": self.model,
        }
        if self.sigma2 is not None:
            d["sigma2"] = self.sigma2
        return d


# ---------------------------------------------------------------- fluxes


def _logistic(u, p):
    if p.r == 0.0:
        return 0.0
    return p.r * u * (1.0 - u / p.kappa)


def _full_face_velocity(u, p, grid):
    # the kernel has unit mass, so subtracting a constant leaves the
    # velocity unchanged; it also makes v vanish exactly for uniform u
    W = table_for(p.kernel, grid).apply(u - u[0])
    return p.gamma * (np.roll(W, -1) - W) / grid.dx


def _upwind_flux(u, v):
    return np.where(v > 0.0, v * u, v * np.roll(u, -1))


def _divergence(F, dx):
    return -(F - np.roll(F, 1)) / dx


def _rhs_full_array(u, p, grid):
    dx = grid.dx
    v = _full_face_velocity(u, p, grid)
    F = _upwind_flux(u, v) - p.D * (np.roll(u, -1) - u) / dx
    return _divergence(F, dx) + _logistic(u, p)


def _rhs_closure_array(u, p, grid):
    dx = grid.dx
    psi = chemical_potential(u, p.s2, dx)
    v = p.gamma * (np.roll(psi, -1) - psi) / dx
    return _divergence(_upwind_flux(u, v), dx) + _logistic(u, p)


def _check_finite(du, t=None):
    if not np.all(np.isfinite(du)):
        raise NumericalBlowupError("non-finite values in right-hand side", t=t)


def rhs_full(u: Field, p: ModelParams) -> Field:
    """du/dt for the nonlocal model, assembled in conservative flux form."""
    if p.model != "full":
        raise InvalidParameterError("rhs_full needs model='full'")
    du = _rhs_full_array(u.values, p, u.grid)
    _check_finite(du)
    return Field(du, u.grid)


def rhs_closure(u: Field, p: ModelParams) -> Field:
    """du/dt for the moment-closure model in conservative flux form."""
    if p.model != "closure":
        raise InvalidParameterError("rhs_closure needs model='closure'")
    du = _rhs_closure_array(u.values, p, u.grid)
    _check_finite(du)
    return Field(du, u.grid)


def _rhs_array(u, p, grid):
    if p.model == "full":
        return _rhs_full_array(u, p, grid)
    return _rhs_closure_array(u, p, grid)


# ---------------------------------------------------------------- steppers


def _rk4(u, p, grid, dt):
    k1 = _rhs_full_array(u, p, grid)
    k2 = _rhs_full_array(u + 0.5 * dt * k1, p, grid)
    k3 = _rhs_full_array(u + 0.5 * dt * k2, p, grid)
    k4 = _rhs_full_array(u + dt * k3, p, grid)
    return u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _imex_full(u, p, grid, dt):
    dx = grid.dx
    v = _full_face_velocity(u, p, grid)
    vp = np.maximum(v, 0.0)
    vm = np.minimum(v, 0.0)
    d = p.D / dx
    # du_i/dt = sub_i u_{i-1} + diag_i u_i + sup_i u_{i+1}
    sub = (np.roll(vp, 1) + d) / dx
    diag = (np.roll(vm, 1) - vp - 2.0 * d) / dx
    sup = (d - vm) / dx
    lhs_diag = 1.0 - dt * diag
    # solve for the increment; its right-hand side is the explicit flux
    # divergence, exactly zero for a uniform state
    F = _upwind_flux(u, v) - p.D * (np.roll(u, -1) - u) / dx
    rhs = dt * _divergence(F, dx)
    if p.r:
        # Patankar split: gain explicit, loss implicit keeps the M-matrix
        lhs_diag += dt * p.r * u / p.kappa
        rhs += dt * _logistic(u, p)
    bands = np.vstack([-dt * sub, lhs_diag, -dt * sup])
    return u + cyclic_banded_solve(bands, rhs)


def _mobility_operator_bands(M, dx):
    """Diagonals (offsets -1..1) of A_M v = D^-(M D^+ v)."""
    Mm = np.roll(M, 1)
    return np.vstack([Mm, -(M + Mm), M]) / dx**2


def _imex_closure(u, p, grid, dt, with_dissipation=False):
    """One convex-splitting step of the closure model.

    Solves (I + dt gamma c A_M D2) u' = u - dt gamma A_M u with the upwind
    mobility M lagged.  With ``with_dissipation`` also returns
    sum_faces F * D+psi_s dx / gamma, where F is the face flux actually
    applied and psi_s = u + c D2 u' the potential it was driven by; for
    r = 0 the energy change of the step is exactly -2 gamma dt times this
    minus a non-negative O(dt**2) remainder.
    """
    dx = grid.dx
    c = 0.5 * p.s2
    g = p.gamma
    psi = chemical_potential(u, p.s2, dx)
    grad = np.roll(psi, -1) - psi
    M = np.where(grad > 0.0, u, np.roll(u, -1))
    Mm = np.roll(M, 1)
    # diagonals (offsets -2..2) of A_M D2 with A_M v = D-(M D+ v)
    AD2 = np.vstack([Mm, -(3.0 * Mm + M), 3.0 * (M + Mm), -(3.0 * M + Mm), M]) / dx**4
    bands = dt * g * c * AD2
    bands[2] += 1.0
    # increment form: rhs = -dt gamma A_M psi (+ growth), zero for uniform u
    Apsi = (M * grad - Mm * np.roll(grad, 1)) / dx**2
    rhs = -dt * g * Apsi
    if p.r:
        rhs = rhs + dt * _logistic(u, p)
        bands[2] += dt * p.r * u / p.kappa
    solved = u + cyclic_banded_solve(bands, rhs)
    # rebuild the update in flux form so mass is conserved to round-off
    # regardless of how accurately the stiff banded system was solved
    psi_s = u + c * _d2(solved, dx)
    F = g * M * (np.roll(psi_s, -1) - psi_s) / dx
    un = u - dt / dx * (F - np.roll(F, 1))
    if not np.all(un >= 0.0):
        # outflow limiter: rescale face fluxes so no cell gives away more than it holds
        out = dt / dx * (np.maximum(F, 0.0) + np.maximum(-np.roll(F, 1), 0.0))
        theta = np.ones_like(u)
        over = (out > 0.0) & (out > u)
        theta[over] = np.maximum(u[over], 0.0) / out[over]
        F = np.where(F > 0.0, F * theta, F * np.roll(theta, -1))
        un = u - dt / dx * (F - np.roll(F, 1))
    if p.r:
        un = un + dt * p.r * u * (1.0 - solved / p.kappa)
    if not with_dissipation:
        return un
    Dpsi = (np.roll(psi_s, -1) - psi_s) / dx
    return un, float(np.sum(F * Dpsi) * dx / g)


def _step_array(u, p, grid, dt, scheme):
    if p.model == "closure":
        return _imex_closure(u, p, grid, dt)
    if scheme == "rk4":
        return _rk4(u, p, grid, dt)
    if scheme == "imex":
        return _imex_full(u, p, grid, dt)
    raise InvalidParameterError(f"unknown scheme {scheme!r}")


def step(u: Field, p: ModelParams, dt: float, scheme: str = "rk4") -> Field:
    """Advance one step of size dt.

    The full model uses explicit RK4 by default (``dt <= stable_dt``) or a
    single linearly implicit step with ``scheme="imex"``.  The closure model
    always uses its linearly implicit convex-splitting step.
    """
    if not dt > 0:
        raise InvalidParameterError("dt must be positive")
    un = _step_array(u.values, p, u.grid, dt, scheme)
    _guard(u.values, un, None, u)
    return Field(un, u.grid)


def _guard(u, un, t, last_good):
    if not np.all(np.isfinite(un)):
        raise NumericalBlowupError("non-finite values after time step", t=t, last_good=last_good)
    ref = np.max(np.abs(u))
    if ref > 0 and np.max(np.abs(un)) > BLOWUP_FACTOR * ref:
        raise NumericalBlowupError("sup norm grew more than tenfold in one step", t=t, last_good=last_good)


def stable_dt(u: Field, p: ModelParams, cfl: float = 0.4, dt_max: float = 0.1) -> float:
    """Explicit stability bound: advective CFL and (full model) diffusive bound."""
    dx = u.grid.dx
    a = u.values
    if p.model == "full":
        v = _full_face_velocity(a, p, u.grid)
    else:
        v = p.gamma * (_d1(a, dx) + 0.5 * p.s2 * _d3(a, dx))
    bounds = [dt_max]
    vmax = float(np.max(np.abs(v)))
    if vmax > 0:
        bounds.append(cfl * dx / vmax)
    if p.model == "full" and p.D > 0:
        bounds.append(cfl * dx**2 / (2.0 * p.D))
    return min(bounds)


# ---------------------------------------------------------------- driver


Observer = Callable[[float, Field, ModelParams], dict]


def default_observers() -> list:
    def mass_obs(t, f, p):
        return {"mass": float(np.sum(f.values) * f.grid.dx)}

    def energy_obs(t, f, p):
        return {
            "E": _energy_array(f.values, p.s2, f.grid.dx),
            "dissipation": _dissipation_array(f.values, p.s2, f.grid.dx),
        }

    return [mass_obs, energy_obs]


@dataclass
class Trajectory:
    grid: Grid
    params: ModelParams
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    observables: list = field(default_factory=list)
    seed: int | None = None
    stopped_early: bool = False
    n_steps: int = 0

    def append(self, t, values, obs):
        if self.times and not t > self.times[-1]:
            raise ValueError("sample times must increase strictly")
        v = np.array(values, dtype=float, copy=True)
        v.flags.writeable = False
        self.times.append(float(t))
        self.states.append(v)
        self.observables.append(obs)

    def __len__(self):
        return len(self.times)

    @property
    def snapshots(self) -> list:
        return [(t, Field(v, self.grid)) for t, v in zip(self.times, self.states)]

    def field_at(self, k: int) -> Field:
        return Field(self.states[k], self.grid)

    @property
    def final(self) -> Field:
        return self.field_at(-1)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times)

    @property
    def values(self) -> np.ndarray:
        return np.vstack(self.states)

    def series(self, name: str) -> np.ndarray:
        return np.array([o.get(name, np.nan) for o in self.observables], dtype=float)

    def index_at(self, t: float) -> int:
        """Index of the sample closest to time t."""
        return int(np.argmin(np.abs(self.t - t)))

    def shifted(self, cells: int) -> "Trajectory":
        out = Trajectory(self.grid, self.params, seed=self.seed)
        for t, v, o in zip(self.times, self.states, self.observables):
            out.append(t, np.roll(v, cells), dict(o))
        return out


def _sample_schedule(t_end, sample_every, extra):
    n = int(math.floor(t_end / sample_every + 1e-9))
    ts = [k * sample_every for k in range(1, n + 1)]
    ts = [t for t in ts if t < t_end - 1e-12 * max(1.0, t_end)]
    ts.append(t_end)
    if extra:
        ts.extend(t for t in extra if 0 < t < t_end)
    return sorted(set(round(t, 12) for t in ts))


def simulate(
    u0: Field,
    p: ModelParams,
    t_end: float,
    sample_every: float,
    observers: Sequence[Observer] | None = None,
    *,
    scheme: str = "imex",
    tol: float = 1e-5,
    cfl: float = 0.4,
    dt_max: float = 0.1,
    dt_min: float = 1e-12,
    sample_times: Iterable[float] = (),
    stop: Callable[[Trajectory], bool] | None = None,
    seed: int | None = None,
) -> Trajectory:
    """Integrate from u0 to t_end, recording a snapshot every ``sample_every``.

    ``observers`` are called as ``obs(t, field, params)`` at every sample and
    return dicts merged into the per-sample record (defaults: mass, E,
    dissipation).  For the closure model the record also carries
    ``dissipation_integral``: the dissipation accumulated by the time
    stepper over the preceding sample interval, evaluated with the
    potential each step actually used, so that for r = 0 the energy change
    over the interval equals ``-2 gamma`` times it up to O(dt) terms.

    ``stop(traj)`` is evaluated after each sample; returning True ends the
    run early (``traj.stopped_early`` is set).
    """
    if not t_end > 0:
        raise InvalidParameterError("t_end must be positive")
    if not sample_every > 0:
        raise InvalidParameterError("sample_every must be positive")
    if scheme not in ("imex", "rk4"):
        raise InvalidParameterError(f"unknown scheme {scheme!r}")
    if scheme == "rk4" and p.model == "closure":
        raise InvalidParameterError("explicit RK4 is not offered for the fourth-order closure model")
    grid = u0.grid
    p.check_grid(grid)
    obs_list = list(default_observers() if observers is None else observers)
    track_diss = p.model == "closure"

    def observe(t, u, diss_int):
        f = Field(u, grid)
        rec = {}
        for ob in obs_list:
            rec.update(ob(t, f, p))
        if track_diss:
            rec["dissipation_integral"] = diss_int
        return rec

    traj = Trajectory(grid, p, seed=seed)
    u = np.array(u0.values, dtype=float)
    traj.append(0.0, u0.values, observe(0.0, u, 0.0))
    t = 0.0
    dt = min(dt_max, sample_every, 1e-4)
    diss_int = 0.0
    for t_sample in _sample_schedule(t_end, sample_every, list(sample_times)):
        while t < t_sample - 1e-13 * max(1.0, t_sample):
            h = min(dt, t_sample - t)
            try:
                if scheme == "rk4":
                    h = min(h, stable_dt(Field(u, grid), p, cfl=cfl, dt_max=dt_max))
                    un = _rk4(u, p, grid, h)
                    _guard(u, un, t, None)
                    dt_next = dt_max
                else:
                    un, h, dt_next, dissipated = _adaptive_step(u, p, grid, h, tol, dt_max, dt_min, t)
            except NumericalBlowupError as exc:
                exc.t = t
                exc.last_good = traj
                raise
            if track_diss:
                diss_int += dissipated
            u = un
            t = t_sample if abs(t + h - t_sample) < 1e-12 * max(1.0, t_sample) else t + h
            dt = dt_next
            traj.n_steps += 1
        traj.append(t_sample, u, observe(t_sample, u, diss_int))
        diss_int = 0.0
        if stop is not None and stop(traj):
            traj.stopped_early = True
            break
    return traj


def _adaptive_step(u, p, grid, h, tol, dt_max, dt_min, t):
    """Step doubling: compare one step of h with two of h/2.

    Returns (new_state, h_taken, h_suggested, dissipated) where
    ``dissipated`` is the time integral of the scheme dissipation over the
    accepted step (closure model; zero otherwise).  The two half steps are
    kept: extrapolating against the full step re-excites stiff modes and
    would forfeit positivity and energy decay.
    """
    closure = p.model == "closure"
    scale = max(float(np.max(np.abs(u))), 1e-300)
    while True:
        if h < dt_min:
            raise NumericalBlowupError(f"time step fell below dt_min={dt_min}", t=t)
        try:
            full = _step_array(u, p, grid, h, "imex")
            if closure:
                mid, d1 = _imex_closure(u, p, grid, 0.5 * h, with_dissipation=True)
                half, d2 = _imex_closure(mid, p, grid, 0.5 * h, with_dissipation=True)
            else:
                half = _step_array(_step_array(u, p, grid, 0.5 * h, "imex"), p, grid, 0.5 * h, "imex")
                d1 = d2 = 0.0
            ok = np.all(np.isfinite(full)) and np.all(np.isfinite(half))
        except (np.linalg.LinAlgError, ValueError, FloatingPointError):
            ok = False
        if not ok:
            h *= 0.25
            continue
        err = float(np.max(np.abs(half - full))) / scale
        fac = 0.9 * math.sqrt(tol / err) if err > 0 else 4.0
        fac = min(4.0, max(0.2, fac))
        if err <= tol:
            if np.max(np.abs(half)) > BLOWUP_FACTOR * scale:
                h *= 0.25
                continue
            return half, h, min(dt_max, h * fac), 0.5 * h * (d1 + d2)
        h *= fac
