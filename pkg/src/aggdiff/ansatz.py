"""Piecewise-cosine critical points of the closure energy and random data.

Each bump has the form ``c [1 + cos(sqrt(2) (x - x_c) / sigma)]`` on an
interval of half-width ``pi sigma / sqrt(2)`` and is C^1 where it meets
the flat exterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .energetics import _face_gradient_and_mobility
from .errors import GeometryError, InvalidParameterError
from .spatial import Field, Grid, wrap

__all__ = [
    "AnsatzSpec",
    "single_peak",
    "twin_equal",
    "twin_unequal",
    "ansatz_from_config",
    "c_eps_single",
    "c_eps_twin",
    "c_a_unequal",
    "build",
    "random_ic",
    "critical_residual",
    "bump_halfwidth",
]

SQRT2 = math.sqrt(2.0)


def bump_halfwidth(sigma: float) -> float:
    return math.pi * sigma / SQRT2


def _check_eps(eps, p, L):
    if not (0.0 <= eps <= p / (2.0 * L) * (1 + 1e-12)):
        raise InvalidParameterError(f"eps={eps} outside [0, p/(2L)]")


def c_eps_single(eps: float, p: float, L: float, sigma: float) -> float:
    _check_eps(eps, p, L)
    return (p - 2.0 * eps * L) / (SQRT2 * math.pi * sigma)


def c_eps_twin(eps: float, p: float, L: float, sigma: float) -> float:
    _check_eps(eps, p, L)
    return (p - 2.0 * eps * L) / (2.0 * SQRT2 * math.pi * sigma)


def c_a_unequal(cB: float, p: float, sigma: float) -> float:
    """Amplitude of the larger bump when the smaller one has amplitude cB."""
    cmax = p / (SQRT2 * math.pi * sigma)
    if not (0.0 <= cB <= cmax * (1 + 1e-12)):
        raise InvalidParameterError(f"cB={cB} outside [0, {cmax}]")
    return cmax - cB


@dataclass(frozen=True)
class AnsatzSpec:
    kind: str  # "single", "twin_equal", "twin_unequal"
    p: float = 1.0
    L: float = 1.0
    sigma: float = 0.1 / math.sqrt(3.0)
    eps: float = 0.0
    x0: float = 0.5
    cB: float = 0.0
    center: float = 0.0

    def __post_init__(self):
        if self.kind not in ("single", "twin_equal", "twin_unequal"):
            raise InvalidParameterError(f"unknown ansatz kind {self.kind!r}")
        if not (self.p > 0 and self.L > 0 and self.sigma > 0):
            raise InvalidParameterError("p, L and sigma must be positive")
        if self.kind == "twin_unequal":
            c_a_unequal(self.cB, self.p, self.sigma)
        else:
            _check_eps(self.eps, self.p, self.L)
        if self.kind == "single" and not math.pi * self.sigma < SQRT2 * self.L:
            raise InvalidParameterError("single peak needs pi*sigma < sqrt(2)*L")
        if self.kind != "single":
            lo = bump_halfwidth(self.sigma)
            if not (lo < self.x0 <= self.L / 2.0):
                raise GeometryError(
                    f"x0={self.x0} must lie in (pi sigma/sqrt2, L/2] = ({lo:.4f}, {self.L / 2}]"
                )

    @property
    def bumps(self) -> list:
        """(centre, amplitude) pairs; the exterior floor is ``self.floor``."""
        if self.kind == "single":
            return [(self.center, c_eps_single(self.eps, self.p, self.L, self.sigma))]
        if self.kind == "twin_equal":
            c = c_eps_twin(self.eps, self.p, self.L, self.sigma)
            return [(self.center - self.x0, c), (self.center + self.x0, c)]
        cA = c_a_unequal(self.cB, self.p, self.sigma)
        return [(self.center - self.x0, cA), (self.center + self.x0, self.cB)]

    @property
    def floor(self) -> float:
        return 0.0 if self.kind == "twin_unequal" else self.eps

    @property
    def centres(self) -> list:
        return [c for c, _ in self.bumps]


def single_peak(eps=0.0, p=1.0, L=1.0, sigma=0.1 / math.sqrt(3.0), center=0.0) -> AnsatzSpec:
    return AnsatzSpec("single", p=p, L=L, sigma=sigma, eps=eps, center=center)


def twin_equal(eps=0.0, x0=0.5, p=1.0, L=1.0, sigma=0.1 / math.sqrt(3.0)) -> AnsatzSpec:
    return AnsatzSpec("twin_equal", p=p, L=L, sigma=sigma, eps=eps, x0=x0)


def twin_unequal(cB, x0=0.5, p=1.0, L=1.0, sigma=0.1 / math.sqrt(3.0)) -> AnsatzSpec:
    return AnsatzSpec("twin_unequal", p=p, L=L, sigma=sigma, cB=cB, x0=x0)


def ansatz_from_config(cfg, *, p=1.0, L=1.0, sigma=None) -> AnsatzSpec:
    """Build from ``{kind: "twin_unequal", cB: 1.5, x0: 0.5}``-style mappings."""
    if isinstance(cfg, AnsatzSpec):
        return cfg
    cfg = dict(cfg)
    kind = str(cfg.pop("kind")).lower().replace("-", "_")
    aliases = {"single_peak": "single", "singlepeak": "single", "twinequal": "twin_equal", "twinunequal": "twin_unequal"}
    kind = aliases.get(kind, kind)
    kw = {"p": cfg.pop("p", p), "L": cfg.pop("L", L)}
    s = cfg.pop("sigma", sigma)
    if s is not None:
        kw["sigma"] = s
    allowed = {"eps", "x0", "cB", "center"}
    unknown = set(cfg) - allowed
    if unknown:
        raise InvalidParameterError(f"unknown ansatz keys {sorted(unknown)}")
    return AnsatzSpec(kind, **kw, **{k: float(v) for k, v in cfg.items()})


def build(spec: AnsatzSpec, grid: Grid, normalize: bool = True) -> Field:
    """Sample the piecewise profile at the cell centres of ``grid``.

    With ``normalize`` the bump amplitudes are rescaled by a common factor
    (1 + O(dx**3)) so that the midpoint-rule mass equals ``spec.p`` exactly;
    the floor and the bump shapes are left as sampled.
    """
    if abs(spec.L - grid.L) > 1e-12 * grid.L:
        raise InvalidParameterError(f"ansatz L={spec.L} does not match grid L={grid.L}")
    w = bump_halfwidth(spec.sigma)
    if spec.kind == "single" and 2 * w > 2 * grid.L:
        raise GeometryError("bump wider than the domain")
    if spec.kind != "single":
        if not (2 * spec.x0 > 2 * w and 2 * grid.L - 2 * spec.x0 > 2 * w):
            raise GeometryError("twin bump supports overlap")
    k = SQRT2 / spec.sigma
    bumps = np.zeros(grid.N)
    for centre, amp in spec.bumps:
        d = wrap(grid.x - centre, grid.L)
        inside = np.abs(d) < w
        bumps[inside] += amp * (1.0 + np.cos(k * d[inside]))
    if normalize:
        bump_mass = np.sum(bumps) * grid.dx
        if bump_mass > 0:
            bumps *= (spec.p - 2.0 * grid.L * spec.floor) / bump_mass
    return Field(spec.floor + bumps, grid)


def random_ic(grid: Grid, base: float, amplitude: float, seed: int) -> Field:
    """Uniform noise of the given amplitude about ``base``, renormalised to mass 2 L base."""
    if not base > 0:
        raise InvalidParameterError("base must be positive")
    if not 0 <= amplitude < base:
        raise InvalidParameterError("need 0 <= amplitude < base")
    rng = np.random.default_rng(seed)
    u = base + amplitude * rng.uniform(-1.0, 1.0, grid.N)
    u *= 2.0 * grid.L * base / (np.sum(u) * grid.dx)
    return Field(u, grid)


def critical_residual(u: Field, sigma2: float) -> float:
    """Dissipation restricted to the interior of the positive set.

    Faces whose two chemical-potential values involve a cell where u <= 0
    are skipped: there the profile may leave the constant-potential branch
    through a free boundary, which a 3-point stencil cannot resolve.
    """
    a = u.values
    grad, mob = _face_gradient_and_mobility(a, sigma2, u.grid.dx)
    pos = a > 0.0
    inner = pos & np.roll(pos, 1) & np.roll(pos, -1) & np.roll(pos, -2)
    return float(np.sum(np.where(inner, mob * grad**2, 0.0)) * u.grid.dx)
