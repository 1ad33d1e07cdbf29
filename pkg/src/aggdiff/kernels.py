"""Averaging kernels and their periodic discretisations.

Kernels are normalised to unit integral.  A top-hat of half-width delta
has height 1/(2 delta) and second moment delta**2 / 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate, special

from .errors import DomainMismatchError, InvalidParameterError, ResolutionError
from .spatial import Field, Grid, _convolve_array

__all__ = [
    "Kernel",
    "KernelTable",
    "make_top_hat",
    "make_gaussian",
    "kernel_from_config",
    "second_moment",
    "first_moment",
    "sample_on_grid",
    "table_for",
]

# gaussian tails beyond this many standard deviations are dropped
GAUSSIAN_TRUNCATION = 8.0


@dataclass(frozen=True)
class Kernel:
    kind: str  # "tophat" or "gaussian"
    width: float  # half-width delta, or standard deviation s

    def __post_init__(self):
        if self.kind not in ("tophat", "gaussian"):
            raise InvalidParameterError(f"unknown kernel kind {self.kind!r}")
        if not (self.width > 0 and np.isfinite(self.width)):
            raise InvalidParameterError(f"kernel width must be positive, got {self.width}")

    @property
    def support(self) -> float:
        """Half-width of the (possibly truncated) support."""
        if self.kind == "tophat":
            return self.width
        return GAUSSIAN_TRUNCATION * self.width

    @property
    def second_moment(self) -> float:
        """Closed-form second moment sigma**2."""
        if self.kind == "tophat":
            return self.width**2 / 3.0
        return self.width**2

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.second_moment))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "tophat":
            return np.where(np.abs(x) < self.width, 0.5 / self.width, 0.0)
        s = self.width
        return np.exp(-0.5 * (x / s) ** 2) / (np.sqrt(2.0 * np.pi) * s)

    def cell_integral(self, a, b):
        """Exact integral of the kernel over [a, b] (vectorised)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.kind == "tophat":
            d = self.width
            lo = np.clip(a, -d, d)
            hi = np.clip(b, -d, d)
            return (hi - lo) / (2.0 * d)
        s = self.width * np.sqrt(2.0)
        return 0.5 * (special.erf(b / s) - special.erf(a / s))

    def to_config(self) -> dict:
        if self.kind == "tophat":
            return {"type": "tophat", "delta": self.width}
        return {"type": "gaussian", "s": self.width}


def make_top_hat(delta: float) -> Kernel:
    return Kernel("tophat", float(delta))


def make_gaussian(s: float) -> Kernel:
    return Kernel("gaussian", float(s))


def kernel_from_config(spec) -> Kernel:
    """Build a kernel from ``{type: "tophat", delta: 0.1}``-style mappings."""
    if isinstance(spec, Kernel):
        return spec
    try:
        kind = str(spec["type"]).lower().replace("_", "").replace("-", "")
        if kind == "tophat":
            return make_top_hat(float(spec["delta"]))
        if kind == "gaussian":
            return make_gaussian(float(spec.get("s", spec.get("sigma"))))
    except (KeyError, TypeError) as exc:
        raise InvalidParameterError(f"malformed kernel config {spec!r}") from exc
    raise InvalidParameterError(f"unknown kernel type in config {spec!r}")


def _check_domain(kernel: Kernel, L: float):
    if kernel.support > L:
        raise DomainMismatchError(
            f"kernel support half-width {kernel.support} exceeds domain half-length {L}"
        )


def _moment(kernel: Kernel, L: float, power: int) -> float:
    _check_domain(kernel, L)
    a = kernel.support
    # integrate each half separately so odd moments are not asked to hit zero
    halves = [
        integrate.quad(lambda z: z**power * float(kernel(z)), lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)[0]
        for lo, hi in ((-a, 0.0), (0.0, a))
    ]
    return halves[0] + halves[1]


def second_moment(kernel: Kernel, L: float) -> float:
    """Quadrature of int x^2 K(x) dx over [-L, L]."""
    return _moment(kernel, L, 2)


def first_moment(kernel: Kernel, L: float) -> float:
    return _moment(kernel, L, 1)


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Kernel sampled for discrete convolution on a specific grid.

    ``samples[j]`` is the cell average of K over the cell centred on the
    offset ``j dx`` (offsets wrapped modulo N), so ``sum(samples) * dx == 1``.
    """

    samples: np.ndarray
    grid: Grid
    kernel: Kernel

    @cached_property
    def spectrum(self) -> np.ndarray:
        return np.conj(np.fft.rfft(self.samples)) * self.grid.dx

    @property
    def mass(self) -> float:
        return float(np.sum(self.samples) * self.grid.dx)

    @property
    def nonzero(self) -> int:
        return int(np.count_nonzero(self.samples))

    def offsets(self) -> np.ndarray:
        N = self.grid.N
        j = np.arange(N)
        return np.where(j >= N // 2, j - N, j) * self.grid.dx

    def discrete_second_moment(self) -> float:
        return float(np.sum(self.samples * self.offsets() ** 2) * self.grid.dx)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return _convolve_array(u, self)


def sample_on_grid(kernel: Kernel, grid: Grid) -> KernelTable:
    """Cell-average the kernel onto the grid with periodic wrap.

    Cells straddling a top-hat edge receive the fractional overlap, which
    keeps the discrete second moment within O(dx^2) of the analytic one.
    """
    _check_domain(kernel, grid.L)
    dx = grid.dx
    cells_in_support = 2.0 * kernel.support / dx
    if kernel.kind == "tophat" and cells_in_support < 3.0:
        raise ResolutionError(
            f"kernel spans {cells_in_support:.2f} cells; at least 3 are required"
        )
    if kernel.kind == "gaussian" and 2.0 * kernel.width / dx < 3.0:
        raise ResolutionError("gaussian kernel under-resolved: 2 s / dx < 3")
    N = grid.N
    j = np.arange(N)
    offset = np.where(j >= N // 2, j - N, j) * dx
    samples = kernel.cell_integral(offset - 0.5 * dx, offset + 0.5 * dx) / dx
    samples = samples / (np.sum(samples) * dx)
    samples.flags.writeable = False
    return KernelTable(samples, grid, kernel)


@lru_cache(maxsize=64)
def table_for(kernel: Kernel, grid: Grid) -> KernelTable:
    """Cached ``sample_on_grid``; tables are immutable so sharing is safe."""
    return sample_on_grid(kernel, grid)


def convolve_with(kernel: Kernel, field: Field) -> Field:
    return Field(table_for(kernel, field.grid).apply(field.values), field.grid)
