"""Periodic grid, finite differences, quadrature and circular convolution.

The domain is the circle [-L, L) discretised into N equal cells; values
live at cell centres ``-L + (i + 1/2) dx``.  All difference operators are
second-order central stencils with periodic wrap.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridMismatchError, InvalidParameterError

__all__ = [
    "Grid",
    "Field",
    "make_grid",
    "convolve",
    "convolve_direct",
    "deriv1",
    "deriv2",
    "deriv3",
    "mass",
    "periodic_distance",
    "wrap",
]


@dataclass(frozen=True)
class Grid:
    L: float
    N: int

    def __post_init__(self):
        if not (self.L > 0 and np.isfinite(self.L)):
            raise InvalidParameterError(f"domain half-length must be positive, got {self.L}")
        if int(self.N) != self.N or self.N < 8 or self.N % 2:
            raise InvalidParameterError(f"cell count must be an even integer >= 8, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @cached_property
    def x(self) -> np.ndarray:
        x = -self.L + (np.arange(self.N) + 0.5) * self.dx
        x.flags.writeable = False
        return x

    @property
    def length(self) -> float:
        return 2.0 * self.L

    def field(self, values) -> "Field":
        return Field(values, self)


def make_grid(L: float, N: int) -> Grid:
    """Uniform periodic grid on [-L, L) with N cells (N even, N >= 8)."""
    return Grid(L, N)


@dataclass(frozen=True, eq=False)
class Field:
    """Density values on a grid.  The array is copied and frozen."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != (self.grid.N,):
            raise GridMismatchError(f"field has shape {v.shape}, grid expects ({self.grid.N},)")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def with_values(self, values) -> "Field":
        return Field(values, self.grid)

    def shifted(self, cells: int) -> "Field":
        """Periodic shift by whole cells (positive moves mass to larger x)."""
        return Field(np.roll(self.values, cells), self.grid)

    def __len__(self):
        return self.grid.N

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _check_same_grid(a: Grid, b: Grid):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def wrap(x, L: float):
    """Map coordinates onto [-L, L)."""
    return (np.asarray(x) + L) % (2.0 * L) - L


def periodic_distance(a, b, L: float):
    return np.abs(wrap(np.asarray(a) - np.asarray(b), L))


def convolve(field: Field, table) -> Field:
    """Circular convolution (K*u)(x_i) = sum_j K_j u_{i+j} dx via real FFTs."""
    _check_same_grid(field.grid, table.grid)
    return Field(_convolve_array(field.values, table), field.grid)


def _convolve_array(u: np.ndarray, table) -> np.ndarray:
    # correlation with the table; the conjugate is a no-op for even tables
    return np.fft.irfft(np.fft.rfft(u) * table.spectrum, n=u.shape[-1])


def convolve_direct(field: Field, table) -> Field:
    """O(N^2) reference summation of the same convolution."""
    _check_same_grid(field.grid, table.grid)
    u = field.values
    N = u.shape[0]
    idx = (np.arange(N)[:, None] + np.arange(N)[None, :]) % N
    out = (u[idx] * table.samples[None, :]).sum(axis=1) * field.grid.dx
    return Field(out, field.grid)


def _d1(u, dx):
    return (np.roll(u, -1) - np.roll(u, 1)) / (2.0 * dx)


def _d2(u, dx):
    return (np.roll(u, -1) - 2.0 * u + np.roll(u, 1)) / dx**2


def _d3(u, dx):
    return (np.roll(u, -2) - 2.0 * np.roll(u, -1) + 2.0 * np.roll(u, 1) - np.roll(u, 2)) / (2.0 * dx**3)


def deriv1(field: Field) -> Field:
    return Field(_d1(field.values, field.grid.dx), field.grid)


def deriv2(field: Field) -> Field:
    return Field(_d2(field.values, field.grid.dx), field.grid)


def deriv3(field: Field) -> Field:
    return Field(_d3(field.values, field.grid.dx), field.grid)


def mass(field: Field) -> float:
    """Midpoint-rule integral of the field over the circle."""
    return float(np.sum(field.values) * field.grid.dx)
