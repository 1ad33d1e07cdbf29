"""Aggregation-diffusion on a periodic interval: simulation and energy analysis."""

from ._version import __version__
from .ansatz import (
    AnsatzSpec,
    ansatz_from_config,
    build,
    c_a_unequal,
    c_eps_single,
    c_eps_twin,
    critical_residual,
    random_ic,
    single_peak,
    twin_equal,
    twin_unequal,
)
from .diagnostics import Peak, Verdict, classify, decay_time, find_peaks, merge_time, track
from .dynamics import ModelParams, Trajectory, rhs_closure, rhs_full, simulate, stable_dt, step
from .energetics import (
    EnergyRecord,
    dissipation,
    energy,
    energy_single_peak,
    energy_twin_equal,
    energy_twin_unequal,
)
from .errors import (
    AggDiffError,
    BracketError,
    ConfigError,
    DomainMismatchError,
    GeometryError,
    GridMismatchError,
    InvalidParameterError,
    NumericalBlowupError,
    ResolutionError,
)
from .kernels import Kernel, KernelTable, kernel_from_config, make_gaussian, make_top_hat, sample_on_grid
from .spatial import Field, Grid, convolve, convolve_direct, deriv1, deriv2, deriv3, make_grid, mass

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
