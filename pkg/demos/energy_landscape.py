"""Compare the closed-form ansatz energies with quadrature on sampled profiles.

    python3 demos/energy_landscape.py
"""

import math

import numpy as np

from aggdiff import (
    build,
    energy,
    energy_single_peak,
    energy_twin_equal,
    energy_twin_unequal,
    make_grid,
    single_peak,
    twin_equal,
    twin_unequal,
)

sigma = 0.1 / math.sqrt(3.0)
grid = make_grid(1.0, 512)

print("family        parameter  closed form  quadrature")
for eps in np.linspace(0.0, 0.5, 6):
    closed = energy_single_peak(eps, 1.0, 1.0, sigma)
    quad = energy(build(single_peak(eps), grid), sigma**2)
    print(f"single        eps={eps:4.2f}  {closed:11.6f}  {quad:10.6f}")
for eps in np.linspace(0.0, 0.5, 6):
    closed = energy_twin_equal(eps, 1.0, 1.0, sigma)
    quad = energy(build(twin_equal(eps), grid), sigma**2)
    print(f"twin_equal    eps={eps:4.2f}  {closed:11.6f}  {quad:10.6f}")
cmax = 1.0 / (math.sqrt(2.0) * math.pi * sigma)
for cB in np.linspace(0.0, cmax, 6):
    closed = energy_twin_unequal(cB, 1.0, sigma)
    quad = energy(build(twin_unequal(cB), grid), sigma**2)
    print(f"twin_unequal  cB={cB:5.3f}  {closed:11.6f}  {quad:10.6f}")
