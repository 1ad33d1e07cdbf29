"""Regenerate ``oracles.json``: reference values computed independently of
the package with mpmath quadrature and exact rational arithmetic.

Run from the repository root:

    python tests/oracles/generate_oracles.py

The package itself is never imported here.
"""

import json
from fractions import Fraction
from pathlib import Path

import mpmath as mp
import numpy as np

mp.mp.dps = 30
OUT = Path(__file__).with_name("oracles.json")
SQ2 = mp.sqrt(2)


def tophat_second_moment(delta):
    return mp.quad(lambda x: x**2 / (2 * delta), [-delta, delta])


def tophat_table(delta, L, N):
    """Exact cell-overlap weights of a unit-mass top-hat, offsets -N/2..N/2-1."""
    delta = Fraction(delta).limit_denominator(10**9)
    dx = Fraction(2 * L, N)
    out = {}
    for j in range(-N // 2, N // 2):
        a, b = (j - Fraction(1, 2)) * dx, (j + Fraction(1, 2)) * dx
        overlap = max(Fraction(0), min(b, delta) - max(a, -delta))
        if overlap:
            out[j] = overlap / (2 * delta) / dx
    return out


def profile(kind, par, sigma, L, p):
    """Piecewise ansatz as a list of (lo, hi, callable u, callable u'')."""
    k = SQ2 / sigma
    w = mp.pi * sigma / SQ2
    if kind == "single":
        eps = par["eps"]
        c = (p - 2 * eps * L) / (SQ2 * mp.pi * sigma)
        bumps, floor = [(0, c)], eps
    elif kind == "twin_equal":
        eps, x0 = par["eps"], par["x0"]
        c = (p - 2 * eps * L) / (2 * SQ2 * mp.pi * sigma)
        bumps, floor = [(-x0, c), (x0, c)], eps
    else:
        cB, x0 = par["cB"], par["x0"]
        cA = p / (SQ2 * mp.pi * sigma) - cB
        bumps, floor = [(-x0, cA), (x0, cB)], 0
    pieces = []
    edges = sorted({-L, L} | {x + s * w for x, _ in bumps for s in (-1, 1)})
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = (lo + hi) / 2
        inside = [(x, c) for x, c in bumps if abs(mid - x) < w]
        if inside:
            x, c = inside[0]
            pieces.append((lo, hi, lambda y, x=x, c=c: floor + c * (1 + mp.cos(k * (y - x))),
                           lambda y, x=x, c=c: -c * k**2 * mp.cos(k * (y - x))))
        else:
            pieces.append((lo, hi, lambda y: floor, lambda y: 0))
    return pieces


def continuous_energy(kind, par, sigma, L=1, p=1):
    s2 = sigma**2
    total = 0
    for lo, hi, u, upp in profile(kind, par, sigma, L, p):
        total += mp.quad(lambda y: u(y) * (u(y) + s2 / 2 * upp(y)), [lo, hi])
    return -total


def continuous_mass(kind, par, sigma, L=1, p=1):
    return sum(mp.quad(u, [lo, hi]) for lo, hi, u, _ in profile(kind, par, sigma, L, p))


def amplitude_from_mass(eps, p, L, sigma, n_bumps):
    """Solve mass = p for the bump amplitude by quadrature of one bump."""
    k = SQ2 / sigma
    w = mp.pi * sigma / SQ2
    one = mp.quad(lambda y: 1 + mp.cos(k * y), [-w, w])
    return (p - 2 * eps * L) / (n_bumps * one)


def main():
    sigma = mp.mpf("0.1") / mp.sqrt(3)
    o = {"sigma_default": float(sigma)}

    o["kernel"] = {
        "second_moment": {str(d): float(tophat_second_moment(mp.mpf(d))) for d in ("0.05", "0.1", "0.2", "0.3")},
        "sigma_delta_0.2": float(mp.sqrt(tophat_second_moment(mp.mpf("0.2")))),
    }
    tab = tophat_table(0.1, 1, 512)
    o["tophat_table_N512"] = {
        "nonzero": len(tab),
        "edge_offset": max(tab),
        "edge_weight": float(tab[max(tab)]),
        "interior_weight": float(tab[0]),
        "mass": float(sum(tab.values()) * Fraction(2, 512)),
    }
    o["sinc_factor"] = {str(d): float(mp.sin(mp.pi * mp.mpf(d)) / (mp.pi * mp.mpf(d))) for d in ("0.1", "0.2")}

    o["amplitudes"] = {
        "single_eps0": float(amplitude_from_mass(0, 1, 1, sigma, 1)),
        "single_eps0.3": float(amplitude_from_mass(mp.mpf("0.3"), 1, 1, sigma, 1)),
        "twin_eps0": float(amplitude_from_mass(0, 1, 1, sigma, 2)),
        "twin_eps0.2": float(amplitude_from_mass(mp.mpf("0.2"), 1, 1, sigma, 2)),
    }

    o["energy_anchor"] = {
        "single_eps0": float(continuous_energy("single", {"eps": 0}, sigma)),
        "twin_equal_eps0": float(continuous_energy("twin_equal", {"eps": 0, "x0": mp.mpf("0.5")}, sigma)),
        "single_eps0.5": float(continuous_energy("single", {"eps": mp.mpf("0.5")}, sigma)),
        "twin_unequal_vertex_cB": float(1 / (2 * SQ2 * mp.pi * sigma)),
        "twin_unequal_vertex_E": float(continuous_energy("twin_unequal", {"cB": 1 / (2 * SQ2 * mp.pi * sigma), "x0": mp.mpf("0.5")}, sigma)),
    }

    # random admissible tuples for each family
    rng = np.random.default_rng(20240521)
    w = float(mp.pi * sigma / SQ2)
    cases = []
    for _ in range(10):
        eps = float(rng.uniform(0, 0.5))
        cases.append({"kind": "single", "eps": eps})
    for _ in range(10):
        eps = float(rng.uniform(0, 0.5))
        x0 = float(rng.uniform(w + 0.02, 0.5))
        cases.append({"kind": "twin_equal", "eps": eps, "x0": x0})
    cmax = float(1 / (SQ2 * mp.pi * sigma))
    for _ in range(10):
        cB = float(rng.uniform(0, cmax))
        x0 = float(rng.uniform(w + 0.02, 0.5))
        cases.append({"kind": "twin_unequal", "cB": cB, "x0": x0})
    for c in cases:
        par = {k: mp.mpf(v) for k, v in c.items() if k != "kind"}
        c["E"] = float(continuous_energy(c["kind"], par, sigma))
        c["mass"] = float(continuous_mass(c["kind"], par, sigma))
    o["energy_cases"] = cases

    # linear growth rates of a cosine mode about a uniform state
    ubar, m = mp.mpf("0.5"), 3
    k = mp.pi * m  # L = 1
    khat = mp.sin(k * mp.mpf("0.1")) / (k * mp.mpf("0.1"))
    o["linear_rates"] = {
        "ubar": float(ubar),
        "mode": m,
        "full": float(-k**2 + 10 * ubar * k**2 * khat),
        "closure": float(10 * ubar * k**2 * (1 - sigma**2 / 2 * k**2)),
    }

    # discrete energy of a + b cos(k x) with the 3-point second difference
    a, b, N = mp.mpf("0.5"), mp.mpf("0.1"), 64
    dx = mp.mpf(2) / N
    k2 = 4 / dx**2 * mp.sin(k * dx / 2) ** 2
    o["discrete_energy_cosine"] = {
        "a": float(a), "b": float(b), "mode": m, "N": N,
        "E": float(-2 * (a**2 + b**2 / 2 * (1 - sigma**2 / 2 * k2))),
    }

    OUT.write_text(json.dumps(o, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
