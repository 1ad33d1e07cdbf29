"""Top-level acceptance criteria.

Each test prints one ``PASS`` or ``FAIL`` line with the measured numbers
and then asserts.  Figure reproductions run at ``FIGURE_RESOLUTION``
through the same experiment runners the CLI uses.  Run only this file with

    pytest tests/test_acceptance.py -s

(``-s`` is optional: the lines are written to the terminal either way.)
"""

import numpy as np
import pytest

from aggdiff import (
    Field,
    ModelParams,
    build,
    convolve,
    convolve_direct,
    critical_residual,
    energy,
    energy_single_peak,
    energy_twin_equal,
    energy_twin_unequal,
    make_grid,
    random_ic,
    simulate,
    single_peak,
    twin_equal,
    twin_unequal,
)
from aggdiff.errors import BracketError
from aggdiff.experiments import ExperimentConfig, rc_bisect, run
from aggdiff.kernels import make_top_hat, sample_on_grid
from conftest import S2, SIGMA

pytestmark = [pytest.mark.acceptance]


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return emit


def _strictly_increasing(xs):
    return all(x is not None for x in xs) and all(b > a for a, b in zip(xs, xs[1:]))


# ------------------------------------------------------------------ 1


@pytest.mark.slow
def test_c01_conservation_and_positivity(report):
    g = make_grid(1.0, 512)
    runs = {
        "full/random": (ModelParams(model="full"), random_ic(g, 0.5, 0.05, 0)),
        "closure/twin_unequal": (ModelParams(model="closure"), build(twin_unequal(1.0), g)),
    }
    drift, ratio, ok = {}, {}, True
    for name, (p, u0) in runs.items():
        tr = simulate(u0, p, 100.0, 1.0)
        m = tr.series("mass")
        drift[name] = float(np.max(np.abs(m - m[0])) / m[0])
        # smallest ratio min(u)/max(u) over all samples; the bound is >= -1e-8
        ratio[name] = float(np.min(np.min(tr.values, axis=1) / np.max(tr.values, axis=1)))
        ok &= tr.times[-1] == pytest.approx(100.0) and drift[name] <= 1e-8 and ratio[name] >= -1e-8
    detail = ", ".join(f"{k}: drift {drift[k]:.1e}, min(u)/max(u) {ratio[k]:.1e}" for k in runs)
    report(1, "conservation and positivity", ok, detail)


# ------------------------------------------------------------------ 2


@pytest.mark.slow
def test_c02_energy_identity(report):
    g = make_grid(1.0, 512)
    p = ModelParams(model="closure")
    # dense sampling while the profile relaxes, then every 0.01
    fine = list(np.arange(1, 101) * 1e-5) + list(np.arange(2, 101) * 1e-3)
    tr = simulate(build(twin_unequal(1.0), g), p, 1.0, 0.01, sample_times=fine, tol=1e-7)
    E = tr.series("E")
    dE = np.diff(E)
    # dissipation accumulated over each sample interval, so -2*gamma*I is the predicted change
    pred = -2.0 * p.gamma * tr.series("dissipation_integral")[1:]
    floor = 1e-9 * np.abs(E[1:])
    err = np.abs(dE - pred)
    identity_ok = bool(np.all(err <= 0.05 * np.abs(pred) + floor))
    active = np.abs(pred) > floor
    worst = float(np.max(err[active] / np.abs(pred[active]))) if active.any() else 0.0
    increase = float(np.max(dE / np.abs(E[1:])))
    monotone_ok = increase <= 1e-6
    report(2, "energy identity", identity_ok and monotone_ok,
           f"{len(dE)} intervals, worst relative mismatch {worst:.2%}, "
           f"largest relative increase {increase:.1e}")


# ------------------------------------------------------------------ 3


def _spec(case):
    if case["kind"] == "single":
        return single_peak(case["eps"])
    if case["kind"] == "twin_equal":
        return twin_equal(case["eps"], case.get("x0", 0.5))
    return twin_unequal(case["cB"], case.get("x0", 0.5))


def test_c03_closed_form_vs_quadrature(report, oracles):
    closed = {
        "single": lambda c: energy_single_peak(c["eps"], 1.0, 1.0, SIGMA),
        "twin_equal": lambda c: energy_twin_equal(c["eps"], 1.0, 1.0, SIGMA),
        "twin_unequal": lambda c: energy_twin_unequal(c["cB"], 1.0, SIGMA),
    }
    g1, g2 = make_grid(1.0, 512), make_grid(1.0, 1024)
    worst, orders, counts = 0.0, [], {}
    for case in oracles["energy_cases"]:
        ref = closed[case["kind"]](case)
        e1 = abs(energy(build(_spec(case), g1), S2) - ref) / abs(ref)
        e2 = abs(energy(build(_spec(case), g2), S2) - ref) / abs(ref)
        worst = max(worst, e1)
        orders.append(np.log2(e1 / e2))
        counts[case["kind"]] = counts.get(case["kind"], 0) + 1
    anchors = [
        abs(energy_single_peak(0.0, 1, 1, SIGMA) - (-3.8985)) <= 1e-4,
        abs(energy_twin_equal(0.0, 1, 1, SIGMA) - (-1.9493)) <= 1e-4,
        energy_single_peak(0.5, 1, 1, SIGMA) == -0.5,
        energy_twin_equal(0.5, 1, 1, SIGMA) == -0.5,
    ]
    ok = worst <= 0.01 and min(orders) >= 1.9 and all(anchors) and all(v >= 10 for v in counts.values())
    report(3, "closed-form vs quadrature energies", ok,
           f"{counts}, worst error at N=512 {worst:.2e}, min order {min(orders):.3f}, anchors {all(anchors)}")


# ------------------------------------------------------------------ 4


def test_c04_energy_minimum_structure(report):
    eps = np.linspace(0.0, 0.5, 1001)
    single_min = eps[np.argmin([energy_single_peak(e, 1, 1, SIGMA) for e in eps])]
    twin_min = eps[np.argmin([energy_twin_equal(e, 1, 1, SIGMA) for e in eps])]
    vertex = 1.0 / (2.0 * np.sqrt(2.0) * np.pi * SIGMA)
    cmax = 2.0 * vertex
    cB = np.linspace(0.0, cmax, 2001)
    E = np.array([energy_twin_unequal(c, 1, SIGMA) for c in cB])
    arg = cB[np.argmax(E)]
    ends_lower = E[0] < E.max() and E[-1] < E.max()
    ok = single_min == 0.0 and twin_min == 0.0 and abs(arg - vertex) <= cB[1] - cB[0] and ends_lower
    report(4, "energy minimum structure", ok,
           f"argmin single {single_min}, argmin twin {twin_min}, "
           f"twin-unequal argmax {arg:.5f} (vertex {vertex:.5f}), endpoints lower {ends_lower}")


# ------------------------------------------------------------------ 5


@pytest.mark.slow
def test_c05_single_peak_suite(report):
    res = run(ExperimentConfig.from_mapping({"experiment": "single_peak_suite"}))
    r1, r2, r3 = (res.row_for(eps=e) for e in (0.1, 0.2, 0.3))
    quiet = all(r["final_peaks"] == 1 and r["exterior_max"] < 0.01 for r in (r1, r2))
    t = r3["secondary_decay_time"]
    crossing = r3["secondary_formed"] and t is not None and 2.0 <= t <= 6.0
    report(5, "single peak on a floor", quiet and crossing,
           f"eps 0.1/0.2 peaks {r1['final_peaks']}/{r2['final_peaks']}, exterior max "
           f"{r1['exterior_max']:.1e}/{r2['exterior_max']:.1e}; eps 0.3 secondary max "
           f"{r3['secondary_max']:.3f}, crosses 0.1 at t={t}")


# ------------------------------------------------------------------ 6


@pytest.mark.slow
def test_c06_equal_twins(report):
    res = run(ExperimentConfig.from_mapping({"experiment": "twin_equal_sweep"}))
    far = res.row_for(x0=0.5)
    persist = far["verdict"] == "asymptotic_candidate"
    xs = [0.2, 0.25, 0.3, 0.35, 0.4, 0.45]
    tm = [res.row_for(x0=x)["merge_time"] for x in xs]
    trend = _strictly_increasing(tm)
    report(6, "equal twins", persist and trend,
           f"x0=0.5 verdict {far['verdict']}; merge times {dict(zip(xs, tm))}")


# ------------------------------------------------------------------ 7


@pytest.mark.slow
def test_c07_decay_of_smaller_peak(report):
    res = run(ExperimentConfig.from_mapping({"experiment": "decay_sweep"}))
    by_cB = [res.row_for(axis="cB", value=v)["decay_time"] for v in (0.5, 0.75, 1.0, 1.25, 1.5)]
    by_D = [res.row_for(axis="D", value=v)["decay_time"] for v in (0.5, 1.0, 2.0, 4.0)]
    anchor = by_cB[-1]
    ok = (_strictly_increasing(by_cB) and _strictly_increasing(by_D[::-1])
          and anchor is not None and 7.5 <= anchor <= 22.5)
    report(7, "smaller-peak decay", ok, f"by cB {by_cB}; by D {by_D}; anchor {anchor}")


# ------------------------------------------------------------------ 8


@pytest.mark.slow
def test_c08_critical_growth_rate(report):
    cfg = ExperimentConfig.from_mapping({"experiment": "rc_bisect"})
    try:
        rc = rc_bisect(cfg)
    except BracketError as exc:
        report(8, "critical growth rate", False, f"bracket rejected: {exc.low_verdict} / {exc.high_verdict}")
    report(8, "critical growth rate", 0.22 <= rc <= 0.25, f"r_c = {rc:.4f}")


# ------------------------------------------------------------------ 9


@pytest.mark.slow
def test_c09_random_initial_condition(report):
    res = run(ExperimentConfig.from_mapping({"experiment": "random_ic", "seed": 0}))
    row = res.rows[0]
    formed = row["n_peaks_t1"] >= 1
    two = row["n_peaks_start"] >= 2
    decays = row["verdict"] == "transient" and row["event"] == "decay"
    ok = formed and (decays or not two)
    report(9, "random initial condition", ok,
           f"peaks at t=1: {row['n_peaks_t1']}, tracked peaks {row['n_peaks_start']}, "
           f"verdict {row['verdict']}/{row['event']} at t={row['event_time']}")


# ------------------------------------------------------------------ 10


def test_c10_oracle_equivalence(report):
    rng = np.random.default_rng(2024)
    fft_err = 0.0
    for N in (64, 256, 512, 1024):
        g = make_grid(1.0, N)
        table = sample_on_grid(make_top_hat(0.1), g)
        for _ in range(5):
            u = Field(rng.random(N), g)
            fft_err = max(fft_err, float(np.max(np.abs(convolve(u, table).values
                                                        - convolve_direct(u, table).values))))
    specs = {
        "single": single_peak(0.0),
        "twin_equal(0.5)": twin_equal(0.0, 0.5),
        "twin_equal(0.3)": twin_equal(0.0, 0.3),
        "twin_unequal(0.5)": twin_unequal(0.5),
        "twin_unequal(1.0)": twin_unequal(1.0),
        "twin_unequal(1.5)": twin_unequal(1.5),
    }
    res = {}
    for name, spec in specs.items():
        res[name] = [critical_residual(build(spec, make_grid(1.0, N)), S2) for N in (256, 512, 1024)]
    small = all(r[1] <= 1e-3 for r in res.values())
    decreasing = all(r[0] > r[1] > r[2] for r in res.values())
    ok = fft_err <= 1e-10 and small and decreasing
    report(10, "oracle equivalence", ok,
           f"FFT vs direct {fft_err:.1e}; critical residual at N=512 "
           + ", ".join(f"{k} {v[1]:.2e}" for k, v in res.items())
           + f"; decreasing {decreasing}")
