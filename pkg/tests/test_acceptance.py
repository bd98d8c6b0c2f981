"""Acceptance gate: one test per criterion, each recording a pass/fail line.

Tolerances are the published ones. The summary is printed at the end of the
pytest run (see conftest.pytest_terminal_summary).
"""

from __future__ import annotations

import math
import time
from itertools import product
from pathlib import Path

import numpy as np
import pytest

from srpolymer.analysis import (
    Pressure,
    classify_regime,
    clt_calibration,
    coupling_sum_bound,
    coupling_sum_ratios,
    fit_gamma,
)
from srpolymer.cli import main
from srpolymer.config import load_config
from srpolymer.couplings import CouplingSpec
from srpolymer.decoupling import (
    chain_params,
    endpoints_from_steps,
    measure_factorization_check,
    msd_from_correlations,
)
from srpolymer.experiments import RUNNERS
from srpolymer.ising import IsingParams, log_partition, magnetizations, two_point_matrix
from srpolymer.montecarlo import McmcPlan, correlation, estimate_polymer_msd, run_chain
from srpolymer.polymer import PolymerParams, endpoint_projection_moments, enumerate_polymer, exact_msd
from srpolymer.transfer import NNChainParams, limit_magnetization, nn_magnetizations, nn_observables

from conftest import record

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BETAS = (0.5, 1.0, 2.0)
ALPHAS = (1.5, 2.0, 3.0)
DRIFTS = ((0.0, 0.0), (1.0, 0.0), (0.3, 0.1))
SMALL_N = range(1, 7)


def grid():
    for beta, alpha, h, n in product(BETAS, ALPHAS, DRIFTS, SMALL_N):
        yield PolymerParams(n, beta, h, CouplingSpec.power_law(alpha))


def table(outcome, name):
    return next(t for t in outcome.tables if t.name == name)


def test_c1_decoupling_exactness():
    t0 = time.perf_counter()
    fact, msd_gap = 0.0, 0.0
    for p in grid():
        fact = max(fact, measure_factorization_check(p))
        c1, c2 = chain_params(p)
        msd_gap = max(msd_gap, abs(msd_from_correlations(two_point_matrix(c1), two_point_matrix(c2)) - exact_msd(p)))
    dt = time.perf_counter() - t0
    ok = fact < 1e-12 and msd_gap < 1e-10 and dt < 60
    record("1", ok, f"max factorization gap {fact:.2e} (<1e-12), max msd gap {msd_gap:.2e} (<1e-10), {dt:.1f}s (<60s)")
    assert ok


def test_c2_partition_factorization():
    gap = 0.0
    for p in grid():
        c1, c2 = chain_params(p)
        gap = max(gap, abs(enumerate_polymer(p).log_z - log_partition(c1) - log_partition(c2)))
    record("2", gap < 1e-10, f"max |lnZ - lnZ1 - lnZ2| {gap:.2e} (<1e-10)")
    assert gap < 1e-10


def test_c3_transfer_matrix():
    worst = 0.0
    for n, beta, j, k in product(range(1, 13), (0.3, 0.7, 2.0), (0.5, 1.0), (0.0, 0.3, -0.8)):
        obs = nn_observables(NNChainParams(n, beta, j, k))
        ip = IsingParams(n, beta, k, CouplingSpec.nearest_neighbor(j))
        worst = max(worst, abs(obs.log_z - log_partition(ip)),
                    float(np.abs(obs.magnetization - magnetizations(ip)).max()),
                    float(np.abs(obs.correlation - two_point_matrix(ip)).max()))
    mid = {k: abs(nn_magnetizations(NNChainParams(400, 1.0, 1.0, k))[199] - limit_magnetization(1.0, 1.0, k))
           for k in (0.25, 0.5, 1.0)}
    lim1 = limit_magnetization(1.0, 1.0, 1.0)
    ok = worst < 1e-10 and max(mid.values()) < 1e-6
    record("3", ok, f"TM vs enumeration max gap {worst:.2e} (<1e-10, N<=12); N=400 midpoint vs limit max gap "
                    f"{max(mid.values()):.2e} (<1e-6); limit at k=1 is {lim1:.5f} (quoted 0.99335 is an arithmetic "
                    f"slip, see README)")
    assert ok


def test_c4_monte_carlo_oracle():
    t0 = time.perf_counter()
    spec = CouplingSpec.power_law(1.5)
    plan = McmcPlan(101_000, 1000, n_replicas=4, seed=4)
    worst, cells = 0.0, 0
    for beta, k in product((0.5, 1.0), (0.0, 0.5)):
        p = IsingParams(8, beta, k, spec)
        res = run_chain(p, plan, {"m": lambda s, e: s.astype(np.float64), "c18": correlation(0, 7)},
                        label=f"c4-{beta}-{k}")
        m, c = res.estimates["m"], res.estimates["c18"]
        z = np.abs(m.value - magnetizations(p)) / m.std_error
        zc = abs(c.value - two_point_matrix(p)[0, 7]) / c.std_error
        pt = estimate_polymer_msd(PolymerParams(8, 2 * beta, (k, 0.0), spec), plan, label=f"c4-msd-{beta}-{k}")
        zm = abs(pt.msd.value - exact_msd(PolymerParams(8, 2 * beta, (k, 0.0), spec))) / pt.msd.std_error
        worst = max(worst, float(z.max()), zc, zm)
        cells += 1
    dt = time.perf_counter() - t0
    ok = worst < 4 and dt < 120
    record("4", ok, f"{cells} cells, worst |MC - exact| = {worst:.2f} SE (<4) over <s_i>, <s_1 s_8>, msd; "
                    f"{dt:.1f}s (<120s)")
    assert ok


def test_c5_srw_limit():
    gap = max(abs(exact_msd(PolymerParams(n, 1e-12, (0.0, 0.0), CouplingSpec.power_law(1.5))) - n)
              for n in range(1, 11))
    out = RUNNERS["gamma-fit"](load_config(CONFIGS / "srw_limit.ini"))
    fit = table(out, "gamma_fit")
    row = dict(zip(fit.columns, fit.rows[0]))
    g = float(row["gamma_hat"])
    ok = gap < 1e-8 and abs(g - 1.0) <= 0.05
    record("5", ok, f"exact msd - N max gap {gap:.2e} (<1e-8, N<=10); MC gamma_hat {g:.4f} (1.00 +- 0.05)")
    assert ok


def test_c6_ballistic_drift():
    t0 = time.perf_counter()
    out = RUNNERS["ballistic-check"](load_config(CONFIGS / "ballistic_drift.ini"), threads=4)
    dt = time.perf_counter() - t0
    scan = table(out, "msd_scan")
    col = scan.columns.index
    ratio = [(float(r[col("msd_over_n2")]), float(r[col("msd_over_n2_se")])) for r in scan.rows]
    mono = all(b[0] >= a[0] - 2 * math.hypot(a[1], b[1]) for a, b in zip(ratio, ratio[1:]))
    fit = table(out, "gamma_fit").rows[0]
    g = float(fit[table(out, "gamma_fit").columns.index("gamma_hat")])
    ok = min(r for r, _ in ratio) > 0 and mono and ratio[-1][0] > 0.2 and 1.8 <= g <= 2.05 and dt < 600
    record("6", ok, f"msd/N^2 {ratio[0][0]:.4f} -> {ratio[-1][0]:.4f} (>0.2 at N=256), nondecreasing within 2SE "
                    f"{mono}, gamma_hat {g:.4f} in [1.8, 2.05], {dt:.1f}s (<600s)")
    assert ok


def test_c7_temperature_bracket():
    t0 = time.perf_counter()
    hot = RUNNERS["gamma-fit"](load_config(CONFIGS / "bracket_high_temperature.ini"), threads=4)
    cold = RUNNERS["gamma-fit"](load_config(CONFIGS / "bracket_low_temperature.ini"), threads=4)
    dt = time.perf_counter() - t0

    def summary(out):
        scan, fit = table(out, "msd_scan"), table(out, "gamma_fit")
        c = scan.columns.index
        return (float(fit.rows[0][fit.columns.index("gamma_hat")]),
                np.array([float(r[c("msd_over_n")]) for r in scan.rows]),
                np.array([float(r[c("msd_over_n2")]) for r in scan.rows]))

    g_hot, over_n, _ = summary(hot)
    g_cold, _, over_n2 = summary(cold)
    spread = over_n.max() / over_n.min()
    ok_hot = 0.9 <= g_hot <= 1.2 and spread < 1.5
    ok_cold = 1.8 <= g_cold <= 2.05 and bool(np.all((over_n2 > 0) & (over_n2 <= 1.0)))
    ok = ok_hot and ok_cold and dt < 900
    record("7", ok, f"high T: gamma_hat {g_hot:.4f} in [0.9, 1.2], msd/N max/min {spread:.3f} (<1.5); "
                    f"low T: gamma_hat {g_cold:.4f} in [1.8, 2.05], msd/N^2 in [{over_n2.min():.6f}, "
                    f"{over_n2.max():.6f}] within (0, 1]; {dt:.1f}s (<900s)")
    assert ok


def test_c8_coupling_sum():
    r = coupling_sum_ratios(1.5, 100_000)
    mono = bool(np.all(np.diff(r) >= 0))
    v2, v3 = coupling_sum_bound(2.0, 2), coupling_sum_bound(2.0, 3)
    ok = mono and r.max() < 2.6124 and v2 == pytest.approx(1.0, abs=1e-15) and v3 == pytest.approx(2.25, abs=1e-15)
    record("8", ok, f"ratio nondecreasing {mono}, max {r.max():.5f} (<2.6124, N<=1e5); values {v2}, {v3} (1.0, 2.25)")
    assert ok


def test_c9_variance_identity():
    worst, count = 0.0, 0
    for beta, alpha, n, v in product(BETAS, ALPHAS, range(1, 9), ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0))):
        p = PolymerParams(n, beta, (1.0, 0.0), CouplingSpec.power_law(alpha))
        _, var = endpoint_projection_moments(p, v)
        worst = max(worst, abs(Pressure(p, v).second_derivative(0.0) - beta**2 * var / n))
        count += 1
    record("9", worst < 1e-6, f"{count} instances, max |Psi''(0) - Var(beta<S,v>)/N| {worst:.2e} (<1e-6)")
    assert worst < 1e-6


def test_c10_clt():
    t0 = time.perf_counter()
    out = RUNNERS["clt-test"](load_config(CONFIGS / "clt.ini"), threads=4)
    dt = time.perf_counter() - t0
    t = table(out, "clt")
    row = dict(zip(t.columns, t.rows[0]))
    p_value = float(row["p_value"])
    rate = clt_calibration(100, 2000, 0.05, 1.0, seed=0)
    ok_ks = p_value > 1e-3
    ok_cal = abs(rate - 0.05) <= 0.03
    ok = ok_ks and ok_cal and dt < 600
    record("10", ok, f"KS p {p_value:.3g} (>0.001) with extrapolated variance {float(row['target_variance']):.5f} "
                     f"vs sample {float(row['sample_variance']):.5f}; calibration rejection rate {rate:.2f} "
                     f"(0.05 +- 0.03); {dt:.1f}s (<600s)")
    assert ok_cal, "synthetic calibration of the KS test failed"
    assert ok_ks, (f"KS rejects at N=256 (p={p_value:.3g}); see README for why the extrapolated "
                   "small-N variance cannot match this saturated regime")


def _csvs(d: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))}


def test_c11_determinism(tmp_path):
    exact = ["enumerate.ini", "pressure_scan.ini"]
    mc = ["oracle_suite.ini", "ballistic_drift.ini"]
    same = {}
    for name in exact + mc:
        cfg = str(CONFIGS / name)
        runs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{name}-{rep}"
            main(["run", cfg, "--threads", "4", "--out", str(out)])
            runs.append(_csvs(out))
        same[name] = bool(runs[0]) and runs[0] == runs[1]
    ok = all(same.values())
    record("11", ok, "byte-identical reruns: " + ", ".join(f"{k} {v}" for k, v in same.items()))
    assert ok


def test_supplementary_clt_unsaturated():
    """Not a criterion: CLT in a regime where the chains are far from saturation."""
    out = RUNNERS["clt-test"](load_config(CONFIGS / "clt_high_temperature.ini"), threads=4)
    t = table(out, "clt")
    row = dict(zip(t.columns, t.rows[0]))
    p_value = float(row["p_value"])
    record("10s", p_value > 1e-3, f"supplementary, beta=0.2 with lattice continuity correction: KS p "
                                  f"{p_value:.3g} (>0.001), target {float(row['target_variance']):.5f} vs sample "
                                  f"{float(row['sample_variance']):.5f}")
    assert p_value > 1e-3
