"""Experiment runners: one function per config ``kind``, each returning result tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .analysis import (
    MonteCarloPressure,
    Pressure,
    clt_calibration,
    clt_test,
    coupling_sum_bound,
    extrapolated_second_derivative,
    fit_gamma,
)
from .config import ExperimentConfig
from .couplings import CouplingSpec
from .decoupling import (
    chain_params,
    drift_to_fields,
    endpoints_from_steps,
    measure_factorization_check,
    msd_from_correlations,
    sample_polymer,
)
from .ising import IsingParams, enumerate_ising, log_partition, magnetizations, two_point_matrix
from .montecarlo import MetropolisSampler, MsdPoint, correlation, estimate_msd_curve, run_chain
from .polymer import PolymerParams, endpoint_projection_moments, enumerate_polymer, tilted_log_moment
from .seeding import child_seed
from .transfer import NNChainParams, limit_magnetization, nn_magnetizations, nn_observables
from .results import Table


@dataclass
class Outcome:
    tables: list[Table]
    unconverged: bool = False
    failures: list[str] = field(default_factory=list)


def _alphas(cfg: ExperimentConfig):
    return cfg.alphas or [None]


def _alpha_label(a) -> str:
    return "table" if a is None else repr(a)


def _hypothesis(h) -> str:
    f = drift_to_fields(h)
    return "h1h2>0" if f.h1 * f.h2 > 0 else ("h1h2<0" if f.h1 * f.h2 < 0 else "h1h2=0")


# ---------------------------------------------------------------- exact


def run_enumerate(cfg: ExperimentConfig, threads: int = 1) -> Outcome:
    t = Table("enumerate", ["alpha", "beta", "h_x", "h_y", "n", "log_z", "msd", "msd_over_n", "msd_over_n2",
                            "factorization_discrepancy", "log_z_split_gap", "msd_identity_gap"])
    for a, beta, h, n in product(_alphas(cfg), cfg.betas, cfg.drifts, cfg.n_list):
        params = PolymerParams(n, beta, h, cfg.coupling_for(a))
        dist = enumerate_polymer(params)
        msd = dist.expect((dist.endpoints.astype(np.float64) ** 2).sum(axis=1))
        c1, c2 = chain_params(params)
        split = abs(dist.log_z - log_partition(c1) - log_partition(c2))
        ident = abs(msd_from_correlations(two_point_matrix(c1), two_point_matrix(c2)) - msd)
        t.add(_alpha_label(a), beta, h[0], h[1], n, dist.log_z, msd, msd / n, msd / n**2,
              measure_factorization_check(params), split, ident)
    return Outcome([t])


# ---------------------------------------------------------------- Monte Carlo MSD


_MSD_COLUMNS = ["alpha", "beta", "h_x", "h_y", "n", "msd", "msd_se", "msd_over_n", "msd_over_n_se",
                "msd_over_n2", "msd_over_n2_se", "n_effective", "replica_spread", "converged"]


def _msd_rows(cfg: ExperimentConfig, threads: int):
    """Yield (alpha, beta, h, points) for every grid cell."""
    for a, beta, h in product(_alphas(cfg), cfg.betas, cfg.drifts):
        label = f"msd/alpha={_alpha_label(a)}/beta={beta!r}/h={h!r}"
        pts = estimate_msd_curve(cfg.coupling_for(a), beta, h, cfg.n_list, cfg.plan, threads, label)
        yield a, beta, h, pts


def _add_msd(table: Table, a, beta, h, pts: list[MsdPoint]) -> bool:
    ok = True
    for p in pts:
        table.add(_alpha_label(a), beta, h[0], h[1], p.n, p.msd.value, p.msd.std_error, *p.over_n, *p.over_n2,
                  p.msd.n_effective, p.msd.replica_spread, p.converged)
        ok &= p.converged
    return ok


def run_msd_scan(cfg: ExperimentConfig, threads: int = 1) -> Outcome:
    t = Table("msd_scan", _MSD_COLUMNS)
    ok = True
    for a, beta, h, pts in _msd_rows(cfg, threads):
        ok &= _add_msd(t, a, beta, h, pts)
    return Outcome([t], unconverged=not ok)


def _fit_row(table: Table, a, beta, h, pts: list[MsdPoint]):
    fit = fit_gamma([(p.n, p.msd.value, p.msd.std_error) for p in pts])
    lo, hi = fit.interval
    n_max = pts[-1].n
    ratio = coupling_sum_bound(a, n_max) / n_max if a is not None and a > 1 else float("nan")
    table.add(_alpha_label(a), beta, h[0], h[1], fit.gamma_hat, fit.gamma_stderr, lo, hi, fit.intercept,
              fit.r_squared, fit.n_points, fit.regime, ratio)
    return fit


_FIT_COLUMNS = ["alpha", "beta", "h_x", "h_y", "gamma_hat", "gamma_se", "ci_low", "ci_high", "intercept",
                "r_squared", "n_points", "regime", "coupling_sum_over_n"]


def run_gamma_fit(cfg: ExperimentConfig, threads: int = 1) -> Outcome:
    scan = Table("msd_scan", _MSD_COLUMNS)
    fits = Table("gamma_fit", _FIT_COLUMNS)
    ok = True
    for a, beta, h, pts in _msd_rows(cfg, threads):
        ok &= _add_msd(scan, a, beta, h, pts)
        _fit_row(fits, a, beta, h, pts)
    return Outcome([scan, fits], unconverged=not ok)


def nn_ballistic_lower_bound(params: PolymerParams) -> float:
    """Griffiths lower bound on E||S_N||^2 / N^2 from the nearest-neighbour chains.

    <s_i s_j> >= <s_i>_nn <s_j>_nn, so msd >= (1/2) sum_c (sum_i m_i^nn)^2,
    with the nearest-neighbour chain at beta/2, coupling V(1) and field |h_c|.
    """
    j = params.couplings.value(1) if params.n_steps > 1 else 1.0
    total = 0.0
    for c in chain_params(params):
        m = nn_magnetizations(NNChainParams(params.n_steps, c.beta, j, abs(c.field)))
        total += float(m.sum()) ** 2
    return 0.5 * total / params.n_steps**2


def run_ballistic_check(cfg: ExperimentConfig, threads: int = 1) -> Outcome:
    scan = Table("msd_scan", _MSD_COLUMNS + ["nn_lower_bound"])
    fits = Table("gamma_fit", _FIT_COLUMNS)
    summary = Table("ballistic", ["alpha", "beta", "h_x", "h_y", "hypothesis", "min_ratio", "last_ratio",
                                  "nondecreasing_2se", "limit_lower_bound", "regime", "above_nn_bound"])
    ok = True
    for a, beta, h, pts in _msd_rows(cfg, threads):
        spec = cfg.coupling_for(a)
        above = True
        for p in pts:
            bound = nn_ballistic_lower_bound(PolymerParams(p.n, beta, h, spec))
            scan.add(_alpha_label(a), beta, h[0], h[1], p.n, p.msd.value, p.msd.std_error, *p.over_n, *p.over_n2,
                     p.msd.n_effective, p.msd.replica_spread, p.converged, bound)
            above &= p.over_n2[0] + 4 * p.over_n2[1] >= bound
            ok &= p.converged
        fit = _fit_row(fits, a, beta, h, pts)
        r = [p.over_n2 for p in pts]
        mono = all(r2[0] >= r1[0] - 2 * math.hypot(r1[1], r2[1]) for r1, r2 in zip(r, r[1:]))
        f = drift_to_fields(h)
        j = spec.value(1)
        lim = 0.5 * sum(limit_magnetization(0.5 * beta, j, abs(k)) ** 2 for k in (f.h1, f.h2))
        summary.add(_alpha_label(a), beta, h[0], h[1], _hypothesis(h), min(x[0] for x in r), r[-1][0], mono, lim,
                    fit.regime, above)
    return Outcome([scan, fits, summary], unconverged=not ok)


# ---------------------------------------------------------------- CLT


def run_clt_test(cfg: ExperimentConfig, threads: int = 1) -> Outcome:
    alpha = _alphas(cfg)[0]
    spec = cfg.coupling_for(alpha)
    beta, h, v, n = cfg.betas[0], cfg.drift, cfg.direction, cfg.n_list[-1]
    params = PolymerParams(n, beta, h, spec)
    n_samples = cfg.option_int("n_samples", 2000)
    sampler = MetropolisSampler(cfg.option_int("sample_burn_in", 2000), cfg.option_int("sample_thinning", 10))
    steps = sample_polymer(params, n_samples, child_seed(cfg.seed, "clt", "samples"), sampler)
    proj = beta * (endpoints_from_steps(steps) @ np.asarray(v, dtype=np.float64))

    mc = MonteCarloPressure(params, v, cfg.plan, nodes=cfg.option_int("nodes", 4), threads=threads)
    mean = mc.mean_projection()
    method = cfg.option("variance", "mc-pressure")
    if method == "mc-pressure":
        target = mc.second_derivative(0.0, cfg.option_float("mc_step", 0.1))
    else:
        to = cfg.option("extrapolate_to", "n")
        target = extrapolated_second_derivative(beta, h, v, spec, n if to == "n" else math.inf)
    x = (proj - mean) / math.sqrt(n)
    spacing = cfg.option_float("lattice_spacing", 0.0) * beta / math.sqrt(n)
    res = clt_test(x, target, lattice_spacing=spacing or None, seed=child_seed(cfg.seed, "clt", "jitter")) \
        if target > 0 else None
    rate = clt_calibration(cfg.option_int("calibration_repetitions", 100), n_samples, 0.05, 1.0,
                           child_seed(cfg.seed, "clt", "calibration"))
    hyp = _hypothesis(h)
    t = Table("clt", ["alpha", "beta", "h_x", "h_y", "v_x", "v_y", "n", "n_samples", "mean_proxy", "variance_method",
                      "target_variance", "sample_variance", "ks_statistic", "p_value", "calibration_rejection_rate",
                      "hypotheses"])
    t.add(_alpha_label(alpha), beta, h[0], h[1], v[0], v[1], n, n_samples, mean, method, target,
          float(np.var(x, ddof=1)), res.ks_statistic if res else float("nan"), res.p_value if res else 0.0, rate, hyp)
    samples = Table("clt_samples", ["index", "value"])
    for i, val in enumerate(x):
        samples.add(i, float(val))
    return Outcome([t, samples], unconverged=False)


# ---------------------------------------------------------------- pressure


def run_pressure_scan(cfg: ExperimentConfig, threads: int = 1) -> Outcome:
    alpha = _alphas(cfg)[0]
    spec = cfg.coupling_for(alpha)
    t_grid = np.linspace(cfg.option_float("t_min", -0.5), cfg.option_float("t_max", 0.5),
                         cfg.option_int("t_points", 11))
    step = cfg.option_float("step", 0.02)
    psi_t = Table("pressure", ["beta", "h_x", "h_y", "v_x", "v_y", "n", "t", "psi"])
    d2_t = Table("pressure_d2", ["beta", "h_x", "h_y", "v_x", "v_y", "n", "t", "psi_second_derivative"])
    ident = Table("variance_identity", ["beta", "h_x", "h_y", "v_x", "v_y", "n", "psi2_at_0", "variance_over_n",
                                        "gap", "convex"])
    for beta, h, v in product(cfg.betas, cfg.drifts, cfg.directions):
        for n in cfg.n_list:
            params = PolymerParams(n, beta, h, spec)
            psi = Pressure(params, v)
            vals = np.array([psi(float(t)) for t in t_grid])
            for t, val in zip(t_grid, vals):
                psi_t.add(beta, h[0], h[1], v[0], v[1], n, float(t), val)
                d2_t.add(beta, h[0], h[1], v[0], v[1], n, float(t), psi.second_derivative(float(t), step))
            convex = bool(np.all(vals[:-2] - 2 * vals[1:-1] + vals[2:] >= -1e-9))
            if n <= 10:
                _, var = endpoint_projection_moments(params, v)
                d2 = psi.second_derivative(0.0, step)
                ident.add(beta, h[0], h[1], v[0], v[1], n, d2, beta**2 * var / n, abs(d2 - beta**2 * var / n), convex)
    return Outcome([psi_t, d2_t, ident])


# ---------------------------------------------------------------- oracle suite


def run_oracle_suite(cfg: ExperimentConfig, threads: int = 1) -> Outcome:
    t = Table("oracle_suite", ["check", "alpha", "beta", "h_x", "h_y", "n", "value", "tolerance", "pass"])
    failures = []

    def record(check, a, beta, h, n, value, tol):
        ok = bool(value < tol)
        t.add(check, _alpha_label(a), beta, h[0], h[1], n, value, tol, ok)
        if not ok:
            failures.append(f"{check} alpha={a} beta={beta} h={h} n={n}: {value} >= {tol}")

    for a, beta, h, n in product(_alphas(cfg), cfg.betas, cfg.drifts, cfg.n_list):
        spec = cfg.coupling_for(a)
        params = PolymerParams(n, beta, h, spec)
        dist = enumerate_polymer(params)
        c1, c2 = chain_params(params)
        msd = dist.expect((dist.endpoints.astype(np.float64) ** 2).sum(axis=1))
        record("measure_factorization", a, beta, h, n, measure_factorization_check(params), 1e-12)
        record("log_z_split", a, beta, h, n, abs(dist.log_z - log_partition(c1) - log_partition(c2)), 1e-10)
        record("msd_identity", a, beta, h, n,
               abs(msd_from_correlations(two_point_matrix(c1), two_point_matrix(c2)) - msd), 1e-10)
        psi = Pressure(params, cfg.direction)
        record("pressure_two_paths", a, beta, h, n,
               abs(psi(0.1) - tilted_log_moment(params, cfg.direction, 0.1) / n), 1e-10)
        for v in cfg.directions:
            _, var = endpoint_projection_moments(params, v)
            d2 = Pressure(params, v).second_derivative(0.0)
            record(f"variance_identity[v={v[0]!r},{v[1]!r}]", a, beta, h, n, abs(d2 - beta**2 * var / n), 1e-6)

    for beta, h in product(cfg.betas, cfg.drifts):
        for n in range(1, min(12, max(cfg.n_list) + 2) + 1):
            nn = CouplingSpec.nearest_neighbor(1.0)
            c1, _ = chain_params(PolymerParams(n, beta, h, nn))
            obs = nn_observables(NNChainParams(n, c1.beta, 1.0, c1.field))
            gap = max(float(np.max(np.abs(obs.magnetization - magnetizations(c1)))),
                      float(np.max(np.abs(obs.correlation - two_point_matrix(c1)))),
                      abs(obs.log_z - log_partition(c1)))
            record("transfer_matrix_vs_enumeration", "nn", beta, h, n, gap, 1e-10)

    if cfg.plan is not None and cfg.option_bool("monte_carlo", True):
        outside = total = 0
        for a, beta, h in product(_alphas(cfg), cfg.betas, cfg.drifts):
            n = max(cfg.n_list)
            chain = chain_params(PolymerParams(n, beta, h, cfg.coupling_for(a)))[0]
            obs = {"site_magnetization": lambda s, e: s.astype(np.float64), "corr_1n": correlation(0, n - 1)}
            res = run_chain(chain, cfg.plan, obs, threads, label=f"oracle/{a!r}/{beta!r}/{h!r}")
            exact_m = magnetizations(chain)
            exact_c = two_point_matrix(chain)[0, n - 1]
            for name, est, exact in (("mc_site_magnetization", res.estimates["site_magnetization"], exact_m),
                                     ("mc_corr_1n", res.estimates["corr_1n"], exact_c)):
                z = np.atleast_1d(np.abs(np.asarray(est.value) - exact) / np.maximum(est.std_error, 1e-300))
                outside += int(np.sum(z > 4))
                total += z.size
                t.add(name, _alpha_label(a), beta, h[0], h[1], n, float(z.max()), 4.0, bool(z.max() <= 4))
        # statistical tolerance: at most one cell in twenty beyond 4 standard errors
        allowed = total // 20
        t.add("mc_cells_outside_4se", "all", 0.0, 0.0, 0.0, 0, outside, allowed, outside <= allowed)
        if outside > allowed:
            failures.append(f"{outside} of {total} Monte Carlo cells beyond 4 standard errors")
    return Outcome([t], failures=failures)


RUNNERS = {
    "enumerate": run_enumerate,
    "msd-scan": run_msd_scan,
    "gamma-fit": run_gamma_fit,
    "ballistic-check": run_ballistic_check,
    "clt-test": run_clt_test,
    "pressure-scan": run_pressure_scan,
    "oracle-suite": run_oracle_suite,
}
