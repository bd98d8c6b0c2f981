"""Scaling fits, the coupling-sum bound, the pressure functional and the CLT check."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .couplings import CouplingSpec
from .decoupling import chain_params, drift_to_fields
from .errors import ParameterError
from .ising import ISING_ENUMERATION_CAP, FieldScan, IsingParams
from .montecarlo import McmcPlan, run_chain
from .polymer import PolymerParams
from .transfer import NNChainParams, nn_log_partition

# ---------------------------------------------------------------- coupling sums


def coupling_sum_bound(alpha: float, n: int) -> float:
    """Exact sum over 1 <= i < j <= n of |i - j|**-alpha."""
    if not alpha > 1:
        raise ParameterError(f"the pair sum is O(N) only for alpha > 1, got alpha={alpha}")
    if n < 1:
        raise ParameterError("n must be >= 1")
    r = np.arange(1, n, dtype=np.float64)
    return float(np.sum((n - r) * r**-alpha))


def coupling_sum_ratios(alpha: float, n_max: int) -> np.ndarray:
    """coupling_sum_bound(alpha, n) / n for n = 1..n_max, in O(n_max).

    Uses sum_{r<n} (1 - r/n) r**-alpha = A(n) - B(n)/n with running sums A, B.
    """
    if not alpha > 1:
        raise ParameterError(f"the pair sum is O(N) only for alpha > 1, got alpha={alpha}")
    r = np.arange(1, n_max, dtype=np.float64)
    a = np.concatenate([[0.0], np.cumsum(r**-alpha)])
    b = np.concatenate([[0.0], np.cumsum(r ** (1.0 - alpha))])
    n = np.arange(1, n_max + 1, dtype=np.float64)
    return a - b / n


# ---------------------------------------------------------------- scaling fits


@dataclass(frozen=True)
class ScalingFit:
    gamma_hat: float
    gamma_stderr: float
    intercept: float
    r_squared: float
    n_points: int

    @property
    def interval(self) -> tuple[float, float]:
        return self.gamma_hat - 2 * self.gamma_stderr, self.gamma_hat + 2 * self.gamma_stderr

    @property
    def regime(self) -> str:
        return classify_regime(self)


REGIME_BANDS = (
    ("diffusive", 0.8, 1.2),
    ("superdiffusive", 1.2, 1.8),
    ("ballistic", 1.8, 2.05),
)


def classify_regime(fit: ScalingFit) -> str:
    """Regime whose open band contains the whole 2-sigma interval, else ``"inconclusive"``."""
    lo, hi = fit.interval
    for name, a, b in REGIME_BANDS:
        if a < lo and hi < b:
            return name
    return "inconclusive"


def fit_gamma(points: Sequence[tuple[float, float, float]]) -> ScalingFit:
    """Weighted least squares of ln(msd) on ln(N).

    ``points`` holds (N, msd, stderr). Weights are (msd/stderr)**2; if any
    stderr is zero the fit is unweighted. The slope error is inflated by
    sqrt(chi2/dof) when the scatter exceeds the quoted errors.
    """
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 3:
        raise ParameterError("fit_gamma needs at least 3 (N, msd, stderr) points")
    n, msd, se = arr.T
    if np.any(np.diff(n) <= 0):
        raise ParameterError("N values must be strictly increasing")
    if np.any(msd <= 0) or np.any(n <= 0):
        raise ParameterError("N and msd must be positive")
    x, y = np.log(n), np.log(msd)
    weighted = bool(np.all(se > 0))
    w = (msd / se) ** 2 if weighted else np.ones_like(x)
    sw = w.sum()
    xm, ym = (w * x).sum() / sw, (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    if sxx <= 0:
        raise ParameterError("degenerate abscissae: all ln N equal")
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    dof = len(x) - 2
    chi2 = float((w * resid**2).sum())
    if weighted:
        var = 1.0 / sxx * max(1.0, chi2 / dof if dof > 0 else 1.0)
    else:
        var = chi2 / dof / sxx if dof > 0 else 0.0
    syy = (w * (y - ym) ** 2).sum()
    r2 = 1.0 - chi2 / syy if syy > 0 else 1.0
    return ScalingFit(float(slope), float(math.sqrt(var)), float(intercept), float(r2), len(x))


# ---------------------------------------------------------------- pressure


def _projections(v) -> tuple[float, float]:
    f = drift_to_fields(v)
    return f.h1, f.h2


def _chain_log_z(chain: IsingParams, cap: int):
    """Field -> ln Z for one chain: transfer matrix for nearest-neighbour couplings, else enumeration."""
    spec = chain.couplings
    if spec.is_nearest_neighbor and spec.value(1) > 0:
        j = spec.value(1)
        return lambda k: nn_log_partition(NNChainParams(chain.n_sites, chain.beta, j, k))
    return FieldScan(chain, cap).log_z


class Pressure:
    """Finite-N pressure Psi_N(t) = (1/N) ln E[exp(beta t <S_N, v>)] for one (params, v)."""

    def __init__(self, params: PolymerParams, v, cap: int = ISING_ENUMERATION_CAP):
        if not params.couplings.summable:
            raise ParameterError("the pressure functional needs summable couplings")
        self.params = params
        self.v = tuple(float(x) for x in v)
        self.v1, self.v2 = _projections(self.v)
        c1, c2 = chain_params(params)
        self.h1, self.h2 = c1.field, c2.field
        self._z1 = _chain_log_z(c1, cap)
        self._z2 = self._z1 if c1 == c2 else _chain_log_z(c2, cap)
        self._base = self._z1(self.h1) + self._z2(self.h2)

    def __call__(self, t: float) -> float:
        if t == 0.0:
            return 0.0
        tilted = self._z1(self.h1 + t * self.v1) + self._z2(self.h2 + t * self.v2)
        return (tilted - self._base) / self.params.n_steps

    def second_derivative(self, t0: float = 0.0, step: float = 0.02, levels: int = 4) -> float:
        return richardson_second_difference(self, t0, step, levels)


def richardson_second_difference(f, t0: float, step: float, levels: int = 4) -> float:
    """Central second differences at step, step/2, ..., extrapolated to zero step.

    Each halving removes the next even power of the step from the error.
    """
    if not 0 < step <= 0.1:
        raise ParameterError(f"step must lie in (0, 0.1], got {step}")
    if levels < 1:
        raise ParameterError("levels must be >= 1")
    f0 = f(t0)
    row = []
    for k in range(levels):
        h = step / 2**k
        row.append((f(t0 + h) - 2.0 * f0 + f(t0 - h)) / (h * h))
    for m in range(1, levels):
        factor = 4.0**m
        row = [(factor * row[i + 1] - row[i]) / (factor - 1.0) for i in range(len(row) - 1)]
    return row[0]


def pressure(params: PolymerParams, v, t: float, cap: int = ISING_ENUMERATION_CAP) -> float:
    return Pressure(params, v, cap)(t)


def pressure_second_derivative(params: PolymerParams, v, t0: float = 0.0, step: float = 0.02,
                               cap: int = ISING_ENUMERATION_CAP, levels: int = 4) -> float:
    return Pressure(params, v, cap).second_derivative(t0, step, levels)


@dataclass(frozen=True)
class PressureCurve:
    t_grid: np.ndarray
    psi_values: np.ndarray
    n_sites: int
    direction: tuple[float, float]
    v1: float
    v2: float

    def second_differences(self) -> np.ndarray:
        return self.psi_values[:-2] - 2 * self.psi_values[1:-1] + self.psi_values[2:]


def pressure_curve(params: PolymerParams, v, t_grid: Sequence[float], cap: int = ISING_ENUMERATION_CAP) -> PressureCurve:
    psi = Pressure(params, v, cap)
    t = np.asarray(t_grid, dtype=np.float64)
    vals = np.array([psi(float(x)) for x in t])
    if not np.all(np.isfinite(vals)):
        raise ParameterError("pressure is not finite on the grid")
    return PressureCurve(t, vals, params.n_steps, psi.v, psi.v1, psi.v2)


def c2_regularity_table(beta: float, h, v, couplings: CouplingSpec, n_list: Sequence[int],
                        t_grid: Sequence[float], step: float = 0.02,
                        cap: int = ISING_ENUMERATION_CAP) -> np.ndarray:
    """Psi_N''(t) on ``t_grid`` for each N (rows), to eyeball uniform convergence."""
    rows = []
    for n in n_list:
        psi = Pressure(PolymerParams(int(n), beta, tuple(h), couplings), v, cap)
        rows.append([psi.second_derivative(float(t), step) for t in t_grid])
    return np.asarray(rows)


def extrapolated_second_derivative(beta: float, h, v, couplings: CouplingSpec, n_target: float,
                                   n_points: Sequence[int] | None = None, step: float = 0.02,
                                   cap: int = ISING_ENUMERATION_CAP) -> float:
    """Psi_N''(0) at the largest enumerable sizes, extrapolated linearly in 1/N to ``n_target``.

    ``n_target = inf`` gives the N -> infinity Richardson estimate.
    """
    if n_points is None:
        n_points = (cap - 1, cap)
    n_points = sorted(int(n) for n in n_points)
    y = [Pressure(PolymerParams(n, beta, tuple(h), couplings), v, cap).second_derivative(0.0, step) for n in n_points]
    x = [1.0 / n for n in n_points]
    slope, icpt = np.polyfit(x, y, 1)
    xt = 0.0 if math.isinf(n_target) else 1.0 / n_target
    return float(icpt + slope * xt)


# ---------------------------------------------------------------- Monte Carlo pressure


class MonteCarloPressure:
    """Psi_N(t) at sizes beyond enumeration, by thermodynamic integration.

    ln Z(k + d) - ln Z(k) = beta_c * integral of <M>(k') dk' over [k, k + d],
    with <M> from independent Metropolis runs at Gauss-Legendre nodes. Runs
    are cached by chain field, so identical chains are simulated once.
    """

    def __init__(self, params: PolymerParams, v, plan: McmcPlan, nodes: int = 4, threads: int = 1):
        if not params.couplings.summable:
            raise ParameterError("the pressure functional needs summable couplings")
        self.params = params
        self.v = tuple(float(x) for x in v)
        self.v1, self.v2 = _projections(self.v)
        self.chains = chain_params(params)
        self.plan = plan
        self.threads = threads
        self._nodes, self._weights = np.polynomial.legendre.leggauss(nodes)
        self._cache: dict[tuple, tuple[float, float]] = {}

    def magnetization(self, chain: IsingParams, field: float) -> tuple[float, float]:
        """Total magnetization <M> and its standard error at ``field``."""
        key = (chain.n_sites, chain.beta, chain.couplings, float(field))
        if key not in self._cache:
            res = run_chain(chain.with_field(field), self.plan, ("magnetization",), self.threads,
                            label=f"mcpressure/b={chain.beta!r}/k={float(field)!r}")
            est = res.estimates["magnetization"]
            self._cache[key] = (est.value * chain.n_sites, est.std_error * chain.n_sites)
        return self._cache[key]

    def _delta_log_z(self, chain: IsingParams, k0: float, dk: float) -> float:
        if dk == 0.0:
            return 0.0
        total = 0.0
        for x, w in zip(self._nodes, self._weights):
            total += w * self.magnetization(chain, k0 + 0.5 * dk * (x + 1.0))[0]
        return chain.beta * 0.5 * dk * total

    def __call__(self, t: float) -> float:
        c1, c2 = self.chains
        return (self._delta_log_z(c1, c1.field, t * self.v1) + self._delta_log_z(c2, c2.field, t * self.v2)) / self.params.n_steps

    def second_derivative(self, t0: float = 0.0, step: float = 0.1, richardson: bool = False) -> float:
        if richardson:
            return richardson_second_difference(self, t0, step, levels=2)
        return (self(t0 + step) - 2.0 * self(t0) + self(t0 - step)) / step**2

    def mean_projection(self) -> float:
        """E[beta <S_N, v>] = (beta/2) (v1 <M1> + v2 <M2>), the centring for CLT samples."""
        c1, c2 = self.chains
        m1 = self.magnetization(c1, c1.field)[0]
        m2 = self.magnetization(c2, c2.field)[0]
        return 0.5 * self.params.beta * (self.v1 * m1 + self.v2 * m2)


# ---------------------------------------------------------------- CLT


@dataclass(frozen=True)
class CltResult:
    ks_statistic: float
    p_value: float
    sample_variance: float
    target_variance: float
    n_samples: int
    estimated_mean: bool


MIN_CLT_SAMPLES = 500


def clt_test(samples, target_variance: float, center: str = "given", lattice_spacing: float | None = None,
             seed: int = 0) -> CltResult:
    """One-sample KS test of centred samples against N(0, target_variance).

    With ``center="sample"`` the sample mean is subtracted first and the
    result is flagged, since the plain KS null distribution then no longer
    applies exactly.

    Lattice-valued samples (spacing ``lattice_spacing``) are smoothed with
    uniform jitter of one spacing before testing, and the target variance
    grows by spacing**2 / 12 accordingly.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < MIN_CLT_SAMPLES:
        raise ParameterError(f"clt_test needs at least {MIN_CLT_SAMPLES} samples, got {x.size}")
    if not target_variance > 0:
        raise ParameterError("target_variance must be > 0")
    if center == "sample":
        x = x - x.mean()
    elif center != "given":
        raise ParameterError(f"center must be 'given' or 'sample', got {center!r}")
    var = float(target_variance)
    if lattice_spacing:
        x = x + np.random.default_rng(seed).uniform(-0.5, 0.5, x.size) * lattice_spacing
        var += lattice_spacing**2 / 12.0
    res = stats.kstest(x, stats.norm(loc=0.0, scale=math.sqrt(var)).cdf, method="asymp")
    return CltResult(float(res.statistic), float(res.pvalue), float(x.var(ddof=1)), var,
                     int(x.size), center == "sample")


def clt_calibration(n_repetitions: int = 100, n_samples: int = 2000, level: float = 0.05,
                    variance: float = 1.0, seed: int = 0) -> float:
    """Fraction of synthetic exactly-normal data sets that clt_test rejects at ``level``."""
    rng = np.random.default_rng(seed)
    rejected = 0
    for _ in range(n_repetitions):
        x = rng.normal(0.0, math.sqrt(variance), n_samples)
        if clt_test(x, variance).p_value < level:
            rejected += 1
    return rejected / n_repetitions
