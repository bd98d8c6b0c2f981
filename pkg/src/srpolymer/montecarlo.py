"""Single-spin-flip Metropolis for long-range Ising chains.

Each site caches its local field sum_{j != i} V(|i-j|) s_j, so a proposal
costs O(1) and an accepted flip O(N). The cached fields and the running
energy are recomputed from scratch every ``check_every`` sweeps and the run
aborts if they drifted.

Random numbers are drawn in numpy (PCG64 streams derived from the plan seed)
and handed to the compiled kernel, so results depend only on the seed and
the plan, never on thread scheduling.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numba
import numpy as np

from .couplings import CouplingSpec
from .decoupling import chain_params, endpoints_from_steps, spins_to_steps
from .errors import InvariantError, ParameterError
from .ising import IsingParams
from .polymer import PolymerParams
from .seeding import child_rng

DRIFT_TOLERANCE = 1e-8
_BLOCK = 2048


@dataclass(frozen=True)
class McmcPlan:
    """Run lengths are in sweeps; ``n_sweeps`` includes the burn-in."""

    n_sweeps: int
    burn_in: int
    thinning: int = 1
    n_replicas: int = 4
    seed: int = 0
    batch_count: int = 32
    init: str = "random"
    check_every: int = 1000

    def __post_init__(self):
        if not self.n_sweeps > self.burn_in >= 0:
            raise ParameterError(f"need n_sweeps > burn_in >= 0, got {self.n_sweeps}, {self.burn_in}")
        if self.thinning < 1:
            raise ParameterError("thinning must be >= 1")
        if self.n_replicas < 1:
            raise ParameterError("n_replicas must be >= 1")
        if self.batch_count < 8:
            raise ParameterError(f"batch_count must be >= 8, got {self.batch_count}")
        if self.init not in ("random", "cold"):
            raise ParameterError(f"init must be 'random' or 'cold', got {self.init!r}")
        if self.check_every < 1:
            raise ParameterError("check_every must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be an unsigned 64-bit integer")
        if self.n_measurements < self.batch_count:
            raise ParameterError(
                f"{self.n_measurements} measurements cannot fill {self.batch_count} batches"
            )

    @property
    def n_measurements(self) -> int:
        return (self.n_sweeps - self.burn_in) // self.thinning


@dataclass
class ChainState:
    spins: np.ndarray
    local_fields: np.ndarray
    energy: float
    sweep_count: int = 0


@dataclass(frozen=True)
class EstimateWithError:
    value: float | np.ndarray
    std_error: float | np.ndarray
    n_effective: float | np.ndarray
    replica_spread: float | np.ndarray

    @property
    def spread_ratio(self) -> float:
        """Largest replica spread in units of the pooled standard error."""
        se = np.atleast_1d(np.asarray(self.std_error, dtype=np.float64))
        sp = np.atleast_1d(np.asarray(self.replica_spread, dtype=np.float64))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(se > 0, sp / se, np.where(sp > 0, np.inf, 0.0))
        return float(r.max())


SPREAD_LIMIT = 6.0


@dataclass
class ReplicaTrace:
    spins: np.ndarray  # (n_measurements, N) int8
    energies: np.ndarray
    acceptance: float


@dataclass
class ChainResult:
    estimates: dict[str, EstimateWithError]
    converged: bool
    acceptance: float
    params: IsingParams
    plan: McmcPlan
    traces: list[ReplicaTrace] | None = field(default=None, repr=False)


# ---------------------------------------------------------------- kernel


@numba.njit(cache=True, nogil=True)
def _recompute(spins, table):
    n = spins.shape[0]
    local = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if j != i:
                d = i - j if i > j else j - i
                acc += table[d] * spins[j]
        local[i] = acc
    return local


@numba.njit(cache=True, nogil=True)
def _energy(spins, local, field):
    # each pair appears twice in sum_i s_i * local_i
    n = spins.shape[0]
    e = 0.0
    m = 0
    for i in range(n):
        e += spins[i] * local[i]
        m += spins[i]
    return -0.5 * e - field * m


@numba.njit(cache=True, nogil=True)
def _sweep_block(spins, local, energy, table, beta, field, order, uniforms,
                 sweep0, check_every, scale, record_every, out_spins, out_energy, n_out):
    """Run ``order.shape[0]`` sweeps. Returns (energy, accepted, n_out, bad_sweep)."""
    n = spins.shape[0]
    accepted = 0
    for b in range(order.shape[0]):
        for t in range(n):
            i = order[b, t]
            si = spins[i]
            de = 2.0 * si * (local[i] + field)
            if de <= 0.0 or uniforms[b, t] < math.exp(-beta * de):
                spins[i] = -si
                delta = -2.0 * si
                for j in range(n):
                    d = i - j if i > j else j - i
                    local[j] += delta * table[d]
                energy += de
                accepted += 1
        sweep = sweep0 + b + 1
        if sweep % check_every == 0:
            fresh = _recompute(spins, table)
            drift = 0.0
            for j in range(n):
                dj = abs(fresh[j] - local[j])
                if dj > drift:
                    drift = dj
                local[j] = fresh[j]
            e_fresh = _energy(spins, local, field)
            if drift > 1e-8 * scale or abs(e_fresh - energy) > 1e-8 * scale:
                return energy, accepted, n_out, sweep
            energy = e_fresh
        if record_every > 0 and (b + 1) % record_every == 0:
            for j in range(n):
                out_spins[n_out, j] = spins[j]
            out_energy[n_out] = energy
            n_out += 1
    return energy, accepted, n_out, -1


# ---------------------------------------------------------------- state


def _scale(params: IsingParams) -> float:
    n = params.n_sites
    r = np.arange(1, n)
    return float(1.0 + np.sum((n - r) * params.table[1:]) + abs(params.field) * n)


def init_state(params: IsingParams, rng: np.random.Generator | None = None, init: str = "random") -> ChainState:
    n = params.n_sites
    if init == "cold":
        spins = np.ones(n, dtype=np.int8)
    else:
        rng = rng if rng is not None else np.random.default_rng()
        spins = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
    local = _recompute(spins, params.table)
    return ChainState(spins, local, float(_energy(spins, local, params.field)), 0)


def _advance(state: ChainState, params: IsingParams, rng: np.random.Generator, n_sweeps: int,
             check_every: int, record_every: int = 0) -> tuple[np.ndarray, np.ndarray, int]:
    n = params.n_sites
    n_rec = n_sweeps // record_every if record_every > 0 else 0
    out_spins = np.empty((n_rec, n), dtype=np.int8)
    out_energy = np.empty(n_rec)
    n_out = 0
    accepted = 0
    scale = _scale(params)
    done = 0
    while done < n_sweeps:
        # keep blocks aligned to record_every so the in-kernel counter stays valid
        size = min(_BLOCK, n_sweeps - done)
        if record_every > 0 and size % record_every and size != n_sweeps - done:
            size -= size % record_every
            size = max(size, record_every)
        # sites drawn with replacement: a fixed permutation is periodic when every flip is accepted
        order = rng.integers(0, n, size=(size, n), dtype=np.int64)
        uniforms = rng.random((size, n))
        energy, acc, n_out, bad = _sweep_block(
            state.spins, state.local_fields, state.energy, params.table, params.beta, params.field,
            order, uniforms, state.sweep_count, check_every, scale, record_every, out_spins, out_energy, n_out,
        )
        if bad >= 0:
            raise InvariantError(f"cached local fields or energy drifted at sweep {bad}", sweep=int(bad))
        state.energy = float(energy)
        state.sweep_count += size
        accepted += acc
        done += size
    return out_spins[:n_out], out_energy[:n_out], accepted


def metropolis_sweep(state: ChainState, params: IsingParams, rng: np.random.Generator,
                     check_every: int = 1000) -> ChainState:
    """One sweep of N proposals at uniformly drawn sites; updates ``state`` in place and returns it."""
    _advance(state, params, rng, 1, check_every)
    return state


def run_replica(params: IsingParams, plan: McmcPlan, replica: int, label: str = "chain",
                trace_path: str | Path | None = None) -> ReplicaTrace:
    rng = child_rng(plan.seed, label, "replica", replica)
    state = init_state(params, rng, plan.init)
    if plan.burn_in:
        _advance(state, params, rng, plan.burn_in, plan.check_every)
    n_keep = plan.n_measurements * plan.thinning
    spins, energies, accepted = _advance(state, params, rng, n_keep, plan.check_every, plan.thinning)
    trace = ReplicaTrace(spins, energies, accepted / (n_keep * params.n_sites))
    if trace_path is not None:
        write_trace(trace, trace_path, plan)
    return trace


def write_trace(trace: ReplicaTrace, path: str | Path, plan: McmcPlan) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    mags = trace.spins.sum(axis=1, dtype=np.int64) / trace.spins.shape[1]
    with open(tmp, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "energy", "magnetization"])
        for k, (e, m) in enumerate(zip(trace.energies, mags)):
            w.writerow([plan.burn_in + (k + 1) * plan.thinning, repr(float(e)), repr(float(m))])
    tmp.replace(path)


def sample_replicas(params: IsingParams, plan: McmcPlan, label: str = "chain", threads: int = 1,
                    trace_dir: str | Path | None = None) -> list[ReplicaTrace]:
    def job(r: int) -> ReplicaTrace:
        path = None if trace_dir is None else Path(trace_dir) / f"trace_{label}_r{r}.csv"
        return run_replica(params, plan, r, label, path)

    if threads <= 1 or plan.n_replicas == 1:
        return [job(r) for r in range(plan.n_replicas)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, range(plan.n_replicas)))


# ---------------------------------------------------------------- estimation


def batch_means(series: np.ndarray, batch_count: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, batch-means standard error and effective sample size of a (m, ...) series.

    Leading samples that do not fill a whole batch are dropped.
    """
    x = np.asarray(series, dtype=np.float64)
    m = x.shape[0]
    size = m // batch_count
    if size < 1:
        raise ParameterError(f"{m} samples cannot fill {batch_count} batches")
    x = x[m - size * batch_count:]
    batches = x.reshape((batch_count, size) + x.shape[1:]).mean(axis=1)
    mean = x.mean(axis=0)
    se = batches.std(axis=0, ddof=1) / math.sqrt(batch_count)
    var = x.var(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        n_eff = np.where(se > 0, var / se**2, float(x.shape[0]))
    return mean, se, n_eff


def combine_replicas(series: Sequence[np.ndarray], batch_count: int) -> EstimateWithError:
    """Pool per-replica batch-means estimates in replica order."""
    stats = [batch_means(s, batch_count) for s in series]
    means = np.array([s[0] for s in stats])
    ses = np.array([s[1] for s in stats])
    neffs = np.array([s[2] for s in stats])
    r = len(stats)
    value = means.mean(axis=0)
    se = np.sqrt((ses**2).sum(axis=0)) / r
    n_eff = neffs.sum(axis=0)
    spread = means.std(axis=0, ddof=1) if r > 1 else np.zeros_like(value)

    def out(a):
        return float(a) if np.ndim(a) == 0 else a

    return EstimateWithError(out(value), out(se), out(n_eff), out(spread))


Observable = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _site_magnetization(spins, energies):
    return spins.astype(np.float64)


def _mean_magnetization(spins, energies):
    return spins.sum(axis=1, dtype=np.int64) / spins.shape[1]


def _abs_magnetization(spins, energies):
    return np.abs(_mean_magnetization(spins, energies))


def _total_m2(spins, energies):
    m = spins.sum(axis=1, dtype=np.int64).astype(np.float64)
    return m * m


def _energy_obs(spins, energies):
    return energies


def correlation(i: int, j: int) -> Observable:
    """<sigma_i sigma_j> with 0-based site indices."""

    def obs(spins, energies):
        return spins[:, i].astype(np.float64) * spins[:, j]

    obs.__name__ = f"corr_{i}_{j}"
    return obs


def correlation_matrix(spins, energies):
    s = spins.astype(np.float64)
    return s[:, :, None] * s[:, None, :]


OBSERVABLES: dict[str, Observable] = {
    "site_magnetization": _site_magnetization,
    "magnetization": _mean_magnetization,
    "abs_magnetization": _abs_magnetization,
    "m2": _total_m2,
    "energy": _energy_obs,
}


def _resolve(observables) -> dict[str, Observable]:
    if isinstance(observables, Mapping):
        return dict(observables)
    return {name: OBSERVABLES[name] for name in observables}


def estimates_from_traces(traces: Sequence[ReplicaTrace], observables, batch_count: int) -> dict[str, EstimateWithError]:
    obs = _resolve(observables)
    return {
        name: combine_replicas([f(t.spins, t.energies) for t in traces], batch_count)
        for name, f in obs.items()
    }


def run_chain(params: IsingParams, plan: McmcPlan,
              observables: Sequence[str] | Mapping[str, Observable] = ("magnetization",),
              threads: int = 1, label: str = "chain", keep_traces: bool = False,
              trace_dir: str | Path | None = None) -> ChainResult:
    """Run ``plan.n_replicas`` independent chains and pool the requested observables.

    A run whose replica means disagree by more than ``SPREAD_LIMIT`` pooled
    standard errors on any observable is reported as unconverged.
    """
    traces = sample_replicas(params, plan, label, threads, trace_dir)
    est = estimates_from_traces(traces, observables, plan.batch_count)
    converged = all(e.spread_ratio <= SPREAD_LIMIT for e in est.values())
    acc = float(np.mean([t.acceptance for t in traces]))
    return ChainResult(est, converged, acc, params, plan, traces if keep_traces else None)


class MetropolisSampler:
    """Chain sampler for :func:`srpolymer.decoupling.sample_polymer`.

    Draw ``k`` is the configuration after ``burn_in + k * thinning`` sweeps
    of a single chain.
    """

    def __init__(self, burn_in: int = 1000, thinning: int = 10, check_every: int = 1000, init: str = "random"):
        self.burn_in = burn_in
        self.thinning = thinning
        self.check_every = check_every
        self.init = init

    def __call__(self, params: IsingParams, n_samples: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        state = init_state(params, rng, self.init)
        if self.burn_in:
            _advance(state, params, rng, self.burn_in, self.check_every)
        spins, _, _ = _advance(state, params, rng, n_samples * self.thinning, self.check_every, self.thinning)
        return spins


# ---------------------------------------------------------------- polymer-level estimators


@dataclass(frozen=True)
class MsdPoint:
    n: int
    msd: EstimateWithError
    converged: bool

    @property
    def over_n(self) -> tuple[float, float]:
        return self.msd.value / self.n, self.msd.std_error / self.n

    @property
    def over_n2(self) -> tuple[float, float]:
        return self.msd.value / self.n**2, self.msd.std_error / self.n**2


def polymer_traces(params: PolymerParams, plan: McmcPlan, threads: int = 1,
                   label: str = "polymer") -> tuple[list[ReplicaTrace], list[ReplicaTrace]]:
    """Replica traces of the two decoupled chains; replica r of each forms one polymer chain."""
    c1, c2 = chain_params(params)
    t1 = sample_replicas(c1, plan, f"{label}/chain1", threads)
    t2 = sample_replicas(c2, plan, f"{label}/chain2", threads)
    return t1, t2


def polymer_endpoints(t1: ReplicaTrace, t2: ReplicaTrace, chunk: int = 4096) -> np.ndarray:
    """Endpoints S_N of the walks assembled from paired chain snapshots."""
    m = t1.spins.shape[0]
    out = np.empty((m, 2), dtype=np.int64)
    for a in range(0, m, chunk):
        steps = spins_to_steps(t1.spins[a:a + chunk], t2.spins[a:a + chunk])
        out[a:a + chunk] = endpoints_from_steps(steps)
    return out


def estimate_polymer_msd(params: PolymerParams, plan: McmcPlan, threads: int = 1,
                         label: str = "polymer") -> MsdPoint:
    t1, t2 = polymer_traces(params, plan, threads, label)
    series = []
    for a, b in zip(t1, t2):
        end = polymer_endpoints(a, b).astype(np.float64)
        series.append((end**2).sum(axis=1))
    est = combine_replicas(series, plan.batch_count)
    return MsdPoint(params.n_steps, est, est.spread_ratio <= SPREAD_LIMIT)


def estimate_msd_curve(alpha: float | CouplingSpec, beta: float, h, n_list: Sequence[int], plan: McmcPlan,
                       threads: int = 1, label: str = "msd") -> list[MsdPoint]:
    """Monte Carlo E||S_N||^2 for each N, sampled through the decoupled chains.

    ``alpha`` is a power-law exponent or a ready-made :class:`CouplingSpec`.
    """
    spec = alpha if isinstance(alpha, CouplingSpec) else CouplingSpec.power_law(alpha)
    points = []
    for n in n_list:
        spec.require_positive(n)
        params = PolymerParams(int(n), beta, tuple(h), spec)
        points.append(estimate_polymer_msd(params, plan, threads, label=f"{label}/N={n}"))
    return points


@dataclass(frozen=True)
class SpontaneousMagnetization:
    n_sites: int
    epsilon: float
    small_field: EstimateWithError  # magnetization per site at k = epsilon, cold start
    abs_zero_field: EstimateWithError  # <|M|/N> at k = 0
    converged: bool


def estimate_spontaneous_magnetization(alpha: float | CouplingSpec, beta: float, n_sites: int, plan: McmcPlan,
                                       epsilon: float = 0.01, threads: int = 1) -> SpontaneousMagnetization:
    """Surrogates for m_*(beta): small-field magnetization and zero-field <|m|>."""
    spec = alpha if isinstance(alpha, CouplingSpec) else CouplingSpec.power_law(alpha)
    spec.require_positive(n_sites)
    if epsilon <= 0:
        raise ParameterError("epsilon must be > 0")
    cold = McmcPlan(plan.n_sweeps, plan.burn_in, plan.thinning, plan.n_replicas, plan.seed,
                    plan.batch_count, "cold", plan.check_every)
    small = run_chain(IsingParams(n_sites, beta, epsilon, spec), cold, ("magnetization",), threads,
                      label=f"mstar/eps={epsilon!r}/N={n_sites}")
    zero = run_chain(IsingParams(n_sites, beta, 0.0, spec), plan, ("abs_magnetization",), threads,
                     label=f"mstar/abs/N={n_sites}")
    return SpontaneousMagnetization(
        n_sites, epsilon, small.estimates["magnetization"], zero.estimates["abs_magnetization"],
        small.converged and zero.converged,
    )


def magnetization_ladder(alpha: float | CouplingSpec, beta: float, n_sites: int, plan: McmcPlan,
                         epsilons: Sequence[float], threads: int = 1) -> list[tuple[float, EstimateWithError]]:
    """Cold-start magnetization per site at each small field in ``epsilons``."""
    spec = alpha if isinstance(alpha, CouplingSpec) else CouplingSpec.power_law(alpha)
    cold = McmcPlan(plan.n_sweeps, plan.burn_in, plan.thinning, plan.n_replicas, plan.seed,
                    plan.batch_count, "cold", plan.check_every)
    out = []
    for eps in epsilons:
        res = run_chain(IsingParams(n_sites, beta, eps, spec), cold, ("magnetization",), threads,
                        label=f"ladder/eps={eps!r}/N={n_sites}")
        out.append((float(eps), res.estimates["magnetization"]))
    return out
