"""Finite 1D Ising chains with free boundaries: energies and exact enumeration.

The chain on sites 1..N has energy

    H(sigma) = - sum_{i<j} V(|i-j|) sigma_i sigma_j - k sum_i sigma_i

and Gibbs weight exp(-beta H). Everything here is brute force over all 2**N
configurations and serves as the oracle for the transfer-matrix and Monte
Carlo code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .couplings import CouplingSpec
from .errors import CapExceededError, ParameterError, ShapeError

ISING_ENUMERATION_CAP = 20


@dataclass(frozen=True)
class IsingParams:
    n_sites: int
    beta: float
    field: float
    couplings: CouplingSpec
    table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ParameterError(f"n_sites must be a positive integer, got {self.n_sites!r}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ParameterError(f"beta must be > 0, got {self.beta!r}")
        if not np.isfinite(self.field):
            raise ParameterError("field must be finite")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "field", float(self.field))
        tab = self.couplings.distance_table(self.n_sites)
        tab.setflags(write=False)
        object.__setattr__(self, "table", tab)

    def with_field(self, field: float) -> IsingParams:
        return IsingParams(self.n_sites, self.beta, field, self.couplings)


def as_spins(config: Sequence[int] | np.ndarray, n_sites: int | None = None) -> np.ndarray:
    """Validate a spin configuration and return it as an int8 array."""
    arr = np.asarray(config)
    if arr.ndim != 1 or arr.size < 1:
        raise ShapeError(f"spin configuration must be a non-empty 1D sequence, got shape {arr.shape}")
    if not np.all((arr == 1) | (arr == -1)):
        raise ShapeError("spins must be exactly -1 or +1")
    if n_sites is not None and arr.size != n_sites:
        raise ShapeError(f"configuration has {arr.size} spins, expected {n_sites}")
    return arr.astype(np.int8)


def ising_hamiltonian(config, params: IsingParams) -> float:
    """Energy of one configuration, summed over pairs in ascending (i, j) order."""
    s = as_spins(config, params.n_sites)
    tab = params.table
    n = params.n_sites
    energy = 0.0
    for i in range(n):
        si = int(s[i])
        for j in range(i + 1, n):
            energy -= tab[j - i] * (si * int(s[j]))
    energy -= params.field * int(s.astype(np.int64).sum())
    return energy


def all_configs(n_sites: int) -> np.ndarray:
    """All 2**n configurations, shape (2**n, n); row c has spin i = -1 iff bit (n-1-i) of c is set."""
    idx = np.arange(2**n_sites, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n_sites - 1, -1, -1, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(np.int8)


def config_index(configs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`all_configs` row ordering; works on (n,) or (m, n) arrays."""
    arr = np.asarray(configs)
    n = arr.shape[-1]
    bits = (arr < 0).astype(np.int64)
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    return bits @ weights


def bond_counts(configs: np.ndarray) -> np.ndarray:
    """Integer sums c_r = sum_i s_i s_{i+r} for r = 1..n-1, shape (m, n-1)."""
    s = np.asarray(configs, dtype=np.int64)
    n = s.shape[-1]
    out = np.empty(s.shape[:-1] + (max(n - 1, 0),), dtype=np.int64)
    for r in range(1, n):
        out[..., r - 1] = np.sum(s[..., :-r] * s[..., r:], axis=-1)
    return out


def _check_cap(n_sites: int, cap: int) -> None:
    if n_sites > cap:
        raise CapExceededError(f"exact enumeration of {n_sites} sites exceeds the cap of {cap} (2**{cap} states)")


@dataclass(frozen=True)
class IsingEnumeration:
    """Exact Gibbs distribution of a chain, one row per configuration."""

    params: IsingParams
    configs: np.ndarray
    energies: np.ndarray
    log_z: float

    @cached_property
    def log_probs(self) -> np.ndarray:
        return -self.params.beta * self.energies - self.log_z

    @cached_property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def expect(self, values: np.ndarray) -> np.ndarray | float:
        """Average per-configuration ``values`` (leading axis = configuration)."""
        v = np.asarray(values, dtype=np.float64)
        out = np.tensordot(self.probs, v, axes=(0, 0))
        return float(out) if np.ndim(out) == 0 else out


def logsumexp(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    amax = np.max(a)
    return float(amax + np.log(np.sum(np.exp(a - amax))))


def enumerate_ising(params: IsingParams, cap: int = ISING_ENUMERATION_CAP) -> IsingEnumeration:
    _check_cap(params.n_sites, cap)
    configs = all_configs(params.n_sites)
    counts = bond_counts(configs)
    energies = np.zeros(configs.shape[0], dtype=np.float64)
    for r in range(1, params.n_sites):
        # distance-by-distance accumulation keeps the summation order fixed
        energies -= params.table[r] * counts[:, r - 1]
    energies -= params.field * configs.sum(axis=1, dtype=np.int64)
    log_z = logsumexp(-params.beta * energies)
    return IsingEnumeration(params, configs, energies, log_z)


def log_partition(params: IsingParams, cap: int = ISING_ENUMERATION_CAP) -> float:
    return enumerate_ising(params, cap).log_z


def exact_expectation(
    f: Callable[[np.ndarray], np.ndarray],
    params: IsingParams,
    cap: int = ISING_ENUMERATION_CAP,
) -> float:
    """Gibbs average of ``f``.

    ``f`` is called once with the (2**N, N) array of all configurations and
    must return one value per row.
    """
    enum = enumerate_ising(params, cap)
    vals = np.asarray(f(enum.configs), dtype=np.float64)
    if vals.shape[:1] != (enum.configs.shape[0],):
        raise ShapeError("observable must return one value per configuration")
    return enum.expect(vals)


def magnetizations(params: IsingParams, cap: int = ISING_ENUMERATION_CAP) -> np.ndarray:
    """Exact site magnetizations <sigma_i>."""
    enum = enumerate_ising(params, cap)
    return enum.expect(enum.configs.astype(np.float64))


def two_point_matrix(params: IsingParams, cap: int = ISING_ENUMERATION_CAP) -> np.ndarray:
    """Exact N x N matrix of <sigma_i sigma_j>."""
    enum = enumerate_ising(params, cap)
    s = enum.configs.astype(np.float64)
    corr = (s * enum.probs[:, None]).T @ s
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return corr


class FieldScan:
    """ln Z of one chain as a function of the field, with the pair energies enumerated once."""

    def __init__(self, params: IsingParams, cap: int = ISING_ENUMERATION_CAP):
        base = enumerate_ising(params.with_field(0.0), cap)
        self.params = params
        self.pair_energies = base.energies
        self.total_spin = base.configs.sum(axis=1, dtype=np.int64).astype(np.float64)

    def log_z(self, field: float) -> float:
        return logsumexp(-self.params.beta * (self.pair_energies - field * self.total_spin))
