"""Nearest-neighbour Ising chain via 2x2 transfer matrices (free boundaries).

With T[s, s'] = exp(beta J s s' + beta k (s + s') / 2) and end vector
u[s] = exp(beta k s / 2), the partition function is u^T T^(N-1) u, which
reproduces the free-boundary enumeration exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

_SPINS = np.array([1.0, -1.0])
_FLIP = _SPINS  # diagonal of the spin operator D


@dataclass(frozen=True)
class NNChainParams:
    n_sites: int
    beta: float
    j_coupling: float
    field: float

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ParameterError(f"n_sites must be a positive integer, got {self.n_sites!r}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ParameterError(f"beta must be > 0, got {self.beta!r}")
        if not (np.isfinite(self.j_coupling) and self.j_coupling > 0):
            raise ParameterError(f"j_coupling must be > 0, got {self.j_coupling!r}")
        if not np.isfinite(self.field):
            raise ParameterError("field must be finite")
        if self.beta * self.j_coupling > 700 or abs(self.beta * self.field) > 700:
            raise ParameterError("beta*J and |beta*k| must not exceed 700")


@dataclass(frozen=True)
class NNObservables:
    magnetization: np.ndarray
    correlation: np.ndarray
    log_z: float


def _matrices(p: NNChainParams) -> tuple[np.ndarray, np.ndarray, float]:
    """Return max-shifted T, end vector u and the log of the shift applied to T."""
    bj, bk = p.beta * p.j_coupling, p.beta * p.field
    log_t = bj * np.outer(_SPINS, _SPINS) + 0.5 * bk * (_SPINS[:, None] + _SPINS[None, :])
    shift = float(log_t.max())
    t = np.exp(log_t - shift)
    log_u = 0.5 * bk * _SPINS
    u = np.exp(log_u - log_u.max())
    return t, u, shift


def _sweeps(p: NNChainParams):
    t, u, shift = _matrices(p)
    n = p.n_sites
    left = np.empty((n, 2))
    right = np.empty((n, 2))
    log_norm = 0.0
    v = u / u.sum()
    log_norm += math.log(u.sum())
    left[0] = v
    for i in range(1, n):
        v = v @ t
        s = v.sum()
        log_norm += math.log(s) + shift
        v = v / s
        left[i] = v
    log_u_shift = 0.5 * abs(p.beta * p.field)
    log_z = log_norm + math.log(float(v @ u)) + 2 * log_u_shift
    w = u / u.sum()
    right[n - 1] = w
    for i in range(n - 2, -1, -1):
        w = t @ w
        w = w / w.sum()
        right[i] = w
    return t, left, right, log_z


def nn_log_partition(p: NNChainParams) -> float:
    return _sweeps(p)[3]


def nn_magnetizations(p: NNChainParams) -> np.ndarray:
    """Site magnetizations, O(N)."""
    _, left, right, _ = _sweeps(p)
    return np.einsum("is,s,is->i", left, _FLIP, right) / np.einsum("is,is->i", left, right)


def nn_observables(p: NNChainParams) -> NNObservables:
    """Magnetizations, full pair-correlation matrix (O(N^2)) and ln Z."""
    t, left, right, log_z = _sweeps(p)
    n = p.n_sites
    mag = np.einsum("is,s,is->i", left, _FLIP, right) / np.einsum("is,is->i", left, right)
    corr = np.eye(n)
    for i in range(n - 1):
        w0 = left[i].copy()
        w1 = left[i] * _FLIP
        for j in range(i + 1, n):
            w0 = w0 @ t
            w1 = w1 @ t
            s = w0.sum()
            w0 /= s
            w1 /= s
            c = float((w1 * _FLIP) @ right[j]) / float(w0 @ right[j])
            corr[i, j] = corr[j, i] = c
    return NNObservables(mag, corr, log_z)


def limit_magnetization(beta: float, v1: float, k: float) -> float:
    """Infinite-chain magnetization sinh(bk) / sqrt(sinh(bk)^2 + exp(-4 b v1))."""
    if not beta > 0:
        raise ParameterError(f"beta must be > 0, got {beta!r}")
    if not v1 > 0:
        raise ParameterError(f"v1 must be > 0, got {v1!r}")
    x = beta * k
    if x == 0.0:
        return 0.0
    ax = abs(x)
    # log|sinh x| without overflow
    if ax < 300.0:
        log_sinh = math.log(math.sinh(ax))
    else:
        log_sinh = ax - math.log(2.0)
    ratio = math.exp(-4.0 * beta * v1 - 2.0 * log_sinh)
    return math.copysign(1.0 / math.sqrt(1.0 + ratio), x)
