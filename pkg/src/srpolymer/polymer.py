"""Drifted random polymers on Z^2 with pair interactions between steps.

A walk is stored as a sequence of step codes 0..3 for +e1, +e2, -e1, -e2.
Its energy is

    H(S) = - sum_{i<j} V(|i-j|) <X_i, X_j> - <h, S_N>

The drift enters with a minus sign so that h favours displacement along h.
With this convention the walk measure at inverse temperature beta splits
into two Ising chains at beta/2 with fields <h, e1-e2> and <h, e1+e2>.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .couplings import CouplingSpec
from .errors import CapExceededError, ParameterError, ShapeError
from .ising import logsumexp

WALK_ENUMERATION_CAP = 10

STEP_VECTORS = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=np.int8)


def step_codes(vectors) -> np.ndarray:
    """Map unit vectors (shape (n, 2)) to step codes."""
    v = np.asarray(vectors, dtype=np.int64).reshape(-1, 2)
    if not np.all(np.abs(v).sum(axis=1) == 1):
        raise ShapeError("every step must be a unit lattice vector")
    x, y = v[:, 0], v[:, 1]
    return np.where(x == 1, 0, np.where(y == 1, 1, np.where(x == -1, 2, 3))).astype(np.int8)


@dataclass(frozen=True, eq=False)
class Walk:
    """Origin-rooted nearest-neighbour path; ``steps`` holds codes 0..3."""

    steps: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.steps)
        if s.ndim != 1 or s.size < 1:
            raise ShapeError("a walk needs a non-empty 1D array of step codes")
        if not np.all((s >= 0) & (s <= 3)):
            raise ShapeError("step codes must lie in 0..3")
        object.__setattr__(self, "steps", s.astype(np.int8))

    @classmethod
    def from_vectors(cls, vectors) -> Walk:
        return cls(step_codes(vectors))

    @property
    def n_steps(self) -> int:
        return int(self.steps.size)

    @property
    def vectors(self) -> np.ndarray:
        return STEP_VECTORS[self.steps]

    @property
    def positions(self) -> np.ndarray:
        """S_0..S_N, shape (N+1, 2), with S_0 = 0."""
        pos = np.zeros((self.n_steps + 1, 2), dtype=np.int64)
        np.cumsum(self.vectors, axis=0, out=pos[1:])
        return pos

    @property
    def endpoint(self) -> np.ndarray:
        return self.vectors.sum(axis=0, dtype=np.int64)

    def __eq__(self, other):
        return isinstance(other, Walk) and np.array_equal(self.steps, other.steps)

    def __hash__(self):
        return hash(self.steps.tobytes())


@dataclass(frozen=True)
class PolymerParams:
    n_steps: int
    beta: float
    drift: tuple[float, float]
    couplings: CouplingSpec
    table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ParameterError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ParameterError(f"beta must be > 0, got {self.beta!r}")
        h = tuple(float(x) for x in self.drift)
        if len(h) != 2 or not all(np.isfinite(h)):
            raise ParameterError(f"drift must be a finite 2-vector, got {self.drift!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "drift", h)
        tab = self.couplings.distance_table(self.n_steps)
        tab.setflags(write=False)
        object.__setattr__(self, "table", tab)


def polymer_hamiltonian(walk: Walk, params: PolymerParams) -> float:
    if walk.n_steps != params.n_steps:
        raise ShapeError(f"walk has {walk.n_steps} steps, expected {params.n_steps}")
    x = walk.vectors.astype(np.int64)
    n = params.n_steps
    energy = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            energy -= params.table[j - i] * int(x[i] @ x[j])
    end = x.sum(axis=0)
    energy -= params.drift[0] * int(end[0]) + params.drift[1] * int(end[1])
    return energy


def all_walks(n_steps: int) -> np.ndarray:
    """All 4**n step-code sequences, shape (4**n, n), base-4 lexicographic order."""
    idx = np.arange(4**n_steps, dtype=np.int64)
    shifts = 2 * np.arange(n_steps - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 3).astype(np.int8)


def walk_index(steps: np.ndarray) -> np.ndarray:
    s = np.asarray(steps, dtype=np.int64)
    n = s.shape[-1]
    return s @ (1 << (2 * np.arange(n - 1, -1, -1, dtype=np.int64)))


@dataclass(frozen=True)
class PolymerDistribution:
    params: PolymerParams
    steps: np.ndarray  # (4**N, N) step codes
    endpoints: np.ndarray  # (4**N, 2)
    energies: np.ndarray
    log_z: float

    @cached_property
    def log_probs(self) -> np.ndarray:
        return -self.params.beta * self.energies - self.log_z

    @cached_property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def expect(self, values: np.ndarray) -> float:
        # renormalise so constant observables come out exact
        return float(self.probs @ np.asarray(values, dtype=np.float64)) / float(self.probs.sum())


def enumerate_polymer(params: PolymerParams, cap: int = WALK_ENUMERATION_CAP) -> PolymerDistribution:
    n = params.n_steps
    if n > cap:
        raise CapExceededError(f"walk enumeration of {n} steps exceeds the cap of {cap} (4**{cap} walks)")
    steps = all_walks(n)
    vec = STEP_VECTORS[steps]  # (M, n, 2)
    xs = vec[..., 0].astype(np.int16)
    ys = vec[..., 1].astype(np.int16)
    energies = np.zeros(steps.shape[0], dtype=np.float64)
    for r in range(1, n):
        dots = (xs[:, :-r] * xs[:, r:]).sum(axis=1, dtype=np.int64) + (ys[:, :-r] * ys[:, r:]).sum(
            axis=1, dtype=np.int64
        )
        energies -= params.table[r] * dots
    endpoints = np.stack([xs.sum(axis=1, dtype=np.int64), ys.sum(axis=1, dtype=np.int64)], axis=1)
    energies -= params.drift[0] * endpoints[:, 0] + params.drift[1] * endpoints[:, 1]
    log_z = logsumexp(-params.beta * energies)
    return PolymerDistribution(params, steps, endpoints, energies, log_z)


def exact_msd(params: PolymerParams, cap: int = WALK_ENUMERATION_CAP) -> float:
    """Exact E||S_N||^2 (squared Euclidean end-to-end distance)."""
    dist = enumerate_polymer(params, cap)
    return dist.expect((dist.endpoints.astype(np.float64) ** 2).sum(axis=1))


def endpoint_projection_moments(
    params: PolymerParams, v: Sequence[float], cap: int = WALK_ENUMERATION_CAP
) -> tuple[float, float]:
    """Mean and variance of <S_N, v> under the polymer measure, by enumeration."""
    dist = enumerate_polymer(params, cap)
    proj = dist.endpoints @ np.asarray(v, dtype=np.float64)
    mean = dist.expect(proj)
    var = dist.expect((proj - mean) ** 2)
    return mean, var


def tilted_log_moment(params: PolymerParams, v: Sequence[float], t: float, cap: int = WALK_ENUMERATION_CAP) -> float:
    """ln E[exp(beta t <S_N, v>)] by direct walk enumeration."""
    dist = enumerate_polymer(params, cap)
    proj = dist.endpoints @ np.asarray(v, dtype=np.float64)
    return logsumexp(dist.log_probs + params.beta * t * proj)
