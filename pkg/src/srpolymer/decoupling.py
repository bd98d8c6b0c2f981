"""Exact correspondence between planar walks and pairs of Ising chains.

Each step X is projected onto e1 - e2 and e1 + e2:

    sigma = <X, e1 - e2>,  sigma_tilde = <X, e1 + e2>

which is a bijection from the four unit steps onto {-1, +1}^2. Under it the
polymer measure at (beta, h) is the product of two free-boundary chains at
inverse temperature beta/2, with fields h1 = <h, e1 - e2> and
h2 = <h, e1 + e2>, and ||S_N||^2 = (M1^2 + M2^2) / 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .errors import ShapeError
from .ising import IsingParams, as_spins, config_index, enumerate_ising
from .polymer import (
    STEP_VECTORS,
    WALK_ENUMERATION_CAP,
    PolymerParams,
    Walk,
    enumerate_polymer,
    step_codes,
)
from .seeding import child_seed

# sigma and sigma_tilde of each step code (+e1, +e2, -e1, -e2)
_SIGMA = (STEP_VECTORS[:, 0] - STEP_VECTORS[:, 1]).astype(np.int8)
_SIGMA_TILDE = (STEP_VECTORS[:, 0] + STEP_VECTORS[:, 1]).astype(np.int8)


@dataclass(frozen=True, eq=False)
class SpinPair:
    sigma: np.ndarray
    sigma_tilde: np.ndarray

    def __post_init__(self):
        s = as_spins(self.sigma)
        t = as_spins(self.sigma_tilde)
        if s.size != t.size:
            raise ShapeError(f"spin chains differ in length: {s.size} vs {t.size}")
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "sigma_tilde", t)

    def __eq__(self, other):
        return (
            isinstance(other, SpinPair)
            and np.array_equal(self.sigma, other.sigma)
            and np.array_equal(self.sigma_tilde, other.sigma_tilde)
        )


@dataclass(frozen=True)
class FieldPair:
    h1: float
    h2: float


def steps_to_spins(steps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised projection of step codes of any shape."""
    s = np.asarray(steps)
    return _SIGMA[s], _SIGMA_TILDE[s]


def spins_to_steps(sigma: np.ndarray, sigma_tilde: np.ndarray) -> np.ndarray:
    """Inverse of :func:`steps_to_spins`: X = ((s + t)/2, (t - s)/2)."""
    s = np.asarray(sigma, dtype=np.int64)
    t = np.asarray(sigma_tilde, dtype=np.int64)
    x = (s + t) // 2
    y = (t - s) // 2
    return np.where(x == 1, 0, np.where(y == 1, 1, np.where(x == -1, 2, 3))).astype(np.int8)


def walk_to_spins(walk: Walk) -> SpinPair:
    return SpinPair(*steps_to_spins(walk.steps))


def spins_to_walk(pair: SpinPair) -> Walk:
    return Walk(spins_to_steps(pair.sigma, pair.sigma_tilde))


def drift_to_fields(h) -> FieldPair:
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (2,):
        raise ShapeError(f"drift must be a 2-vector, got shape {h.shape}")
    return FieldPair(float(h[0] - h[1]), float(h[0] + h[1]))


def chain_params(params: PolymerParams) -> tuple[IsingParams, IsingParams]:
    """The two Ising chains (beta/2, h1) and (beta/2, h2) of a polymer model."""
    f = drift_to_fields(params.drift)
    half = 0.5 * params.beta
    return (
        IsingParams(params.n_steps, half, f.h1, params.couplings),
        IsingParams(params.n_steps, half, f.h2, params.couplings),
    )


def measure_factorization_check(params: PolymerParams, cap: int = WALK_ENUMERATION_CAP) -> float:
    """Max over all walks of |P_polymer(S) - P_chain1(sigma) P_chain2(sigma_tilde)|."""
    dist = enumerate_polymer(params, cap)
    c1, c2 = chain_params(params)
    e1, e2 = enumerate_ising(c1), enumerate_ising(c2)
    sig, sigt = steps_to_spins(dist.steps)
    product = e1.probs[config_index(sig)] * e2.probs[config_index(sigt)]
    return float(np.max(np.abs(dist.probs - product)))


def msd_from_correlations(corr1, corr2) -> float:
    """E||S_N||^2 as half the total sum of both chains' two-point matrices."""
    a = np.asarray(corr1, dtype=np.float64)
    b = np.asarray(corr2, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise ShapeError(f"need two equal square matrices, got {a.shape} and {b.shape}")
    return 0.5 * (float(a.sum()) + float(b.sum()))


class ChainSampler(Protocol):
    def __call__(self, params: IsingParams, n_samples: int, seed: int) -> np.ndarray: ...


def exact_sampler(params: IsingParams, n_samples: int, seed: int) -> np.ndarray:
    """Independent exact draws from the enumerated chain distribution."""
    enum = enumerate_ising(params)
    rng = np.random.default_rng(seed)
    idx = rng.choice(enum.configs.shape[0], size=n_samples, p=enum.probs)
    return enum.configs[idx]


def sample_polymer(
    params: PolymerParams,
    n_samples: int,
    seed: int,
    sampler: ChainSampler | Callable[[IsingParams, int, int], np.ndarray] = exact_sampler,
) -> np.ndarray:
    """Draw walks by pairing two independently sampled chains.

    Returns an (n_samples, N) array of step codes. Each chain gets its own
    stream derived from ``seed``.
    """
    c1, c2 = chain_params(params)
    s1 = np.asarray(sampler(c1, n_samples, child_seed(seed, "chain", 1)))
    s2 = np.asarray(sampler(c2, n_samples, child_seed(seed, "chain", 2)))
    if s1.shape != (n_samples, params.n_steps) or s2.shape != s1.shape:
        raise ShapeError(f"sampler returned shapes {s1.shape}, {s2.shape}")
    return spins_to_steps(s1, s2)


def endpoints_from_steps(steps: np.ndarray) -> np.ndarray:
    return STEP_VECTORS[np.asarray(steps)].sum(axis=-2, dtype=np.int64)


__all__ = [
    "FieldPair",
    "SpinPair",
    "chain_params",
    "drift_to_fields",
    "endpoints_from_steps",
    "exact_sampler",
    "measure_factorization_check",
    "msd_from_correlations",
    "sample_polymer",
    "spins_to_steps",
    "spins_to_walk",
    "step_codes",
    "steps_to_spins",
    "walk_to_spins",
]
