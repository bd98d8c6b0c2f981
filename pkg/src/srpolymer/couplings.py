"""Translation-invariant pair couplings V(r) for chains of length N."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class CouplingSpec:
    """Coupling function V(r), r = |i - j| >= 1.

    ``kind`` is ``"power-law"`` (V(r) = r**-alpha) or ``"explicit-table"``
    (V(r) read from ``table``, zero outside its support). ``max_distance``
    zeroes every coupling beyond the cutoff; ``None`` means no cutoff.
    """

    kind: str = "power-law"
    alpha: float | None = None
    table: Mapping[int, float] = field(default_factory=dict)
    max_distance: int | None = None

    def __post_init__(self):
        if self.kind == "power-law":
            if self.alpha is None or not np.isfinite(self.alpha) or self.alpha <= 0:
                raise ParameterError(f"power-law couplings need alpha > 0, got {self.alpha!r}")
        elif self.kind == "explicit-table":
            for r, v in self.table.items():
                if int(r) != r or r < 1:
                    raise ParameterError(f"coupling table keys must be integers >= 1, got {r!r}")
                if not np.isfinite(v):
                    raise ParameterError(f"coupling V({r}) is not finite")
            # freeze a plain dict with int keys so the spec stays hashable-ish and predictable
            object.__setattr__(self, "table", {int(r): float(v) for r, v in sorted(self.table.items())})
        else:
            raise ParameterError(f"unknown coupling kind {self.kind!r}")
        if self.max_distance is not None and self.max_distance < 1:
            raise ParameterError("max_distance must be >= 1")

    def __hash__(self):
        return hash((self.kind, self.alpha, tuple(self.table.items()), self.max_distance))

    @classmethod
    def power_law(cls, alpha: float) -> CouplingSpec:
        return cls(kind="power-law", alpha=float(alpha))

    @classmethod
    def nearest_neighbor(cls, j: float = 1.0) -> CouplingSpec:
        return cls(kind="explicit-table", table={1: float(j)})

    @classmethod
    def from_table(cls, table: Mapping[int, float]) -> CouplingSpec:
        return cls(kind="explicit-table", table=table)

    def value(self, r: int) -> float:
        if r < 1:
            raise ParameterError(f"coupling distance must be >= 1, got {r}")
        if self.max_distance is not None and r > self.max_distance:
            return 0.0
        if self.kind == "power-law":
            return float(r) ** (-self.alpha)
        return self.table.get(int(r), 0.0)

    def distance_table(self, n_sites: int) -> np.ndarray:
        """Couplings indexed by distance: ``out[r] = V(r)`` for 1 <= r < n_sites, ``out[0] = 0``."""
        out = np.zeros(max(n_sites, 1), dtype=np.float64)
        for r in range(1, n_sites):
            out[r] = self.value(r)
        return out

    @property
    def summable(self) -> bool:
        if self.max_distance is not None:
            return True
        if self.kind == "power-law":
            return self.alpha > 1.0
        return True  # finite support

    @property
    def is_nearest_neighbor(self) -> bool:
        if self.kind == "power-law":
            return self.max_distance == 1
        return set(r for r, v in self.table.items() if v != 0.0) <= {1}

    def require_positive(self, n_sites: int) -> None:
        """Raise unless V(r) > 0 for every distance present in a chain of ``n_sites``."""
        tab = self.distance_table(n_sites)[1:]
        if np.any(tab <= 0.0):
            bad = int(np.argmax(tab <= 0.0)) + 1
            raise ParameterError(f"operation requires positive couplings, but V({bad}) = {tab[bad - 1]}")

    def describe(self) -> str:
        if self.kind == "power-law":
            s = f"power-law(alpha={self.alpha!r})"
        else:
            s = "table(" + ", ".join(f"{r}:{v!r}" for r, v in self.table.items()) + ")"
        if self.max_distance is not None:
            s += f"[r<={self.max_distance}]"
        return s
