"""Prior distributions used by the samplers.

A prior needs vectorized ``log_density`` over sample rows and ``sample``;
uniform boxes additionally expose their bounds (the surrogate sweep bounds
double as the parameter priors).
"""

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

# Error-scale priors are log-uniform over fixed decades in each observable's
# natural units.
SIGMA_LOG10_RANGE = (-3.0, 1.0)


@dataclass
class UniformBoxPrior:
    names: Tuple[str, ...]
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        self.low = np.asarray(self.low, dtype=float)
        self.high = np.asarray(self.high, dtype=float)
        if np.any(~np.isfinite(self.low)) or np.any(~np.isfinite(self.high)):
            raise ValueError("prior bounds must be finite")
        if np.any(self.low >= self.high):
            raise ValueError("prior bounds must satisfy low < high")
        self._log_volume = float(np.sum(np.log(self.high - self.low)))

    @property
    def dim(self) -> int:
        return self.low.size

    @classmethod
    def from_bounds(cls, bounds: Dict[str, Tuple[float, float]],
                    names: Sequence[str]) -> "UniformBoxPrior":
        lo = np.array([bounds[n][0] for n in names])
        hi = np.array([bounds[n][1] for n in names])
        return cls(names=tuple(names), low=lo, high=hi)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=(n, self.dim))

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        inside = np.all((x >= self.low) & (x <= self.high), axis=1)
        out = np.full(x.shape[0], -np.inf)
        out[inside] = -self._log_volume
        return out

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.low + self.high)


@dataclass
class GaussianPrior:
    """Independent normal components; used by the sampler's conjugate checks."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.std = np.atleast_1d(np.asarray(self.std, dtype=float))
        if np.any(self.std <= 0.0):
            raise ValueError("std must be positive")

    @property
    def dim(self) -> int:
        return self.mean.size

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mean, self.std, size=(n, self.dim))

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        z = (x - self.mean) / self.std
        return -0.5 * np.sum(z * z, axis=1) - np.sum(np.log(self.std)) \
            - 0.5 * self.dim * np.log(2.0 * np.pi)


@dataclass
class PriorSpec:
    """Parameter box prior plus the error-scale prior decades."""

    parameter_bounds: Dict[str, Tuple[float, float]]
    sigma_log10: Tuple[float, float] = SIGMA_LOG10_RANGE

    def parameter_prior(self, names: Sequence[str]) -> UniformBoxPrior:
        return UniformBoxPrior.from_bounds(self.parameter_bounds, names)
