"""Design-of-experiments sampling for the surrogate sweep."""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

# Sweep bounds bracket the literature values of every parameter with margin;
# the priors of the inference module reuse them.  F_ext covers the
# optical-tweezer force range.
DESIGN_BOUNDS: Dict[str, Tuple[float, float]] = {
    "v": (0.65, 1.0),
    "mu": (0.5, 15.0),          # uN/m
    "kappa_b": (0.5, 6.0),      # 1e-19 J
    "b2": (0.0, 4.0),
    "eta_m": (0.05, 2.5),       # Pa*s*um
    "F_ext": (0.0, 200.0),      # pN
}

THETA_NAMES = ("v", "mu", "kappa_b", "b2", "eta_m")


@dataclass
class DesignMatrix:
    """Uniform i.i.d. parameter rows, plus an F_ext column when present."""

    columns: Tuple[str, ...]
    rows: np.ndarray            # (n, len(columns))
    bounds: Dict[str, Tuple[float, float]]
    seed: int

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if self.rows.size == 0:
            self.rows = self.rows.reshape(0, len(self.columns))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]


def sample_design(n: int, bounds: Dict[str, Tuple[float, float]] = None,
                  seed: int = 0, with_force: bool = True) -> DesignMatrix:
    """n uniform i.i.d. samples of (v, mu, kappa_b, b2, eta_m[, F_ext]).

    Reproducible from the seed; identical seeds give identical matrices.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    bounds = dict(DESIGN_BOUNDS if bounds is None else bounds)
    columns = THETA_NAMES + (("F_ext",) if with_force else ())
    for name in columns:
        lo, hi = bounds[name]
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError(f"invalid bounds for {name}: ({lo}, {hi})")
    rng = np.random.default_rng(seed)
    rows = np.empty((n, len(columns)))
    for j, name in enumerate(columns):
        lo, hi = bounds[name]
        rows[:, j] = rng.uniform(lo, hi, size=n)
    return DesignMatrix(columns=columns, rows=rows, bounds=bounds, seed=seed)
