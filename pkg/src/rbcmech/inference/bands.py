"""Posterior-predictive credible bands of surrogate observables."""

from typing import Optional, Sequence

import numpy as np

from ..surrogate import SurrogateModel, surrogate_predict

DEFAULT_LEVELS = (0.5, 0.75, 0.9, 0.99)


def predictive_bands(theta_samples: np.ndarray, surrogate: SurrogateModel,
                     grid: Optional[np.ndarray] = None,
                     levels: Sequence[float] = DEFAULT_LEVELS,
                     sigma_samples: Optional[np.ndarray] = None,
                     seed: int = 0) -> dict:
    """Central credible intervals of the surrogate outputs per grid point.

    Parameter samples are pushed through the surrogate; when a grid is given
    the surrogate's last input column is swept over it (the stretching force).
    Observation noise is added per sample when ``sigma_samples`` is given.
    Returns {"grid", "levels", "median", "lo", "hi"} with lo/hi shaped
    (n_levels, n_grid, n_outputs).
    """
    levels = tuple(levels)
    if any(not 0.0 < lv < 1.0 for lv in levels):
        raise ValueError("levels must lie strictly inside (0, 1)")
    theta = np.atleast_2d(np.asarray(theta_samples, dtype=float))
    n = theta.shape[0]
    rng = np.random.default_rng(seed)
    if grid is None:
        grid_arr = np.array([np.nan])
        pred, _ = surrogate_predict(surrogate, theta, warn_extrapolation=False)
        values = pred[None, :, :]                      # (1, n, n_out)
    else:
        grid_arr = np.asarray(grid, dtype=float)
        values = []
        for g in grid_arr:
            rows = np.hstack([theta, np.full((n, 1), g)])
            pred, _ = surrogate_predict(surrogate, rows, warn_extrapolation=False)
            values.append(pred)
        values = np.array(values)                      # (n_grid, n, n_out)

    if sigma_samples is not None:
        sigma = np.asarray(sigma_samples, dtype=float).reshape(1, n, 1)
        values = values + sigma * rng.standard_normal(values.shape)

    n_out = values.shape[2]
    lo = np.empty((len(levels), grid_arr.size, n_out))
    hi = np.empty_like(lo)
    for i, lv in enumerate(levels):
        lo[i] = np.quantile(values, 0.5 * (1.0 - lv), axis=1)
        hi[i] = np.quantile(values, 0.5 * (1.0 + lv), axis=1)
    return {
        "grid": grid_arr,
        "levels": levels,
        "median": np.quantile(values, 0.5, axis=1),
        "lo": lo,
        "hi": hi,
        "output_names": list(surrogate.output_names),
    }
