"""Variance-based global sensitivity: first-order and total Sobol indices.

Saltelli sampling scheme with the Saltelli-2010 first-order and Jansen
total-order estimators; used to screen inert parameters per experimental
condition before inference.
"""

from typing import Callable, Dict, Sequence, Tuple

import numpy as np

MIN_SAMPLES = 1024


def sobol_sensitivity(fn: Callable[[np.ndarray], np.ndarray],
                      bounds: Sequence[Tuple[float, float]],
                      n: int = 4096, seed: int = 0) -> dict:
    """First-order and total indices of fn over a uniform box.

    fn maps (m, d) rows to (m,) or (m, k) outputs.  Cost: (d + 2) * n
    evaluations.  Returns {"S1", "ST"} with shape (d,) or (d, k).
    """
    if n < MIN_SAMPLES:
        raise ValueError(f"n must be >= {MIN_SAMPLES}")
    bounds = np.asarray(bounds, dtype=float)
    d = bounds.shape[0]
    rng = np.random.default_rng(seed)
    lo, hi = bounds[:, 0], bounds[:, 1]
    a = rng.uniform(lo, hi, size=(n, d))
    b = rng.uniform(lo, hi, size=(n, d))

    f_a = np.atleast_2d(np.asarray(fn(a), dtype=float).reshape(n, -1))
    f_b = np.atleast_2d(np.asarray(fn(b), dtype=float).reshape(n, -1))
    var = np.var(np.vstack([f_a, f_b]), axis=0)
    var[var < 1e-300] = 1.0  # constant output: indices become ~0

    k = f_a.shape[1]
    s1 = np.empty((d, k))
    st = np.empty((d, k))
    for i in range(d):
        ab = a.copy()
        ab[:, i] = b[:, i]
        f_ab = np.asarray(fn(ab), dtype=float).reshape(n, -1)
        s1[i] = np.mean(f_b * (f_ab - f_a), axis=0) / var
        st[i] = 0.5 * np.mean((f_a - f_ab) ** 2, axis=0) / var
    if k == 1:
        s1 = s1[:, 0]
        st = st[:, 0]
    return {"S1": s1, "ST": st, "n": n}


def inert_mask(total_indices: np.ndarray, names: Sequence[str],
               threshold: float = 0.05) -> Dict[str, bool]:
    """Parameters whose total index stays below the threshold for every
    output are inert (True in the returned map)."""
    st = np.atleast_2d(np.asarray(total_indices, dtype=float).T).T
    if st.ndim == 1:
        st = st[:, None]
    return {name: bool(np.all(st[i] < threshold)) for i, name in enumerate(names)}
