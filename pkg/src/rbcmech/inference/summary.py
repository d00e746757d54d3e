"""Posterior summary statistics."""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .basis import PosteriorSamples


@dataclass
class SummaryStats:
    """Per-component posterior statistics.

    ML is the sample with the highest log-likelihood; MAP the sample with
    the highest log-likelihood + log-prior (they coincide under flat
    priors).  Both are taken at recorded sample rows, not re-optimized.
    """

    names: Sequence[str]
    mean: np.ndarray
    median: np.ndarray
    ml: np.ndarray
    map: np.ndarray
    std: np.ndarray

    def rows(self):
        for j, name in enumerate(self.names):
            yield {
                "parameter": name,
                "mean": float(self.mean[j]),
                "median": float(self.median[j]),
                "ML": float(self.ml[j]),
                "MAP": float(self.map[j]),
                "std": float(self.std[j]),
            }


def posterior_summary(samples: PosteriorSamples,
                      names: Optional[Sequence[str]] = None) -> SummaryStats:
    if samples.n == 0:
        raise ValueError("empty sample set")
    x = samples.samples
    ml_row = int(np.argmax(samples.log_likelihood))
    map_row = int(np.argmax(samples.log_likelihood + samples.log_prior))
    if names is None:
        names = list(samples.names) if samples.names is not None else [
            f"x{j}" for j in range(samples.dim)]
    return SummaryStats(
        names=names,
        mean=x.mean(axis=0),
        median=np.median(x, axis=0),
        ml=x[ml_row].copy(),
        map=x[map_row].copy(),
        std=x.std(axis=0),
    )
