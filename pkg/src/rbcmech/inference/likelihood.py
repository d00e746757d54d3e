"""Dataset likelihoods over surrogate outputs.

Each experimental condition assumes the measurements are normally
distributed around the surrogate prediction with one error scale sigma per
condition; the relaxation condition models the measured diameter-ratio
series as an exponential decay whose rate comes from the surrogate, with
the initial and asymptotic ratios as per-dataset nuisance parameters.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..datasets import Dataset
from ..surrogate import SurrogateModel, surrogate_predict
from ..surrogate.design import THETA_NAMES
from .priors import SIGMA_LOG10_RANGE, UniformBoxPrior

LOG_2PI = np.log(2.0 * np.pi)

# Qualitative sensitivity of each condition: parameters outside the mask are
# inert for that experiment and frozen at their prior midpoint in stage 1.
DEFAULT_ACTIVE = {
    "equilibrium": ("v", "mu", "kappa_b"),
    "stretching": ("v", "mu", "kappa_b", "b2"),
    "relaxation": ("mu", "eta_m"),
}

# Nuisance bounds of the relaxation decay: initial and asymptotic ratio.
Z0_BOUNDS = (1.0, 3.0)
ZINF_BOUNDS = (1.0, 1.5)


def gaussian_loglik(residuals: np.ndarray, sigma) -> np.ndarray:
    """Independent Gaussian log-density summed over the last axis."""
    sigma = np.asarray(sigma, dtype=float)
    n = residuals.shape[-1]
    z2 = np.sum((residuals / sigma[..., None]) ** 2, axis=-1)
    return -0.5 * z2 - n * np.log(sigma) - 0.5 * n * LOG_2PI


@dataclass
class ConditionModel:
    """Stage-1 sampling space of one dataset: active parameters, log10 of
    the error scale, and (for relaxation) the decay nuisances."""

    dataset: Dataset
    surrogate: SurrogateModel
    parameter_prior: UniformBoxPrior          # over the full theta vector
    active: Tuple[str, ...] = ()
    sigma_log10: Tuple[float, float] = SIGMA_LOG10_RANGE
    _frozen: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.active:
            self.active = DEFAULT_ACTIVE[self.dataset.condition]
        missing = set(self.active) - set(THETA_NAMES)
        if missing:
            raise ValueError(f"unknown parameters in mask: {missing}")
        self._frozen = self.parameter_prior.midpoint()
        self._active_idx = [THETA_NAMES.index(n) for n in self.active]
        self._mu_idx = THETA_NAMES.index("mu")

    @property
    def names(self) -> Tuple[str, ...]:
        extra = ("log10_sigma",)
        if self.dataset.condition == "relaxation":
            extra = ("log10_sigma", "z0", "z_inf")
        return tuple(self.active) + extra

    @property
    def dim(self) -> int:
        return len(self.names)

    def sampling_prior(self) -> UniformBoxPrior:
        lo = [self.parameter_prior.low[i] for i in self._active_idx]
        hi = [self.parameter_prior.high[i] for i in self._active_idx]
        lo.append(self.sigma_log10[0])
        hi.append(self.sigma_log10[1])
        if self.dataset.condition == "relaxation":
            lo.extend([Z0_BOUNDS[0], ZINF_BOUNDS[0]])
            hi.extend([Z0_BOUNDS[1], ZINF_BOUNDS[1]])
        return UniformBoxPrior(self.names, np.array(lo), np.array(hi))

    def expand_theta(self, x: np.ndarray) -> np.ndarray:
        """Full (n, 5) parameter rows with inert components at the midpoint."""
        x = np.atleast_2d(x)
        theta = np.tile(self._frozen, (x.shape[0], 1))
        for j, idx in enumerate(self._active_idx):
            theta[:, idx] = x[:, j]
        return theta

    def theta_samples(self, x: np.ndarray) -> np.ndarray:
        """Active-parameter columns of stage-1 samples."""
        return np.atleast_2d(x)[:, : len(self.active)]

    def log_likelihood(self, x: np.ndarray) -> np.ndarray:
        """Vectorized over sampling-space rows."""
        x = np.atleast_2d(x)
        theta = self.expand_theta(x)
        sigma = 10.0 ** x[:, len(self.active)]
        cond = self.dataset.condition
        if cond == "equilibrium":
            y = self.dataset.values["value_um"]        # (3,)
            pred, extrapolated = self._predict_eq(theta)
            ll = gaussian_loglik(pred - y, sigma)
        elif cond == "stretching":
            forces = self.dataset.values["F_ext_pN"]
            y = np.column_stack([self.dataset.values["D_ax_um"],
                                 self.dataset.values["D_tr_um"]])
            pred, extrapolated = self._predict_stretch(theta, forces)
            resid = (pred - y[None, :, :]).reshape(theta.shape[0], -1)
            ll = gaussian_loglik(resid, sigma)
        elif cond == "relaxation":
            t = self.dataset.values["t_ms"]
            y = self.dataset.values["z"]
            z0 = x[:, len(self.active) + 1]
            z_inf = x[:, len(self.active) + 2]
            bad = z0 <= z_inf
            t_c, extrapolated = self._predict_tc(theta)
            model = z_inf[:, None] + (z0 - z_inf)[:, None] * np.exp(
                -t[None, :] / t_c[:, None])
            ll = gaussian_loglik(model - y[None, :], sigma)
            ll[bad] = -np.inf
        else:
            raise ValueError(f"unknown condition {cond}")
        ll[extrapolated] = -np.inf
        return ll

    # surrogate plumbing ---------------------------------------------------
    def _theta_inputs(self, theta: np.ndarray) -> np.ndarray:
        cols = [theta[:, THETA_NAMES.index(n)] for n in THETA_NAMES]
        return np.column_stack(cols)

    def _predict_eq(self, theta):
        pred, flag = surrogate_predict(self.surrogate, self._theta_inputs(theta),
                                       warn_extrapolation=False)
        return pred, flag

    def _predict_stretch(self, theta, forces):
        n, m = theta.shape[0], forces.size
        base = self._theta_inputs(theta)
        rows = np.repeat(base, m, axis=0)
        f_col = np.tile(forces, n)[:, None]
        pred, flag = surrogate_predict(self.surrogate, np.hstack([rows, f_col]),
                                       warn_extrapolation=False)
        return pred.reshape(n, m, -1), flag.reshape(n, m).any(axis=1)

    def _predict_tc(self, theta):
        pred, flag = surrogate_predict(self.surrogate, self._theta_inputs(theta),
                                       warn_extrapolation=False)
        return pred[:, 0], flag


def log_likelihood(theta, sigma, dataset: Dataset, surrogate: SurrogateModel,
                   parameter_prior: UniformBoxPrior,
                   nuisance: Optional[Sequence[float]] = None) -> float:
    """Log-density of one full parameter vector against one dataset.

    Relaxation datasets need ``nuisance`` = (z0, z_inf).  Extrapolation
    beyond the surrogate domain yields -inf (hard truncation).
    """
    theta = np.asarray(theta, dtype=float)
    model = ConditionModel(dataset=dataset, surrogate=surrogate,
                           parameter_prior=parameter_prior,
                           active=tuple(THETA_NAMES))
    parts = list(theta) + [np.log10(sigma)]
    if dataset.condition == "relaxation":
        if nuisance is None:
            raise ValueError("relaxation likelihood needs nuisance (z0, z_inf)")
        parts.extend([nuisance[0], nuisance[1]])
    return float(model.log_likelihood(np.array(parts)[None, :])[0])
