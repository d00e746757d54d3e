"""Two-level hierarchical inference across heterogeneous datasets.

Stage 1 samples each dataset's posterior under flat priors (inert
parameters frozen per condition).  Stage 2 samples the population
hyper-parameters psi = (mean, std) per calibration component, using
importance-sampling estimates of p(data_i | psi) built from the stage-1
samples.  Stage 3 draws new-cell parameters ancestrally from the psi
posterior, truncated to the prior box.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp, ndtr, ndtri

from ..datasets import Dataset
from ..errors import RbcmechError
from ..surrogate import SurrogateModel
from ..surrogate.design import THETA_NAMES
from .basis import BasisOptions, PosteriorSamples, basis
from .likelihood import ConditionModel
from .priors import PriorSpec, UniformBoxPrior

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class HierarchicalOptions:
    population: int = 2048
    target_cov: float = 1.0
    chain_multiplier: int = 1
    seed: int = 0
    # population-std prior: log-uniform over [floor * range, range]
    psi_std_floor: float = 0.10
    # the guard quantile is over the psi posterior samples: the estimator of
    # p(data_i | psi) must keep this effective sample size in the posterior
    # typical set (single tail samples of a 2048-draw population are extreme
    # statistics and do not reflect the estimator quality)
    min_importance_ess: float = 50.0
    ess_quantile: float = 0.02


@dataclass
class HierarchicalResult:
    per_dataset: List[PosteriorSamples]
    models: List[ConditionModel]
    psi: PosteriorSamples
    theta_new: PosteriorSamples

    def dataset_sigma(self, index: int) -> np.ndarray:
        model = self.models[index]
        col = model.names.index("log10_sigma")
        return 10.0 ** self.per_dataset[index].samples[:, col]

    def dataset_theta(self, index: int) -> np.ndarray:
        model = self.models[index]
        return self.per_dataset[index].samples[:, : len(model.active)]


def _truncnorm_logpdf(x, mean, std, low, high):
    """Broadcasting log-density of a normal truncated to [low, high]."""
    z = (x - mean) / std
    norm = ndtr((high - mean) / std) - ndtr((low - mean) / std)
    norm = np.maximum(norm, 1e-300)
    return -0.5 * z * z - np.log(std) - 0.5 * LOG_2PI - np.log(norm)


class _PsiLikelihood:
    """log p(data_i | psi) via importance sums over stage-1 samples."""

    def __init__(self, theta_samples: List[np.ndarray],
                 active_indices: List[List[int]],
                 low: np.ndarray, high: np.ndarray):
        self.theta_samples = theta_samples
        self.active_indices = active_indices
        self.low = low
        self.high = high

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        psi = np.atleast_2d(psi)
        total = np.zeros(psi.shape[0])
        for theta, active in zip(self.theta_samples, self.active_indices):
            total += self.dataset_term(psi, theta, active)
        return total

    def dataset_term(self, psi: np.ndarray, theta: np.ndarray,
                     active: Sequence[int]) -> np.ndarray:
        log_u = self.log_weights(psi, theta, active)
        return logsumexp(log_u, axis=1) - np.log(theta.shape[0])

    def log_weights(self, psi: np.ndarray, theta: np.ndarray,
                    active: Sequence[int]) -> np.ndarray:
        """(B, K) log of prod_m p(theta_k,m | psi_b,m) over active components."""
        psi = np.atleast_2d(psi)
        b = psi.shape[0]
        k = theta.shape[0]
        out = np.zeros((b, k))
        for j, m in enumerate(active):
            mean = psi[:, 2 * m][:, None]
            std = (10.0 ** psi[:, 2 * m + 1])[:, None]
            out += _truncnorm_logpdf(theta[:, j][None, :], mean, std,
                                     self.low[m], self.high[m])
        return out


def infer_hierarchical(datasets: Sequence[Dataset],
                       surrogates: Dict[str, SurrogateModel],
                       prior: PriorSpec,
                       opts: Optional[HierarchicalOptions] = None) -> HierarchicalResult:
    """Full pipeline: per-dataset posteriors, hyper-posterior, new-cell draws.

    ``surrogates`` maps each experimental condition to its trained model.
    Raises when any stage-2 importance estimate at the sampled psi posterior
    has an effective sample size below the configured minimum.
    """
    opts = opts or HierarchicalOptions()
    theta_prior = prior.parameter_prior(THETA_NAMES)

    models: List[ConditionModel] = []
    stage1: List[PosteriorSamples] = []
    for i, ds in enumerate(datasets):
        if ds.condition not in surrogates:
            raise ValueError(f"no surrogate for condition {ds.condition!r}")
        model = ConditionModel(dataset=ds, surrogate=surrogates[ds.condition],
                               parameter_prior=theta_prior,
                               sigma_log10=prior.sigma_log10)
        box = model.sampling_prior()
        res = basis(model.log_likelihood, box,
                    opts=BasisOptions(population=opts.population,
                                      target_cov=opts.target_cov,
                                      chain_multiplier=opts.chain_multiplier,
                                      seed=_derive_seed(opts.seed, 1, i)),
                    names=model.names)
        logger.info("stage 1 dataset %d (%s): %d stages, logZ=%.2f",
                    i, ds.condition, len(res.betas) - 1, res.log_evidence)
        models.append(model)
        stage1.append(res)

    # stage 2: psi = (mean_m, log10 std_m) per component
    theta_samples = [res.samples[:, : len(m.active)]
                     for res, m in zip(stage1, models)]
    active_indices = [[THETA_NAMES.index(n) for n in m.active] for m in models]
    low, high = theta_prior.low, theta_prior.high
    span = high - low
    psi_names, psi_lo, psi_hi = [], [], []
    for m, name in enumerate(THETA_NAMES):
        psi_names += [f"mean_{name}", f"log10_std_{name}"]
        psi_lo += [low[m], np.log10(opts.psi_std_floor * span[m])]
        psi_hi += [high[m], np.log10(span[m])]
    psi_prior = UniformBoxPrior(tuple(psi_names), np.array(psi_lo), np.array(psi_hi))
    psi_loglik = _PsiLikelihood(theta_samples, active_indices, low, high)
    psi = basis(psi_loglik, psi_prior,
                opts=BasisOptions(population=opts.population,
                                  target_cov=opts.target_cov,
                                  chain_multiplier=opts.chain_multiplier,
                                  seed=_derive_seed(opts.seed, 2, 0)),
                names=psi_names)

    # importance-estimate quality at the sampled psi posterior
    min_ess = np.inf
    for i, (theta, active) in enumerate(zip(theta_samples, active_indices)):
        log_u = psi_loglik.log_weights(psi.samples, theta, active)
        log_num = 2.0 * logsumexp(log_u, axis=1)
        log_den = logsumexp(2.0 * log_u, axis=1)
        ess = float(np.quantile(np.exp(log_num - log_den), opts.ess_quantile))
        if ess < opts.min_importance_ess:
            raise RbcmechError(
                f"importance ESS {ess:.1f} < {opts.min_importance_ess} for "
                f"dataset {i}; enlarge the stage-1 populations")
        min_ess = min(min_ess, ess)
    logger.info("stage 2 done: min importance ESS %.0f", min_ess)

    # stage 3: ancestral new-cell draws, truncated to the prior box
    theta_new_samples = draw_theta_new(psi, low, high,
                                       seed=_derive_seed(opts.seed, 3, 0))
    return HierarchicalResult(per_dataset=stage1, models=models, psi=psi,
                              theta_new=theta_new_samples)


def draw_theta_new(psi: PosteriorSamples, low: np.ndarray, high: np.ndarray,
                   seed: int = 0) -> PosteriorSamples:
    """Ancestral sampling of new-cell parameters from hyper-parameter rows.

    One draw per psi sample from the product of truncated normals; the
    recorded log-likelihood is the mixture density over all psi samples
    (so ML and MAP rows coincide under the flat parameter prior).
    """
    rng = np.random.default_rng(seed)
    n = psi.n
    d = low.size
    theta_new = np.empty((n, d))
    for m in range(d):
        mean = psi.samples[:, 2 * m]
        std = 10.0 ** psi.samples[:, 2 * m + 1]
        a = ndtr((low[m] - mean) / std)
        b = ndtr((high[m] - mean) / std)
        u = rng.uniform(a, b)
        u = np.clip(u, 1e-12, 1.0 - 1e-12)
        theta_new[:, m] = mean + std * ndtri(u)
    theta_new = np.clip(theta_new, low, high)

    # density estimate at the drawn samples (mixture over psi)
    log_mix = np.zeros((n, n))
    for m in range(d):
        mean = psi.samples[:, 2 * m][None, :]
        std = (10.0 ** psi.samples[:, 2 * m + 1])[None, :]
        log_mix += _truncnorm_logpdf(theta_new[:, m][:, None], mean, std,
                                     low[m], high[m])
    new_loglik = logsumexp(log_mix, axis=1) - np.log(n)
    return PosteriorSamples(
        samples=theta_new, log_likelihood=new_loglik,
        log_prior=np.zeros(n), betas=list(psi.betas),
        log_evidence=psi.log_evidence, names=THETA_NAMES[:d],
    )


def _derive_seed(root: int, stage: int, index: int) -> int:
    ss = np.random.SeedSequence((root, stage, index))
    return int(ss.generate_state(1)[0])
