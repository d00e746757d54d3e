"""Tempered population sampler with weight-proportional chain lengths.

Anneals from the prior to the posterior through stages p(x) L(x)^beta_j.
At each stage the exponent increment is chosen so the coefficient of
variation of the importance weights matches a target; instead of resampling,
every particle runs a Markov chain whose length is proportional to its
weight (largest-remainder allocation), which removes the resampling bias
and yields the model evidence as the sum of stage log-mean-weights.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from ..errors import RbcmechError

logger = logging.getLogger(__name__)


@dataclass
class BasisOptions:
    population: int = 2048
    target_cov: float = 1.0
    proposal_scale: float = 0.2      # factor on the weighted sample covariance
    adapt_acceptance: float = 0.35   # acceptance target of the scale feedback
    chain_multiplier: int = 1        # MCMC steps per recorded state
    max_stages: int = 60
    seed: int = 0


@dataclass
class PosteriorSamples:
    """Weighted-population output of one sampler run."""

    samples: np.ndarray              # (N, d)
    log_likelihood: np.ndarray       # (N,)
    log_prior: np.ndarray            # (N,)
    betas: List[float]               # strictly increasing, 0 -> 1
    log_evidence: float
    acceptance_rates: List[float] = field(default_factory=list)
    names: Optional[Sequence[str]] = None

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def _weight_cov(log_l: np.ndarray, delta: float) -> float:
    w = np.exp(delta * (log_l - log_l.max()))
    mean = w.mean()
    if mean <= 0.0:
        return np.inf
    return float(w.std() / mean)


def _choose_delta(log_l: np.ndarray, beta: float, target_cov: float) -> float:
    remaining = 1.0 - beta
    if _weight_cov(log_l, remaining) <= target_cov:
        return remaining
    lo, hi = 0.0, remaining
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _weight_cov(log_l, mid) > target_cov:
            hi = mid
        else:
            lo = mid
    return max(hi, 1e-8)


def _chain_lengths(weights: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder allocation of ``total`` steps proportional to weights."""
    raw = weights * total
    lengths = np.floor(raw).astype(np.int64)
    short = total - int(lengths.sum())
    if short > 0:
        frac = raw - lengths
        order = np.argsort(-frac, kind="stable")
        lengths[order[:short]] += 1
    return lengths


def basis(log_target: Callable[[np.ndarray], np.ndarray], prior,
          population_size: Optional[int] = None, target_cov: Optional[float] = None,
          seed: Optional[int] = None, opts: Optional[BasisOptions] = None,
          names: Optional[Sequence[str]] = None) -> PosteriorSamples:
    """Sample prior(x) * exp(log_target(x)) and estimate the log-evidence.

    ``log_target`` is the log-likelihood, vectorized over sample rows;
    ``prior`` provides sample() and log_density().  Per-chain seeded RNG
    streams make results independent of evaluation batching.
    """
    opts = opts or BasisOptions()
    if population_size is not None:
        opts = BasisOptions(**{**opts.__dict__, "population": population_size})
    if target_cov is not None:
        opts = BasisOptions(**{**opts.__dict__, "target_cov": target_cov})
    if seed is not None:
        opts = BasisOptions(**{**opts.__dict__, "seed": seed})

    n = opts.population
    root = np.random.SeedSequence(opts.seed)
    rng0 = np.random.default_rng(root.spawn(1)[0])
    x = np.atleast_2d(prior.sample(rng0, n)).astype(float)
    d = x.shape[1]
    log_l = np.asarray(log_target(x), dtype=float)
    log_p = np.asarray(prior.log_density(x), dtype=float)
    if not np.any(np.isfinite(log_l)):
        raise RbcmechError("degenerate initial stage: all log-likelihoods are -inf")

    beta = 0.0
    betas = [0.0]
    log_evidence = 0.0
    acceptance = []
    scale = opts.proposal_scale

    for stage in range(1, opts.max_stages + 1):
        finite = np.isfinite(log_l)
        if not np.any(finite):
            raise RbcmechError(f"degenerate stage {stage}: all weights zero")
        delta = _choose_delta(log_l[finite], beta, opts.target_cov)
        beta_new = min(beta + delta, 1.0)

        log_w = delta * log_l
        log_w[~finite] = -np.inf
        log_evidence += float(logsumexp(log_w) - np.log(n))
        w = np.exp(log_w - logsumexp(log_w))

        mean = (w[:, None] * x).sum(axis=0)
        centered = x - mean
        cov = (w[:, None, None] * centered[:, :, None] * centered[:, None, :]).sum(axis=0)
        cov = scale * cov
        cov[np.diag_indices_from(cov)] += 1e-12 * (1.0 + np.trace(cov) / d)
        chol = np.linalg.cholesky(cov)

        lengths = _chain_lengths(w, n)
        keep = np.nonzero(lengths > 0)[0]
        chain_rngs = {
            int(k): np.random.default_rng(np.random.SeedSequence((opts.seed, stage, int(k))))
            for k in keep
        }
        offsets = np.zeros(len(keep), dtype=np.int64)
        offsets[1:] = np.cumsum(lengths[keep])[:-1]

        new_x = np.empty((n, d))
        new_ll = np.empty(n)
        new_lp = np.empty(n)
        cur_x = x[keep].copy()
        cur_ll = log_l[keep].copy()
        cur_lp = log_p[keep].copy()
        remaining = lengths[keep].copy()
        written = np.zeros(len(keep), dtype=np.int64)
        accepted = 0
        proposed = 0

        while np.any(remaining > 0):
            active = np.nonzero(remaining > 0)[0]
            for _sub in range(opts.chain_multiplier):
                z = np.empty((active.size, d))
                u = np.empty(active.size)
                for j, a in enumerate(active):
                    rng_k = chain_rngs[int(keep[a])]
                    z[j] = rng_k.standard_normal(d)
                    u[j] = rng_k.random()
                prop = cur_x[active] + z @ chol.T
                prop_lp = np.asarray(prior.log_density(prop), dtype=float)
                prop_ll = np.full(active.size, -np.inf)
                ok = np.isfinite(prop_lp)
                if np.any(ok):
                    prop_ll[ok] = np.asarray(log_target(prop[ok]), dtype=float)
                log_alpha = (prop_lp + beta_new * prop_ll) - (
                    cur_lp[active] + beta_new * cur_ll[active])
                take = np.log(u) < log_alpha
                idx = active[take]
                cur_x[idx] = prop[take]
                cur_ll[idx] = prop_ll[take]
                cur_lp[idx] = prop_lp[take]
                accepted += int(take.sum())
                proposed += int(take.size)
            rows = offsets[active] + written[active]
            new_x[rows] = cur_x[active]
            new_ll[rows] = cur_ll[active]
            new_lp[rows] = cur_lp[active]
            written[active] += 1
            remaining[active] -= 1

        x, log_l, log_p = new_x, new_ll, new_lp
        beta = beta_new
        betas.append(beta)
        acceptance.append(accepted / max(proposed, 1))
        # feedback on the proposal scale towards the target acceptance
        scale = float(np.clip(scale * np.exp(acceptance[-1] - opts.adapt_acceptance),
                              1e-3, 1.0))
        logger.info("stage %d: beta=%.5f acc=%.2f scale=%.3f",
                    stage, beta, acceptance[-1], scale)
        if beta >= 1.0:
            break
    else:
        raise RbcmechError(f"annealing did not reach beta=1 in {opts.max_stages} stages")

    return PosteriorSamples(samples=x, log_likelihood=log_l, log_prior=log_p,
                            betas=betas, log_evidence=log_evidence,
                            acceptance_rates=acceptance, names=names)
