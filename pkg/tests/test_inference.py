"""Likelihoods, summaries, predictive bands and the hierarchical stages."""

import numpy as np
import pytest

from rbcmech.datasets import Dataset
from rbcmech.inference.bands import predictive_bands
from rbcmech.inference.basis import PosteriorSamples
from rbcmech.inference.hierarchical import draw_theta_new
from rbcmech.inference.likelihood import ConditionModel, log_likelihood
from rbcmech.inference.priors import PriorSpec, UniformBoxPrior
from rbcmech.inference.summary import posterior_summary
from rbcmech.surrogate.design import DESIGN_BOUNDS, THETA_NAMES
from rbcmech.surrogate.mlp import SurrogateModel, surrogate_predict


def constant_surrogate(outputs, output_names, with_force=False):
    """Hand-built model predicting fixed values (last layer zeroed)."""
    names = THETA_NAMES + (("F_ext",) if with_force else ())
    n_in = len(names)
    n_out = len(outputs)
    sizes = (n_in, 32, 32, 32, n_out)
    rng = np.random.default_rng(0)
    weights = [0.01 * rng.standard_normal((sizes[k + 1], sizes[k]))
               for k in range(4)]
    biases = [np.zeros(s) for s in sizes[1:]]
    weights[-1][:] = 0.0
    low = np.array([DESIGN_BOUNDS[n][0] for n in names])
    high = np.array([DESIGN_BOUNDS[n][1] for n in names])
    return SurrogateModel(
        input_names=names, output_names=tuple(output_names), layer_sizes=sizes,
        weights=weights, biases=biases,
        x_mean=0.5 * (low + high), x_std=0.5 * (high - low),
        y_mean=np.asarray(outputs, dtype=float), y_std=np.ones(n_out),
        log_output=np.zeros(n_out, dtype=bool),
        input_low=low, input_high=high,
    )


def theta_prior():
    return UniformBoxPrior.from_bounds(DESIGN_BOUNDS, THETA_NAMES)


THETA_MID = theta_prior().midpoint()


class TestLogLikelihood:
    def test_zero_residuals_gaussian_constant(self):
        sur = constant_surrogate([7.8, 0.8, 2.6], ("D_um", "h_min_um", "h_max_um"))
        ds = Dataset("equilibrium",
                     {"quantity": np.array(["D", "h_min", "h_max"]),
                      "value_um": np.array([7.8, 0.8, 2.6]),
                      "std_um": np.array([0.6, 0.3, 0.3])}, "synthetic", {})
        ll = log_likelihood(THETA_MID, sigma=1.0, dataset=ds, surrogate=sur,
                            parameter_prior=theta_prior())
        assert ll == pytest.approx(-1.5 * np.log(2 * np.pi), rel=1e-12)

    def test_large_sigma_flatness(self):
        sur = constant_surrogate([7.8, 0.8, 2.6], ("D_um", "h_min_um", "h_max_um"))
        ds = Dataset("equilibrium",
                     {"quantity": np.array(["D", "h_min", "h_max"]),
                      "value_um": np.array([7.0, 1.0, 2.0]),
                      "std_um": np.array([0.6, 0.3, 0.3])}, "synthetic", {})
        lls = []
        for sigma in (1e3, 1e4):
            lls.append(log_likelihood(THETA_MID, sigma, ds, sur, theta_prior()))
        # log L -> -n log sigma + const
        assert lls[0] - lls[1] == pytest.approx(3 * np.log(1e4 / 1e3), rel=1e-6)

    def test_batch_matches_single_rows(self):
        sur = constant_surrogate([10.0, 6.0], ("D_ax_um", "D_tr_um"),
                                 with_force=True)
        ds = Dataset("stretching",
                     {"F_ext_pN": np.array([0.0, 50.0, 100.0]),
                      "D_ax_um": np.array([7.8, 10.5, 12.5]),
                      "D_tr_um": np.array([7.8, 6.2, 5.6])}, "synthetic", {})
        model = ConditionModel(dataset=ds, surrogate=sur,
                               parameter_prior=theta_prior())
        rng = np.random.default_rng(1)
        box = model.sampling_prior()
        x = box.sample(rng, 8)
        batch = model.log_likelihood(x)
        singles = np.array([model.log_likelihood(x[i][None, :])[0]
                            for i in range(8)])
        np.testing.assert_allclose(batch, singles, rtol=1e-12)

    def test_relaxation_needs_nuisance(self):
        sur = constant_surrogate([150.0], ("t_c_ms",))
        ds = Dataset("relaxation",
                     {"t_ms": np.linspace(0, 400, 9),
                      "z": 1 + 0.5 * np.exp(-np.linspace(0, 400, 9) / 150.0)},
                     "synthetic", {})
        with pytest.raises(ValueError):
            log_likelihood(THETA_MID, 0.1, ds, sur, theta_prior())
        ll = log_likelihood(THETA_MID, 0.1, ds, sur, theta_prior(),
                            nuisance=(1.5, 1.0))
        assert np.isfinite(ll)

    def test_relaxation_decay_constraint(self):
        sur = constant_surrogate([150.0], ("t_c_ms",))
        t = np.linspace(0, 400, 9)
        ds = Dataset("relaxation", {"t_ms": t, "z": 1 + 0.5 * np.exp(-t / 150)},
                     "synthetic", {})
        ll = log_likelihood(THETA_MID, 0.1, ds, sur, theta_prior(),
                            nuisance=(1.0, 1.2))  # z0 < z_inf is impossible
        assert ll == -np.inf

    def test_condition_masks_match_qualitative_table(self):
        sur_eq = constant_surrogate([7.8, 0.8, 2.6],
                                    ("D_um", "h_min_um", "h_max_um"))
        ds = Dataset("equilibrium",
                     {"quantity": np.array(["D", "h_min", "h_max"]),
                      "value_um": np.array([7.8, 0.8, 2.6]),
                      "std_um": np.array([0.6, 0.3, 0.3])}, "synthetic", {})
        model = ConditionModel(dataset=ds, surrogate=sur_eq,
                               parameter_prior=theta_prior())
        assert model.active == ("v", "mu", "kappa_b")
        assert "eta_m" not in model.names
        # frozen parameters sit at the prior midpoint
        theta = model.expand_theta(model.sampling_prior().midpoint()[None, :])
        j = THETA_NAMES.index("eta_m")
        assert theta[0, j] == pytest.approx(THETA_MID[j])


class TestPosteriorSummary:
    def test_point_mass(self):
        c = np.array([1.0, 2.0, 3.0])
        s = PosteriorSamples(samples=np.tile(c, (50, 1)),
                             log_likelihood=np.zeros(50),
                             log_prior=np.zeros(50), betas=[0, 1],
                             log_evidence=0.0, names=list("abc"))
        out = posterior_summary(s)
        np.testing.assert_allclose(out.mean, c)
        np.testing.assert_allclose(out.median, c)
        np.testing.assert_allclose(out.ml, c)
        np.testing.assert_allclose(out.map, c)
        np.testing.assert_allclose(out.std, 0.0)

    def test_flat_prior_ml_equals_map(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((500, 2))
        ll = -0.5 * (x**2).sum(axis=1)
        s = PosteriorSamples(samples=x, log_likelihood=ll,
                             log_prior=np.zeros(500), betas=[0, 1],
                             log_evidence=0.0)
        out = posterior_summary(s)
        np.testing.assert_array_equal(out.ml, out.map)

    def test_standard_normal_moments(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((100_000, 1))
        s = PosteriorSamples(samples=x, log_likelihood=np.zeros(100_000),
                             log_prior=np.zeros(100_000), betas=[0, 1],
                             log_evidence=0.0)
        out = posterior_summary(s)
        assert out.mean[0] == pytest.approx(0.0, abs=0.01)
        assert out.std[0] == pytest.approx(1.0, abs=0.01)

    def test_median_within_range(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(3.0, 9.0, size=(200, 1))
        s = PosteriorSamples(samples=x, log_likelihood=np.zeros(200),
                             log_prior=np.zeros(200), betas=[0, 1],
                             log_evidence=0.0)
        out = posterior_summary(s)
        assert 3.0 <= out.median[0] <= 9.0

    def test_empty_rejected(self):
        s = PosteriorSamples(samples=np.empty((0, 1)),
                             log_likelihood=np.empty(0),
                             log_prior=np.empty(0), betas=[0, 1],
                             log_evidence=0.0)
        with pytest.raises(ValueError):
            posterior_summary(s)


class TestPredictiveBands:
    def test_point_mass_zero_noise_collapses(self):
        sur = constant_surrogate([10.0, 6.0], ("D_ax_um", "D_tr_um"),
                                 with_force=True)
        theta = np.tile(THETA_MID, (100, 1))
        bands = predictive_bands(theta, sur, grid=np.array([0.0, 100.0]),
                                 levels=(0.5, 0.9))
        np.testing.assert_allclose(bands["lo"], bands["hi"], atol=1e-12)
        np.testing.assert_allclose(bands["median"][:, 0], 10.0, atol=1e-9)

    def test_nested_levels(self):
        sur = constant_surrogate([10.0, 6.0], ("D_ax_um", "D_tr_um"),
                                 with_force=True)
        rng = np.random.default_rng(3)
        theta = theta_prior().sample(rng, 400)
        sigma = np.full(400, 0.5)
        bands = predictive_bands(theta, sur, grid=np.linspace(0, 190, 5),
                                 levels=(0.5, 0.75, 0.9, 0.99),
                                 sigma_samples=sigma, seed=1)
        for i in range(3):
            assert np.all(bands["lo"][i + 1] <= bands["lo"][i] + 1e-12)
            assert np.all(bands["hi"][i + 1] >= bands["hi"][i] - 1e-12)

    def test_invalid_levels(self):
        sur = constant_surrogate([1.0], ("t_c_ms",))
        with pytest.raises(ValueError):
            predictive_bands(THETA_MID[None, :], sur, levels=(0.5, 1.0))


class TestHierarchyPieces:
    def test_point_mass_psi_collapse(self):
        # psi forced to a point mass: the new-cell draws follow exactly the
        # population law p(theta | psi*)
        prior = theta_prior()
        low, high = prior.low, prior.high
        mean_star = THETA_MID.copy()
        std_star = 0.05 * (high - low)
        psi_row = np.empty(2 * len(THETA_NAMES))
        psi_row[0::2] = mean_star
        psi_row[1::2] = np.log10(std_star)
        psi = PosteriorSamples(samples=np.tile(psi_row, (4000, 1)),
                               log_likelihood=np.zeros(4000),
                               log_prior=np.zeros(4000), betas=[0, 1],
                               log_evidence=0.0)
        new = draw_theta_new(psi, low, high, seed=3)
        # interior components: truncation negligible, moments match
        for m in range(len(THETA_NAMES)):
            assert new.samples[:, m].mean() == pytest.approx(
                mean_star[m], abs=4 * std_star[m] / np.sqrt(4000) + 1e-3)
            assert new.samples[:, m].std() == pytest.approx(
                std_star[m], rel=0.08)
        out = posterior_summary(new)
        np.testing.assert_array_equal(out.ml, out.map)

    def test_draws_respect_bounds(self):
        prior = theta_prior()
        low, high = prior.low, prior.high
        psi_row = np.empty(2 * len(THETA_NAMES))
        psi_row[0::2] = low  # means pinned at the lower bounds
        psi_row[1::2] = np.log10(0.5 * (high - low))
        psi = PosteriorSamples(samples=np.tile(psi_row, (500, 1)),
                               log_likelihood=np.zeros(500),
                               log_prior=np.zeros(500), betas=[0, 1],
                               log_evidence=0.0)
        new = draw_theta_new(psi, low, high, seed=1)
        assert np.all(new.samples >= low) and np.all(new.samples <= high)


class TestPriors:
    def test_uniform_box_density_and_bounds(self):
        box = UniformBoxPrior(("a", "b"), np.array([0.0, 1.0]),
                              np.array([2.0, 3.0]))
        assert box.log_density(np.array([[1.0, 2.0]]))[0] == pytest.approx(
            -np.log(4.0))
        assert box.log_density(np.array([[3.0, 2.0]]))[0] == -np.inf

    def test_prior_spec_midpoint(self):
        spec = PriorSpec(parameter_bounds=dict(DESIGN_BOUNDS))
        box = spec.parameter_prior(THETA_NAMES)
        assert box.midpoint() == pytest.approx(0.5 * (box.low + box.high))

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            UniformBoxPrior(("a",), np.array([1.0]), np.array([1.0]))
