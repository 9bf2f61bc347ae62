import numpy as np
import pytest
from scipy.stats import norm

from errors import ParameterError
from gmm import VARIANCE_FLOOR, GmmModel, gmm_fit, gmm_loglik, gmm_score_samples


class TestGmmFit:

    def setup_method(self):
        """Setup test fixtures."""
        self.rng = np.random.default_rng(11)

    def test_single_component_is_closed_form(self):
        X = self.rng.normal(loc=[1.0, -2.0], scale=[0.5, 2.0], size=(300, 2))
        model = gmm_fit(X, 1, 5, self.rng)
        np.testing.assert_allclose(model.weights, [1.0])
        np.testing.assert_allclose(model.means[0], X.mean(axis=0), rtol=1e-10)
        np.testing.assert_allclose(model.variances[0], X.var(axis=0), rtol=1e-8)

    def test_two_separated_clusters(self):
        X = np.vstack([
            self.rng.normal(-5.0, 0.5, size=(200, 2)),
            self.rng.normal(5.0, 0.5, size=(200, 2)),
        ])
        model = gmm_fit(X, 2, 30, self.rng)
        order = np.argsort(model.means[:, 0])
        np.testing.assert_allclose(model.means[order], [[-5.0, -5.0], [5.0, 5.0]], atol=0.2)
        np.testing.assert_allclose(model.weights[order], [0.5, 0.5], atol=1e-6)

    def test_history_is_non_decreasing(self):
        X = self.rng.normal(size=(250, 3)) * [1.0, 3.0, 0.2]
        model = gmm_fit(X, 4, 25, self.rng)
        history = np.array(model.log_likelihood_history)
        assert len(history) == 26
        tolerance = 1e-7 * np.abs(history[:-1]) + 1e-9
        assert np.all(np.diff(history) >= -tolerance)

    def test_history_is_non_decreasing_on_random_datasets(self):
        rng = np.random.default_rng(40)
        for _ in range(100):
            n, dim, k = int(rng.integers(20, 150)), int(rng.integers(1, 5)), int(rng.integers(1, 6))
            centers = rng.normal(scale=4.0, size=(int(rng.integers(1, 4)), dim))
            spread = rng.uniform(0.1, 2.0, size=dim)
            X = centers[rng.integers(len(centers), size=n)] + rng.normal(size=(n, dim)) * spread
            model = gmm_fit(X, k, int(rng.integers(1, 20)), rng)
            history = np.array(model.log_likelihood_history)
            assert np.all(np.diff(history) >= -(1e-7 * np.abs(history[:-1]) + 1e-7))

    def test_component_count_reduced_to_sample_count(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        model = gmm_fit(X, 5, 3, self.rng)
        assert model.n_components == 2

    def test_degenerate_data_collapses(self):
        X = np.full((10, 2), 2.0)
        model = gmm_fit(X, 3, 10, self.rng)
        dominant = int(np.argmax(model.weights))
        assert model.weights[dominant] > 0.99
        np.testing.assert_allclose(model.variances[dominant], [VARIANCE_FLOOR, VARIANCE_FLOOR])
        assert np.all(np.isfinite(model.log_likelihood_history))

    def test_is_seeded(self):
        X = self.rng.normal(size=(100, 2))
        first = gmm_fit(X, 3, 10, np.random.default_rng(4))
        second = gmm_fit(X, 3, 10, np.random.default_rng(4))
        np.testing.assert_array_equal(first.means, second.means)

    @pytest.mark.parametrize("X, k, iterations", [
        (np.empty((0, 2)), 2, 5),
        (np.array([[0.0, np.nan]]), 1, 5),
        (np.ones((5, 2)), 0, 5),
        (np.ones((5, 2)), 2, 0),
    ])
    def test_invalid_input(self, X, k, iterations):
        with pytest.raises(ParameterError):
            gmm_fit(X, k, iterations, self.rng)


class TestGmmLogLikelihood:

    def setup_method(self):
        """Setup test fixtures."""
        self.model = GmmModel(
            weights=np.array([0.3, 0.7]),
            means=np.array([[0.0, 1.0], [2.0, -1.0]]),
            variances=np.array([[1.0, 0.5], [0.25, 2.0]]),
        )

    def test_matches_brute_force_density(self):
        for x in ([0.0, 0.0], [1.5, -0.5], [3.0, 2.0]):
            density = sum(
                w * np.prod(norm.pdf(x, loc=mu, scale=np.sqrt(var)))
                for w, mu, var in zip(self.model.weights, self.model.means, self.model.variances)
            )
            assert gmm_loglik(self.model, x) == pytest.approx(np.log(density), abs=1e-9)

    def test_randomized_models_match_brute_force_density(self):
        rng = np.random.default_rng(41)
        for _ in range(1000):
            k, dim = int(rng.integers(1, 6)), int(rng.integers(1, 5))
            model = GmmModel(
                weights=rng.dirichlet(np.ones(k)),
                means=rng.normal(scale=3.0, size=(k, dim)),
                variances=rng.uniform(0.1, 3.0, size=(k, dim)),
            )
            component = int(rng.integers(k))
            x = model.means[component] + rng.normal(size=dim) * np.sqrt(model.variances[component])
            density = sum(
                w * np.prod(norm.pdf(x, loc=mu, scale=np.sqrt(var)))
                for w, mu, var in zip(model.weights, model.means, model.variances)
            )
            assert gmm_loglik(model, x) == pytest.approx(np.log(density), abs=1e-9)

    def test_single_component_at_its_mode(self):
        model = GmmModel(np.array([1.0]), np.array([[1.0, 2.0]]), np.array([[0.5, 4.0]]))
        expected = -0.5 * (2 * np.log(2 * np.pi) + np.log(0.5) + np.log(4.0))
        assert gmm_loglik(model, [1.0, 2.0]) == pytest.approx(expected, abs=1e-12)

    def test_far_points_stay_finite(self):
        assert np.isfinite(gmm_loglik(self.model, [1e3, -1e3]))

    def test_batch_scores(self):
        X = np.array([[0.0, 0.0], [1.5, -0.5]])
        scores = gmm_score_samples(self.model, X)
        assert scores[1] == pytest.approx(gmm_loglik(self.model, X[1]))

    def test_dimension_mismatch(self):
        with pytest.raises(ParameterError):
            gmm_loglik(self.model, [0.0, 0.0, 0.0])
