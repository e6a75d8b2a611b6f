import numpy as np
import pytest

from conftest import GaussianMeanModel
from pbnn.metrics import (
    COVERAGE_TARGET,
    EvalReport,
    REPORT_COLUMNS,
    avg_nll,
    coverage_and_ace,
    coverage_from_moments,
    evaluate_split,
    mixture_avg_nll,
    mixture_moments,
    predictive_moments,
    read_report_csv,
    write_report_csv,
)
from pbnn.mdn import gaussian_loglik
from pbnn.pendulum import SupervisedDataset

# two-component hand case: N(0,1) and N(2,1) mixed evenly has mean 1 and
# variance mean(1+0, 1+4) - 1^2 = 2 (law of total variance: 1 + 1)
HAND_MUS = np.array([[0.0], [2.0]])
HAND_VARS = np.array([[1.0], [1.0]])

# frozen: -log(0.5 * (N(0|0,1) + N(0|2,1)))
HAND_NLL_AT_ZERO = 1.4851577027216454


class TestMixtureMoments:
    def test_hand_case(self):
        mu, var = mixture_moments(HAND_MUS, HAND_VARS)
        assert mu[0] == pytest.approx(1.0, rel=1e-15)
        assert var[0] == pytest.approx(2.0, rel=1e-15)

    def test_single_component_is_identity(self):
        mu, var = mixture_moments(np.array([[0.7, -1.0]]), np.array([[2.0, 0.5]]))
        np.testing.assert_allclose(mu, [0.7, -1.0])
        np.testing.assert_allclose(var, [2.0, 0.5])

    def test_cancellation_guard_keeps_variance_nonnegative(self):
        mus = np.full((3, 1), 1e8)
        var = np.full((3, 1), 1e-12)
        _, v = mixture_moments(mus, var)
        assert (v >= 0.0).all()


class TestMixtureNll:
    def test_hand_case(self):
        ll = np.stack([gaussian_loglik(0.0, 0.0, 1.0), gaussian_loglik(0.0, 2.0, 1.0)])
        assert mixture_avg_nll(ll) == pytest.approx(HAND_NLL_AT_ZERO, rel=1e-12)

    def test_shift_invariance_of_the_max_trick(self):
        rng = np.random.default_rng(0)
        ll = rng.normal(size=(5, 7))
        direct = -np.mean(np.log(np.exp(ll).mean(axis=0)))
        assert mixture_avg_nll(ll) == pytest.approx(direct, rel=1e-12)
        # extreme shifts would overflow a naive implementation
        assert np.isfinite(mixture_avg_nll(ll + 800.0))
        assert mixture_avg_nll(ll + 800.0) == pytest.approx(direct - 800.0, rel=1e-9)

    def test_requires_matrix(self):
        with pytest.raises(ValueError):
            mixture_avg_nll(np.zeros(4))


class TestModelRoutes:
    """The streaming evaluators must agree with the dense matrix routes."""

    def test_avg_nll_matches_dense_logsumexp(self, tiny_model, tiny_dataset, rng):
        samples = np.stack(
            [tiny_model.init_params(np.random.default_rng(k)) for k in range(67)]
        )
        dense = np.stack(
            [-tiny_model.nll_items(theta, tiny_dataset.x, tiny_dataset.y) for theta in samples]
        )
        assert avg_nll(tiny_model, samples, tiny_dataset) == pytest.approx(
            mixture_avg_nll(dense), rel=1e-10
        )

    def test_predictive_moments_match_stacked_forward(self, tiny_model, tiny_dataset):
        samples = np.stack(
            [tiny_model.init_params(np.random.default_rng(k)) for k in range(5)]
        )
        mus, variances = zip(
            *(tiny_model.forward(theta, tiny_dataset.x) for theta in samples)
        )
        mu_ref, var_ref = mixture_moments(np.stack(mus), np.stack(variances))
        pm = predictive_moments(tiny_model, samples, tiny_dataset.x)
        np.testing.assert_allclose(pm.mu, mu_ref, rtol=1e-12)
        np.testing.assert_allclose(pm.sigma, np.sqrt(var_ref), rtol=1e-12)

    def test_single_sample_vector_is_promoted(self, tiny_model, tiny_dataset):
        theta = tiny_model.init_params(np.random.default_rng(0))
        assert avg_nll(tiny_model, theta, tiny_dataset) == pytest.approx(
            float(np.mean(tiny_model.nll_items(theta, tiny_dataset.x, tiny_dataset.y))),
            rel=1e-12,
        )

    def test_empty_samples_rejected(self, tiny_model, tiny_dataset):
        with pytest.raises(ValueError):
            avg_nll(tiny_model, np.empty((0, tiny_model.dim)), tiny_dataset)


class TestCoverage:
    def test_hand_fraction(self):
        y = np.array([[0.0], [0.5], [2.0], [-3.0]])
        mu = np.zeros((4, 1))
        sigma = np.ones((4, 1))
        cov, ace = coverage_from_moments(y, mu, sigma)
        assert cov == pytest.approx(0.5)
        assert ace == pytest.approx(abs(COVERAGE_TARGET - 0.5))

    def test_boundary_counts_as_inside(self):
        cov, _ = coverage_from_moments(np.array([[1.0]]), np.zeros((1, 1)), np.ones((1, 1)))
        assert cov == 1.0

    def test_target_is_one_sigma_mass(self):
        assert COVERAGE_TARGET == 0.682

    def test_gaussian_mean_model_calibration(self, conjugate_data):
        # with the exact posterior-ish spread, about 68% of draws from the
        # same unit-variance model fall inside one predictive sigma
        model = GaussianMeanModel()
        samples = np.full((50, 1), conjugate_data.y.mean())
        cov, ace = coverage_and_ace(model, samples, conjugate_data)
        inside = np.abs(conjugate_data.y - conjugate_data.y.mean()) <= 1.0
        assert cov == pytest.approx(float(inside.mean()))


class TestReportCsv:
    def make_report(self, **kw):
        fields = dict(
            sampler="pbnn",
            n=60,
            m=100,
            split="test",
            avg_nll=-1.25,
            coverage=0.68,
            ace=0.002,
            acceptance_rate=0.21,
            j=1500,
            seed=0,
            config_hash="abc123",
        )
        fields.update(kw)
        return EvalReport(**fields)

    def test_round_trip_preserves_floats_exactly(self, tmp_path):
        reports = [
            self.make_report(),
            self.make_report(sampler="vanilla", avg_nll=0.1 + 0.2, seed=1),
        ]
        path = tmp_path / "report.csv"
        write_report_csv(path, reports)
        rows = read_report_csv(path)
        assert [tuple(r.keys()) for r in rows] == [REPORT_COLUMNS] * 2
        assert float(rows[1]["avg_nll"]) == 0.1 + 0.2
        assert rows[0]["sampler"] == "pbnn"
        assert int(rows[0]["N"]) == 60
        assert int(rows[0]["M"]) == 100
        assert rows[1]["config_hash"] == "abc123"

    def test_newline_discipline(self, tmp_path):
        path = tmp_path / "report.csv"
        write_report_csv(path, [self.make_report()])
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert raw.endswith(b"\n")

    def test_evaluate_split_assembles_consistent_row(self, tiny_model, tiny_dataset):
        samples = np.stack(
            [tiny_model.init_params(np.random.default_rng(k)) for k in range(3)]
        )
        rep = evaluate_split(
            tiny_model,
            samples,
            tiny_dataset,
            sampler="vanilla",
            n=60,
            m=100,
            split="train",
            acceptance_rate=0.25,
            seed=7,
        )
        assert rep.j == 3
        assert rep.avg_nll == pytest.approx(avg_nll(tiny_model, samples, tiny_dataset))
        cov, ace = coverage_and_ace(tiny_model, samples, tiny_dataset)
        assert rep.coverage == pytest.approx(cov)
        assert rep.ace == pytest.approx(ace)
