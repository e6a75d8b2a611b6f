import numpy as np
import pytest

from pbnn import pendulum as pend
from pbnn.losses import PriorSpec
from pbnn.mdn import MdnArchitecture, MdnModel


@pytest.fixture(scope="session")
def short_trajectory() -> np.ndarray:
    """120 observations of the default pendulum, enough for ~96 windowed items."""
    params = pend.PendulumParams(n_steps=1190, record_every=10)
    return pend.simulate(params)


@pytest.fixture(scope="session")
def tiny_dataset(short_trajectory) -> pend.SupervisedDataset:
    return pend.build_dataset(short_trajectory)


@pytest.fixture(scope="session")
def tiny_model() -> MdnModel:
    return MdnModel(MdnArchitecture())


@pytest.fixture(scope="session")
def small_arch() -> MdnArchitecture:
    """A 3 -> 4 -> 2 net, small enough for exhaustive finite differences."""
    return MdnArchitecture(input_dim=3, hidden=(4,), output_dim=1)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def prior() -> PriorSpec:
    return PriorSpec()


class GaussianMeanModel:
    """One-parameter location model with unit noise; ignores the inputs.

    nll_i(theta) = 0.5*(y_i - theta)^2 + 0.5*log(2*pi), so together with the
    prior exp(-lam*theta^2) the posterior is the conjugate Gaussian with
    precision n + 2*lam and mean sum(y) / (n + 2*lam).
    """

    dim = 1

    def nll_items(self, theta, x, y):
        theta = float(np.asarray(theta).reshape(()))
        resid = np.asarray(y, dtype=np.float64).ravel() - theta
        return 0.5 * resid**2 + 0.5 * np.log(2.0 * np.pi)

    def grad_nll_sum(self, theta, x, y, weight=1.0):
        theta = float(np.asarray(theta).reshape(()))
        resid = theta - np.asarray(y, dtype=np.float64).ravel()
        return np.array([weight * resid.sum()])

    def forward(self, theta, x):
        theta = float(np.asarray(theta).reshape(()))
        n = len(np.atleast_2d(x))
        return np.full((n, 1), theta), np.ones((n, 1))


@pytest.fixture(scope="session")
def conjugate_data() -> pend.SupervisedDataset:
    """The fixed draw behind the frozen posterior mean/variance below."""
    rng = np.random.default_rng(12345)
    y = rng.normal(0.8, 1.0, size=16)
    return pend.SupervisedDataset(np.zeros((16, 1)), y[:, None])


# posterior of GaussianMeanModel on conjugate_data with lam = 0.05:
# precision 16 + 0.1, mean y_sum / 16.1 (y_sum = 11.31421060199861)
CONJUGATE_LAM = 0.05
CONJUGATE_POST_MEAN = 0.7027460001241372
CONJUGATE_POST_VAR = 0.06211180124223602
