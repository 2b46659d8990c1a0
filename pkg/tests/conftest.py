import numpy as np
import pytest

from mtvbo.gp import Dataset, GpPosterior, KernelParams


@pytest.fixture(scope="session")
def sharp_peak_gp():
    """1D surrogate with a confident bump at x = 0.7.

    Ten noiseless observations tracing a Gaussian-shaped ridge; small
    lengthscale so the posterior is certain near the data and wide open
    elsewhere.  Shared by the sampler, baseline, and acceptance tests.
    """
    x = np.linspace(0.5, 0.9, 10)[:, None]
    y = 2.0 * np.exp(-((x.ravel() - 0.7) / 0.08) ** 2)
    params = KernelParams(np.array([0.1]), 1.0, 0.0)
    return GpPosterior(Dataset(x, y, 0.0), params)


def grid_pstar_oracle(gp, n_grid=512, n_draws=4000, bins=32, seed=2):
    """Histogram of argmax locations over joint draws on a dense grid."""
    grid = np.linspace(0.0, 1.0, n_grid)[:, None]
    mean, cov = gp.posterior(grid)
    chol = np.linalg.cholesky(cov + 1e-10 * np.eye(n_grid))
    rng = np.random.default_rng(seed)
    draws = mean[:, None] + chol @ rng.standard_normal((n_grid, n_draws))
    locations = grid[np.argmax(draws, axis=0), 0]
    hist, _ = np.histogram(locations, bins=bins, range=(0.0, 1.0))
    return hist / hist.sum()


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
