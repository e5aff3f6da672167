import numpy as np
import pytest

from ecgbo import gp
from ecgbo.errors import ConfigError, NumericalError


def _kernel(rng, d):
    return gp.KernelParams(float(rng.uniform(0.5, 2.0)),
                           tuple(rng.uniform(0.2, 0.8, d)), float(rng.uniform(1e-6, 1e-3)))


def _dense_oracle(X, y, kernel, xs):
    """Posterior and LML via an explicit inverse, with scalar-loop kernel entries."""
    def k(a, b):
        r = np.sqrt(np.sum(((a - b) / np.array(kernel.lengthscales)) ** 2))
        return kernel.signal_variance * (1 + np.sqrt(5) * r + 5 * r * r / 3) * np.exp(-np.sqrt(5) * r)

    mean, scale = y.mean(), y.std()
    ys = (y - mean) / scale
    K = np.array([[k(a, b) for b in X] for a in X]) + kernel.noise_variance * np.eye(len(X))
    Kinv = np.linalg.inv(K)
    Ks = np.array([[k(a, b) for b in X] for a in xs])
    mu = mean + scale * Ks @ Kinv @ ys
    var = scale ** 2 * (kernel.signal_variance - np.einsum("ij,jk,ik->i", Ks, Kinv, Ks))
    _, logdet = np.linalg.slogdet(K)
    lml = -0.5 * ys @ Kinv @ ys - 0.5 * logdet - 0.5 * len(y) * np.log(2 * np.pi)
    return mu, var, lml


@pytest.mark.parametrize("n", [3, 6, 10, 50])
def test_matches_dense_inverse(n):
    rng = np.random.default_rng(n)
    X = rng.random((n, 5))
    y = np.sin(3 * X).sum(1)
    kern = _kernel(rng, 5)
    model = gp.fit(X, y, kernel=kern)
    xs = rng.random((5, 5))
    mu, var = model.posterior(xs)
    o_mu, o_var, o_lml = _dense_oracle(X, y, kern, xs)
    np.testing.assert_allclose(mu, o_mu, atol=1e-8)
    np.testing.assert_allclose(var, o_var, atol=1e-8)
    assert model.log_marginal_likelihood() == pytest.approx(o_lml, abs=1e-8)


def test_kernel_matrix_properties():
    rng = np.random.default_rng(0)
    kern = gp.KernelParams(1.7, (0.3, 0.6), 1e-6)
    X = rng.random((3, 2))
    K = gp.kernel_matrix(X, X, kern)
    np.testing.assert_allclose(np.diag(K), 1.7)
    np.testing.assert_allclose(K, K.T, atol=1e-12)
    for i in range(3):
        for j in range(3):
            r = np.linalg.norm((X[i] - X[j]) / np.array([0.3, 0.6]))
            assert K[i, j] == pytest.approx(1.7 * gp.matern52(np.array(r)), rel=1e-12)
    assert gp.matern52(np.array(50.0)) < 1e-15


def test_kernel_input_validation():
    kern = gp.KernelParams(1.0, (0.5,), 1e-6)
    with pytest.raises(ConfigError):
        gp.kernel_matrix(np.zeros((2, 2)), np.zeros((2, 2)), kern)
    with pytest.raises(ConfigError):
        gp.kernel_matrix(np.array([[np.nan]]), np.zeros((1, 1)), kern)
    with pytest.raises(ConfigError):
        gp.KernelParams(-1.0, (0.5,), 1e-6)


def test_jittered_cholesky():
    K = np.ones((3, 3))  # rank one
    L, jitter = gp.jittered_cholesky(K)
    assert 0 < jitter <= 1e-4
    np.testing.assert_allclose(L @ L.T, K + jitter * np.eye(3), atol=1e-12)
    with pytest.raises(NumericalError):
        gp.jittered_cholesky(-np.eye(2))


def test_interpolation_and_prior_reversion():
    X = np.array([[0.1], [0.4], [0.8]])
    y = np.array([1.0, -2.0, 0.5])
    model = gp.fit(X, y, kernel=gp.KernelParams(1.0, (0.2,), 1e-10))
    mu, _ = model.posterior(X)
    np.testing.assert_allclose(mu, y, atol=1e-6)
    mu, var = model.posterior(np.array([[50.0]]))
    assert mu[0] == pytest.approx(y.mean(), abs=1e-9)
    assert var[0] == pytest.approx(model.y_scale ** 2, rel=1e-9)


def test_fit_beats_every_restart_start():
    rng = np.random.default_rng(2)
    X = rng.random((12, 5))
    y = ((X - 0.3) ** 2).sum(1)
    model = gp.fit(X, y, rng=np.random.default_rng(0))
    best = model.log_marginal_likelihood()
    for start, _final in model.restarts:
        assert best >= start - 1e-9
    assert len(model.restarts) == 8


def test_constant_targets():
    X = np.random.default_rng(0).random((6, 2))
    model = gp.fit(X, np.full(6, 3.0))
    mu, _ = model.posterior(np.random.default_rng(1).random((4, 2)))
    np.testing.assert_allclose(mu, 3.0, atol=1e-9)


def test_variance_nonnegative_and_shrinks_at_new_point():
    rng = np.random.default_rng(4)
    X = rng.random((8, 3))
    y = rng.normal(size=8)
    kern = gp.KernelParams(1.0, (0.4, 0.4, 0.4), 1e-4)
    m1 = gp.fit(X, y, kernel=kern)
    _, v = m1.posterior(rng.random((500, 3)))
    assert np.all(v >= 0)
    xn = rng.random((1, 3))
    m2 = gp.fit(np.vstack([X, xn]), np.append(y, 0.3), kernel=kern)
    # compare in standardized units so the rescaling of y does not interfere
    assert m2.posterior(xn)[1][0] / m2.y_scale ** 2 <= m1.posterior(xn)[1][0] / m1.y_scale ** 2
