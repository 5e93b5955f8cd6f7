import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from soupfall.estimators import BoxCountingDimension, CarpetCrossingEstimator, CrossingExponent
from soupfall.exceptions import InvalidSpecError


def planted(alpha=0.4):
    eps = np.geomspace(1e-3, 0.3, 6)
    return np.column_stack([eps, np.full(6, 10**6), np.round(eps ** alpha * 1e6)])


def test_crossing_exponent_fit_predict():
    X = planted()
    est = CrossingExponent().fit(X)
    assert est.alpha_ == pytest.approx(0.4, abs=0.01)
    assert est.dimension_ == pytest.approx(1.6, abs=0.01)
    np.testing.assert_allclose(est.predict([0.01, 0.1]), [0.01 ** 0.4, 0.1 ** 0.4], rtol=0.01)
    assert est.score(X) > 0.999


def test_crossing_exponent_validation():
    with pytest.raises(NotFittedError):
        CrossingExponent().predict([0.1])
    with pytest.raises(InvalidSpecError):
        CrossingExponent().fit(np.ones((4, 2)))
    with pytest.raises(InvalidSpecError):
        CrossingExponent().fit(np.array([[0.1, 10.5, 3], [0.2, 10, 3], [0.3, 10, 3]]))
    with pytest.raises(ValueError):
        CrossingExponent().fit(np.array([[0.1, np.nan, 3]] * 3))


def test_box_counting_dimension():
    m = np.zeros((256, 256), bool)
    m[100, :] = True
    est = BoxCountingDimension(factors=[1, 2, 4, 8, 16], pitch=1 / 256).fit(m)
    assert est.dimension_ == pytest.approx(1.0, abs=0.01)
    assert est.transform(m).shape == (1, 5)
    stack = np.stack([m, np.ones_like(m)])
    assert est.transform(stack).shape == (2, 5)
    with pytest.raises(InvalidSpecError):
        BoxCountingDimension(pitch=0).fit(m)


def test_params_and_clone():
    est = CarpetCrossingEstimator(c=0.1, replicas=100)
    params = est.get_params()
    assert params["c"] == 0.1 and params["replicas"] == 100
    twin = clone(est).set_params(seed=5)
    assert twin.seed == 5 and est.seed == 0
    assert BoxCountingDimension(pitch=0.5).get_params()["pitch"] == 0.5


def test_carpet_crossing_estimator_runs():
    est = CarpetCrossingEstimator(c=0.2, replicas=100, grid="logpolar", n_theta=64, seed=1)
    est.fit([0.3, 0.15, 0.08])
    assert len(est.table_) == 3
    assert est.alpha_ > 0
    assert np.all(est.predict([0.3, 0.1]) <= 1)
