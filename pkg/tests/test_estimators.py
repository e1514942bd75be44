import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from pointset_ergodics import ScanningFunction, Tent, fibonacci, jittered_lattice, lattice
from pointset_ergodics.estimators import BirkhoffAverage, FLCClassifier, PatternFrequency, check_pointset


def test_check_pointset():
    P = lattice(1, window=(-3, 3))
    assert check_pointset(P) is P
    Q = check_pointset(np.array([[0.0], [1.0]]), r=1.0)
    assert len(Q) == 2
    with pytest.raises(ValueError):
        check_pointset(np.array([[0.0], [1.0]]))


def test_pattern_frequency_estimator():
    est = PatternFrequency(pattern=[[0, 0]], radii=(8, 16, 32)).fit(lattice(2, window=(-40, 40)))
    assert est.estimate_ == pytest.approx(1.0, abs=0.01)
    assert len(est.counts_) == 3
    assert clone(est).get_params()["radii"] == (8, 16, 32)
    with pytest.raises(ValueError):
        PatternFrequency().fit(lattice(2, window=(-4, 4)))


def test_birkhoff_estimator():
    f = ScanningFunction.f_phi(Tent(1.5, (0.0, 0.0)))
    est = BirkhoffAverage(function=f, radii=(16,), samples=20_000).fit(lattice(2, window=(-30, 30)))
    assert abs(est.estimate_ - 1.0) <= 3 * est.stderrs_[-1] + 1e-3


def test_flc_classifier():
    with pytest.raises(NotFittedError):
        FLCClassifier().predict()
    assert FLCClassifier(V_radius=2.0).fit(fibonacci(2000)).predict()
    assert not FLCClassifier(V_radius=1.5, n_windows=3).fit(jittered_lattice(0.1)).predict()
