import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from porobound import PoroelasticBounds
from porobound.core import assemble_A
from porobound.fem import DISPLACEMENT_PRESSURE
from porobound.microstructure import Microstructure

from conftest import contrast_pair, random_material


@pytest.fixture
def small_rve(rng):
    return Microstructure(rng.integers(0, 2, size=(3, 3, 3)), contrast_pair(rng))


def test_params_round_trip():
    est = PoroelasticBounds(bc=DISPLACEMENT_PRESSURE, tol=1e-8)
    params = est.get_params()
    assert params == {"bc": DISPLACEMENT_PRESSURE, "tol": 1e-8, "max_iter_factor": 50.0, "n_jobs": None}
    est.set_params(n_jobs=2)
    assert est.n_jobs == 2
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert not hasattr(twin, "result_")


def test_predict_before_fit_raises():
    with pytest.raises(NotFittedError):
        PoroelasticBounds().predict(np.zeros(7))


def test_fit_predict_homogeneous(rng):
    mat = random_material(rng)
    m = Microstructure(np.zeros((2, 2, 2), dtype=int), (mat,))
    est = PoroelasticBounds().fit(m)
    g = rng.normal(size=(5, 7))
    expected = g @ assemble_A(mat).T
    for bound in ("upper", "lower", "voigt", "reuss"):
        np.testing.assert_allclose(est.predict(g, bound=bound), expected, rtol=1e-9, atol=1e-12)
    assert est.predict(g[0]).shape == (1, 7)
    np.testing.assert_allclose(est.compliance("lower") @ assemble_A(mat), np.eye(7), atol=1e-9)
    np.testing.assert_array_equal(est.volume_fractions_, [1.0])
    assert est.n_phases_ == 1


def test_fit_accepts_documents(small_rve):
    a = PoroelasticBounds().fit(small_rve.to_document())
    b = PoroelasticBounds().fit(small_rve)
    np.testing.assert_array_equal(a.a_upper_, b.a_upper_)


def test_partial_family(small_rve):
    est = PoroelasticBounds(bc=DISPLACEMENT_PRESSURE).fit(small_rve)
    assert est.a_lower_ is None
    est.predict(np.ones(7))
    with pytest.raises(ValueError, match="not computed"):
        est.predict(np.ones(7), bound="lower")
    with pytest.raises(ValueError, match="unknown bound"):
        est.predict(np.ones(7), bound="hashin")


@pytest.mark.parametrize("bad", [np.zeros(6), np.full(7, np.nan), np.zeros((2, 3))])
def test_predict_validates_input(small_rve, bad):
    est = PoroelasticBounds(bc=DISPLACEMENT_PRESSURE).fit(small_rve)
    with pytest.raises(ValueError):
        est.predict(bad)


@pytest.mark.parametrize("params", [{"tol": 0.0}, {"tol": np.inf}, {"max_iter_factor": -1.0}])
def test_fit_rejects_bad_params(small_rve, params):
    with pytest.raises(ValueError):
        PoroelasticBounds(**params).fit(small_rve)


def test_fit_rejects_unknown_input():
    with pytest.raises(TypeError):
        PoroelasticBounds().fit(np.zeros((2, 2, 2)))
