import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from faslab import FASChannelEstimator, FieldConfig, draw_realization, evaluate_field


def test_noiseless_fit_interpolates_samples():
    f = draw_realization(FieldConfig(dim=2), 0)
    est = FASChannelEstimator(snr_db=None, density=8).fit(f)
    s = est.samples_
    np.testing.assert_allclose(est.predict(s.positions), s.values, atol=1e-12)
    assert est.n_samples_ == 36
    assert 0.9 < est.score() <= 1.0


def test_noisy_fit_is_seeded():
    f = draw_realization(FieldConfig(dim=1), 1)
    a = FASChannelEstimator(dim=1, width=4.0, random_state=3, density=8).fit(f)
    b = clone(a).fit(f)
    np.testing.assert_array_equal(a.estimate_, b.estimate_)
    assert a.samples_.provenance == "mle"


def test_select_port_on_grid():
    f = draw_realization(FieldConfig(dim=2), 2)
    est = FASChannelEstimator(snr_db=None, lobe_order=2, density=8).fit(f)
    pos, value = est.select_port()
    assert pos.shape == (2,) and np.all(np.abs(pos) <= 1.0)
    assert abs(value) == pytest.approx(np.abs(est.estimate_).max())
    assert est.predict(pos[None, :])[0] == pytest.approx(value, abs=1e-9)
    assert abs(evaluate_field(f, pos[None, :])[0]) > 0


def test_dft_method_and_not_fitted():
    f = draw_realization(FieldConfig(dim=2), 3)
    k = FASChannelEstimator(snr_db=None, density=4).fit(f)
    d = FASChannelEstimator(snr_db=None, density=4, method="dft").fit(f)
    assert d.grid_.shape[0] >= k.samples_.grid.shape[0] * 4 - 3
    assert abs(k.score() - d.score()) < 0.05
    with pytest.raises(NotFittedError):
        FASChannelEstimator().predict([[0.0, 0.0]])
    with pytest.raises(TypeError):
        FASChannelEstimator().fit(np.zeros(3))
