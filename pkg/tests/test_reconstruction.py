import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from faslab import (
    ApertureSpec,
    DenseGrid,
    DomainError,
    FieldConfig,
    NyquistReconstructor,
    SampleSet,
    draw_realization,
    evaluate_grid,
    nmse,
    observe,
    power_spectrum,
    reconstruct,
    sampling_grid,
)


def _random_samples(rng, dim, width, d):
    grid = sampling_grid(ApertureSpec(dim=dim, width=width), d)
    v = rng.standard_normal(grid.n_samples) + 1j * rng.standard_normal(grid.n_samples)
    return SampleSet(grid, v)


def test_dense_grid_over_is_odd_and_centred():
    ap = ApertureSpec(dim=2, width=2.0)
    g = DenseGrid.over(ap, 1 / 3, 8)
    assert g.shape == (49, 49)
    assert g.axes[0][24] == pytest.approx(0.0, abs=1e-15)
    assert g.axes[0][0] == -1.0 and g.axes[0][-1] == 1.0


def test_dense_grid_aligned_contains_samples():
    lattice = sampling_grid(ApertureSpec(dim=1, width=4.5), 0)
    g = DenseGrid.aligned(lattice, 5)
    for x in lattice.axes[0]:
        assert np.min(np.abs(g.axes[0] - x)) < 1e-12
    assert g.axes[0][0] >= -2.25 - 1e-12 and g.axes[0][-1] <= 2.25 + 1e-12


def test_dense_grid_rejects_nonuniform():
    with pytest.raises(DomainError):
        DenseGrid((np.array([0.0, 1.0, 3.0]),))


def test_integrate_polynomial():
    g = DenseGrid((np.linspace(-1, 1, 2001), np.linspace(0, 2, 1001)))
    gx, gy = np.meshgrid(*g.axes, indexing="ij")
    assert g.integrate(gx**2 * gy) == pytest.approx(4 / 3, rel=1e-5)


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("method", ["kernel", "dft"])
def test_interpolates_samples_exactly(dim, method):
    s = _random_samples(np.random.default_rng(0), dim, 2.0, 1)
    g = DenseGrid.aligned(s.grid, 4)
    rec = reconstruct(s, g, method).values
    idx = []
    for nodes, axis in zip(s.grid.axes, g.axes):
        idx.append([int(np.argmin(np.abs(axis - x))) for x in nodes])
    np.testing.assert_allclose(rec[np.ix_(*idx)], s.values_grid(), atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2]), st.floats(0.5, 4.0), st.integers(0, 3),
       st.integers(2, 12))
def test_dft_matches_kernel(seed, dim, width, d, density):
    s = _random_samples(np.random.default_rng(seed), dim, width, d)
    g = DenseGrid.aligned(s.grid, density)
    a = reconstruct(s, g, "kernel").values
    b = reconstruct(s, g, "dft").values
    assert np.linalg.norm(a - b) <= 1e-9 * np.linalg.norm(a)


def test_dft_needs_aligned_grid():
    s = _random_samples(np.random.default_rng(0), 1, 2.0, 0)
    with pytest.raises(DomainError):
        reconstruct(s, DenseGrid((np.linspace(-1, 1, 101) + 1e-3,)), "dft")
    with pytest.raises(ValueError):
        reconstruct(s, DenseGrid.aligned(s.grid, 4), "fir")


def test_tone_reconstruction_interior():
    ap = ApertureSpec(dim=1, width=200.0)
    lattice = sampling_grid(ap, 0)
    D = lattice.spacing[0]
    x = np.linspace(-10, 10, 201)
    for frac in (0.25, 0.5):
        k = frac * np.pi / D
        s = SampleSet(lattice, np.exp(1j * k * lattice.axes[0]))
        rec = NyquistReconstructor.from_samples(s).predict(x)
        assert np.max(np.abs(rec - np.exp(1j * k * x))) < 5e-3


def test_nmse_basics():
    f = draw_realization(FieldConfig(dim=2, spectral_length=8), 0)
    g = DenseGrid.over(ApertureSpec(dim=2, width=1.0), 0.25, 4)
    truth = evaluate_grid(f, *g.axes)
    assert nmse(truth, truth, g) == 0.0
    assert nmse(2 * truth, f, g) == pytest.approx(1.0)
    assert nmse(np.zeros_like(truth), truth) == pytest.approx(1.0)
    with pytest.raises(ZeroDivisionError):
        nmse(truth, np.zeros_like(truth), g)
    with pytest.raises(DomainError):
        nmse(truth[:-1], truth, g)
    with pytest.raises(DomainError):
        nmse(truth, f)


def test_nmse_decreases_with_oversampling_noiseless():
    f = draw_realization(FieldConfig(dim=1), 3)
    ap = ApertureSpec(dim=1, width=4.0)
    vals = []
    for dist in (0.5, 0.4, 0.25):
        lattice = sampling_grid(ap, distance=dist)
        g = DenseGrid.over(ap, dist, 16)
        vals.append(nmse(reconstruct(observe(f, lattice), g), f))
    assert vals[0] > vals[1] > vals[2]


def test_reconstructed_field_csv(tmp_path):
    s = _random_samples(np.random.default_rng(1), 2, 1.0, 0)
    rec = reconstruct(s, DenseGrid.over(s.grid.aperture, s.spacing, 2))
    path = tmp_path / "r.csv"
    rec.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,re,im"
    assert len(lines) == 1 + rec.values.size
    x, y, re, im = map(float, lines[1].split(","))
    assert complex(re, im) == rec.values[0, 0]


def test_power_spectrum_tone_and_parseval():
    x = np.arange(64) * 0.125
    g = DenseGrid((x,))
    k0 = 2 * np.pi * 5 / (64 * 0.125)
    v = np.exp(1j * k0 * x)
    k, psd = power_spectrum(v, g)
    assert k[0][np.argmax(psd)] == pytest.approx(k0)
    dk = k[0][1] - k[0][0]
    assert psd.sum() * dk / (2 * np.pi) == pytest.approx(np.mean(np.abs(v) ** 2))
    k4, psd4 = power_spectrum(v, g, 256)
    assert psd4.shape == (256,) and psd4.max() == pytest.approx(psd.max())


def test_power_spectrum_2d_shape():
    g = DenseGrid((np.linspace(0, 1, 9), np.linspace(0, 2, 17)))
    k, psd = power_spectrum(np.ones(g.shape), g, (16, 32))
    assert psd.shape == (16, 32) and len(k) == 2
    assert np.all(psd >= 0)


def test_estimator_api_and_shuffled_fit():
    s = _random_samples(np.random.default_rng(2), 2, 2.0, 0)
    perm = np.random.default_rng(3).permutation(s.grid.n_samples)
    est = NyquistReconstructor().fit(s.positions[perm], s.values[perm])
    ref = NyquistReconstructor.from_samples(s)
    pts = np.random.default_rng(4).uniform(-1, 1, (20, 2))
    np.testing.assert_allclose(est.predict(pts), ref.predict(pts), atol=1e-12)
    assert est.score(s.positions, s.values) == pytest.approx(1.0)
    assert clone(est).get_params() == {"method": "kernel", "sampling_distance": None}
    with pytest.raises(DomainError):
        NyquistReconstructor(sampling_distance=0.1).fit(s.positions, s.values)
    with pytest.raises(DomainError):
        NyquistReconstructor().fit(np.array([[0.0]]), np.array([1.0]))
    with pytest.raises(DomainError):
        NyquistReconstructor().fit(s.positions[:-1], s.values[:-1])


def test_windowed_field_leaks_beyond_carrier():
    f = draw_realization(FieldConfig(dim=1), 0)
    g = DenseGrid.over(ApertureSpec(dim=1, width=2.0), 1 / 3, 16)
    k, psd = power_spectrum(evaluate_grid(f, g.axes[0]), g, 2048)
    outside = psd[np.abs(k[0]) > 2 * np.pi].sum() / psd.sum()
    assert outside > 1e-3


def test_tone_truncation_error_shrinks_with_support():
    # midpoint error of a truncated ideal kernel falls off like 1 / support
    k = 0.5 * np.pi
    errs = []
    for half in (10, 100, 1000):
        n = np.arange(-half, half)
        x = 0.5
        rec = np.sum(np.exp(1j * k * n) * np.sinc(x - n))
        errs.append(abs(rec - np.exp(1j * k * x)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3
