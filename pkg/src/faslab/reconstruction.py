"""Ideal low-pass reconstruction of sampled channels, NMSE and spectra.

A lattice with spacing ``D`` is interpolated with the ideal low-pass kernel
whose cutoff is half the sampling wavenumber, ``pi / D``::

    h_hat(x) = sum_n h_n * sinc((x - x_n) / D)          (np.sinc convention)

and separably in 2D. Two evaluation paths are provided:

``"kernel"``
    Direct kernel summation. Works on any set of evaluation points and is
    the reference.
``"dft"``
    Impulses placed on a fine lattice aligned with the samples, transformed
    with a zero-padded FFT, multiplied by the transfer function of the ideal
    filter and transformed back, one axis at a time. Costs ``O(F log F)``
    for a grid of ``F`` points. The transfer function is taken over the lag
    span of the grid, so the result equals the kernel path up to rounding
    rather than carrying the periodic (Dirichlet) error of a rectangular DFT
    mask.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft
from scipy import integrate
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DomainError, check_complex_values, check_positions, uniform_spacing
from .aperture import ApertureSpec, SampleGrid, SampleSet
from .field import SpectralCoefficients, evaluate_grid

__all__ = [
    "DenseGrid",
    "ReconstructedField",
    "NyquistReconstructor",
    "reconstruct",
    "nmse",
    "power_spectrum",
    "interpolation_matrix",
]

DEFAULT_DENSITY = 32


@dataclass(frozen=True, eq=False)
class DenseGrid:
    """Uniform evaluation grid, one axis per dimension."""

    axes: tuple[np.ndarray, ...]

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        for a in axes:
            if a.ndim != 1:
                raise DomainError("grid axes must be one-dimensional")
            uniform_spacing(a)
            a.flags.writeable = False
        object.__setattr__(self, "axes", axes)

    @classmethod
    def over(cls, aperture: ApertureSpec, distance: float | tuple, density: int = DEFAULT_DENSITY) -> "DenseGrid":
        """Endpoint-inclusive grid with ``density`` points per sampling interval.

        The point count per axis is odd, so the aperture centre is always a
        grid point.
        """
        dist = np.broadcast_to(np.asarray(distance, dtype=float), (aperture.dim,))
        axes = []
        for side, d in zip(aperture.sides, dist):
            g = density * math.ceil(side / d - 1e-9) + 1
            axes.append(np.linspace(-side / 2.0, side / 2.0, g))
        return cls(tuple(axes))

    @classmethod
    def aligned(cls, grid: SampleGrid, density: int = DEFAULT_DENSITY) -> "DenseGrid":
        """Lattice of step ``D / density`` through every sample, clipped to the aperture."""
        axes = []
        for samples, d, side in zip(grid.axes, grid.spacing, grid.aperture.sides):
            h = d / density
            left = math.floor((samples[0] + side / 2.0) / h + 1e-9)
            right = math.floor((side / 2.0 - samples[-1]) / h + 1e-9)
            steps = np.arange(-left, (samples.size - 1) * density + right + 1)
            axes.append(samples[0] + steps * h)
        return cls(tuple(axes))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(float(a[1] - a[0]) for a in self.axes)

    @property
    def positions(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack([g.ravel() for g in grids])

    def integrate(self, values: np.ndarray) -> float:
        """Trapezoidal integral of ``values`` (shape :attr:`shape`) over the grid."""
        out = np.asarray(values)
        for axis in reversed(self.axes):
            out = integrate.trapezoid(out, axis, axis=-1)
        return float(out)


def interpolation_matrix(points, nodes, spacing: float) -> np.ndarray:
    """``K[i, n] = sinc((points_i - nodes_n) / spacing)``."""
    return np.sinc((np.asarray(points, dtype=float)[:, None] - np.asarray(nodes)[None, :]) / spacing)


def _kernel_grid(values: np.ndarray, sample_axes, spacing, grid_axes) -> np.ndarray:
    out = values
    for axis, (nodes, d, pts) in enumerate(zip(sample_axes, spacing, grid_axes)):
        k = interpolation_matrix(pts, nodes, d)
        out = np.moveaxis(np.tensordot(k, out, axes=([1], [axis])), 0, axis)
    return out


def _kernel_points(values: np.ndarray, sample_axes, spacing, X: np.ndarray) -> np.ndarray:
    if len(sample_axes) == 1:
        return interpolation_matrix(X[:, 0], sample_axes[0], spacing[0]) @ values
    kx = interpolation_matrix(X[:, 0], sample_axes[0], spacing[0])
    ky = interpolation_matrix(X[:, 1], sample_axes[1], spacing[1])
    return np.einsum("pn,nm,pm->p", kx, values, ky)


def _upsampling(nodes, d, pts) -> tuple[int, int]:
    """Integer upsampling factor and grid index of the first sample, or raise."""
    h = pts[1] - pts[0]
    m = d / h
    offset = (nodes[0] - pts[0]) / h
    if abs(m - round(m)) > 1e-6 or abs(offset - round(offset)) > 1e-6 or round(m) < 1:
        raise DomainError("the dft path needs a grid aligned with the sample lattice (see DenseGrid.aligned)")
    first = int(round(offset))
    if first < 0 or first + (nodes.size - 1) * round(m) >= pts.size:
        raise DomainError("the dft grid must contain every sample position")
    return int(round(m)), first


# rows per FFT batch are capped so a batch stays cache-resident (~1 MiB)
_BATCH_BYTES = 1 << 20


def _dft_axis(values: np.ndarray, axis: int, nodes, d, pts) -> np.ndarray:
    """Upsample ``values`` along ``axis`` onto ``pts`` by FFT linear convolution."""
    m, first = _upsampling(nodes, d, pts)
    g = pts.size
    # outputs g-1 .. 2g-2 of the linear convolution stay clear of the
    # circular wrap once the transform has at least 2g - 1 points
    f = sp_fft.next_fast_len(2 * g - 1)
    # ideal low-pass impulse response at every lag the grid can see,
    # already scaled by D / h so the sample values pass through unchanged
    kernel = np.zeros(f)
    kernel[: 2 * g - 1] = np.sinc(np.arange(-(g - 1), g) / m)
    transfer = sp_fft.fft(kernel)

    rows = np.moveaxis(values, axis, -1)
    lead = rows.shape[:-1]
    rows = rows.reshape(-1, rows.shape[-1])
    out = np.empty((rows.shape[0], g), dtype=complex)
    step = max(1, _BATCH_BYTES // (16 * f))
    impulses = np.zeros((min(step, rows.shape[0]), f), dtype=complex)
    for start in range(0, rows.shape[0], step):
        block = rows[start:start + step]
        buf = impulses[: block.shape[0]]
        buf[:] = 0.0
        buf[:, first:first + m * nodes.size:m] = block
        spec = sp_fft.fft(buf, axis=-1)
        spec *= transfer
        # lag -(g-1) sits at kernel index 0, so grid point i is at i + g - 1
        out[start:start + block.shape[0]] = sp_fft.ifft(spec, axis=-1, overwrite_x=True)[:, g - 1:2 * g - 1]
    return np.moveaxis(out.reshape(*lead, g), -1, axis)


def _dft_grid(values: np.ndarray, sample_axes, spacing, grid_axes) -> np.ndarray:
    # the ideal filter is separable: one axis at a time keeps the first
    # passes on the (few) sample rows instead of the full grid
    out = np.asarray(values, dtype=complex)
    for axis, (nodes, d, pts) in enumerate(zip(sample_axes, spacing, grid_axes)):
        out = _dft_axis(out, axis, nodes, d, pts)
    return out


@dataclass(frozen=True, eq=False)
class ReconstructedField:
    grid: DenseGrid
    values: np.ndarray
    source: SampleSet | None = None
    method: str = "kernel"

    def to_csv(self, path) -> None:
        """Write columns ``x, [y,] re, im``."""
        names = ["x", "y"][: self.grid.dim]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([*names, "re", "im"])
            for pos, v in zip(self.grid.positions, self.values.ravel()):
                writer.writerow([*(repr(float(p)) for p in pos), repr(float(v.real)), repr(float(v.imag))])


def reconstruct(samples: SampleSet, grid: DenseGrid, method: str = "kernel") -> ReconstructedField:
    """Low-pass reconstruction of ``samples`` on ``grid``."""
    sg = samples.grid
    if grid.dim != sg.aperture.dim:
        raise DomainError("grid and samples differ in dimensionality")
    values = samples.values_grid()
    if method == "kernel":
        out = _kernel_grid(values, sg.axes, sg.spacing, grid.axes)
    elif method == "dft":
        out = _dft_grid(values, sg.axes, sg.spacing, grid.axes)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ReconstructedField(grid, out, samples, method)


def nmse(recon, truth, grid: DenseGrid | None = None) -> float:
    """Normalized squared error ``int |h_hat - h|^2 / int |h|^2``.

    ``recon`` is a :class:`ReconstructedField` (its grid is used) or an array
    on ``grid``. ``truth`` is an array on the same grid or a field
    realization, which is then evaluated there. Real and imaginary errors
    are summed. Integrals use the trapezoid rule; without any grid, plain
    sums are used.
    """
    if isinstance(recon, ReconstructedField):
        grid = recon.grid
        est = recon.values
    else:
        est = np.asarray(recon, dtype=complex)
    if isinstance(truth, SpectralCoefficients):
        if grid is None:
            raise DomainError("a grid is needed to evaluate a field realization")
        truth = evaluate_grid(truth, *grid.axes)
    truth = np.asarray(truth, dtype=complex)
    if truth.shape != est.shape:
        raise DomainError(f"shape mismatch: {est.shape} vs {truth.shape}")
    err = np.abs(est - truth) ** 2
    ref = np.abs(truth) ** 2
    if grid is None:
        num, den = float(err.sum()), float(ref.sum())
    else:
        num, den = grid.integrate(err), grid.integrate(ref)
    if den == 0.0:
        raise ZeroDivisionError("true channel is identically zero; NMSE undefined")
    return num / den


def power_spectrum(values, grid: DenseGrid, n_fft: int | tuple | None = None):
    """Periodogram of grid values.

    Returns ``(wavenumber_axes, psd)``, both centred with ``fftshift``. Bin
    ``b`` of an ``n``-point transform maps to wavenumber ``2 pi b / (n dx)``
    (radians per wavelength). ``psd = |dx * sum v exp(-j k x)|^2 / extent``
    per axis, so a unit-amplitude tone concentrates its energy in one bin.
    """
    values = np.asarray(values, dtype=complex)
    if values.shape != grid.shape:
        raise DomainError("values do not match the grid")
    n = grid.shape if n_fft is None else tuple(np.broadcast_to(n_fft, (grid.dim,)))
    spec = sp_fft.fftn(values, s=n)
    scale = 1.0
    k_axes = []
    for nb, dx, g in zip(n, grid.spacing, grid.shape):
        scale *= dx / g
        k_axes.append(sp_fft.fftshift(2.0 * np.pi * sp_fft.fftfreq(nb, d=dx)))
    psd = sp_fft.fftshift(np.abs(spec) ** 2 * scale)
    return tuple(k_axes), psd


def _lattice_from_points(X: np.ndarray, y: np.ndarray):
    axes, codes = [], []
    for col in X.T:
        uniq, inv = np.unique(np.round(col, 12), return_inverse=True)
        axes.append(uniq)
        codes.append(inv)
    shape = tuple(a.size for a in axes)
    if int(np.prod(shape)) != X.shape[0]:
        raise DomainError("samples do not form a complete rectangular lattice")
    spacing = tuple(uniform_spacing(a) if a.size > 1 else math.nan for a in axes)
    grid = np.full(shape, np.nan, dtype=complex)
    grid[tuple(codes)] = y
    if np.isnan(grid.real).any():
        raise DomainError("duplicate sample positions")
    return tuple(axes), spacing, grid


class NyquistReconstructor(RegressorMixin, BaseEstimator):
    """Ideal low-pass interpolator with a scikit-learn interface.

    ``fit(X, y)`` takes lattice positions ``X`` (``(n, dim)``, any order) and
    complex channel values ``y``. ``sampling_distance`` is inferred from the
    lattice unless given (it must then be given when an axis holds a
    single sample). ``predict`` evaluates the kernel sum anywhere;
    ``predict_grid`` honours ``method``.
    """

    def __init__(self, method="kernel", sampling_distance=None):
        self.method = method
        self.sampling_distance = sampling_distance

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        X = check_positions(X, X.shape[1] if X.ndim == 2 else 1)
        y = check_complex_values(y, X.shape[0])
        axes, spacing, values = _lattice_from_points(X, y)
        if self.sampling_distance is not None:
            given = np.broadcast_to(np.asarray(self.sampling_distance, dtype=float), (len(axes),))
            for s, g in zip(spacing, given):
                if not math.isnan(s) and abs(s - g) > 1e-9 * g:
                    raise DomainError(f"lattice spacing {s} does not match sampling_distance {g}")
            spacing = tuple(float(g) for g in given)
        if any(math.isnan(s) for s in spacing):
            raise DomainError("cannot infer the spacing of a single-sample axis; pass sampling_distance")
        if self.method not in ("kernel", "dft"):
            raise ValueError(f"unknown method {self.method!r}")
        self.axes_ = axes
        self.spacing_ = spacing
        self.values_ = values
        self.n_features_in_ = X.shape[1]
        return self

    @classmethod
    def from_samples(cls, samples: SampleSet, method="kernel") -> "NyquistReconstructor":
        return cls(method=method, sampling_distance=samples.spacing).fit(samples.positions, samples.values)

    def predict(self, X):
        check_is_fitted(self, "values_")
        X = check_positions(X, self.n_features_in_)
        return _kernel_points(self.values_, self.axes_, self.spacing_, X)

    def predict_grid(self, grid: DenseGrid) -> np.ndarray:
        check_is_fitted(self, "values_")
        if self.method == "dft":
            return _dft_grid(self.values_, self.axes_, self.spacing_, grid.axes)
        return _kernel_grid(self.values_, self.axes_, self.spacing_, grid.axes)

    def score(self, X, y, sample_weight=None):
        """``1 - NMSE`` of the predictions at ``X`` (1 is perfect)."""
        pred = self.predict(X)
        y = check_complex_values(y, pred.shape[0])
        w = np.ones_like(pred.real) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        den = float(np.sum(w * np.abs(y) ** 2))
        if den == 0.0:
            raise ZeroDivisionError("true channel is identically zero; NMSE undefined")
        return 1.0 - float(np.sum(w * np.abs(pred - y) ** 2)) / den
