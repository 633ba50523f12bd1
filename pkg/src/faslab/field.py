"""Random far-field channel on a line or a plane.

The channel is a truncated plane-wave expansion. Wavenumbers are split into
cells of width ``1/L`` (in units of the carrier wavenumber), and each cell
carries one complex Gaussian coefficient per propagation branch (``+`` and
``-``). All lengths are measured in wavelengths, so the carrier wavenumber is
``2*pi`` throughout.

Two spectral densities are supported:

* ``dim=1`` -- a line observing a 3D isotropic field. Cell variances have the
  closed form ``(asin((l+1)/L) - asin(l/L)) / pi`` and each branch sums to 1.
* ``dim=2`` -- a plane. Cell variances integrate
  ``(1 - kx**2 - ky**2)**-0.5 / (4*pi)`` over the part of the cell inside the
  unit disk. Each branch sums to 1/2.

Neither total is rescaled; see :func:`total_power`.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import integrate

from . import _rng
from ._validation import DomainError, QuadratureError, check_positions

BRANCHES = ("+", "-")

__all__ = [
    "FieldConfig",
    "SpectralCoefficients",
    "variance_1d",
    "variance_2d",
    "variances_1d",
    "variances_2d",
    "draw_realization",
    "evaluate_field",
    "evaluate_grid",
    "autocorrelation_oracle",
    "total_power",
]


@dataclass(frozen=True)
class FieldConfig:
    """Parameters of the random field ensemble.

    ``spectral_length`` (and ``spectral_length_y`` in 2D) are the spectral
    discretization lengths in wavelengths; the cell width in wavenumber is
    ``2*pi / L``. They must be positive integers so that the band edge falls
    on a cell boundary. ``wavelength`` is kept for reporting only: every
    other length in the package is already expressed in wavelengths.
    """

    dim: int = 2
    spectral_length: int = 32
    spectral_length_y: int | None = None
    wavelength: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError(f"dim must be 1 or 2, got {self.dim!r}")
        for name in ("spectral_length", "spectral_length_y"):
            value = getattr(self, name)
            if value is None:
                continue
            if isinstance(value, float) and value.is_integer():
                value = int(value)
                object.__setattr__(self, name, value)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value <= 0:
                raise DomainError(f"{name} must be a positive integer (in wavelengths), got {value!r}")
        if self.dim == 1 and self.spectral_length_y is not None:
            raise DomainError("spectral_length_y is only meaningful for dim=2")
        if self.dim == 2 and self.spectral_length_y is None:
            object.__setattr__(self, "spectral_length_y", self.spectral_length)
        if not self.wavelength > 0:
            raise DomainError(f"wavelength must be positive, got {self.wavelength!r}")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def shape(self) -> tuple[int, ...]:
        """Number of spectral cells per axis (including zero-variance ones)."""
        if self.dim == 1:
            return (2 * self.spectral_length,)
        return (2 * self.spectral_length, 2 * self.spectral_length_y)

    def indices(self) -> tuple[np.ndarray, ...]:
        """Integer cell indices per axis, ``-L .. L-1``."""
        if self.dim == 1:
            return (np.arange(-self.spectral_length, self.spectral_length),)
        return (
            np.arange(-self.spectral_length, self.spectral_length),
            np.arange(-self.spectral_length_y, self.spectral_length_y),
        )


def variance_1d(l: int, length: int) -> float:
    """Variance of the line-field coefficient in cell ``l``.

    Defined for ``-length <= l <= length``; the cell ``l = length`` lies on
    the band edge and has zero width inside the band.
    """
    if not -length <= l <= length:
        raise DomainError(f"cell index {l} outside [-{length}, {length}]")
    hi = min(1.0, max(-1.0, (l + 1) / length))
    lo = min(1.0, max(-1.0, l / length))
    return (math.asin(hi) - math.asin(lo)) / math.pi


def variances_1d(length: int) -> np.ndarray:
    """Cell variances for ``l = -length .. length-1`` (one branch)."""
    edges = np.clip(np.arange(-length, length + 1) / length, -1.0, 1.0)
    out = np.diff(np.arcsin(edges)) / np.pi
    out.flags.writeable = False
    return out


def _chord_integral(x: float, c: float, d: float) -> float:
    # integral over y in [c, d] of (1 - x^2 - y^2)^(-1/2), restricted to the disk
    s2 = 1.0 - x * x
    if s2 <= 0.0:
        return 0.0
    s = math.sqrt(s2)
    hi = min(1.0, max(-1.0, d / s))
    lo = min(1.0, max(-1.0, c / s))
    return math.asin(hi) - math.asin(lo)


def _cell_integral(a, b, c, d, *, epsabs=1e-12, epsrel=1e-11):
    """Integral of the planar density over ``[a, b] x [c, d]`` (without the 1/4pi)."""
    lo, hi = max(a, -1.0), min(b, 1.0)
    if lo >= hi:
        return 0.0
    # The inner integral is continuous but has square-root kinks where the
    # circle crosses y = c or y = d; hand those abscissae to quad.
    points = []
    for edge in (c, d):
        if abs(edge) < 1.0:
            root = math.sqrt(1.0 - edge * edge)
            points.extend(p for p in (-root, root) if lo < p < hi)
    res = integrate.quad(
        _chord_integral,
        lo,
        hi,
        args=(c, d),
        points=sorted(points) or None,
        epsabs=epsabs,
        epsrel=epsrel,
        limit=200,
        full_output=True,
    )
    value, err = res[0], res[1]
    # a fourth element is only present when quad reports a problem
    if len(res) > 3 and err > 1e-8:
        raise QuadratureError("cell quadrature did not converge", value, 1e-8)
    return value


def _cell_outside_disk(a, b, c, d) -> bool:
    nx = min(max(0.0, a), b) if a <= 0 <= b else min(abs(a), abs(b))
    ny = min(max(0.0, c), d) if c <= 0 <= d else min(abs(c), abs(d))
    return nx * nx + ny * ny >= 1.0


def variance_2d(ix: int, iy: int, length_x: int, length_y: int) -> float:
    """Variance of the planar coefficient in cell ``(ix, iy)``.

    The cell spans ``[ix/Lx, (ix+1)/Lx] x [iy/Ly, (iy+1)/Ly]`` in normalized
    wavenumber. Cells outside the unit disk return exactly 0; cells crossing
    the rim are finite because the singularity is integrable.
    """
    a, b = ix / length_x, (ix + 1) / length_x
    c, d = iy / length_y, (iy + 1) / length_y
    if _cell_outside_disk(a, b, c, d):
        return 0.0
    return _cell_integral(a, b, c, d) / (4.0 * math.pi)


@functools.lru_cache(maxsize=16)
def _variances_2d_cached(length_x: int, length_y: int) -> np.ndarray:
    # Only the quadrant ix, iy >= 0 is integrated; the density is even in
    # each axis, so cell i mirrors onto cell -i-1.
    q = np.zeros((length_x, length_y))
    for ix in range(length_x):
        for iy in range(length_y):
            if length_x == length_y and iy < ix:
                q[ix, iy] = q[iy, ix]
            else:
                q[ix, iy] = variance_2d(ix, iy, length_x, length_y)
    top = np.concatenate([q[::-1, :], q], axis=0)
    full = np.concatenate([top[:, ::-1], top], axis=1)
    full.flags.writeable = False
    return full


def variances_2d(length_x: int, length_y: int | None = None) -> np.ndarray:
    """Cell variances on the ``2Lx x 2Ly`` index grid (one branch).

    Row ``i`` corresponds to ``ix = i - Lx``, column ``j`` to ``iy = j - Ly``.
    Cached per ``(Lx, Ly)``.
    """
    return _variances_2d_cached(int(length_x), int(length_y or length_x))


def cell_variances(config: FieldConfig) -> np.ndarray:
    if config.dim == 1:
        return variances_1d(config.spectral_length)
    return variances_2d(config.spectral_length, config.spectral_length_y)


def total_power(config: FieldConfig) -> float:
    """Expected ``|h|^2`` at any point: both branches, all cells.

    2 for the line model, 1 for the planar model.
    """
    return 2.0 * float(np.sum(cell_variances(config)))


@dataclass(frozen=True, eq=False)
class SpectralCoefficients:
    """One realization of the plane-wave coefficients.

    ``coefficients`` has shape ``(2, *config.shape)``; axis 0 is the branch
    (``+``, ``-``). ``variances`` has the same shape.
    """

    config: FieldConfig
    coefficients: np.ndarray
    variances: np.ndarray = field(repr=False)

    def __post_init__(self):
        expected = (2, *self.config.shape)
        if self.coefficients.shape != expected or self.variances.shape != expected:
            raise DomainError(f"coefficient arrays must have shape {expected}")
        for arr in (self.coefficients, self.variances):
            arr.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.config.dim

    @property
    def combined(self) -> np.ndarray:
        """Per-cell sum over both branches (the branches share a wavenumber at z=0)."""
        return self.coefficients[0] + self.coefficients[1]

    def __mul__(self, scale):
        return dataclasses.replace(self, coefficients=self.coefficients * complex(scale))

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        """Dump as CSV with columns ``ix, iy, branch, variance, re, im``.

        ``iy`` is empty for line fields. Zero-variance cells are included so
        the dump round-trips exactly through :meth:`from_csv`.
        """
        idx = self.config.indices()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["ix", "iy", "branch", "variance", "re", "im"])
            for b, name in enumerate(BRANCHES):
                for pos in np.ndindex(*self.config.shape):
                    ix = int(idx[0][pos[0]])
                    iy = "" if self.dim == 1 else int(idx[1][pos[1]])
                    c = self.coefficients[(b, *pos)]
                    writer.writerow([ix, iy, name, repr(float(self.variances[(b, *pos)])),
                                     repr(float(c.real)), repr(float(c.imag))])

    @classmethod
    def from_csv(cls, path, config: FieldConfig) -> "SpectralCoefficients":
        coeffs = np.zeros((2, *config.shape), dtype=complex)
        var = np.zeros((2, *config.shape))
        offsets = (config.spectral_length, config.spectral_length_y or 0)
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                b = BRANCHES.index(row["branch"])
                pos = (int(row["ix"]) + offsets[0],)
                if config.dim == 2:
                    pos += (int(row["iy"]) + offsets[1],)
                coeffs[(b, *pos)] = complex(float(row["re"]), float(row["im"]))
                var[(b, *pos)] = float(row["variance"])
        return cls(config, coeffs, var)


def draw_realization(config: FieldConfig, seed=None) -> SpectralCoefficients:
    """Draw independent circularly-symmetric Gaussian coefficients.

    ``seed`` (an int or a :class:`numpy.random.SeedSequence`) overrides
    ``config.seed``. Branch ``b`` draws from the child stream ``(b,)`` of the
    seed, so the result is a pure function of ``(config, seed)``.
    """
    ss = _rng.as_seed_sequence(config.seed if seed is None else seed)
    var = cell_variances(config)
    scale = np.sqrt(var / 2.0)
    coeffs = np.empty((2, *config.shape), dtype=complex)
    for b in range(2):
        rng = _rng.generator(_rng.child(ss, b))
        draws = rng.standard_normal((2, *config.shape))
        coeffs[b] = scale * (draws[0] + 1j * draws[1])
    variances = np.broadcast_to(var, (2, *config.shape)).copy()
    return SpectralCoefficients(config, coeffs, variances)


def _phases(index: np.ndarray, length: int, coords: np.ndarray) -> np.ndarray:
    return np.exp(2j * np.pi * np.outer(coords, index) / length)


def evaluate_field(coeffs: SpectralCoefficients, positions) -> np.ndarray:
    """Channel values ``h`` at arbitrary positions (in wavelengths).

    ``positions`` is ``(n,)`` or ``(n, 1)`` for line fields and ``(n, 2)`` for
    planar ones.
    """
    cfg = coeffs.config
    X = check_positions(positions, cfg.dim)
    idx = cfg.indices()
    c = coeffs.combined
    if cfg.dim == 1:
        return _phases(idx[0], cfg.spectral_length, X[:, 0]) @ c
    ex = _phases(idx[0], cfg.spectral_length, X[:, 0])
    ey = _phases(idx[1], cfg.spectral_length_y, X[:, 1])
    return np.einsum("na,ab,nb->n", ex, c, ey)


def evaluate_grid(coeffs: SpectralCoefficients, x, y=None) -> np.ndarray:
    """Channel values on the tensor grid ``x`` (x ``y``), shape ``(len(x),[len(y)])``.

    Uses the separable form of the expansion, which is far cheaper than
    :func:`evaluate_field` on a flattened grid.
    """
    cfg = coeffs.config
    x = np.atleast_1d(np.asarray(x, dtype=float))
    idx = cfg.indices()
    ex = _phases(idx[0], cfg.spectral_length, x)
    if cfg.dim == 1:
        if y is not None:
            raise DomainError("line fields take a single axis")
        return ex @ coeffs.combined
    if y is None:
        raise DomainError("planar fields need both grid axes")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ey = _phases(idx[1], cfg.spectral_length_y, y)
    return ex @ coeffs.combined @ ey.T


def autocorrelation_oracle(
    delta: float,
    config: FieldConfig,
    model: Literal["continuous", "discrete"] = "continuous",
) -> float:
    """Normalized spatial autocorrelation ``Re c(delta) / c(0)`` along x.

    ``model="continuous"`` integrates the spectral density numerically (no
    discretization), which gives ``J0(2*pi*delta)`` for the line model and
    ``sin(2*pi*delta) / (2*pi*delta)`` for the planar one. ``"discrete"``
    returns the exact correlation of the truncated expansion for this
    ``config``.
    """
    if delta < 0:
        raise DomainError(f"separation must be non-negative, got {delta}")
    if model == "discrete":
        var = cell_variances(config)
        k = config.indices()[0] / config.spectral_length
        weights = var if config.dim == 1 else var.sum(axis=1)
        return float(np.sum(weights * np.cos(2 * np.pi * k * delta)) / np.sum(weights))
    if model != "continuous":
        raise ValueError(f"unknown model {model!r}")

    omega = 2.0 * np.pi * delta
    if config.dim == 1:
        # density (1 - k^2)^(-1/2) / pi; the 'alg' weight absorbs both endpoint singularities
        def density(k):
            return 1.0

        quad_kw = dict(weight="alg", wvar=(-0.5, -0.5))
    else:
        # marginal of the planar density along kx, integrating ky across the chord
        def density(k):
            return _chord_integral(k, -1.0, 1.0) / (4.0 * math.pi)

        quad_kw = {}

    def integrand(k):
        return density(k) * math.cos(omega * k)

    num, err_n = integrate.quad(integrand, -1.0, 1.0, limit=400, epsabs=1e-12, **quad_kw)
    den, err_d = integrate.quad(density, -1.0, 1.0, limit=400, epsabs=1e-12, **quad_kw)
    if not (math.isfinite(num) and math.isfinite(den)) or den <= 0:
        raise QuadratureError("autocorrelation quadrature failed", num, 1e-12)
    return num / den
