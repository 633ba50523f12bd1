"""Finite apertures, oversampled sampling lattices and channel observations."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from ._validation import DomainError, check_lobe_order, check_positions, check_positive
from .field import SpectralCoefficients, evaluate_grid
from .pilots import PilotConfig, mle_estimate, pilot_sequence, simulate_pilots

__all__ = [
    "ApertureSpec",
    "SampleGrid",
    "SampleSet",
    "window",
    "sampling_distance",
    "sample_count",
    "sample_axis",
    "sample_positions",
    "sampling_grid",
    "observe",
]

# floor() guard: side / D is often an exact integer that rounds to k - 1e-16
_FLOOR_SLACK = 1e-9


@dataclass(frozen=True)
class ApertureSpec:
    """Rectangular aperture ``[-X/2, X/2] (x [-Y/2, Y/2])`` in wavelengths."""

    dim: int = 2
    width: float = 2.0
    height: float | None = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError(f"dim must be 1 or 2, got {self.dim!r}")
        check_positive(self.width, "width")
        if self.dim == 1:
            if self.height is not None:
                raise DomainError("a line aperture has no height")
        else:
            if self.height is None:
                object.__setattr__(self, "height", self.width)
            check_positive(self.height, "height")

    @classmethod
    def square(cls, side: float, dim: int = 2) -> "ApertureSpec":
        return cls(dim=dim, width=side)

    @property
    def sides(self) -> tuple[float, ...]:
        return (self.width,) if self.dim == 1 else (self.width, self.height)

    def contains(self, positions) -> np.ndarray:
        X = check_positions(positions, self.dim)
        half = np.asarray(self.sides) / 2.0
        return np.all(np.abs(X) <= half, axis=1)


def window(position, aperture: ApertureSpec) -> int:
    """Rectangular window: 1 inside the closed aperture, 0 outside."""
    return int(aperture.contains(position)[0])


def sampling_distance(side: float, d: int = 0) -> float:
    """Oversampled spacing ``1 / (2 + 2 (d + 1) / side)`` in wavelengths.

    Half the sampling wavenumber, ``pi / D``, then equals the carrier
    wavenumber plus the extent of the window spectrum up to its ``d``-th
    sidelobe, ``(d + 1) * 2 pi / side``.
    """
    side = check_positive(side, "aperture side")
    d = check_lobe_order(d)
    return 1.0 / (2.0 + 2.0 * (d + 1) / side)


def sample_count(side: float, distance: float) -> int:
    """``floor(side / D)`` samples per dimension."""
    side = check_positive(side, "aperture side")
    distance = check_positive(distance, "sampling distance")
    return max(1, math.floor(side / distance + _FLOOR_SLACK))


def sample_axis(side: float, distance: float) -> np.ndarray:
    """Sample coordinates along one axis, centred on the aperture.

    ``x_n = (n - (N - 1) / 2) D``. When ``N D == side`` this is the
    cell-centred grid ``-side/2 + (n + 1/2) D``.
    """
    n = sample_count(side, distance)
    return (np.arange(n) - (n - 1) / 2.0) * distance


def sample_positions(aperture: ApertureSpec, dx: float, dy: float | None = None) -> np.ndarray:
    """All sample positions, shape ``(N, dim)``; x varies slowest in 2D."""
    xs = sample_axis(aperture.width, dx)
    if aperture.dim == 1:
        return xs[:, None]
    ys = sample_axis(aperture.height, dx if dy is None else dy)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass(frozen=True)
class SampleGrid:
    """Where the channel is estimated: a uniform lattice inside the aperture.

    ``lobe_order`` is ``None`` when the spacing was given explicitly.
    """

    aperture: ApertureSpec
    spacing: tuple[float, ...]
    lobe_order: int | None = None
    axes: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.spacing) != self.aperture.dim:
            raise DomainError("need one spacing per aperture dimension")
        axes = tuple(sample_axis(s, d) for s, d in zip(self.aperture.sides, self.spacing))
        for a in axes:
            a.flags.writeable = False
        object.__setattr__(self, "axes", axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def n_samples(self) -> int:
        return int(np.prod(self.shape))

    @property
    def positions(self) -> np.ndarray:
        return sample_positions(self.aperture, *self.spacing)

    def indices(self) -> np.ndarray:
        """Integer lattice indices ``(n_x[, n_y])`` matching :attr:`positions`."""
        grids = np.meshgrid(*[np.arange(n) for n in self.shape], indexing="ij")
        return np.column_stack([g.ravel() for g in grids])


def sampling_grid(aperture: ApertureSpec, d: int | None = 0, *, distance=None) -> SampleGrid:
    """Lattice for lobe order ``d``, or for an explicit ``distance``.

    ``distance`` may be a scalar or one value per dimension and takes
    precedence over ``d``.
    """
    if distance is not None:
        dist = np.broadcast_to(np.asarray(distance, dtype=float), (aperture.dim,))
        return SampleGrid(aperture, tuple(check_positive(float(v), "sampling distance") for v in dist), None)
    d = check_lobe_order(d)
    return SampleGrid(aperture, tuple(sampling_distance(s, d) for s in aperture.sides), d)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Channel values at the lattice points of ``grid``.

    ``values`` is flat, in the order of ``grid.positions``. ``provenance`` is
    ``"noiseless"`` or ``"mle"``; for MLE sets ``truth`` keeps the exact
    channel at the same points.
    """

    grid: SampleGrid
    values: np.ndarray
    provenance: str = "noiseless"
    truth: np.ndarray | None = field(default=None, repr=False)
    pilot: PilotConfig | None = None

    def __post_init__(self):
        if self.values.shape != (self.grid.n_samples,):
            raise DomainError(f"expected {self.grid.n_samples} values, got shape {self.values.shape}")
        if self.provenance not in ("noiseless", "mle"):
            raise DomainError(f"unknown provenance {self.provenance!r}")

    @property
    def positions(self) -> np.ndarray:
        return self.grid.positions

    @property
    def spacing(self) -> tuple[float, ...]:
        return self.grid.spacing

    @property
    def lobe_order(self) -> int | None:
        return self.grid.lobe_order

    def values_grid(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def with_values(self, values) -> "SampleSet":
        return SampleSet(self.grid, np.asarray(values, dtype=complex), self.provenance, self.truth, self.pilot)

    def to_csv(self, path) -> None:
        """Write columns ``n_x, n_y, x, y, re, im, provenance`` (y empty in 1D)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n_x", "n_y", "x", "y", "re", "im", "provenance"])
            for idx, pos, v in zip(self.grid.indices(), self.positions, self.values):
                ny = int(idx[1]) if len(idx) > 1 else ""
                y = repr(float(pos[1])) if len(pos) > 1 else ""
                writer.writerow([int(idx[0]), ny, repr(float(pos[0])), y,
                                 repr(float(v.real)), repr(float(v.imag)), self.provenance])


def observe(coeffs: SpectralCoefficients, grid: SampleGrid, pilot: PilotConfig | None = None, seed=None) -> SampleSet:
    """Sample a realization on ``grid``.

    Without ``pilot`` the exact channel is returned. With ``pilot`` every
    lattice point receives its own noisy pilot sub-block and the value is
    the MLE from it.
    """
    if coeffs.dim != grid.aperture.dim:
        raise DomainError("field and aperture dimensionality differ")
    if not np.all(grid.aperture.contains(grid.positions)):
        raise DomainError("sample positions fall outside the aperture")
    truth = evaluate_grid(coeffs, *grid.axes).ravel()
    if pilot is None:
        return SampleSet(grid, truth, "noiseless", truth)
    received = simulate_pilots(truth, pilot, _rng.generator(seed))
    est = mle_estimate(received, pilot_sequence(pilot))
    return SampleSet(grid, np.asarray(est), "mle", truth, pilot)
