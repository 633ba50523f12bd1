"""End-to-end estimator: pilots at a sampling lattice, then reconstruction."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .aperture import ApertureSpec, observe, sampling_grid
from .field import SpectralCoefficients, evaluate_grid
from .pilots import PilotConfig, db_to_linear
from .reconstruction import DEFAULT_DENSITY, DenseGrid, NyquistReconstructor, nmse

__all__ = ["FASChannelEstimator"]


class FASChannelEstimator(BaseEstimator):
    """Estimate a fluid-antenna channel over its whole aperture.

    ``fit`` takes one field realization, measures it at the lattice given by
    ``lobe_order`` (or ``sampling_distance``) with MLE pilots, and
    reconstructs it on a dense grid. ``snr_db=None`` skips the pilots and
    samples the channel exactly.

    Parameters
    ----------
    dim : {1, 2}
    width, height : float
        Aperture sides in wavelengths. ``height`` defaults to ``width``.
    lobe_order : int
        Sidelobe order of the oversampled spacing. Ignored when
        ``sampling_distance`` is set.
    sampling_distance : float, optional
    z_p : int
        Pilots per sampling position.
    snr_db : float or None
    density : int
        Dense-grid points per sampling interval.
    method : {"kernel", "dft"}
        Reconstruction path; ``"dft"`` evaluates on a sample-aligned grid.
    random_state : int or numpy.random.SeedSequence, optional
        Seed for the pilot noise.

    Attributes
    ----------
    samples_ : SampleSet
    reconstructor_ : NyquistReconstructor
    grid_ : DenseGrid
    estimate_ : ndarray
        Reconstructed channel on ``grid_``.
    """

    def __init__(
        self,
        dim=2,
        width=2.0,
        height=None,
        lobe_order=0,
        sampling_distance=None,
        z_p=7,
        snr_db=20.0,
        density=DEFAULT_DENSITY,
        method="kernel",
        random_state=None,
    ):
        self.dim = dim
        self.width = width
        self.height = height
        self.lobe_order = lobe_order
        self.sampling_distance = sampling_distance
        self.z_p = z_p
        self.snr_db = snr_db
        self.density = density
        self.method = method
        self.random_state = random_state

    def _pilot(self):
        if self.snr_db is None:
            return None
        return PilotConfig(z_p=self.z_p, snr=db_to_linear(self.snr_db))

    def fit(self, field: SpectralCoefficients, y=None, grid: DenseGrid | None = None):
        """Measure and reconstruct ``field``; ``grid`` overrides the default dense grid."""
        if not isinstance(field, SpectralCoefficients):
            raise TypeError("fit expects a field realization (SpectralCoefficients)")
        aperture = ApertureSpec(dim=self.dim, width=self.width, height=self.height if self.dim == 2 else None)
        lattice = sampling_grid(aperture, self.lobe_order, distance=self.sampling_distance)
        self.samples_ = observe(field, lattice, self._pilot(), self.random_state)
        self.reconstructor_ = NyquistReconstructor.from_samples(self.samples_, method=self.method)
        if grid is None:
            if self.method == "dft":
                grid = DenseGrid.aligned(lattice, self.density)
            else:
                grid = DenseGrid.over(aperture, lattice.spacing, self.density)
        self.aperture_ = aperture
        self.grid_ = grid
        self.estimate_ = self.reconstructor_.predict_grid(grid)
        self.field_ = field
        return self

    @property
    def n_samples_(self) -> int:
        return self.samples_.grid.n_samples

    def predict(self, X):
        check_is_fitted(self, "reconstructor_")
        return self.reconstructor_.predict(X)

    def select_port(self):
        """Grid position with the largest reconstructed ``|h|^2``."""
        from .rates import best_port

        check_is_fitted(self, "estimate_")
        return best_port(self.estimate_, self.grid_)

    def truth(self) -> np.ndarray:
        check_is_fitted(self, "field_")
        return evaluate_grid(self.field_, *self.grid_.axes)

    def score(self, field=None, y=None):
        """``1 - NMSE`` against ``field`` (default: the fitted realization)."""
        check_is_fitted(self, "estimate_")
        return 1.0 - nmse(self.estimate_, self.field_ if field is None else field, self.grid_)
