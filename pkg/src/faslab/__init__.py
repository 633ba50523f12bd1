"""Sampling, pilot estimation and reconstruction of spatially continuous channels.

Lengths are in wavelengths. The typical flow is

>>> from faslab import FieldConfig, draw_realization, FASChannelEstimator
>>> field = draw_realization(FieldConfig(dim=2), seed=1)
>>> est = FASChannelEstimator(width=2.0, snr_db=20.0, random_state=2).fit(field)
>>> position, value = est.select_port()
"""

from ._validation import BudgetWarning, DomainError, QuadratureError
from .aperture import (
    ApertureSpec,
    SampleGrid,
    SampleSet,
    observe,
    sample_axis,
    sample_count,
    sample_positions,
    sampling_distance,
    sampling_grid,
    window,
)
from .field import (
    FieldConfig,
    SpectralCoefficients,
    autocorrelation_oracle,
    cell_variances,
    draw_realization,
    evaluate_field,
    evaluate_grid,
    total_power,
    variance_1d,
    variance_2d,
    variances_1d,
    variances_2d,
)
from .pilots import (
    CiSpec,
    PilotBudget,
    PilotConfig,
    PilotMLE,
    ci_probability,
    db_to_linear,
    linear_to_db,
    min_pilots,
    min_pilots_closed_form,
    mle_estimate,
    pilot_budget,
    pilot_sequence,
    simulate_pilots,
)
from .pipeline import FASChannelEstimator
from .rates import (
    RateConfig,
    RatePoint,
    TrialRates,
    best_port,
    monte_carlo_rates,
    rate_imperfect,
    rate_perfect,
    rate_tas,
    trial_rates,
)
from .reconstruction import (
    DenseGrid,
    NyquistReconstructor,
    ReconstructedField,
    nmse,
    power_spectrum,
    reconstruct,
)

__version__ = "0.1.0"
