"""Port selection and achievable rates of fluid versus fixed antennas.

Rates are in bit/s with the bandwidth in Hz. ``snr`` is the linear ratio
``P / N0`` entering ``log2(1 + |h|^2 SNR / B)``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _rng
from ._validation import BudgetWarning, DomainError, check_positive
from .aperture import ApertureSpec, observe, sampling_grid
from .field import FieldConfig, draw_realization, evaluate_grid
from .pilots import PilotConfig
from .reconstruction import DenseGrid, NyquistReconstructor

__all__ = [
    "RateConfig",
    "TrialRates",
    "RatePoint",
    "best_port",
    "rate_perfect",
    "rate_imperfect",
    "rate_tas",
    "trial_rates",
    "monte_carlo_rates",
]


@dataclass(frozen=True)
class RateConfig:
    bandwidth: float = 30e3
    coherence: int = 1200
    snr: float = 10.0
    z_p: int = 7

    def __post_init__(self):
        check_positive(self.bandwidth, "bandwidth")
        check_positive(self.snr, "snr")
        if self.coherence < 1 or self.z_p < 1:
            raise DomainError("coherence and z_p must be positive")


def best_port(values, grid=None):
    """Position and value of the largest ``|h|^2``.

    Ties go to the lowest flat (C-order) grid index. Without ``grid`` the
    returned position is the array index.
    """
    values = np.asarray(values)
    if values.size == 0:
        raise DomainError("no candidate ports")
    flat = int(np.argmax(np.abs(values.ravel()) ** 2))
    index = np.unravel_index(flat, values.shape)
    value = complex(values[index])
    if grid is None:
        return tuple(int(i) for i in index), value
    return np.array([ax[i] for ax, i in zip(grid.axes, index)]), value


def _shannon(gain, snr, bandwidth):
    return bandwidth * math.log2(1.0 + gain * snr / bandwidth)


def rate_perfect(h, cfg: RateConfig) -> float:
    """Capacity at the selected port with perfect CSI, ``B log2(1 + |h|^2 SNR / B)``."""
    return _shannon(abs(h) ** 2, cfg.snr, cfg.bandwidth)


def rate_tas(h, cfg: RateConfig) -> float:
    """Fixed-antenna capacity with perfect CSI at its (fixed) position."""
    return _shannon(abs(h) ** 2, cfg.snr, cfg.bandwidth)


def rate_imperfect(h_true, h_est, n_samples: int, cfg: RateConfig) -> float:
    """Achievable rate after spending ``n_samples * z_p`` symbols on pilots.

    ``B (1 - N z_p / Z) log2(1 + |h|^2 SNR / (|e|^2 SNR + B))`` with
    ``e = h_true - h_est`` at the chosen port. A budget that eats the whole
    coherence block yields 0 and a :class:`BudgetWarning`.
    """
    pre_log = 1.0 - n_samples * cfg.z_p / cfg.coherence
    if pre_log <= 0.0:
        if pre_log < 0.0:
            warnings.warn(
                f"pilot budget {n_samples * cfg.z_p} exceeds the coherence block {cfg.coherence}",
                BudgetWarning,
                stacklevel=2,
            )
        return 0.0
    err = abs(h_true - h_est) ** 2
    sinr = abs(h_true) ** 2 * cfg.snr / (err * cfg.snr + cfg.bandwidth)
    return cfg.bandwidth * pre_log * math.log2(1.0 + sinr)


@dataclass(frozen=True)
class TrialRates:
    fas_perfect: float
    fas_imperfect: float
    tas: float
    n_samples: int
    port_error: float


def trial_rates(field, cfg: RateConfig, *, dim=2, width=2.0, lobe_order=0, distance=None,
                density=32, seed=None) -> TrialRates:
    """All three rates for one realization.

    Ports are searched on the dense reconstruction grid, which has an odd
    number of points per axis; the fixed antenna sits at its centre point,
    the aperture centre.
    """
    aperture = ApertureSpec(dim=dim, width=width)
    lattice = sampling_grid(aperture, lobe_order, distance=distance)
    samples = observe(field, lattice, PilotConfig(z_p=cfg.z_p, snr=cfg.snr), seed)
    grid = DenseGrid.over(aperture, lattice.spacing, density)
    estimate = NyquistReconstructor.from_samples(samples).predict_grid(grid)
    truth = evaluate_grid(field, *grid.axes)

    _, best_true = best_port(truth)
    index, _ = best_port(estimate)
    h_sel = complex(truth[index])
    h_hat = complex(estimate[index])
    centre = tuple(n // 2 for n in truth.shape)
    n = samples.grid.n_samples
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BudgetWarning)
        r_imp = rate_imperfect(h_sel, h_hat, n, cfg)
    return TrialRates(
        fas_perfect=rate_perfect(best_true, cfg),
        fas_imperfect=r_imp,
        tas=rate_tas(truth[centre], cfg),
        n_samples=n,
        port_error=abs(h_sel - h_hat) ** 2,
    )


@dataclass(frozen=True)
class RatePoint:
    """Monte-Carlo summary at one sweep value."""

    sweep_var: str
    value: float
    trials: int
    fas_perfect_mean: float
    fas_imperfect_mean: float
    tas_mean: float
    fas_perfect_stderr: float
    fas_imperfect_stderr: float
    tas_stderr: float
    n_samples: int
    pilot_symbols: int
    data_symbols: int
    budget_feasible: bool
    dominance_ok: bool
    per_trial: np.ndarray | None = None


def _run_trial(args):
    field_config, master, trial, point, cfg, kw = args
    field = draw_realization(field_config, _rng.trial_seed(master, _rng.FIELD_STREAM, trial))
    seed = _rng.child(master, _rng.PILOT_STREAM, trial, point)
    r = trial_rates(field, cfg, seed=seed, **kw)
    return r.fas_perfect, r.fas_imperfect, r.tas, r.n_samples


def _stderr(x):
    return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0


def monte_carlo_rates(
    sweep: str,
    values,
    *,
    field_config: FieldConfig | None = None,
    rate_config: RateConfig | None = None,
    dim: int = 2,
    width: float = 2.0,
    lobe_order: int = 0,
    distance=None,
    density: int = 32,
    trials: int = 100,
    seed=0,
    jobs: int = 1,
    keep_trials: bool = False,
) -> list[RatePoint]:
    """Sweep ``"z_p"`` or ``"width"`` and average the three rates per point.

    Trial ``t`` uses the same field realization at every sweep point; pilot
    noise streams differ per point. Results do not depend on ``jobs``.
    """
    if sweep not in ("z_p", "width"):
        raise ValueError(f"sweep must be 'z_p' or 'width', got {sweep!r}")
    if trials < 1:
        raise DomainError("trials must be >= 1")
    field_config = field_config or FieldConfig(dim=dim)
    base = rate_config or RateConfig()
    points = []
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for p, value in enumerate(values):
            cfg = replace(base, z_p=int(value)) if sweep == "z_p" else base
            kw = dict(dim=dim, width=float(value) if sweep == "width" else width,
                      lobe_order=lobe_order, distance=distance, density=density)
            tasks = [(field_config, seed, t, p, cfg, kw) for t in range(trials)]
            rows = list(pool.map(_run_trial, tasks, chunksize=max(1, trials // (4 * jobs)))) if pool \
                else [_run_trial(task) for task in tasks]
            arr = np.array(rows, dtype=float)
            n = int(arr[0, 3])
            pilots = n * cfg.z_p
            points.append(RatePoint(
                sweep_var=sweep,
                value=float(value),
                trials=trials,
                fas_perfect_mean=float(arr[:, 0].mean()),
                fas_imperfect_mean=float(arr[:, 1].mean()),
                tas_mean=float(arr[:, 2].mean()),
                fas_perfect_stderr=_stderr(arr[:, 0]),
                fas_imperfect_stderr=_stderr(arr[:, 1]),
                tas_stderr=_stderr(arr[:, 2]),
                n_samples=n,
                pilot_symbols=pilots,
                data_symbols=cfg.coherence - pilots,
                budget_feasible=pilots < cfg.coherence,
                dominance_ok=bool(np.all(arr[:, 0] >= arr[:, 2]) and np.all(arr[:, 1] <= arr[:, 0])),
                per_trial=arr[:, :3].copy() if keep_trials else None,
            ))
    finally:
        if pool is not None:
            pool.shutdown()
    return points
