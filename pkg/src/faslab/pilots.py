"""Pilot-based maximum-likelihood channel estimation.

Each sampling position gets a sub-block of ``z_p`` known pilot symbols
``q_z`` with ``|q_z|**2 = P/2``, received in complex AWGN of ``N0/2`` per
real dimension. The MLE ``q^H r / ||q||^2`` is unbiased and its real part
has error variance ``1 / (z_p * SNR)`` with ``SNR = P / N0``; the imaginary
part is an independent copy.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _rng
from ._validation import BudgetWarning, DomainError, check_positive

__all__ = [
    "PilotConfig",
    "CiSpec",
    "PilotBudget",
    "PilotMLE",
    "db_to_linear",
    "linear_to_db",
    "pilot_sequence",
    "simulate_pilots",
    "mle_estimate",
    "ci_probability",
    "min_pilots",
    "min_pilots_closed_form",
    "pilot_budget",
]


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class PilotConfig:
    """Pilot sub-block parameters.

    ``snr`` is the linear ratio ``P / N0``; ``math.inf`` gives noiseless
    pilots. Use :meth:`from_db` at interfaces that speak decibels.
    """

    z_p: int = 7
    snr: float = 100.0
    power: float = 1.0

    def __post_init__(self):
        if not isinstance(self.z_p, (int, np.integer)) or isinstance(self.z_p, bool) or self.z_p < 1:
            raise DomainError(f"z_p must be a positive integer, got {self.z_p!r}")
        check_positive(self.snr, "snr", allow_inf=True)
        check_positive(self.power, "power")

    @classmethod
    def from_db(cls, z_p: int = 7, snr_db: float = 20.0, power: float = 1.0) -> "PilotConfig":
        return cls(z_p=z_p, snr=db_to_linear(snr_db), power=power)

    @property
    def snr_db(self) -> float:
        return linear_to_db(self.snr)

    @property
    def noise_level(self) -> float:
        """``N0``; the noise variance per real dimension is half of it."""
        return self.power / self.snr

    @property
    def error_variance(self) -> float:
        """Variance of the real-part estimation error, ``1 / (z_p SNR)``."""
        return 1.0 / (self.z_p * self.snr)


@dataclass(frozen=True)
class CiSpec:
    epsilon: float
    gamma: float

    def __post_init__(self):
        check_positive(self.epsilon, "epsilon")
        if not 0.0 < self.gamma < 1.0:
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma!r}")


def pilot_sequence(config: PilotConfig) -> np.ndarray:
    """Known pilot symbols: the constant ``sqrt(P/2) * exp(j*pi/4)``.

    Any sequence with ``||q||^2 = z_p P / 2`` gives the same estimator
    statistics; a constant keeps runs reproducible.
    """
    q = math.sqrt(config.power / 2.0) * complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
    return np.full(config.z_p, q, dtype=complex)


def simulate_pilots(h_true, config: PilotConfig, seed=None) -> np.ndarray:
    """Received pilot vectors ``r = h q + w``, shape ``(*h.shape, z_p)``."""
    h = np.asarray(h_true, dtype=complex)
    q = pilot_sequence(config)
    r = h[..., None] * q
    if math.isinf(config.snr):
        return r
    rng = _rng.generator(seed)
    sigma = math.sqrt(config.noise_level / 2.0)
    noise = rng.standard_normal((2, *r.shape))
    return r + sigma * (noise[0] + 1j * noise[1])


def mle_estimate(received, pilots) -> np.ndarray | complex:
    """Maximum-likelihood channel estimate ``q^H r / ||q||^2``.

    ``received`` may carry leading batch axes; the last axis is the sub-block.
    """
    q = np.asarray(pilots, dtype=complex)
    energy = float(np.vdot(q, q).real)
    if energy == 0.0:
        raise DomainError("pilot vector has zero energy")
    r = np.asarray(received, dtype=complex)
    if r.shape[-1] != q.shape[0]:
        raise DomainError(f"received sub-block has {r.shape[-1]} symbols, pilots have {q.shape[0]}")
    est = r @ q.conj() / energy
    return est[()] if est.ndim == 0 else est


class PilotMLE(TransformerMixin, BaseEstimator):
    """scikit-learn wrapper around :func:`mle_estimate`.

    ``transform`` maps received sub-blocks ``(n, z_p)`` to ``n`` channel
    estimates. ``pilots=None`` uses :func:`pilot_sequence`.
    """

    def __init__(self, z_p=7, power=1.0, pilots=None):
        self.z_p = z_p
        self.power = power
        self.pilots = pilots

    def fit(self, X=None, y=None):
        if self.pilots is None:
            q = pilot_sequence(PilotConfig(z_p=self.z_p, power=self.power))
        else:
            q = np.asarray(self.pilots, dtype=complex).ravel()
        if not np.any(q):
            raise DomainError("pilot vector has zero energy")
        self.pilots_ = q
        self.n_features_in_ = q.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self, "pilots_")
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        return mle_estimate(X, self.pilots_)


def _as_epsilon(spec) -> float:
    return spec.epsilon if isinstance(spec, CiSpec) else check_positive(spec, "epsilon")


def ci_probability(spec, z_p, snr) -> float | np.ndarray:
    """``P(|Re(h_hat - h)| < eps) = erf(eps * sqrt(z_p SNR / 2))``.

    ``spec`` is a :class:`CiSpec` or a bare epsilon.
    """
    eps = _as_epsilon(spec)
    return special.erf(eps * np.sqrt(np.asarray(z_p, dtype=float) * snr / 2.0))


def min_pilots(spec: CiSpec, snr: float) -> int:
    """Smallest ``z_p`` whose confidence reaches ``spec.gamma``.

    Bracket by doubling, then bisect; ``ci_probability`` is increasing in
    ``z_p`` so this returns the exact minimum.
    """
    if not isinstance(spec, CiSpec):
        raise TypeError("min_pilots needs a CiSpec")
    if spec.gamma >= 1.0:
        raise DomainError("confidence 1 is unreachable with finite pilots")
    snr = check_positive(snr, "snr")

    def ok(z):
        return ci_probability(spec, z, snr) >= spec.gamma

    hi = 1
    while not ok(hi):
        hi *= 2
        if hi > 2**62:
            raise DomainError("confidence target unreachable")
    lo = hi // 2  # ok(lo) is False unless hi == 1
    if hi == 1:
        return 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def min_pilots_closed_form(spec: CiSpec, snr: float) -> int:
    """``ceil(2 (erfinv(gamma) / eps)**2 / SNR)``, floored at 1."""
    z = 2.0 * (special.erfinv(spec.gamma) / spec.epsilon) ** 2 / snr
    return max(1, math.ceil(z))


@dataclass(frozen=True)
class PilotBudget:
    z_p: int
    n_samples: int
    pilot_symbols: int
    coherence: int | None
    data_symbols: int | None
    feasible: bool

    @property
    def pre_log(self) -> float:
        """Fraction of the coherence block left for data, clipped at 0."""
        if self.coherence is None:
            return 1.0
        return max(0.0, 1.0 - self.pilot_symbols / self.coherence)


def pilot_budget(z_p: int, n_samples: int, coherence: int | None = None) -> PilotBudget:
    """Total pilot symbols ``z_p * N`` and, given ``Z``, the data symbols left.

    A budget that consumes the whole block is reported as infeasible and a
    :class:`BudgetWarning` is emitted; it is not an error.
    """
    if z_p < 1 or n_samples < 1:
        raise DomainError("z_p and the sample count must be positive")
    total = int(z_p) * int(n_samples)
    if coherence is None:
        return PilotBudget(int(z_p), int(n_samples), total, None, None, True)
    feasible = total < coherence
    if not feasible:
        warnings.warn(
            f"pilot budget {total} does not fit in a coherence block of {coherence} symbols",
            BudgetWarning,
            stacklevel=2,
        )
    return PilotBudget(int(z_p), int(n_samples), total, int(coherence), int(coherence) - total, feasible)
