"""Input checks shared by the estimators and the functional API.

scikit-learn's ``check_array`` refuses complex input, so channel values get
their own helpers here; positions still go through ``check_array``.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array


class DomainError(ValueError):
    """An argument lies outside the set the operation is defined on."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, estimate, tolerance):
        super().__init__(f"{message} (estimate={estimate!r}, tolerance={tolerance!r})")
        self.estimate = estimate
        self.tolerance = tolerance


class BudgetWarning(UserWarning):
    """The pilot budget does not fit in the coherence block."""


def check_positive(value, name, *, allow_inf=False) -> float:
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if np.isnan(value) or value <= 0 or (np.isinf(value) and not allow_inf):
        raise DomainError(f"{name} must be positive and finite, got {value}")
    return value


def check_lobe_order(d) -> int:
    if not isinstance(d, numbers.Integral) or isinstance(d, bool):
        raise TypeError(f"lobe order must be an integer, got {type(d).__name__}")
    if d < 0:
        raise DomainError(f"lobe order must be >= 0, got {d}")
    return int(d)


def check_positions(X, ndim: int) -> np.ndarray:
    """Return positions as a float array of shape ``(n, ndim)``.

    A 1D array is accepted as ``n`` positions when ``ndim == 1``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    if X.ndim == 1:
        if ndim == 1:
            X = X[:, None]
        elif X.shape[0] == ndim:
            X = X[None, :]
    X = check_array(X, dtype=float, ensure_min_samples=1)
    if X.shape[1] != ndim:
        raise DomainError(f"expected {ndim}-dimensional positions, got {X.shape[1]} columns")
    return X


def check_complex_values(y, n: int | None = None) -> np.ndarray:
    y = np.asarray(y)
    if y.dtype == object or not np.issubdtype(y.dtype, np.number):
        raise TypeError("channel values must be numeric")
    y = np.ravel(y).astype(complex)
    if not np.all(np.isfinite(y)):
        raise DomainError("channel values must be finite")
    if n is not None and y.shape[0] != n:
        raise DomainError(f"expected {n} values, got {y.shape[0]}")
    return y


def uniform_spacing(axis: np.ndarray, *, rtol: float = 1e-9) -> float:
    """Spacing of a strictly increasing uniform axis; raises if nonuniform."""
    axis = np.asarray(axis, dtype=float)
    if axis.size < 2:
        raise DomainError("need at least two points to define a spacing")
    steps = np.diff(axis)
    step = float(np.mean(steps))
    if step <= 0 or np.max(np.abs(steps - step)) > rtol * step:
        raise DomainError("points are not uniformly spaced")
    return step
