"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numbers

import numpy as np

from .binary_core import MarginalSummary, SummaryCollection
from .exceptions import DomainError

BINARY_COLUMNS = ("n", "x", "y")
CONTINUOUS_COLUMNS = ("n", "m1", "m2", "s1", "s2")


def _frame_columns(X, columns):
    # pandas-like input: select by name so column order does not matter
    if hasattr(X, "columns"):
        missing = [c for c in columns if c not in X.columns]
        if missing:
            raise DomainError(f"missing columns: {', '.join(missing)}")
        return np.column_stack([np.asarray(X[c]) for c in columns])
    return X


def check_binary_summaries(X) -> SummaryCollection:
    """Coerce ``X`` into a :class:`SummaryCollection`.

    Accepts a collection, a sequence of :class:`MarginalSummary`, an array-like
    of shape ``(k, 3)`` with integer columns ``n, x, y``, or a DataFrame with
    those column names.
    """
    if isinstance(X, SummaryCollection):
        return X
    if isinstance(X, (list, tuple)) and X and all(isinstance(r, MarginalSummary) for r in X):
        return SummaryCollection(tuple(X))
    arr = np.asarray(_frame_columns(X, BINARY_COLUMNS))
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DomainError(f"expected an array of shape (k, 3) with columns n, x, y; got {arr.shape}")
    if arr.shape[0] == 0:
        raise DomainError("at least one study is required")
    if not np.issubdtype(arr.dtype, np.number):
        raise DomainError(f"counts must be numeric, got dtype {arr.dtype}")
    if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
        raise DomainError("counts must be finite integers")
    records = []
    for i, (n, x, y) in enumerate(arr.astype(np.int64)):
        try:
            records.append(MarginalSummary(int(n), int(x), int(y)))
        except DomainError as exc:
            raise DomainError(f"row {i}: {exc}") from None
    return SummaryCollection(tuple(records))


def check_continuous_summaries(X):
    """Coerce ``X`` into a list of :class:`~margjoint.gauss_corr.ContinuousStudySummary`."""
    from .gauss_corr import ContinuousStudySummary

    if isinstance(X, (list, tuple)) and X and all(isinstance(r, ContinuousStudySummary) for r in X):
        return list(X)
    arr = np.asarray(_frame_columns(X, CONTINUOUS_COLUMNS), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 5:
        raise DomainError(
            f"expected an array of shape (J, 5) with columns n, m1, m2, s1, s2; got {arr.shape}"
        )
    out = []
    for i, row in enumerate(arr):
        try:
            out.append(ContinuousStudySummary(*row))
        except DomainError as exc:
            raise DomainError(f"row {i}: {exc}") from None
    return out


def check_probability(value, name: str, *, open_interval: bool = True) -> float:
    if not isinstance(value, numbers.Real):
        raise DomainError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    ok = 0.0 < value < 1.0 if open_interval else 0.0 <= value <= 1.0
    if not ok:
        bounds = "(0, 1)" if open_interval else "[0, 1]"
        raise DomainError(f"{name} must lie in {bounds}, got {value}")
    return value
