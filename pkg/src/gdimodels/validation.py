"""Input validation helpers shared by the estimator API and the CLI."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .design import Community, Design
from .exceptions import DimensionMismatchError, NegativeProportionError, SumNotOneError

#: Estimator inputs may be off the simplex by up to this much per row; rows
#: inside the tolerance are rescaled to sum to one exactly.
PROPORTION_ATOL = 1e-6


def check_proportions(X, species_count: int | None = None) -> np.ndarray:
    """Validate a proportions matrix: finite, non-negative rows summing to 1.

    Rows within :data:`PROPORTION_ATOL` of the simplex are renormalized;
    anything further off raises. Returns a float64 copy.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise DimensionMismatchError("expected a 2-D array of species proportions")
    if species_count is not None and X.shape[1] != species_count:
        raise DimensionMismatchError(
            f"expected {species_count} species columns, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise DimensionMismatchError("proportions contain non-finite values")
    if np.any(X < 0):
        row = int(np.argwhere(X < 0)[0][0])
        raise NegativeProportionError(f"row {row + 1} has a negative proportion")
    sums = X.sum(axis=1)
    off = np.abs(sums - 1.0)
    if np.any(off > PROPORTION_ATOL):
        row = int(np.argmax(off))
        raise SumNotOneError(
            f"row {row + 1} proportions sum to {sums[row]!r}, not 1")
    return X / sums[:, None]


def check_response(y, n_rows: int) -> np.ndarray:
    """Validate a response vector: 1-D, finite, matching the design length."""
    y = np.asarray(y, dtype=float).ravel()
    if len(y) != n_rows:
        raise DimensionMismatchError(
            f"response has {len(y)} entries, expected {n_rows}")
    if not np.all(np.isfinite(y)):
        raise DimensionMismatchError("response contains non-finite values")
    return y


def _frame_to_design(X) -> Design:
    # Duck-typed DataFrame support: p1..ps columns plus optional structure columns.
    columns = [str(c) for c in X.columns]
    s = 0
    while s < len(columns) and columns[s] == f"p{s + 1}":
        s += 1
    if s == 0:
        raise DimensionMismatchError(
            "data-frame input needs proportion columns named p1, p2, ...")
    props = check_proportions(np.column_stack([np.asarray(X[c], dtype=float)
                                               for c in columns[:s]]))
    extras = columns[s:]
    comms = []
    for i in range(props.shape[0]):
        structures = None
        if extras:
            structures = {}
            for name in extras:
                value = X[name].iloc[i] if hasattr(X[name], "iloc") else X[name][i]
                structures[name.removeprefix("struct:")] = (
                    value if isinstance(value, str) else float(value))
        comms.append(Community(tuple(props[i]), structures))
    return Design(tuple(comms), tuple([1] * len(comms)))


def as_design(X) -> Design:
    """Coerce estimator input to a :class:`Design`.

    Accepts a Design (passed through), a 2-D array of proportions, or a
    pandas-style frame with ``p1..ps`` columns and optional structure columns.
    """
    if isinstance(X, Design):
        return X
    if hasattr(X, "columns"):
        return _frame_to_design(X)
    props = check_proportions(X)
    comms = tuple(Community(tuple(row)) for row in props)
    return Design(comms, tuple([1] * len(comms)))


def parse_grouping(text: str | Sequence[str] | None) -> tuple[str, ...] | None:
    """Parse a grouping argument like ``"1,1,2,2"`` into per-species labels."""
    if text is None:
        return None
    if isinstance(text, str):
        labels = [part.strip() for part in text.split(",")]
    else:
        labels = [str(part).strip() for part in text]
    if not labels or any(not lab for lab in labels):
        raise ValueError("grouping must list one non-empty label per species")
    return tuple(labels)


def exact_binomial_interval(successes_rate: float, n: int,
                            confidence: float = 0.99) -> tuple[float, float]:
    """Exact (Clopper-Pearson) confidence interval for a binomial proportion.

    Used to band Monte Carlo coverage rates; solved by bisection on the
    binomial tail sums directly.
    """
    k = round(successes_rate * n)
    tail = (1.0 - confidence) / 2.0

    def upper_tail(p: float) -> float:
        # P(X >= k)
        if k <= 0:
            return 1.0
        q = 1.0 - p
        total = 0.0
        for i in range(k, n + 1):
            total += math.comb(n, i) * p ** i * q ** (n - i)
        return total

    def lower_tail(p: float) -> float:
        # P(X <= k)
        q = 1.0 - p
        total = 0.0
        for i in range(0, k + 1):
            total += math.comb(n, i) * p ** i * q ** (n - i)
        return total

    lo = 0.0
    if k > 0:
        a, b = 0.0, 1.0
        for _ in range(100):
            mid = 0.5 * (a + b)
            if upper_tail(mid) < tail:
                a = mid
            else:
                b = mid
        lo = 0.5 * (a + b)
    hi = 1.0
    if k < n:
        a, b = 0.0, 1.0
        for _ in range(100):
            mid = 0.5 * (a + b)
            if lower_tail(mid) > tail:
                a = mid
            else:
                b = mid
        hi = 0.5 * (a + b)
    return lo, hi
