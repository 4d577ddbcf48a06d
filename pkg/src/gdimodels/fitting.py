"""Least-squares fitting at a fixed exponent, information criteria, and F-tests.

Fits are ordinary least squares through a QR decomposition (never the normal
equations). Exactly collinear columns are dropped deterministically, later
columns first, and surfaced on the result. The Gaussian log-likelihood uses
the maximum-likelihood variance ``rss / n`` so information criteria and the
profile likelihood share one convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    NotNestedError,
    PerfectFitError,
    ZeroResidualDfError,
)
from .interactions import ModelMatrix
from .stats import f_sf

LOG_2PI = math.log(2.0 * math.pi)

# A fit is treated as perfect (zero residual) when its rss is this small
# relative to the response's sum of squares; genuine residual noise in the
# studies sits twenty orders of magnitude higher, numerical noise ten lower.
PERFECT_FIT_RTOL = 1e-12


def gaussian_loglik(rss: float, n: int) -> float:
    """Profile Gaussian log-likelihood at the ML variance ``rss / n``."""
    if rss <= 0.0:
        return math.inf
    return -0.5 * n * (LOG_2PI + math.log(rss / n) + 1.0)


@dataclass(frozen=True)
class FitResult:
    """One least-squares fit at a fixed exponent."""

    coefficients: dict[str, float]
    rss: float
    n: int
    p: int
    theta_used: float
    theta_was_estimated: bool = False
    perfect_fit: bool = False
    dropped_columns: tuple[str, ...] = ()

    @property
    def sigma2_mle(self) -> float:
        return self.rss / self.n

    @property
    def loglik(self) -> float:
        if self.perfect_fit:
            return math.inf
        return gaussian_loglik(self.rss, self.n)

    @property
    def k(self) -> int:
        """Parameter count for information criteria: coefficients, the error
        variance, and the exponent when it was estimated."""
        return self.p + 1 + (1 if self.theta_was_estimated else 0)

    def to_dict(self) -> dict:
        out = {
            "coefficients": dict(self.coefficients),
            "rss": self.rss,
            "n": self.n,
            "p": self.p,
            "sigma2_mle": self.sigma2_mle,
            "loglik": self.loglik,
            "theta_used": self.theta_used,
            "theta_was_estimated": self.theta_was_estimated,
            "perfect_fit": self.perfect_fit,
            "dropped_columns": list(self.dropped_columns),
        }
        out["aic"] = None if self.perfect_fit else aic(self)
        out["bic"] = None if self.perfect_fit else bic(self)
        return out


def ols(matrix: ModelMatrix | np.ndarray, response: np.ndarray,
        theta_was_estimated: bool = False) -> FitResult:
    """Ordinary least squares via QR with deterministic collinearity handling.

    Columns that are numerically dependent on earlier columns are dropped
    (so the later column in any exact dependency goes first) and reported in
    ``dropped_columns``. The residual sum of squares is computed from the
    orthogonal projection, and a numerically-zero rss is flagged as a perfect
    fit with an infinite log-likelihood.
    """
    if isinstance(matrix, ModelMatrix):
        values = matrix.values
        names = list(matrix.columns)
        theta_used = matrix.theta_used
    else:
        values = np.asarray(matrix, dtype=float)
        names = [f"x{i + 1}" for i in range(values.shape[1])]
        theta_used = 1.0
    y = np.asarray(response, dtype=float).ravel()
    n, p = values.shape
    if len(y) != n:
        raise DimensionMismatchError(
            f"matrix has {n} rows but the response has {len(y)} entries")
    if p > n:
        raise DimensionMismatchError(f"more columns ({p}) than observations ({n})")

    q, r = np.linalg.qr(values)
    diag = np.abs(np.diag(r))
    tol = max(n, p) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    keep = diag > tol
    dropped = tuple(name for name, k in zip(names, keep) if not k)
    if dropped:
        values = values[:, keep]
        names = [name for name, k in zip(names, keep) if k]
        q, r = np.linalg.qr(values)

    qty = q.T @ y
    coef = np.linalg.solve(r, qty) if names else np.zeros(0)
    resid = y - q @ qty
    rss = float(resid @ resid)
    tss = float(y @ y)
    perfect = rss <= PERFECT_FIT_RTOL * max(tss, 1.0)
    return FitResult(
        coefficients=dict(zip(names, coef.tolist())),
        rss=rss,
        n=n,
        p=len(names),
        theta_used=float(theta_used),
        theta_was_estimated=theta_was_estimated,
        perfect_fit=perfect,
        dropped_columns=dropped,
    )


def aic(fit: FitResult) -> float:
    """Akaike information criterion, ``-2 loglik + 2 k``."""
    if fit.perfect_fit:
        raise PerfectFitError("information criteria are undefined for a zero-residual fit")
    return -2.0 * fit.loglik + 2.0 * fit.k


def bic(fit: FitResult) -> float:
    """Bayesian information criterion, ``-2 loglik + k ln(n)``."""
    if fit.perfect_fit:
        raise PerfectFitError("information criteria are undefined for a zero-residual fit")
    return -2.0 * fit.loglik + fit.k * math.log(fit.n)


@dataclass(frozen=True)
class FTestResult:
    f: float
    df1: int
    df2: int
    p_value: float

    def to_dict(self) -> dict:
        return {"f": self.f, "df1": self.df1, "df2": self.df2, "p_value": self.p_value}


def f_test(reduced: FitResult, full: FitResult) -> FTestResult:
    """F-test of a reduced fit against a full fit on the same data and exponent."""
    if reduced.n != full.n:
        raise NotNestedError("fits use different numbers of observations")
    if full.p <= reduced.p:
        raise NotNestedError(
            f"the full model must have more coefficients ({full.p} <= {reduced.p})")
    if full.perfect_fit or full.rss <= 0.0:
        raise PerfectFitError("the full model has zero residual sum of squares")
    if full.n == full.p:
        raise ZeroResidualDfError("the full model leaves no residual degrees of freedom")
    diff = reduced.rss - full.rss
    if diff < -1e-8 * max(reduced.rss, 1.0):
        raise NotNestedError(
            "the reduced model fits better than the full model; fits are not nested")
    diff = max(diff, 0.0)
    df1 = full.p - reduced.p
    df2 = full.n - full.p
    f = (diff / df1) / (full.rss / df2)
    return FTestResult(f=f, df1=df1, df2=df2, p_value=f_sf(f, df1, df2))
