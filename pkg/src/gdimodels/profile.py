"""Profile-likelihood estimation of the interaction exponent.

The exponent is profiled by refitting the linear coefficients at each
candidate value; the resulting one-dimensional log-likelihood is maximized by
a 101-point grid pre-scan followed by golden-section refinement inside the
bracketing cell. Confidence intervals invert the likelihood-ratio inequality
``l(theta) >= l_max - chi2_quantile(1 - alpha, 1) / 2`` by bisection after a
geometric bracketing expansion; a side with no crossing inside the search
interval is reported as non-convergent rather than raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import Design
from .exceptions import DimensionMismatchError, NoInteractionTermsError
from .fitting import FitResult, gaussian_loglik, ols, PERFECT_FIT_RTOL
from .interactions import InteractionSpec, MatrixBuilder
from .stats import chi2_quantile, chi2_sf

#: Hard lower limit for the exponent search (the profile degenerates as theta -> 0).
THETA_FLOOR = 0.01
DEFAULT_BOUNDS = (0.01, 2.5)
GRID_POINTS = 101
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LRTestResult:
    """Likelihood-ratio test of the fitted exponent against 1."""

    statistic: float
    p_value: float
    significant: bool

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value,
                "significant": self.significant}


@dataclass(frozen=True)
class ThetaEstimate:
    """Profile-likelihood estimate of the exponent with CI and test against 1."""

    theta_hat: float
    loglik_max: float
    ci_lower: float | None
    ci_upper: float | None
    alpha: float
    lr_vs_one: LRTestResult
    fit: FitResult
    boundary_maximum: bool = False
    degenerate_ci: bool = False

    @property
    def ci_converged(self) -> bool:
        """Both interval sides were found inside the search bounds."""
        return (self.ci_lower is not None and self.ci_upper is not None
                and not self.degenerate_ci)

    def covers(self, theta_true: float) -> bool | None:
        """Whether the converged CI contains ``theta_true`` (None if not converged)."""
        if not self.ci_converged:
            return None
        return self.ci_lower <= theta_true <= self.ci_upper

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat,
            "loglik_max": self.loglik_max,
            "ci": {
                "lower": "non_convergent" if self.ci_lower is None else self.ci_lower,
                "upper": "non_convergent" if self.ci_upper is None else self.ci_upper,
            },
            "alpha": self.alpha,
            "lr_vs_one": self.lr_vs_one.to_dict(),
            "boundary_maximum": self.boundary_maximum,
            "degenerate_ci": self.degenerate_ci,
            "fit": self.fit.to_dict(),
        }


class ProfileEngine:
    """Caches the theta-independent matrix pieces for repeated profile evaluations."""

    def __init__(self, design: Design, response: np.ndarray, spec: InteractionSpec):
        self.builder = MatrixBuilder(design, spec)
        self.y = np.asarray(response, dtype=float).ravel()
        if len(self.y) != self.builder.n_rows:
            raise DimensionMismatchError(
                f"response has {len(self.y)} entries but the design expands to "
                f"{self.builder.n_rows} rows")
        if not np.all(np.isfinite(self.y)):
            raise DimensionMismatchError("response contains non-finite values")
        self.n = len(self.y)
        self._perfect_rss = PERFECT_FIT_RTOL * max(float(self.y @ self.y), 1.0)
        self._cache: dict[float, float] = {}

    def loglik(self, theta: float) -> float:
        """Profile log-likelihood at ``theta`` (+inf for a numerically perfect fit)."""
        cached = self._cache.get(theta)
        if cached is not None:
            return cached
        values = self.builder.matrix_values(theta)
        q, r = np.linalg.qr(values)
        diag = np.abs(np.diag(r))
        tol = max(values.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
        keep = diag > tol
        if not keep.all():
            q, _ = np.linalg.qr(values[:, keep])
        resid = self.y - q @ (q.T @ self.y)
        rss = float(resid @ resid)
        out = math.inf if rss <= self._perfect_rss else gaussian_loglik(rss, self.n)
        self._cache[theta] = out
        return out

    def fit(self, theta: float, theta_was_estimated: bool) -> FitResult:
        return ols(self.builder.matrix(theta), self.y,
                   theta_was_estimated=theta_was_estimated)


def profile_loglik(design: Design, response: np.ndarray, spec: InteractionSpec,
                   theta: float) -> float:
    """Profile log-likelihood of one exponent value (coefficients maximized out)."""
    return ProfileEngine(design, response, spec).loglik(theta)


def _check_bounds(bounds) -> tuple[float, float]:
    lo, hi = float(bounds[0]), float(bounds[1])
    if lo < THETA_FLOOR:
        raise ValueError(f"the search interval must start at or above {THETA_FLOOR}")
    if hi <= lo:
        raise ValueError("the search interval is empty")
    return lo, hi


def _golden_maximum(engine: ProfileEngine, lo: float, hi: float,
                    tol: float) -> tuple[float, float]:
    """Grid pre-scan plus golden-section refinement; returns (theta, loglik).

    Grid ties break toward the smaller theta. A perfect-fit (+inf) evaluation
    is returned immediately.
    """
    grid = np.linspace(lo, hi, GRID_POINTS)
    best_t, best_v = grid[0], -math.inf
    best_i = 0
    for i, t in enumerate(grid):
        v = engine.loglik(float(t))
        if math.isinf(v) and v > 0:
            return float(t), v
        if v > best_v:
            best_t, best_v, best_i = float(t), v, i
    a = float(grid[max(best_i - 1, 0)])
    b = float(grid[min(best_i + 1, GRID_POINTS - 1)])
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = engine.loglik(c)
    fd = engine.loglik(d)
    for t, v in ((c, fc), (d, fd)):
        if math.isinf(v) and v > 0:
            return t, v
        if v > best_v:
            best_t, best_v = t, v
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = engine.loglik(c)
            if math.isinf(fc) and fc > 0:
                return c, fc
            if fc > best_v:
                best_t, best_v = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = engine.loglik(d)
            if math.isinf(fd) and fd > 0:
                return d, fd
            if fd > best_v:
                best_t, best_v = d, fd
    return best_t, best_v


def _ci_root(loglik_fn, theta_hat: float, target: float, side: int,
             lo: float, hi: float, xtol: float = 1e-6) -> float | None:
    """Root of ``loglik(theta) - target`` on one side of the maximum.

    Brackets by geometric expansion toward the bound, then bisects. Returns
    None when the likelihood never drops to the target inside the interval
    (the non-convergent boundary case).
    """
    bound = lo if side < 0 else hi
    h = 1e-3
    prev = theta_hat
    while True:
        x = theta_hat + side * h
        if (side < 0 and x <= bound) or (side > 0 and x >= bound):
            x = bound
        if loglik_fn(x) - target < 0.0:
            inside, outside = prev, x
            while abs(outside - inside) > xtol:
                mid = 0.5 * (inside + outside)
                if loglik_fn(mid) - target < 0.0:
                    outside = mid
                else:
                    inside = mid
            return 0.5 * (inside + outside)
        if x == bound:
            return None
        prev = x
        h *= 2.0


def _lr_vs_one(engine: ProfileEngine, loglik_max: float, alpha: float) -> LRTestResult:
    loglik_one = engine.loglik(1.0)
    if math.isinf(loglik_max) and math.isinf(loglik_one):
        statistic = 0.0
    elif math.isinf(loglik_max):
        statistic = math.inf
    else:
        statistic = max(0.0, 2.0 * (loglik_max - loglik_one))
    p_value = 0.0 if math.isinf(statistic) else chi2_sf(statistic, 1)
    return LRTestResult(statistic=statistic, p_value=p_value,
                        significant=p_value < alpha)


def estimate_theta(design: Design, response: np.ndarray, spec: InteractionSpec,
                   bounds=DEFAULT_BOUNDS, tol: float = 1e-5, alpha: float = 0.05,
                   compute_ci: bool = True) -> ThetaEstimate:
    """Estimate the exponent by maximizing the profile log-likelihood.

    Parameters
    ----------
    design, response, spec
        The data and interaction structure. The structure must carry at least
        one interaction column.
    bounds : (float, float)
        Search interval; the lower end may not go below 0.01.
    tol : float
        Width of the final golden-section bracket.
    alpha : float
        Complement of the confidence level for the CI and the test against 1.
    compute_ci : bool
        Skip the (comparatively expensive) interval inversion when False.

    Returns
    -------
    ThetaEstimate
        Estimate, maximized log-likelihood, per-side CI bounds (None when a
        side does not converge), the LR test against ``theta = 1``, and the
        fit at the estimate. ``boundary_maximum`` is set when the estimate
        lies within ``tol`` of a search bound.
    """
    if not spec.has_theta:
        raise NoInteractionTermsError(
            f"the {spec.family} family has no interaction terms to estimate theta for")
    lo, hi = _check_bounds(bounds)
    engine = ProfileEngine(design, response, spec)
    theta_hat, loglik_max = _golden_maximum(engine, lo, hi, tol)
    degenerate = math.isinf(loglik_max)

    if not degenerate and lo <= 1.0 <= hi:
        loglik_one = engine.loglik(1.0)
        if loglik_one > loglik_max:
            theta_hat, loglik_max = 1.0, loglik_one
            degenerate = math.isinf(loglik_max)

    lr = _lr_vs_one(engine, loglik_max, alpha)

    if degenerate:
        ci_lower = ci_upper = theta_hat
    elif compute_ci:
        target = loglik_max - 0.5 * chi2_quantile(1.0 - alpha, 1)
        ci_lower = _ci_root(engine.loglik, theta_hat, target, -1, lo, hi)
        ci_upper = _ci_root(engine.loglik, theta_hat, target, +1, lo, hi)
    else:
        ci_lower = ci_upper = None

    return ThetaEstimate(
        theta_hat=theta_hat,
        loglik_max=loglik_max,
        ci_lower=ci_lower,
        ci_upper=ci_upper,
        alpha=alpha,
        lr_vs_one=lr,
        fit=engine.fit(theta_hat, theta_was_estimated=True),
        boundary_maximum=(theta_hat - lo <= tol or hi - theta_hat <= tol),
        degenerate_ci=degenerate,
    )


def theta_ci(design: Design, response: np.ndarray, spec: InteractionSpec,
             theta_hat: float, alpha: float = 0.05,
             bounds=DEFAULT_BOUNDS) -> tuple[float | None, float | None]:
    """Profile-likelihood CI around an existing estimate.

    Each side is the root of ``l(theta) = l(theta_hat) - chi2(1, 1 - alpha)/2``
    on its side of the estimate; a side without a crossing inside ``bounds``
    is returned as None (non-convergent), not raised.
    """
    lo, hi = _check_bounds(bounds)
    engine = ProfileEngine(design, response, spec)
    loglik_max = engine.loglik(theta_hat)
    if math.isinf(loglik_max):
        return theta_hat, theta_hat
    target = loglik_max - 0.5 * chi2_quantile(1.0 - alpha, 1)
    return (_ci_root(engine.loglik, theta_hat, target, -1, lo, hi),
            _ci_root(engine.loglik, theta_hat, target, +1, lo, hi))


def lr_test_theta(design: Design, response: np.ndarray, spec: InteractionSpec,
                  theta_hat: float, alpha: float = 0.05) -> LRTestResult:
    """Likelihood-ratio test of ``theta = theta_hat`` against ``theta = 1``."""
    engine = ProfileEngine(design, response, spec)
    return _lr_vs_one(engine, engine.loglik(theta_hat), alpha)
