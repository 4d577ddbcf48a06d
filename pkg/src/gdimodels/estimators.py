"""scikit-learn style estimators wrapping the functional core.

:class:`DIRegressor` fits one interaction structure (optionally estimating
the exponent); :class:`InteractionSelector` runs a model-selection procedure
over the candidate structures and exposes the winner as a fitted regressor.
Both accept a plain ``(n, s)`` proportions array, a :class:`~gdimodels.design.Design`,
or a pandas-style frame with ``p1..ps`` columns.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .design import Design
from .exceptions import GdiError
from .fitting import ols
from .interactions import (
    AVERAGE_PAIRWISE,
    FULL_PAIRWISE,
    InteractionSpec,
    MatrixBuilder,
    structure_levels,
)
from .profile import DEFAULT_BOUNDS, estimate_theta
from .selection import default_candidates, select
from .validation import as_design, check_response, parse_grouping


class DIRegressor(RegressorMixin, BaseEstimator):
    """Diversity-interactions regression with an optional estimated exponent.

    Parameters
    ----------
    family : str
        Interaction structure; one of the names in
        :data:`gdimodels.interactions.FAMILIES`.
    grouping : sequence of str or str, optional
        Group label per species (``"1,1,2,2"`` also accepted). Needed for the
        functional-group family.
    theta : float or "estimate"
        Fix the exponent, or estimate it by profile likelihood. Ignored by
        families without interaction terms.
    reparameterize : bool
        Use the centroid-invariant scaling of the interaction columns.
    theta_bounds, theta_tol, alpha, compute_ci
        Passed through to :func:`gdimodels.profile.estimate_theta`.

    Attributes
    ----------
    coef_ : dict
        Fitted coefficients by column name.
    theta_ : float
        Exponent used by the final fit.
    theta_estimate_ : ThetaEstimate or None
        Full profile-likelihood result when the exponent was estimated.
    fit_result_ : FitResult
        The final least-squares fit.
    """

    def __init__(self, family: str = AVERAGE_PAIRWISE, grouping=None,
                 theta="estimate", reparameterize: bool = False,
                 theta_bounds=DEFAULT_BOUNDS, theta_tol: float = 1e-5,
                 alpha: float = 0.05, compute_ci: bool = True):
        self.family = family
        self.grouping = grouping
        self.theta = theta
        self.reparameterize = reparameterize
        self.theta_bounds = theta_bounds
        self.theta_tol = theta_tol
        self.alpha = alpha
        self.compute_ci = compute_ci

    def _spec(self) -> InteractionSpec:
        return InteractionSpec(self.family, grouping=parse_grouping(self.grouping),
                               reparameterized=self.reparameterize)

    def fit(self, X, y):
        design = as_design(X)
        y = check_response(y, design.n_rows)
        spec = self._spec()
        estimate = None
        if self.theta == "estimate" and spec.has_theta:
            estimate = estimate_theta(design, y, spec, bounds=self.theta_bounds,
                                      tol=self.theta_tol, alpha=self.alpha,
                                      compute_ci=self.compute_ci)
            theta = estimate.theta_hat
            fit = estimate.fit
        else:
            theta = 1.0 if self.theta == "estimate" else float(self.theta)
            fit = ols(MatrixBuilder(design, spec).matrix(theta), y)
        self.theta_ = float(theta)
        self.theta_estimate_ = estimate
        self.fit_result_ = fit
        self.coef_ = dict(fit.coefficients)
        self.n_features_in_ = design.species_count
        self._fitted_levels = structure_levels(design)
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "fit_result_"):
            raise GdiError("this DIRegressor is not fitted yet; call fit first")
        design = as_design(X)
        builder = MatrixBuilder(design, self._spec(), levels=self._fitted_levels)
        matrix = builder.matrix(self.theta_)
        coef = np.array([self.coef_.get(name, 0.0) for name in matrix.columns])
        return matrix.values @ coef


class InteractionSelector(BaseEstimator):
    """Select the interaction structure by one of the three procedures.

    After fitting, ``result_`` carries the full selection record, and
    ``best_estimator_`` is a ready-to-predict :class:`DIRegressor` for the
    winning structure at the selected exponent.
    """

    def __init__(self, procedure: str = "b", criterion: str = "aic", grouping=None,
                 reparameterize: bool = False, include_identity: bool = False,
                 include_null: bool = False, reference: str = AVERAGE_PAIRWISE,
                 alpha: float = 0.05, theta_bounds=DEFAULT_BOUNDS,
                 theta_tol: float = 1e-5):
        self.procedure = procedure
        self.criterion = criterion
        self.grouping = grouping
        self.reparameterize = reparameterize
        self.include_identity = include_identity
        self.include_null = include_null
        self.reference = reference
        self.alpha = alpha
        self.theta_bounds = theta_bounds
        self.theta_tol = theta_tol

    def fit(self, X, y):
        design = as_design(X)
        y = check_response(y, design.n_rows)
        grouping = parse_grouping(self.grouping)
        candidates = default_candidates(grouping=grouping,
                                        reparameterized=self.reparameterize,
                                        include_identity=self.include_identity,
                                        include_null=self.include_null)
        kwargs = dict(procedure=self.procedure, criterion=self.criterion,
                      alpha=self.alpha, bounds=self.theta_bounds, tol=self.theta_tol)
        if self.procedure == "b":
            kwargs["reference"] = InteractionSpec(
                self.reference, grouping=grouping,
                reparameterized=self.reparameterize)
        self.result_ = select(design, y, candidates, **kwargs)
        self.best_family_ = self.result_.chosen.family
        self.theta_ = self.result_.theta_final
        best = DIRegressor(family=self.result_.chosen.family,
                           grouping=self.result_.chosen.grouping,
                           theta=self.result_.theta_final,
                           reparameterize=self.reparameterize)
        best.theta_ = self.result_.theta_final
        best.theta_estimate_ = None
        best.fit_result_ = self.result_.chosen_fit
        best.coef_ = dict(self.result_.chosen_fit.coefficients)
        best.n_features_in_ = design.species_count
        best._fitted_levels = structure_levels(design)
        self.best_estimator_ = best
        self.n_features_in_ = design.species_count
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "best_estimator_"):
            raise GdiError("this InteractionSelector is not fitted yet; call fit first")
        return self.best_estimator_.predict(X)


__all__ = ["DIRegressor", "InteractionSelector", "AVERAGE_PAIRWISE", "FULL_PAIRWISE"]
