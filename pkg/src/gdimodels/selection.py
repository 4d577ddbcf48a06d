"""Model-selection procedures over interaction structures, plus lack-of-fit.

Three procedures are offered, trading exhaustiveness against cost:

``a``
    Fit every candidate with the exponent fixed at 1, pick the criterion
    minimizer, then estimate the exponent for the winner and test it against 1.
``b``
    Estimate the exponent once on a reference structure; if it differs
    significantly from 1, refit every candidate at that fixed estimate,
    otherwise at 1; pick the criterion minimizer.
``c``
    Estimate and test the exponent separately for every candidate (falling
    back to 1 where it is not significant), then pick the criterion minimizer.

Ties on the criterion break toward fewer coefficients, then candidate order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .design import Design
from .exceptions import GdiError, NoReplicationError, ZeroResidualDfError
from .fitting import FitResult, FTestResult, aic, bic, f_test, ols
from .interactions import (
    ADDITIVE_SPECIES,
    AVERAGE_PAIRWISE,
    COMMUNITY_FACTOR,
    FULL_PAIRWISE,
    FUNCTIONAL_GROUP,
    IDENTITY,
    NULL,
    InteractionSpec,
    design_matrix,
)
from .profile import DEFAULT_BOUNDS, LRTestResult, ThetaEstimate, estimate_theta

CRITERIA = ("aic", "bic")
_TIE_TOL = 1e-9


def default_candidates(grouping=None, reparameterized: bool = False,
                       include_identity: bool = False,
                       include_null: bool = False) -> tuple[InteractionSpec, ...]:
    """The standard candidate set, ordered simple to complex.

    By default the four interaction structures; the identity and null models
    can be prepended by flag. The grouping feeds the functional-group
    candidate only.
    """
    specs: list[InteractionSpec] = []
    if include_null:
        specs.append(InteractionSpec(NULL, reparameterized=reparameterized))
    if include_identity:
        specs.append(InteractionSpec(IDENTITY, reparameterized=reparameterized))
    specs.append(InteractionSpec(AVERAGE_PAIRWISE, reparameterized=reparameterized))
    if grouping is not None:
        specs.append(InteractionSpec(FUNCTIONAL_GROUP, grouping=tuple(grouping),
                                     reparameterized=reparameterized))
    specs.append(InteractionSpec(ADDITIVE_SPECIES, reparameterized=reparameterized))
    specs.append(InteractionSpec(FULL_PAIRWISE, reparameterized=reparameterized))
    return tuple(specs)


@dataclass(frozen=True)
class CandidateFit:
    """One candidate's fit inside a selection run."""

    spec: InteractionSpec
    fit: FitResult
    criterion_value: float

    @property
    def aic(self) -> float:
        return -math.inf if self.fit.perfect_fit else aic(self.fit)

    @property
    def bic(self) -> float:
        return -math.inf if self.fit.perfect_fit else bic(self.fit)

    def to_dict(self) -> dict:
        return {
            "family": self.spec.family,
            "reparameterized": self.spec.reparameterized,
            "aic": self.aic,
            "bic": self.bic,
            "loglik": self.fit.loglik,
            "theta_used": self.fit.theta_used,
            "theta_was_estimated": self.fit.theta_was_estimated,
            "p": self.fit.p,
        }


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one model-selection procedure."""

    chosen: InteractionSpec
    chosen_fit: FitResult
    theta_final: float
    per_candidate: tuple[CandidateFit, ...]
    theta_test: LRTestResult | None
    procedure: str
    criterion: str
    elapsed: float
    used_fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "procedure": self.procedure,
            "criterion": self.criterion,
            "chosen_family": self.chosen.family,
            "theta_final": self.theta_final,
            "theta_test": self.theta_test.to_dict() if self.theta_test else None,
            "per_candidate": [c.to_dict() for c in self.per_candidate],
            "chosen_fit": self.chosen_fit.to_dict(),
            "elapsed_seconds": self.elapsed,
            "used_fallback": self.used_fallback,
        }

    def csv_row(self) -> tuple[list[str], list[str]]:
        """One-row summary: header and values."""
        header = ["procedure", "criterion", "chosen", "theta_final"]
        values = [self.procedure, self.criterion, self.chosen.family,
                  repr(self.theta_final)]
        for cand in self.per_candidate:
            header.append(f"{self.criterion}_{cand.spec.family}")
            values.append(repr(cand.criterion_value))
        return header, values


def _criterion_value(fit: FitResult, criterion: str) -> float:
    if fit.perfect_fit:
        return -math.inf
    return aic(fit) if criterion == "aic" else bic(fit)


def _pick(candidates: list[CandidateFit]) -> int:
    best = 0
    for i in range(1, len(candidates)):
        value, best_value = candidates[i].criterion_value, candidates[best].criterion_value
        if value == best_value or abs(value - best_value) <= _TIE_TOL:
            if candidates[i].fit.p < candidates[best].fit.p:
                best = i
        elif value < best_value:
            best = i
    return best


def _check_inputs(candidates, criterion: str) -> str:
    if not candidates:
        raise ValueError("at least one candidate structure is required")
    criterion = criterion.lower()
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    return criterion


def _fit_all(design: Design, response, candidates, theta: float,
             theta_was_estimated: bool, criterion: str) -> list[CandidateFit]:
    out = []
    for spec in candidates:
        fit = ols(design_matrix(design, spec, theta), response,
                  theta_was_estimated=theta_was_estimated and spec.has_theta)
        out.append(CandidateFit(spec, fit, _criterion_value(fit, criterion)))
    return out


def procedure_a(design: Design, response: np.ndarray, candidates,
                criterion: str = "aic", alpha: float = 0.05,
                bounds=DEFAULT_BOUNDS, tol: float = 1e-5) -> SelectionResult:
    """Select the structure assuming ``theta = 1`` first, then estimate theta for it."""
    criterion = _check_inputs(candidates, criterion)
    start = time.perf_counter()
    fits = _fit_all(design, response, candidates, 1.0, False, criterion)
    chosen_idx = _pick(fits)
    chosen = fits[chosen_idx]
    theta_final = 1.0
    theta_test = None
    chosen_fit = chosen.fit
    if chosen.spec.has_theta and not chosen.fit.perfect_fit:
        estimate = estimate_theta(design, response, chosen.spec, bounds=bounds,
                                  tol=tol, alpha=alpha, compute_ci=False)
        theta_test = estimate.lr_vs_one
        if theta_test.significant:
            theta_final = estimate.theta_hat
            chosen_fit = estimate.fit
    return SelectionResult(
        chosen=chosen.spec, chosen_fit=chosen_fit, theta_final=theta_final,
        per_candidate=tuple(fits), theta_test=theta_test, procedure="a",
        criterion=criterion, elapsed=time.perf_counter() - start)


def procedure_b(design: Design, response: np.ndarray, candidates,
                reference: InteractionSpec | None = None,
                criterion: str = "aic", alpha: float = 0.05,
                bounds=DEFAULT_BOUNDS, tol: float = 1e-5) -> SelectionResult:
    """Estimate theta once on a reference structure, then select at that value.

    The reference defaults to the average-pairwise structure (matching the
    first candidate's reparameterization). If theta estimation on the
    reference fails, the run falls back to procedure ``a`` with a warning
    flag on the result.
    """
    criterion = _check_inputs(candidates, criterion)
    start = time.perf_counter()
    if reference is None:
        reference = InteractionSpec(
            AVERAGE_PAIRWISE, reparameterized=candidates[0].reparameterized)
    try:
        estimate = estimate_theta(design, response, reference, bounds=bounds,
                                  tol=tol, alpha=alpha, compute_ci=False)
    except GdiError:
        fallback = procedure_a(design, response, candidates, criterion=criterion,
                               alpha=alpha, bounds=bounds, tol=tol)
        return SelectionResult(
            chosen=fallback.chosen, chosen_fit=fallback.chosen_fit,
            theta_final=fallback.theta_final, per_candidate=fallback.per_candidate,
            theta_test=fallback.theta_test, procedure="b", criterion=criterion,
            elapsed=time.perf_counter() - start, used_fallback=True)
    theta_test = estimate.lr_vs_one
    if theta_test.significant:
        theta_final, estimated = estimate.theta_hat, True
    else:
        theta_final, estimated = 1.0, False
    fits = _fit_all(design, response, candidates, theta_final, estimated, criterion)
    chosen = fits[_pick(fits)]
    return SelectionResult(
        chosen=chosen.spec, chosen_fit=chosen.fit, theta_final=theta_final,
        per_candidate=tuple(fits), theta_test=theta_test, procedure="b",
        criterion=criterion, elapsed=time.perf_counter() - start)


def procedure_c(design: Design, response: np.ndarray, candidates,
                criterion: str = "aic", alpha: float = 0.05,
                bounds=DEFAULT_BOUNDS, tol: float = 1e-5) -> SelectionResult:
    """Estimate and test theta for every candidate, then select."""
    criterion = _check_inputs(candidates, criterion)
    start = time.perf_counter()
    fits: list[CandidateFit] = []
    tests: list[LRTestResult | None] = []
    for spec in candidates:
        if spec.has_theta:
            estimate = estimate_theta(design, response, spec, bounds=bounds,
                                      tol=tol, alpha=alpha, compute_ci=False)
            tests.append(estimate.lr_vs_one)
            if estimate.lr_vs_one.significant:
                fit = estimate.fit
            else:
                fit = ols(design_matrix(design, spec, 1.0), response)
        else:
            tests.append(None)
            fit = ols(design_matrix(design, spec, 1.0), response)
        fits.append(CandidateFit(spec, fit, _criterion_value(fit, criterion)))
    chosen_idx = _pick(fits)
    chosen = fits[chosen_idx]
    return SelectionResult(
        chosen=chosen.spec, chosen_fit=chosen.fit,
        theta_final=chosen.fit.theta_used,
        per_candidate=tuple(fits), theta_test=tests[chosen_idx], procedure="c",
        criterion=criterion, elapsed=time.perf_counter() - start)


PROCEDURES = {"a": procedure_a, "b": procedure_b, "c": procedure_c}


def select(design: Design, response: np.ndarray, candidates,
           procedure: str = "b", **kwargs) -> SelectionResult:
    """Run one of the selection procedures by letter (default ``b``)."""
    if procedure not in PROCEDURES:
        raise ValueError(f"procedure must be one of {sorted(PROCEDURES)}")
    return PROCEDURES[procedure](design, response, candidates, **kwargs)


def lack_of_fit(design: Design, response: np.ndarray, spec: InteractionSpec,
                theta: float = 1.0) -> FTestResult:
    """F-test of a parametric structure against the community-factor cell means.

    Needs replicated communities so the cell-means model leaves residual
    degrees of freedom.
    """
    cf = InteractionSpec(COMMUNITY_FACTOR)
    full = ols(design_matrix(design, cf, theta), response)
    if full.n == full.p:
        raise NoReplicationError(
            "lack-of-fit testing needs replicated communities "
            "(the cell-means model has no residual degrees of freedom)")
    reduced = ols(design_matrix(design, spec, theta), response)
    try:
        return f_test(reduced, full)
    except ZeroResidualDfError as exc:
        raise NoReplicationError(str(exc)) from None
