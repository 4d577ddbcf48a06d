"""Monte Carlo engine: truth models, response generation, and the three studies.

Responses are generated from a full-coefficient truth model (identity effects,
per-pair interaction effects at a true exponent, optional structure effects)
plus Gaussian noise. Every dataset gets its own random substream derived from
``(master_seed, theta_index, sigma_index, replicate_index)``, so any single
dataset can be regenerated in isolation and results do not depend on how work
is scheduled across threads.

Three study drivers mirror the package's analysis surface:

- :func:`run_robustness_study` fits every candidate structure with the
  exponent estimated, aggregating mean/SD/scaled-SD of the estimates, CI
  coverage conditional on convergence, and per-dataset agreement across
  structures.
- :func:`run_selection_study` runs the configured selection procedures and
  tabulates how often each structure is chosen, with per-dataset timings.
- :func:`run_reparam_study` fits one structure under both parameterizations
  and tracks the exponent's invariance and the exponent/interaction-
  coefficient correlation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .design import Design, four_species_design, nine_species_design
from .exceptions import DimensionMismatchError
from .interactions import AVERAGE_PAIRWISE, InteractionSpec, MatrixBuilder
from .profile import DEFAULT_BOUNDS, estimate_theta
from .selection import PROCEDURES, default_candidates

# Exponent grid used throughout the simulation studies.
DEFAULT_THETA_GRID = (0.05, 0.19, 0.35, 0.48, 0.63, 0.77, 0.91, 1.0, 1.17, 1.33)
DEFAULT_SIGMA_GRID = (0.8, 0.9, 1.0, 1.1, 1.2)
DEFAULT_REPLICATES = 200

FOUR_SPECIES_GROUPING = ("1", "1", "2", "2")
NINE_SPECIES_GROUPING = ("1", "1", "1", "1", "1", "2", "2", "3", "3")

_FOUR_SPECIES_IDENTITY = (5.0, 7.0, 6.0, 3.0)
_FOUR_SPECIES_PAIRWISE = {
    (1, 2): 4.68, (1, 3): 13.74, (1, 4): 8.52,
    (2, 3): 3.89, (2, 4): 16.22, (3, 4): 10.32,
}
_NINE_SPECIES_IDENTITY = (7.0, 8.0, 6.0, 9.0, 5.0, 6.0, 6.0, 6.0, 7.0)
_NINE_SPECIES_PAIRWISE = {
    (1, 2): 11.99, (1, 3): 7.64, (1, 4): 8.42, (1, 5): -2.6, (1, 6): 7.89,
    (1, 7): 8.32, (1, 8): 10.25, (1, 9): 4.06,
    (2, 3): 4.18, (2, 4): -1.03, (2, 5): 10.08, (2, 6): 5.22, (2, 7): 13.04,
    (2, 8): 8.19, (2, 9): 13.42,
    (3, 4): 5.13, (3, 5): 18.75, (3, 6): 12.41, (3, 7): 8.86, (3, 8): 19.61,
    (3, 9): 1.64,
    (4, 5): 5.98, (4, 6): 9.67, (4, 7): 11.22, (4, 8): 18.76, (4, 9): 4.6,
    (5, 6): 9.0, (5, 7): 9.85, (5, 8): 7.37, (5, 9): 12.59,
    (6, 7): 14.59, (6, 8): 14.98, (6, 9): 9.58,
    (7, 8): -1.57, (7, 9): 8.21,
    (8, 9): 8.8,
}


@dataclass(frozen=True)
class TruthModel:
    """Generating model: full per-pair coefficients at a true exponent.

    ``pairwise_effects`` holds one coefficient per species pair in
    lexicographic ``i < j`` order. ``structure_effects`` maps a covariate name
    to either a single multiplier (numeric covariates) or a level-to-effect
    mapping (categorical covariates).
    """

    identity_effects: tuple[float, ...]
    pairwise_effects: tuple[float, ...]
    theta_true: float
    sigma: float
    structure_effects: dict | None = None

    def __post_init__(self):
        s = len(self.identity_effects)
        expected = s * (s - 1) // 2
        if len(self.pairwise_effects) != expected:
            raise DimensionMismatchError(
                f"{s} species need {expected} pairwise effects, "
                f"got {len(self.pairwise_effects)}")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.theta_true <= 0:
            raise ValueError("the true exponent must be positive")

    @property
    def species_count(self) -> int:
        return len(self.identity_effects)

    def pairwise_matrix(self) -> np.ndarray:
        """Upper-triangular (s, s) matrix of the pairwise effects."""
        s = self.species_count
        out = np.zeros((s, s))
        for (i, j), value in zip(combinations(range(s), 2), self.pairwise_effects):
            out[i, j] = value
        return out

    @classmethod
    def from_pair_map(cls, identity_effects: Sequence[float],
                      pairwise: dict[tuple[int, int], float],
                      theta_true: float, sigma: float,
                      structure_effects: dict | None = None) -> "TruthModel":
        """Build from a ``{(i, j): effect}`` map with 1-based species indices."""
        s = len(identity_effects)
        flat = []
        for i, j in combinations(range(1, s + 1), 2):
            if (i, j) not in pairwise:
                raise DimensionMismatchError(f"missing pairwise effect for species ({i}, {j})")
            flat.append(float(pairwise[(i, j)]))
        return cls(tuple(float(b) for b in identity_effects), tuple(flat),
                   float(theta_true), float(sigma), structure_effects)


def four_species_truth(theta_true: float, sigma: float) -> TruthModel:
    """The four-species truth: identities (5, 7, 6, 3) and the published pairwise effects."""
    return TruthModel.from_pair_map(_FOUR_SPECIES_IDENTITY, _FOUR_SPECIES_PAIRWISE,
                                    theta_true, sigma)


def nine_species_truth(theta_true: float, sigma: float) -> TruthModel:
    """The nine-species truth: identities (7, 8, 6, 9, 5, 6, 6, 6, 7) and pairwise effects.

    Note: the source tables report the nine-species coefficients inconsistently
    in two places; the coefficient matrix used here is the one printed with
    the design (identities 7, 8, 6, 9, 5, 6, 6, 6, 7).
    """
    return TruthModel.from_pair_map(_NINE_SPECIES_IDENTITY, _NINE_SPECIES_PAIRWISE,
                                    theta_true, sigma)


def dataset_rng(master_seed: int, theta_index: int, sigma_index: int,
                replicate: int) -> np.random.Generator:
    """Deterministic per-dataset substream (PCG64 seeded from the index tuple)."""
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(theta_index),
                                int(sigma_index), int(replicate)]))


def normal_draw(rng: np.random.Generator) -> float:
    """One standard-normal draw from the given substream."""
    return float(rng.standard_normal())


def _structure_offsets(design: Design, structure_effects: dict) -> np.ndarray:
    rows = design.expanded()
    offsets = np.zeros(len(rows))
    for name, effect in structure_effects.items():
        for r, comm in enumerate(rows):
            value = (comm.structures or {}).get(name)
            if value is None:
                raise DimensionMismatchError(
                    f"truth model references structure {name!r} missing from the design")
            if isinstance(effect, dict):
                level = str(value)
                if level not in effect:
                    raise DimensionMismatchError(
                        f"no effect given for level {level!r} of structure {name!r}")
                offsets[r] += float(effect[level])
            else:
                offsets[r] += float(effect) * float(value)
    return offsets


def simulate_response(design: Design, truth: TruthModel,
                      rng: np.random.Generator | None) -> np.ndarray:
    """Generate one response vector from the truth model.

    With ``sigma == 0`` the output is deterministic and ``rng`` may be None.
    Noise draws are taken row by row in design order.
    """
    if truth.species_count != design.species_count:
        raise DimensionMismatchError(
            f"truth model has {truth.species_count} species, design has "
            f"{design.species_count}")
    proportions = design.proportions(expand=True)
    pairs = list(combinations(range(design.species_count), 2))
    products = np.stack([proportions[:, i] * proportions[:, j] for i, j in pairs], axis=1)
    y = proportions @ np.asarray(truth.identity_effects)
    y = y + (products ** truth.theta_true) @ np.asarray(truth.pairwise_effects)
    if truth.structure_effects:
        y = y + _structure_offsets(design, truth.structure_effects)
    if truth.sigma > 0:
        if rng is None:
            raise ValueError("a random generator is required when sigma > 0")
        y = y + truth.sigma * rng.standard_normal(len(y))
    return y


@dataclass(frozen=True)
class StudyConfig:
    """Everything one study run depends on (and therefore everything the seed covers)."""

    design: Design
    truth: TruthModel
    thetas: tuple[float, ...] = DEFAULT_THETA_GRID
    sigmas: tuple[float, ...] = DEFAULT_SIGMA_GRID
    replicates: int = DEFAULT_REPLICATES
    master_seed: int = 0
    candidates: tuple[InteractionSpec, ...] = ()
    procedures: tuple[str, ...] = ("b",)
    reference: InteractionSpec | None = None
    criterion: str = "aic"
    alpha: float = 0.05
    bounds: tuple[float, float] = DEFAULT_BOUNDS
    tol: float = 1e-5

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not self.candidates:
            object.__setattr__(self, "candidates", default_candidates())
        unknown = [p for p in self.procedures if p not in PROCEDURES]
        if unknown:
            raise ValueError(f"unknown selection procedures: {unknown}")

    def cell_truth(self, theta: float, sigma: float) -> TruthModel:
        return replace(self.truth, theta_true=float(theta), sigma=float(sigma))


@dataclass(frozen=True)
class StudySummary:
    """Long-format aggregate records plus raw per-dataset details.

    ``records`` rows are ``(theta_true, sigma, label, metric, value)`` where
    ``sigma`` is the string ``"all"`` for rows pooled across the sigma grid.
    ``details`` keeps per-dataset tuples for downstream checks and timing
    analysis (timings are excluded from the deterministic records).
    """

    study: str
    records: tuple[tuple[float, float | str, str, str, float], ...]
    details: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def value(self, theta: float, sigma: float | str, label: str, metric: str) -> float:
        for rec in self.records:
            if rec[0] == theta and rec[1] == sigma and rec[2] == label and rec[3] == metric:
                return rec[4]
        raise KeyError((theta, sigma, label, metric))

    def to_csv_text(self) -> str:
        lines = ["theta_true,sigma,spec_or_procedure,metric,value"]
        for theta, sigma, label, metric, value in self.records:
            sig = sigma if isinstance(sigma, str) else repr(float(sigma))
            lines.append(f"{repr(float(theta))},{sig},{label},{metric},{repr(float(value))}")
        return "\n".join(lines) + "\n"


def _label(spec: InteractionSpec) -> str:
    return spec.family + ("+scaled" if spec.reparameterized else "")


def _run_indexed(tasks: Sequence, fn: Callable, threads: int) -> list:
    if threads <= 1:
        return [fn(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def _sd(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else float("nan")


def run_robustness_study(config: StudyConfig, threads: int = 1) -> StudySummary:
    """Exponent-robustness study: estimate theta under every candidate structure.

    Per (theta, sigma, structure) cell the summary carries the mean, SD, and
    IQR-scaled SD of the estimates, CI coverage conditional on convergence,
    and the convergence rate; per (theta, sigma) cell it also carries the
    median and 95th percentile of the per-dataset spread of the estimates
    across structures.
    """
    specs = [spec for spec in config.candidates if spec.has_theta]
    tasks = [(ti, si, rep)
             for ti in range(len(config.thetas))
             for si in range(len(config.sigmas))
             for rep in range(config.replicates)]

    def one(task):
        ti, si, rep = task
        truth = config.cell_truth(config.thetas[ti], config.sigmas[si])
        rng = dataset_rng(config.master_seed, ti, si, rep)
        y = simulate_response(config.design, truth, rng)
        out = []
        for spec in specs:
            est = estimate_theta(config.design, y, spec, bounds=config.bounds,
                                 tol=config.tol, alpha=config.alpha)
            out.append((est.theta_hat, est.ci_lower, est.ci_upper,
                        est.ci_converged, est.covers(truth.theta_true)))
        return out

    results = _run_indexed(tasks, one, threads)
    records: list = []
    details: list = []
    for (ti, theta) in enumerate(config.thetas):
        for (si, sigma) in enumerate(config.sigmas):
            block = [results[(ti * len(config.sigmas) + si) * config.replicates + rep]
                     for rep in range(config.replicates)]
            for k, spec in enumerate(specs):
                label = _label(spec)
                estimates = np.array([row[k][0] for row in block])
                converged = [row[k][3] for row in block]
                covered = [row[k][4] for row in block if row[k][3]]
                n_conv = sum(converged)
                iqr = float(np.percentile(estimates, 75) - np.percentile(estimates, 25))
                sd = _sd(estimates)
                records.append((theta, sigma, label, "mean_theta_hat", float(np.mean(estimates))))
                records.append((theta, sigma, label, "sd_theta_hat", sd))
                records.append((theta, sigma, label, "scaled_sd_theta_hat",
                                sd / iqr if iqr > 0 else float("nan")))
                records.append((theta, sigma, label, "coverage",
                                (sum(covered) / n_conv) if n_conv else float("nan")))
                records.append((theta, sigma, label, "convergence_rate",
                                n_conv / config.replicates))
                records.append((theta, sigma, label, "n_datasets", float(config.replicates)))
                for rep, row in enumerate(block):
                    details.append((theta, sigma, rep, label) + row[k])
            if len(specs) > 1:
                spreads = np.array([max(row[k][0] for k in range(len(specs)))
                                    - min(row[k][0] for k in range(len(specs)))
                                    for row in block])
                records.append((theta, sigma, "all_structures", "theta_spread_median",
                                float(np.median(spreads))))
                records.append((theta, sigma, "all_structures", "theta_spread_p95",
                                float(np.percentile(spreads, 95))))
    return StudySummary(
        study="robustness",
        records=tuple(records),
        details={"estimates": details},
        metadata={"master_seed": config.master_seed, "replicates": config.replicates},
    )


def run_selection_study(config: StudyConfig, threads: int = 1) -> StudySummary:
    """Selection-efficacy study: run the configured procedures on every dataset.

    Summary rows give the per-cell proportion of datasets on which each
    structure was chosen, one row per (procedure, structure). When both
    procedures ``b`` and ``c`` run, a per-cell agreement rate is added.
    Per-dataset wall-clock timings are kept in ``details`` only, so the
    summary stays byte-deterministic.
    """
    tasks = [(ti, si, rep)
             for ti in range(len(config.thetas))
             for si in range(len(config.sigmas))
             for rep in range(config.replicates)]

    def one(task):
        ti, si, rep = task
        truth = config.cell_truth(config.thetas[ti], config.sigmas[si])
        rng = dataset_rng(config.master_seed, ti, si, rep)
        y = simulate_response(config.design, truth, rng)
        out = {}
        for proc in config.procedures:
            kwargs = dict(criterion=config.criterion, alpha=config.alpha,
                          bounds=config.bounds, tol=config.tol)
            if proc == "b":
                kwargs["reference"] = config.reference
            result = PROCEDURES[proc](config.design, y, config.candidates, **kwargs)
            out[proc] = (_label(result.chosen), result.theta_final, result.elapsed)
        return out

    results = _run_indexed(tasks, one, threads)
    labels = [_label(spec) for spec in config.candidates]
    records: list = []
    details: list = []
    for (ti, theta) in enumerate(config.thetas):
        for (si, sigma) in enumerate(config.sigmas):
            block = [results[(ti * len(config.sigmas) + si) * config.replicates + rep]
                     for rep in range(config.replicates)]
            for proc in config.procedures:
                chosen = [row[proc][0] for row in block]
                for label in labels:
                    records.append((theta, sigma, f"procedure_{proc}",
                                    f"prop_selected_{label}",
                                    chosen.count(label) / config.replicates))
                for rep, row in enumerate(block):
                    details.append((theta, sigma, rep, proc) + row[proc])
            if "b" in config.procedures and "c" in config.procedures:
                agree = sum(1 for row in block if row["b"][0] == row["c"][0])
                records.append((theta, sigma, "procedures_b_c", "agreement_rate",
                                agree / config.replicates))
    return StudySummary(
        study="selection",
        records=tuple(records),
        details={"selections": details},
        metadata={"master_seed": config.master_seed, "replicates": config.replicates},
    )


def run_reparam_study(config: StudyConfig, threads: int = 1) -> StudySummary:
    """Reparameterization study: one structure fit under both scalings.

    Uses the configured reference structure (default average-pairwise). Per
    exponent value, pooled across the sigma grid, the summary reports the
    correlation between the exponent and interaction-coefficient estimates
    under each parameterization and the largest absolute difference between
    the two exponent estimates.
    """
    base = config.reference or InteractionSpec(AVERAGE_PAIRWISE)
    spec_old = replace(base, reparameterized=False)
    spec_new = replace(base, reparameterized=True)
    # First interaction column: delta_AV for the average-pairwise structure.
    inter_name = MatrixBuilder(config.design, spec_old).column_names[
        config.design.species_count]

    tasks = [(ti, si, rep)
             for ti in range(len(config.thetas))
             for si in range(len(config.sigmas))
             for rep in range(config.replicates)]

    def one(task):
        ti, si, rep = task
        truth = config.cell_truth(config.thetas[ti], config.sigmas[si])
        rng = dataset_rng(config.master_seed, ti, si, rep)
        y = simulate_response(config.design, truth, rng)
        est_old = estimate_theta(config.design, y, spec_old, bounds=config.bounds,
                                 tol=config.tol, alpha=config.alpha, compute_ci=False)
        est_new = estimate_theta(config.design, y, spec_new, bounds=config.bounds,
                                 tol=config.tol, alpha=config.alpha, compute_ci=False)
        return (est_old.theta_hat, est_new.theta_hat,
                est_old.fit.coefficients[inter_name],
                est_new.fit.coefficients[inter_name])

    results = _run_indexed(tasks, one, threads)
    records: list = []
    details: list = []
    per_sigma = len(config.sigmas) * config.replicates
    for (ti, theta) in enumerate(config.thetas):
        rows = np.array(results[ti * per_sigma:(ti + 1) * per_sigma])
        records.append((theta, "all", _label(spec_old), "corr_theta_delta",
                        _corr(rows[:, 0], rows[:, 2])))
        records.append((theta, "all", _label(spec_new), "corr_theta_delta",
                        _corr(rows[:, 1], rows[:, 3])))
        records.append((theta, "all", "both", "max_abs_theta_diff",
                        float(np.max(np.abs(rows[:, 0] - rows[:, 1])))))
        for (si, sigma) in enumerate(config.sigmas):
            for rep in range(config.replicates):
                details.append((theta, sigma, rep)
                               + tuple(results[(ti * len(config.sigmas) + si)
                                               * config.replicates + rep]))
    return StudySummary(
        study="reparam",
        records=tuple(records),
        details={"fits": details},
        metadata={"master_seed": config.master_seed, "replicates": config.replicates},
    )


def _corr(x: np.ndarray, y: np.ndarray) -> float:
    if len(x) < 2 or float(np.std(x)) == 0.0 or float(np.std(y)) == 0.0:
        return float("nan")
    return float(np.corrcoef(x, y)[0, 1])


STUDIES = {
    "robustness": run_robustness_study,
    "selection": run_selection_study,
    "reparam": run_reparam_study,
}


def builtin_design(name: str) -> Design:
    """The built-in designs by CLI name ('four' or 'nine')."""
    if name == "four":
        return four_species_design()
    if name == "nine":
        return nine_species_design()
    raise ValueError(f"unknown builtin design {name!r}; expected 'four' or 'nine'")


def builtin_truth(name: str, theta_true: float = 1.0, sigma: float = 1.0) -> TruthModel:
    if name == "four":
        return four_species_truth(theta_true, sigma)
    if name == "nine":
        return nine_species_truth(theta_true, sigma)
    raise ValueError(f"unknown builtin truth {name!r}; expected 'four' or 'nine'")


def builtin_grouping(name: str) -> tuple[str, ...]:
    if name == "four":
        return FOUR_SPECIES_GROUPING
    if name == "nine":
        return NINE_SPECIES_GROUPING
    raise ValueError(f"unknown builtin grouping {name!r}; expected 'four' or 'nine'")
