"""Study configuration files (TOML) and their validation.

A study file has sections ``[design]``, ``[truth]``, ``[grid]``, and
``[procedures]``, plus optional ``[candidates]`` and a top-level ``studies``
list. Validation collects every violation before failing so a bad file is
reported in one pass.

Example::

    studies = ["robustness", "selection"]

    [design]
    builtin = "four"            # or: csv = "design.csv", or equiproportional = true

    [grid]
    thetas = [0.35, 0.77, 1.17]
    sigmas = [1.0]
    replicates = 200
    seed = 20240801

    [procedures]
    run = ["b", "c"]
    criterion = "aic"
    reference = "average_pairwise"
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .design import Design, equiproportional_design, load_design_csv
from .exceptions import ConfigError, GdiError
from .interactions import FAMILIES, FUNCTIONAL_GROUP, InteractionSpec, THETA_FAMILIES
from .selection import CRITERIA, PROCEDURES
from .simulate import (
    DEFAULT_REPLICATES,
    DEFAULT_SIGMA_GRID,
    DEFAULT_THETA_GRID,
    STUDIES,
    StudyConfig,
    TruthModel,
    builtin_design,
    builtin_grouping,
    builtin_truth,
)

_REFERENCE_ALIASES = {
    "avg": "average_pairwise",
    "average": "average_pairwise",
    "full": "full_pairwise",
}


@dataclass(frozen=True)
class StudyFile:
    """A parsed and validated study configuration."""

    config: StudyConfig
    studies: tuple[str, ...]
    config_hash: str


def config_digest(raw: dict) -> str:
    """Stable hash of the effective configuration (for output provenance)."""
    return hashlib.sha256(
        json.dumps(raw, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _coefficients(section, count: int, what: str, problems: list[str]):
    if isinstance(section, dict):
        missing = [k for k in ("mean", "sd", "seed") if k not in section]
        if missing:
            problems.append(f"[truth] {what}: drawing needs mean, sd and seed "
                            f"(missing {missing})")
            return None
        rng = np.random.default_rng(int(section["seed"]))
        return tuple(float(v) for v in
                     rng.normal(float(section["mean"]), float(section["sd"]), count))
    values = [float(v) for v in section]
    if len(values) != count:
        problems.append(f"[truth] {what}: expected {count} values, got {len(values)}")
        return None
    return tuple(values)


def _build_design(section: dict, problems: list[str]) -> tuple[Design | None, str | None]:
    builtin = section.get("builtin")
    if builtin is not None:
        if builtin not in ("four", "nine"):
            problems.append(f"[design] builtin must be 'four' or 'nine', got {builtin!r}")
            return None, None
        return builtin_design(builtin), builtin
    if "csv" in section:
        try:
            return load_design_csv(section["csv"]), None
        except (GdiError, OSError) as exc:
            problems.append(f"[design] csv: {exc}")
            return None, None
    if section.get("equiproportional"):
        needed = [k for k in ("species", "levels", "counts") if k not in section]
        if needed:
            problems.append(f"[design] equiproportional needs keys {needed}")
            return None, None
        try:
            design = equiproportional_design(
                int(section["species"]),
                [int(v) for v in section["levels"]],
                [int(v) for v in section["counts"]],
                replicates=section.get("reps", 1),
                seed=section.get("seed"),
            )
            return design, None
        except GdiError as exc:
            problems.append(f"[design] equiproportional: {exc}")
            return None, None
    problems.append("[design] give one of: builtin, csv, or equiproportional")
    return None, None


def _build_truth(section: dict, design: Design | None, builtin: str | None,
                 problems: list[str]) -> TruthModel | None:
    if design is None:
        return None
    base = builtin_truth(builtin) if builtin is not None else None
    s = design.species_count
    if "identities" in section:
        identities = _coefficients(section["identities"], s, "identities", problems)
    elif base is not None:
        identities = base.identity_effects
    else:
        problems.append("[truth] identities required (design is not a builtin)")
        identities = None
    if "pairwise" in section:
        pairwise = _coefficients(section["pairwise"], s * (s - 1) // 2,
                                 "pairwise", problems)
    elif base is not None:
        pairwise = base.pairwise_effects
    else:
        problems.append("[truth] pairwise required (design is not a builtin)")
        pairwise = None
    structures = section.get("structures")
    if identities is None or pairwise is None:
        return None
    return TruthModel(identities, pairwise, theta_true=1.0, sigma=1.0,
                      structure_effects=structures)


def _build_candidates(section: dict, builtin: str | None,
                      problems: list[str]) -> tuple[tuple[InteractionSpec, ...], tuple[str, ...] | None]:
    families = section.get(
        "families",
        ["average_pairwise", "functional_group", "additive_species", "full_pairwise"])
    grouping = section.get("grouping")
    if grouping is None and builtin is not None:
        grouping = builtin_grouping(builtin)
    if grouping is not None:
        grouping = tuple(str(g) for g in grouping)
    reparam = bool(section.get("reparameterized", False))
    specs = []
    for family in families:
        if family not in FAMILIES:
            problems.append(f"[candidates] unknown family {family!r}")
            continue
        if family == FUNCTIONAL_GROUP and grouping is None:
            problems.append("[candidates] functional_group needs a grouping "
                            "(none given and the design is not a builtin)")
            continue
        specs.append(InteractionSpec(
            family,
            grouping=grouping if family == FUNCTIONAL_GROUP else None,
            reparameterized=reparam))
    if not specs:
        problems.append("[candidates] no usable candidate families")
    return tuple(specs), grouping


def load_study_file(path, replicates: int | None = None,
                    seed: int | None = None) -> StudyFile:
    """Parse, validate, and resolve a study TOML file.

    ``replicates`` and ``seed`` override the file's values (the CLI flags).
    Raises :class:`ConfigError` carrying every violation found.
    """
    with open(path, "rb") as handle:
        raw = tomllib.load(handle)

    problems: list[str] = []
    studies = tuple(raw.get("studies", ["robustness"]))
    for study in studies:
        if study not in STUDIES:
            problems.append(f"studies: unknown study {study!r} "
                            f"(expected {sorted(STUDIES)})")

    design, builtin = _build_design(raw.get("design", {}), problems)
    truth = _build_truth(raw.get("truth", {}), design, builtin, problems)
    candidates, grouping = _build_candidates(raw.get("candidates", {}), builtin, problems)

    grid = raw.get("grid", {})
    thetas = tuple(float(t) for t in grid.get("thetas", DEFAULT_THETA_GRID))
    sigmas = tuple(float(s) for s in grid.get("sigmas", DEFAULT_SIGMA_GRID))
    if any(t <= 0 for t in thetas):
        problems.append("[grid] thetas must be positive")
    if any(s < 0 for s in sigmas):
        problems.append("[grid] sigmas must be non-negative")
    n_reps = int(replicates if replicates is not None
                 else grid.get("replicates", DEFAULT_REPLICATES))
    if n_reps < 1:
        problems.append("[grid] replicates must be at least 1")
    master_seed = int(seed if seed is not None else grid.get("seed", 0))

    proc = raw.get("procedures", {})
    run = tuple(proc.get("run", ["b"]))
    for p in run:
        if p not in PROCEDURES:
            problems.append(f"[procedures] unknown procedure {p!r}")
    criterion = str(proc.get("criterion", "aic")).lower()
    if criterion not in CRITERIA:
        problems.append(f"[procedures] criterion must be one of {CRITERIA}")
    alpha = float(proc.get("alpha", 0.05))
    if not 0 < alpha < 1:
        problems.append("[procedures] alpha must be in (0, 1)")
    reference_name = _REFERENCE_ALIASES.get(
        str(proc.get("reference", "average_pairwise")),
        str(proc.get("reference", "average_pairwise")))
    if reference_name not in THETA_FAMILIES:
        problems.append(f"[procedures] reference must be an interaction family, "
                        f"got {reference_name!r}")
        reference = None
    else:
        reference = InteractionSpec(
            reference_name,
            grouping=grouping if reference_name == FUNCTIONAL_GROUP else None)

    if problems:
        raise ConfigError(problems)

    effective = dict(raw)
    effective.setdefault("grid", {})
    effective["grid"] = dict(effective["grid"], replicates=n_reps, seed=master_seed)
    config = StudyConfig(
        design=design,
        truth=truth,
        thetas=thetas,
        sigmas=sigmas,
        replicates=n_reps,
        master_seed=master_seed,
        candidates=candidates,
        procedures=run,
        reference=reference,
        criterion=criterion,
        alpha=alpha,
    )
    return StudyFile(config=config, studies=studies,
                     config_hash=config_digest(effective))
