"""Interaction structures and design-matrix construction.

Six structures are supported, ordered here from simplest to richest:

``null``
    Intercept only; diversity has no effect.
``identity``
    Species identity effects only (one column per species proportion).
``average_pairwise``
    One shared interaction coefficient on the sum of all pairwise terms.
``functional_group``
    Within- and between-group interaction coefficients for a partition of the
    species into functional groups.
``additive_species``
    One per-species contribution, entering every pair the species is part of.
``full_pairwise``
    A separate coefficient for every species pair.
``community_factor``
    Cell means: one indicator per distinct community (used for lack-of-fit
    testing; ignores the exponent and any grouping).

Each pairwise term is ``(p_i * p_j) ** theta``; ``theta == 1`` recovers the
linear diversity-interactions model. The optional reparameterization scales
every interaction column by ``2 s^(2 theta) / (s (s - 1))`` so the interaction
effect at the centroid community does not depend on theta.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .design import Community, Design
from .exceptions import (
    DimensionMismatchError,
    MissingGroupingError,
    NonPositiveThetaError,
    SpeciesCountTooSmallError,
)

NULL = "null"
IDENTITY = "identity"
AVERAGE_PAIRWISE = "average_pairwise"
FUNCTIONAL_GROUP = "functional_group"
ADDITIVE_SPECIES = "additive_species"
FULL_PAIRWISE = "full_pairwise"
COMMUNITY_FACTOR = "community_factor"

FAMILIES = (NULL, IDENTITY, AVERAGE_PAIRWISE, FUNCTIONAL_GROUP,
            ADDITIVE_SPECIES, FULL_PAIRWISE, COMMUNITY_FACTOR)

#: Families with at least one theta-bearing interaction column.
THETA_FAMILIES = (AVERAGE_PAIRWISE, FUNCTIONAL_GROUP, ADDITIVE_SPECIES, FULL_PAIRWISE)

# Strict containment between column spaces (closed under transitivity below).
_NESTING_EDGES = {
    NULL: (IDENTITY,),
    IDENTITY: (AVERAGE_PAIRWISE,),
    AVERAGE_PAIRWISE: (FUNCTIONAL_GROUP, ADDITIVE_SPECIES),
    FUNCTIONAL_GROUP: (FULL_PAIRWISE,),
    ADDITIVE_SPECIES: (FULL_PAIRWISE,),
    FULL_PAIRWISE: (COMMUNITY_FACTOR,),
    COMMUNITY_FACTOR: (),
}


def _reachable(src: str, dst: str) -> bool:
    frontier = [src]
    seen = set()
    while frontier:
        fam = frontier.pop()
        if fam == dst:
            return True
        if fam in seen:
            continue
        seen.add(fam)
        frontier.extend(_NESTING_EDGES[fam])
    return False


@dataclass(frozen=True)
class InteractionSpec:
    """Which interaction structure to fit, and how.

    Attributes
    ----------
    family : str
        One of :data:`FAMILIES`.
    grouping : tuple of str, optional
        Functional-group label for each species, e.g. ``("1", "1", "2", "2")``.
        Required for the functional-group family and ignored elsewhere. Being
        a label per species, it is automatically a disjoint, covering
        partition.
    reparameterized : bool
        Apply the centroid-invariant scaling to the interaction columns.
    """

    family: str
    grouping: tuple[str, ...] | None = None
    reparameterized: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown interaction family {self.family!r}; "
                             f"expected one of {', '.join(FAMILIES)}")
        if self.family == FUNCTIONAL_GROUP and not self.grouping:
            raise MissingGroupingError(
                "the functional_group family needs a grouping "
                "(one group label per species)")
        if self.grouping is not None:
            object.__setattr__(self, "grouping", tuple(str(g) for g in self.grouping))

    @property
    def has_theta(self) -> bool:
        return self.family in THETA_FAMILIES

    def group_labels(self) -> list[str]:
        """Distinct group labels in first-appearance order."""
        labels: dict[str, None] = {}
        for lab in self.grouping or ():
            labels.setdefault(lab, None)
        return list(labels)

    def n_interaction_params(self, species_count: int) -> int:
        """Number of interaction coefficients on a ``species_count``-species design."""
        s = species_count
        if self.family in (NULL, IDENTITY):
            return 0
        if self.family == AVERAGE_PAIRWISE:
            return 1
        if self.family == FUNCTIONAL_GROUP:
            t = len(self.group_labels())
            return t + t * (t - 1) // 2
        if self.family == ADDITIVE_SPECIES:
            return s
        if self.family == FULL_PAIRWISE:
            return s * (s - 1) // 2
        raise ValueError(f"{self.family} has no fixed interaction-parameter count")


def spec_label(spec: InteractionSpec) -> str:
    """Short display label for a spec (family plus reparameterization marker)."""
    return spec.family + ("+scaled" if spec.reparameterized else "")


def pair_term(p_i: float, p_j: float, theta: float) -> float:
    """The contribution of one species pair: ``(p_i * p_j) ** theta``.

    Zero whenever either proportion is zero, for any positive exponent.
    """
    if theta <= 0:
        raise NonPositiveThetaError(f"theta must be positive, got {theta!r}")
    product = p_i * p_j
    if product == 0.0:
        return 0.0
    return product ** theta


def scaling_factor(species_count: int, theta: float) -> float:
    """Reparameterization scale ``2 s^(2 theta) / (s (s - 1))``.

    At the centroid, where every pair product is ``s**-2``, the scaled pair
    term equals ``2 / (s (s - 1))`` independent of theta, so the summed
    average-pairwise column is exactly 1 there.
    """
    if species_count < 2:
        raise SpeciesCountTooSmallError("need at least two species to scale interactions")
    if theta <= 0:
        raise NonPositiveThetaError(f"theta must be positive, got {theta!r}")
    s = species_count
    return 2.0 * s ** (2.0 * theta) / (s * (s - 1))


def nested(spec_a: InteractionSpec, spec_b: InteractionSpec) -> bool:
    """Whether ``spec_a``'s column space is contained in ``spec_b``'s.

    Holds along null < identity < average_pairwise < functional_group <
    full_pairwise and identity < average_pairwise < additive_species <
    full_pairwise, with every family below community_factor. The
    functional-group and additive-species structures are mutually
    non-nested. Reflexive for identical specs.
    """
    if spec_a.reparameterized != spec_b.reparameterized:
        return False
    if spec_a.family == spec_b.family:
        if spec_a.family == FUNCTIONAL_GROUP:
            return spec_a.grouping == spec_b.grouping
        return True
    return _reachable(spec_a.family, spec_b.family)


def _pair_index(s: int) -> list[tuple[int, int]]:
    return list(combinations(range(s), 2))


def _interaction_names(spec: InteractionSpec, s: int) -> list[str]:
    if spec.family in (NULL, IDENTITY, COMMUNITY_FACTOR):
        return []
    if spec.family == AVERAGE_PAIRWISE:
        return ["delta_AV"]
    if spec.family == ADDITIVE_SPECIES:
        return [f"lambda_{i + 1}" for i in range(s)]
    if spec.family == FULL_PAIRWISE:
        return [f"delta_{i + 1}_{j + 1}" for i, j in _pair_index(s)]
    labels = spec.group_labels()
    names = [f"omega_{lab}_{lab}" for lab in labels]
    names += [f"omega_{a}_{b}" for a, b in combinations(labels, 2)]
    return names


def _aggregator(spec: InteractionSpec, s: int) -> np.ndarray | None:
    """Matrix mapping per-pair terms to interaction columns (None = keep pairs)."""
    pairs = _pair_index(s)
    if spec.family == AVERAGE_PAIRWISE:
        return np.ones((len(pairs), 1))
    if spec.family == ADDITIVE_SPECIES:
        agg = np.zeros((len(pairs), s))
        for k, (i, j) in enumerate(pairs):
            agg[k, i] = 1.0
            agg[k, j] = 1.0
        return agg
    if spec.family == FULL_PAIRWISE:
        return None
    # functional groups
    if spec.grouping is None or len(spec.grouping) != s:
        raise MissingGroupingError(
            f"grouping must assign one label to each of the {s} species")
    labels = spec.group_labels()
    cols = [(labels.index(lab),) * 2 for lab in labels]
    cols += list(combinations(range(len(labels)), 2))
    agg = np.zeros((len(pairs), len(cols)))
    for k, (i, j) in enumerate(pairs):
        gi = labels.index(spec.grouping[i])
        gj = labels.index(spec.grouping[j])
        key = (gi, gj) if gi <= gj else (gj, gi)
        agg[k, cols.index(key)] = 1.0
    return agg


def interaction_columns(community: Community, spec: InteractionSpec, theta: float,
                        reference_keys: Sequence[tuple] | None = None) -> list[tuple[str, float]]:
    """Interaction-column values for a single community.

    Returns ``(name, value)`` pairs in the deterministic column order used by
    :func:`design_matrix`. Null and identity families have no interaction
    columns. For the community-factor family, pass ``reference_keys`` (the
    distinct community keys of the design, in order) to obtain the indicator
    columns.
    """
    s = community.species_count
    if spec.family in (NULL, IDENTITY):
        return []
    if spec.family == COMMUNITY_FACTOR:
        if reference_keys is None:
            raise ValueError("community_factor columns need the design's "
                             "distinct community keys (reference_keys)")
        key = community.key()
        return [(f"comm_{k + 1}", 1.0 if key == ref else 0.0)
                for k, ref in enumerate(reference_keys)]
    if theta <= 0:
        raise NonPositiveThetaError(f"theta must be positive, got {theta!r}")
    pairs = _pair_index(s)
    terms = np.array([pair_term(community.proportions[i], community.proportions[j], theta)
                      for i, j in pairs])
    if spec.reparameterized:
        terms = terms * scaling_factor(s, theta)
    agg = _aggregator(spec, s)
    values = terms if agg is None else terms @ agg
    return list(zip(_interaction_names(spec, s), values.tolist()))


def structure_levels(design: Design) -> dict[str, list[str] | None]:
    """Per covariate: sorted categorical levels, or None for numeric covariates."""
    out: dict[str, list[str] | None] = {}
    rows = design.expanded()
    for name in design.structure_names():
        values = [(c.structures or {}).get(name) for c in rows]
        if any(v is None for v in values):
            raise DimensionMismatchError(
                f"structure covariate {name!r} is missing for some communities")
        if any(isinstance(v, str) for v in values):
            out[name] = sorted({str(v) for v in values})
        else:
            out[name] = None
    return out


def structure_columns(design: Design,
                      levels: dict[str, list[str] | None] | None = None
                      ) -> tuple[list[str], np.ndarray]:
    """Expand structure covariates into effect columns.

    Numeric covariates become one column; categorical covariates get one
    indicator per non-reference level (the first of the sorted levels is the
    reference). Pass ``levels`` to encode against a previously fitted level
    set, e.g. when predicting on new data.
    """
    if levels is None:
        levels = structure_levels(design)
    names: list[str] = []
    cols: list[np.ndarray] = []
    rows = design.expanded()
    for name, level_set in levels.items():
        values = [(c.structures or {}).get(name) for c in rows]
        if any(v is None for v in values):
            raise DimensionMismatchError(
                f"structure covariate {name!r} is missing for some communities")
        if level_set is not None:
            unseen = {str(v) for v in values} - set(level_set)
            if unseen:
                raise DimensionMismatchError(
                    f"structure {name!r} has levels {sorted(unseen)} not present "
                    f"when the encoding was fixed")
            for level in level_set[1:]:
                names.append(f"{name}_{level}")
                cols.append(np.array([1.0 if str(v) == level else 0.0 for v in values]))
        else:
            names.append(name)
            cols.append(np.array([float(v) for v in values]))
    matrix = np.column_stack(cols) if cols else np.empty((len(rows), 0))
    return names, matrix


@dataclass
class ModelMatrix:
    """A realized design matrix: named columns, values, and the theta used."""

    columns: tuple[str, ...]
    values: np.ndarray
    theta_used: float

    _rank_deficient: bool | None = None

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def rank_deficient(self) -> bool:
        """True when some columns are (numerically) exactly collinear."""
        if self._rank_deficient is None:
            self._rank_deficient = bool(
                np.linalg.matrix_rank(self.values) < self.values.shape[1])
        return self._rank_deficient


class MatrixBuilder:
    """Precomputed pieces of a (design, spec) pair, reusable across theta values.

    The identity, indicator, and structure columns do not depend on theta, and
    the pairwise products only need re-exponentiation, so profiling the
    likelihood over theta re-uses everything here.
    """

    def __init__(self, design: Design, spec: InteractionSpec,
                 levels: dict[str, list[str] | None] | None = None):
        self.design = design
        self.spec = spec
        s = design.species_count
        if spec.family in THETA_FAMILIES and s < 2:
            raise SpeciesCountTooSmallError("interaction terms need at least two species")
        rows = design.expanded()
        n = len(rows)
        proportions = design.proportions(expand=True)
        struct_names, struct_cols = structure_columns(design, levels)

        if spec.family == NULL:
            left_names = ["intercept"]
            left = np.ones((n, 1))
        elif spec.family == COMMUNITY_FACTOR:
            keys = design.unique_keys()
            left_names = [f"comm_{k + 1}" for k in range(len(keys))]
            index = {key: k for k, key in enumerate(keys)}
            left = np.zeros((n, len(keys)))
            for r, comm in enumerate(rows):
                left[r, index[comm.key()]] = 1.0
        else:
            left_names = [f"beta_{i + 1}" for i in range(s)]
            left = proportions

        self._left_names = left_names
        self._left = left
        self._struct_names = struct_names
        self._struct = struct_cols
        if spec.family in THETA_FAMILIES:
            pairs = _pair_index(s)
            self._pair_products = np.stack(
                [proportions[:, i] * proportions[:, j] for i, j in pairs], axis=1)
            self._agg = _aggregator(spec, s)
            self._inter_names = _interaction_names(spec, s)
        else:
            self._pair_products = None
            self._agg = None
            self._inter_names = []

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(self._left_names + self._inter_names + self._struct_names)

    @property
    def n_rows(self) -> int:
        return self._left.shape[0]

    def interaction_block(self, theta: float) -> np.ndarray | None:
        if self._pair_products is None:
            return None
        if theta <= 0:
            raise NonPositiveThetaError(f"theta must be positive, got {theta!r}")
        block = self._pair_products ** theta
        if self._agg is not None:
            block = block @ self._agg
        if self.spec.reparameterized:
            block = block * scaling_factor(self.design.species_count, theta)
        return block

    def matrix_values(self, theta: float) -> np.ndarray:
        inter = self.interaction_block(theta)
        parts = [self._left]
        if inter is not None:
            parts.append(inter)
        if self._struct.shape[1]:
            parts.append(self._struct)
        return np.hstack(parts) if len(parts) > 1 else self._left

    def matrix(self, theta: float) -> ModelMatrix:
        return ModelMatrix(self.column_names, self.matrix_values(theta), float(theta))


def design_matrix(design: Design, spec: InteractionSpec, theta: float = 1.0) -> ModelMatrix:
    """Build the full design matrix for a design/structure/theta combination.

    Row order follows the design order after replication. Columns are the
    identity effects (or the intercept for the null family, or community
    indicators for the community-factor family), then the interaction columns,
    then any structure-covariate columns.
    """
    return MatrixBuilder(design, spec).matrix(theta)
