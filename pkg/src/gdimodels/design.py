"""Simplex experimental designs: communities, built-in designs, and CSV round-tripping.

A community is a point on the species simplex (proportions summing to one),
optionally carrying covariates such as treatments or blocks. A design is an
ordered list of communities with per-community replicate counts.

Built-ins cover the four-species design (37 communities: monocultures,
50:50 pairs, equal triples, the centroid, and 22 imbalanced dominance
mixtures) and the nine-species dominance design (100 equi-proportional
communities at richness 1, 2, 3, 4, 6, and 9), each replicated three times.
A generic generator produces equi-proportional designs for any species count.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import (
    CountExceedsSubsetsError,
    DesignParseError,
    NegativeProportionError,
    RichnessExceedsSpeciesError,
    SumNotOneError,
)

SUM_TOLERANCE = 1e-9
#: Proportions are compared at this precision when deciding whether two
#: communities are "the same" (matches the precision of published design tables).
KEY_DECIMALS = 6


@dataclass(frozen=True)
class Community:
    """One point on the species simplex plus optional covariates.

    Attributes
    ----------
    proportions : tuple of float
        Sown proportion of each species; non-negative, summing to 1.
    structures : dict or None
        Covariate name -> value. String values are treated as categorical
        levels, numbers as numeric covariates. Carried opaquely; only the
        model-matrix layer interprets them.
    """

    proportions: tuple[float, ...]
    structures: Mapping[str, object] | None = None

    @property
    def species_count(self) -> int:
        return len(self.proportions)

    @property
    def richness(self) -> int:
        """Number of species with strictly positive proportion."""
        return sum(1 for p in self.proportions if p > 0.0)

    def key(self) -> tuple[float, ...]:
        """Composition identity: proportions rounded to 6 decimals (covariates excluded)."""
        return tuple(round(p, KEY_DECIMALS) for p in self.proportions)


def make_community(proportions: Sequence[float],
                   structures: Mapping[str, object] | None = None) -> Community:
    """Validate a proportion vector and build a :class:`Community`.

    Raises
    ------
    NegativeProportionError
        If any entry is negative.
    SumNotOneError
        If the entries do not sum to 1 within 1e-9.
    """
    props = tuple(float(p) for p in proportions)
    if not props:
        raise SumNotOneError("a community needs at least one species proportion")
    for i, p in enumerate(props):
        if p < 0.0:
            raise NegativeProportionError(f"proportion {i + 1} is negative ({p!r})")
        if p > 1.0 + SUM_TOLERANCE:
            raise SumNotOneError(f"proportion {i + 1} exceeds 1 ({p!r})")
    total = math.fsum(props)
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise SumNotOneError(f"proportions sum to {total!r}, not 1")
    if structures is not None:
        structures = dict(structures)
    return Community(props, structures)


@dataclass(frozen=True)
class Design:
    """An ordered collection of communities with per-community replication.

    Equality compares the fully replicated row sequences, so a design saved
    with explicit repeated rows and reloaded compares equal to the original.
    """

    communities: tuple[Community, ...]
    replicates: tuple[int, ...]
    species_count: int = field(default=0)

    def __post_init__(self):
        if not self.communities:
            raise DesignParseError("a design needs at least one community")
        if len(self.replicates) != len(self.communities):
            raise DesignParseError("one replicate count per community is required")
        if any(r < 1 for r in self.replicates):
            raise DesignParseError("replicate counts must be positive")
        s = self.communities[0].species_count
        if any(c.species_count != s for c in self.communities):
            raise DesignParseError("all communities must have the same species count")
        if self.species_count == 0:
            object.__setattr__(self, "species_count", s)
        elif self.species_count != s:
            raise DesignParseError("species_count does not match the communities")

    @property
    def n_rows(self) -> int:
        """Total observation count after replication."""
        return int(sum(self.replicates))

    def expanded(self) -> list[Community]:
        """Communities repeated according to their replicate counts, in design order."""
        out: list[Community] = []
        for comm, rep in zip(self.communities, self.replicates):
            out.extend([comm] * rep)
        return out

    def proportions(self, expand: bool = True) -> np.ndarray:
        """Proportion matrix, one row per (replicated) observation."""
        rows = self.expanded() if expand else list(self.communities)
        return np.array([c.proportions for c in rows], dtype=float)

    def unique_keys(self) -> list[tuple]:
        """Distinct community keys in first-appearance order."""
        seen: dict[tuple, None] = {}
        for c in self.communities:
            seen.setdefault(c.key(), None)
        return list(seen)

    def has_structures(self) -> bool:
        return any(c.structures for c in self.communities)

    def structure_names(self) -> list[str]:
        names: dict[str, None] = {}
        for c in self.communities:
            for k in (c.structures or {}):
                names.setdefault(k, None)
        return list(names)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Design):
            return NotImplemented
        return self.expanded() == other.expanded()


def design_from_rows(rows: Iterable[Sequence[float]], replicates: int | Sequence[int] = 1,
                     structures: Sequence[Mapping[str, object] | None] | None = None) -> Design:
    """Assemble a design from raw proportion rows (validating each)."""
    rows = list(rows)
    if structures is None:
        structures = [None] * len(rows)
    comms = tuple(make_community(r, s) for r, s in zip(rows, structures))
    if isinstance(replicates, int):
        reps = tuple([replicates] * len(comms))
    else:
        reps = tuple(int(r) for r in replicates)
    return Design(comms, reps)


# ---------------------------------------------------------------------------
# Built-in designs
# ---------------------------------------------------------------------------

def _dominance_rows(s: int, major: float, minor: float) -> list[list[float]]:
    # One row per species, that species holding the dominant share.
    out = []
    for k in range(s):
        row = [minor] * s
        row[k] = major
        out.append(row)
    return out


def four_species_design() -> Design:
    """The four-species simplex design: 37 communities, each replicated 3 times.

    Contains the 4 monocultures, the 6 two-species 50:50 mixtures, the 4
    three-species equal mixtures, the centroid, and 22 imbalanced mixtures:
    dominance gradients (0.9, 1/30, 1/30, 1/30), (0.7, 0.1, 0.1, 0.1) and
    (0.4, 0.2, 0.2, 0.2) for each species in turn, the six (0.4, 0.4, 0.1, 0.1)
    two-dominant mixtures, and the four (0.3, 0.3, 0.3, 0.1) three-dominant
    mixtures.
    """
    rows: list[list[float]] = []
    for k in range(4):
        row = [0.0] * 4
        row[k] = 1.0
        rows.append(row)
    for i, j in combinations(range(4), 2):
        row = [0.0] * 4
        row[i] = row[j] = 0.5
        rows.append(row)
    third = 1.0 / 3.0
    for trio in combinations(range(4), 3):
        row = [0.0] * 4
        for k in trio:
            row[k] = third
        rows.append(row)
    rows += _dominance_rows(4, 0.7, 0.1)
    rows += _dominance_rows(4, 0.4, 0.2)
    for i, j in combinations(range(4), 2):
        row = [0.1] * 4
        row[i] = row[j] = 0.4
        rows.append(row)
    for trio in combinations(range(4), 3):
        row = [0.1] * 4
        for k in trio:
            row[k] = 0.3
        rows.append(row)
    rows.append([0.25] * 4)
    rows += _dominance_rows(4, 0.9, 0.1 / 3.0)
    return design_from_rows(rows, replicates=3)


# Species subsets of the nine-species dominance design at richness 3, 4 and 6
# (1-based indices). The subsets are balanced: every species appears 8 times
# at each level and every pair co-occurs 2, 3, and 5 times respectively.
NINE_SPECIES_TRIPLES: tuple[tuple[int, ...], ...] = (
    (1, 2, 4), (1, 2, 7), (1, 3, 8), (1, 3, 9), (1, 4, 6), (1, 5, 7),
    (1, 5, 8), (1, 6, 9), (2, 3, 4), (2, 3, 7), (2, 5, 6), (2, 5, 9),
    (2, 6, 8), (2, 8, 9), (3, 4, 6), (3, 5, 6), (3, 5, 9), (3, 7, 8),
    (4, 5, 7), (4, 5, 8), (4, 7, 9), (4, 8, 9), (6, 7, 8), (6, 7, 9),
)
NINE_SPECIES_QUADS: tuple[tuple[int, ...], ...] = (
    (1, 2, 3, 5), (1, 2, 4, 7), (1, 2, 6, 8), (1, 3, 6, 7), (1, 3, 7, 9),
    (1, 4, 5, 9), (1, 4, 6, 8), (1, 5, 8, 9), (2, 3, 5, 6), (2, 3, 8, 9),
    (2, 4, 5, 7), (2, 4, 6, 9), (2, 7, 8, 9), (3, 4, 5, 8), (3, 4, 6, 9),
    (3, 4, 7, 8), (5, 6, 7, 8), (5, 6, 7, 9),
)
NINE_SPECIES_SEXTETS: tuple[tuple[int, ...], ...] = (
    (1, 2, 3, 4, 5, 9), (1, 2, 3, 5, 6, 8), (1, 2, 3, 6, 7, 9),
    (1, 2, 4, 6, 7, 8), (1, 2, 5, 7, 8, 9), (1, 3, 4, 5, 6, 7),
    (1, 3, 4, 7, 8, 9), (1, 4, 5, 6, 8, 9), (2, 3, 4, 5, 7, 8),
    (2, 3, 4, 6, 8, 9), (2, 4, 5, 6, 7, 9), (3, 5, 6, 7, 8, 9),
)


def _subset_row(s: int, subset: Sequence[int]) -> list[float]:
    share = 1.0 / len(subset)
    row = [0.0] * s
    for k in subset:
        row[k - 1] = share
    return row


def nine_species_design() -> Design:
    """The nine-species dominance design: 100 equi-proportional communities, 3 replicates.

    Nine monocultures, all 36 two-species mixtures, 24 three-species, 18
    four-species, and 12 six-species mixtures on balanced species subsets,
    plus the nine-species centroid.
    """
    rows: list[list[float]] = []
    for k in range(9):
        row = [0.0] * 9
        row[k] = 1.0
        rows.append(row)
    for pair in combinations(range(1, 10), 2):
        rows.append(_subset_row(9, pair))
    for subset in NINE_SPECIES_TRIPLES:
        rows.append(_subset_row(9, subset))
    for subset in NINE_SPECIES_QUADS:
        rows.append(_subset_row(9, subset))
    for subset in NINE_SPECIES_SEXTETS:
        rows.append(_subset_row(9, subset))
    rows.append([1.0 / 9.0] * 9)
    return design_from_rows(rows, replicates=3)


def equiproportional_design(species_count: int,
                            richness_levels: Sequence[int],
                            communities_per_level: Sequence[int],
                            replicates: int | Sequence[int] = 1,
                            seed: int | None = None) -> Design:
    """Generate an equi-proportional design across the requested richness levels.

    Every generated community assigns proportion ``1/r`` to a distinct subset
    of ``r`` species. When fewer communities are requested at a level than
    ``C(s, r)`` subsets exist, subsets are sampled without replacement using a
    seeded generator; requesting all subsets enumerates them in lexicographic
    order, independent of the seed. Sampled subsets are emitted in sorted
    order so a given seed always yields the same design.

    Parameters
    ----------
    species_count : int
        Number of species ``s``.
    richness_levels : sequence of int
        Richness levels to include, e.g. ``[1, 2, 4, 8, 16]``.
    communities_per_level : sequence of int
        How many communities to generate at each level.
    replicates : int or sequence of int
        Replicate count, either shared or one per richness level.
    seed : int, optional
        Seed for subset sampling. Required only in effect when sampling.
    """
    if len(richness_levels) != len(communities_per_level):
        raise DesignParseError("one community count per richness level is required")
    if isinstance(replicates, int):
        reps_per_level = [replicates] * len(richness_levels)
    else:
        reps_per_level = [int(r) for r in replicates]
        if len(reps_per_level) != len(richness_levels):
            raise DesignParseError("one replicate count per richness level is required")
    rng = np.random.default_rng(seed)
    rows: list[list[float]] = []
    reps: list[int] = []
    for level, count, rep in zip(richness_levels, communities_per_level, reps_per_level):
        level = int(level)
        count = int(count)
        if level < 1 or level > species_count:
            raise RichnessExceedsSpeciesError(
                f"richness {level} outside [1, {species_count}]")
        total = math.comb(species_count, level)
        if count > total:
            raise CountExceedsSubsetsError(
                f"requested {count} communities at richness {level}, "
                f"but only {total} subsets exist")
        if count == total:
            subsets = list(combinations(range(1, species_count + 1), level))
        elif total <= 200_000:
            all_subsets = list(combinations(range(1, species_count + 1), level))
            picked = rng.choice(total, size=count, replace=False)
            subsets = sorted(all_subsets[i] for i in picked)
        else:
            # Too many subsets to enumerate: draw and deduplicate.
            chosen: set[tuple[int, ...]] = set()
            while len(chosen) < count:
                draw = rng.choice(species_count, size=level, replace=False)
                chosen.add(tuple(sorted(int(v) + 1 for v in draw)))
            subsets = sorted(chosen)
        for subset in subsets:
            rows.append(_subset_row(species_count, subset))
            reps.append(rep)
    return design_from_rows(rows, replicates=reps)


def cross_with_structure(design: Design, name: str, levels: Sequence[object]) -> Design:
    """Replicate every community once per covariate level, attaching the level.

    Useful for treatment layouts where each community is grown under every
    treatment. Replicate counts are preserved within each level.
    """
    comms: list[Community] = []
    reps: list[int] = []
    for comm, rep in zip(design.communities, design.replicates):
        for level in levels:
            structures = dict(comm.structures or {})
            structures[name] = level
            comms.append(Community(comm.proportions, structures))
            reps.append(rep)
    return Design(tuple(comms), tuple(reps))


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------

_STRUCT_PREFIX = "struct:"


def _snap_table_value(text: str, value: float) -> float:
    # Published design tables print repeating decimals at 6 digits (0.333333,
    # 0.166667, ...). Snap such entries back to the nearest small rational so
    # row sums are exact; full-precision values pass through untouched.
    if "." not in text or len(text.split(".", 1)[1]) > KEY_DECIMALS:
        return value
    candidate = Fraction(text).limit_denominator(1000)
    if abs(float(candidate) - value) <= 5e-7:
        return float(candidate)
    return value


def _parse_proportion(text: str, row: int, col: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DesignParseError(f"could not parse proportion {text!r}", row=row, column=col) from None
    return value


def _parse_structure(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def _read_rows(handle, path: str) -> tuple[list[str], list[tuple[int, list[str]]]]:
    reader = csv.reader(line for line in handle if not line.startswith("#"))
    rows = [(i + 1, row) for i, row in enumerate(reader) if row and any(cell.strip() for cell in row)]
    if not rows:
        raise DesignParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0][1]]
    return header, rows[1:]


def _proportion_columns(header: list[str], path: str) -> int:
    s = 0
    while s < len(header) and header[s] == f"p{s + 1}":
        s += 1
    if s == 0:
        raise DesignParseError(f"{path}: header must start with p1, p2, ...", row=1)
    return s


def _row_community(cells: list[str], s: int, header: list[str], rownum: int) -> Community:
    if len(cells) != len(header):
        raise DesignParseError(f"expected {len(header)} fields, found {len(cells)}", row=rownum)
    values = [_parse_proportion(cells[j].strip(), rownum, j + 1) for j in range(s)]
    if abs(math.fsum(values) - 1.0) > SUM_TOLERANCE:
        snapped = [_snap_table_value(cells[j].strip(), values[j]) for j in range(s)]
        if abs(math.fsum(snapped) - 1.0) <= SUM_TOLERANCE:
            values = snapped
    structures = {}
    for j in range(s, len(header)):
        name = header[j]
        if name.startswith(_STRUCT_PREFIX):
            name = name[len(_STRUCT_PREFIX):]
        structures[name] = _parse_structure(cells[j].strip())
    try:
        return make_community(values, structures or None)
    except (SumNotOneError, NegativeProportionError) as exc:
        raise type(exc)(f"row {rownum}: {exc}") from None


def load_design_csv(path: str | os.PathLike) -> Design:
    """Load a design from CSV (header ``p1,...,ps[,struct:<name>...]``).

    Replication is expressed by repeated rows; every row becomes one
    community with replicate count 1, and design equality compares the
    replicated row sequences, so saving and reloading round-trips exactly.
    Lines starting with ``#`` are ignored.
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        header, body = _read_rows(handle, str(path))
    s = _proportion_columns(header, str(path))
    if not body:
        raise DesignParseError(f"{path}: no data rows", row=1)
    comms = [_row_community(cells, s, header, rownum) for rownum, cells in body]
    return Design(tuple(comms), tuple([1] * len(comms)))


def save_design_csv(design: Design, path: str | os.PathLike, header_comment: str | None = None) -> None:
    """Write a design to CSV with one row per replicated observation.

    Proportions are written with ``repr`` so reloading reproduces them
    bit-exactly.
    """
    struct_names = design.structure_names()
    with open(path, "w", encoding="utf-8", newline="") as handle:
        if header_comment:
            for line in header_comment.splitlines():
                handle.write(f"# {line}\n")
        writer = csv.writer(handle, lineterminator="\n")
        header = [f"p{i + 1}" for i in range(design.species_count)]
        header += [f"{_STRUCT_PREFIX}{name}" for name in struct_names]
        writer.writerow(header)
        for comm in design.expanded():
            row = [repr(p) for p in comm.proportions]
            for name in struct_names:
                value = (comm.structures or {}).get(name, "")
                row.append(repr(value) if isinstance(value, float) else str(value))
            writer.writerow(row)


def load_dataset_csv(path: str | os.PathLike) -> tuple[Design, np.ndarray]:
    """Load a modeling dataset: design columns plus a ``y`` response column."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        header, body = _read_rows(handle, str(path))
    if "y" not in header:
        raise DesignParseError(f"{path}: dataset needs a 'y' response column", row=1)
    y_at = header.index("y")
    s = _proportion_columns(header, str(path))
    if y_at < s:
        raise DesignParseError(f"{path}: response column must follow the proportions", row=1)
    comms = []
    response = []
    for rownum, cells in body:
        if len(cells) != len(header):
            raise DesignParseError(f"expected {len(header)} fields, found {len(cells)}", row=rownum)
        try:
            yval = float(cells[y_at].strip())
        except ValueError:
            raise DesignParseError(f"could not parse response {cells[y_at]!r}",
                                   row=rownum, column=y_at + 1) from None
        if not math.isfinite(yval):
            raise DesignParseError("response must be finite", row=rownum, column=y_at + 1)
        reduced = cells[:y_at] + cells[y_at + 1:]
        reduced_header = header[:y_at] + header[y_at + 1:]
        comms.append(_row_community(reduced, s, reduced_header, rownum))
        response.append(yval)
    design = Design(tuple(comms), tuple([1] * len(comms)))
    return design, np.array(response, dtype=float)


def save_dataset_csv(design: Design, response: np.ndarray, path: str | os.PathLike,
                     header_comment: str | None = None) -> None:
    """Write a design plus response vector as a modeling dataset CSV."""
    rows = design.expanded()
    if len(rows) != len(response):
        raise DesignParseError(
            f"response length {len(response)} does not match {len(rows)} design rows")
    struct_names = design.structure_names()
    with open(path, "w", encoding="utf-8", newline="") as handle:
        if header_comment:
            for line in header_comment.splitlines():
                handle.write(f"# {line}\n")
        writer = csv.writer(handle, lineterminator="\n")
        header = [f"p{i + 1}" for i in range(design.species_count)]
        header += [f"{_STRUCT_PREFIX}{name}" for name in struct_names]
        header.append("y")
        writer.writerow(header)
        for comm, yval in zip(rows, response):
            row = [repr(p) for p in comm.proportions]
            for name in struct_names:
                value = (comm.structures or {}).get(name, "")
                row.append(repr(value) if isinstance(value, float) else str(value))
            row.append(repr(float(yval)))
            writer.writerow(row)


def design_to_csv_text(design: Design) -> str:
    """Design CSV as a string (same format as :func:`save_design_csv`)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    struct_names = design.structure_names()
    header = [f"p{i + 1}" for i in range(design.species_count)]
    header += [f"{_STRUCT_PREFIX}{name}" for name in struct_names]
    writer.writerow(header)
    for comm in design.expanded():
        row = [repr(p) for p in comm.proportions]
        for name in struct_names:
            value = (comm.structures or {}).get(name, "")
            row.append(repr(value) if isinstance(value, float) else str(value))
        writer.writerow(row)
    return buffer.getvalue()
