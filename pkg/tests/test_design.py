"""Designs: community validation, the built-in tables, the generator, CSV round-trips."""

import math
from itertools import combinations

import numpy as np
import pytest

from gdimodels.design import (
    Community,
    cross_with_structure,
    design_from_rows,
    equiproportional_design,
    four_species_design,
    load_dataset_csv,
    load_design_csv,
    make_community,
    nine_species_design,
    save_dataset_csv,
    save_design_csv,
)
from gdimodels.exceptions import (
    CountExceedsSubsetsError,
    DesignParseError,
    NegativeProportionError,
    RichnessExceedsSpeciesError,
    SumNotOneError,
)

THIRD = round(1 / 3, 6)
DOM = round(0.1 / 3, 6)  # 0.033333

# The published four-species table: 37 communities at 6-decimal precision.
FOUR_SPECIES_TABLE = {
    (1.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.0), (0.0, 0.0, 1.0, 0.0), (0.0, 0.0, 0.0, 1.0),
    (0.5, 0.5, 0.0, 0.0), (0.5, 0.0, 0.5, 0.0), (0.5, 0.0, 0.0, 0.5),
    (0.0, 0.5, 0.5, 0.0), (0.0, 0.5, 0.0, 0.5), (0.0, 0.0, 0.5, 0.5),
    (THIRD, THIRD, THIRD, 0.0), (THIRD, THIRD, 0.0, THIRD),
    (THIRD, 0.0, THIRD, THIRD), (0.0, THIRD, THIRD, THIRD),
    (0.7, 0.1, 0.1, 0.1), (0.4, 0.4, 0.1, 0.1), (0.4, 0.2, 0.2, 0.2),
    (0.4, 0.1, 0.4, 0.1), (0.4, 0.1, 0.1, 0.4), (0.3, 0.3, 0.3, 0.1),
    (0.3, 0.3, 0.1, 0.3), (0.3, 0.1, 0.3, 0.3), (0.25, 0.25, 0.25, 0.25),
    (0.2, 0.4, 0.2, 0.2), (0.2, 0.2, 0.4, 0.2), (0.2, 0.2, 0.2, 0.4),
    (0.1, 0.7, 0.1, 0.1), (0.1, 0.4, 0.4, 0.1), (0.1, 0.4, 0.1, 0.4),
    (0.1, 0.3, 0.3, 0.3), (0.1, 0.1, 0.7, 0.1), (0.1, 0.1, 0.4, 0.4),
    (0.1, 0.1, 0.1, 0.7), (0.9, DOM, DOM, DOM), (DOM, 0.9, DOM, DOM),
    (DOM, DOM, 0.9, DOM), (DOM, DOM, DOM, 0.9),
}


class TestCommunity:
    def test_monoculture_vertex(self):
        comm = make_community((1, 0, 0, 0))
        assert comm.richness == 1
        assert comm.species_count == 4

    def test_centroid(self):
        comm = make_community((0.25, 0.25, 0.25, 0.25))
        assert comm.richness == 4

    def test_sum_not_one(self):
        with pytest.raises(SumNotOneError):
            make_community((0.5, 0.6, 0, 0))

    def test_negative(self):
        with pytest.raises(NegativeProportionError):
            make_community((1.2, -0.2, 0, 0))

    def test_repeating_decimals_within_tolerance(self):
        # Exact rationals keep the simplex sum inside 1e-9.
        make_community((1 / 3, 1 / 3, 1 / 3, 0.0))
        make_community((0.9, 0.1 / 3, 0.1 / 3, 0.1 / 3))

    def test_key_rounds_to_table_precision(self):
        comm = make_community((1 / 3, 1 / 3, 1 / 3, 0.0))
        assert comm.key() == (THIRD, THIRD, THIRD, 0.0)

    def test_structures_carried_opaquely(self):
        comm = make_community((0.5, 0.5), {"treatment": "A", "density": 2.0})
        assert comm.structures == {"treatment": "A", "density": 2.0}


class TestFourSpeciesDesign:
    def test_row_for_row_against_published_table(self):
        design = four_species_design()
        assert {c.key() for c in design.communities} == FOUR_SPECIES_TABLE

    def test_counts(self):
        design = four_species_design()
        assert len(design.communities) == 37
        assert len(set(c.key() for c in design.communities)) == 37
        assert design.n_rows == 111
        assert all(r == 3 for r in design.replicates)

    def test_contains_dominant_mixture(self):
        keys = {c.key() for c in four_species_design().communities}
        assert (0.9, 0.033333, 0.033333, 0.033333) in keys

    def test_richness_breakdown(self):
        from collections import Counter
        counts = Counter(c.richness for c in four_species_design().communities)
        assert counts == {1: 4, 2: 6, 3: 4, 4: 23}

    def test_deterministic(self):
        assert four_species_design() == four_species_design()


class TestNineSpeciesDesign:
    def test_counts(self):
        design = nine_species_design()
        assert len(design.communities) == 100
        assert len(set(c.key() for c in design.communities)) == 100
        assert design.n_rows == 300

    def test_richness_breakdown(self):
        from collections import Counter
        counts = Counter(c.richness for c in nine_species_design().communities)
        assert counts == {1: 9, 2: 36, 3: 24, 4: 18, 6: 12, 9: 1}

    def test_equiproportional(self):
        for comm in nine_species_design().communities:
            present = [p for p in comm.proportions if p > 0]
            assert all(p == pytest.approx(1 / len(present), abs=1e-12) for p in present)

    def test_pairs_are_all_pairs(self):
        pairs = {tuple(i for i, p in enumerate(c.proportions) if p > 0)
                 for c in nine_species_design().communities if c.richness == 2}
        assert pairs == set(combinations(range(9), 2))

    def test_subset_balance(self):
        # The dominance design is balanced: at each richness level every
        # species occurs equally often and every pair co-occurs equally often.
        design = nine_species_design()
        expected_pair_count = {3: 2, 4: 3, 6: 5}
        for richness, pair_count in expected_pair_count.items():
            subsets = [tuple(i for i, p in enumerate(c.proportions) if p > 0)
                       for c in design.communities if c.richness == richness]
            species_occurrences = [0] * 9
            pair_occurrences = {}
            for subset in subsets:
                for i in subset:
                    species_occurrences[i] += 1
                for pair in combinations(subset, 2):
                    pair_occurrences[pair] = pair_occurrences.get(pair, 0) + 1
            assert species_occurrences == [8] * 9
            assert set(pair_occurrences.values()) == {pair_count}
            assert len(pair_occurrences) == 36


class TestEquiproportionalDesign:
    def test_exhaustive_small_case(self):
        design = equiproportional_design(3, [1, 3], [3, 1], replicates=1)
        keys = [c.key() for c in design.communities]
        assert len(keys) == 4
        assert keys[:3] == [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]
        assert keys[3] == (0.333333, 0.333333, 0.333333)

    def test_all_pairs(self):
        design = equiproportional_design(4, [2], [6], replicates=1)
        assert len(design.communities) == 6
        pairs = {tuple(i for i, p in enumerate(c.proportions) if p > 0)
                 for c in design.communities}
        assert pairs == set(combinations(range(4), 2))

    def test_sixteen_species_scenario(self):
        design = equiproportional_design(16, [1, 2, 4, 8, 16], [16, 60, 60, 29, 1],
                                         replicates=2, seed=99)
        assert len(design.communities) == 166
        assert len({c.key() for c in design.communities}) == 166
        assert design.n_rows == 332

    def test_seed_reproducible(self):
        a = equiproportional_design(10, [3], [12], seed=5)
        b = equiproportional_design(10, [3], [12], seed=5)
        c = equiproportional_design(10, [3], [12], seed=6)
        assert a == b
        assert a != c

    def test_exhaustive_is_seed_independent(self):
        a = equiproportional_design(5, [2], [10], seed=1)
        b = equiproportional_design(5, [2], [10], seed=2)
        assert a == b

    def test_huge_subset_space_sampling(self):
        design = equiproportional_design(72, [36], [5], seed=3)
        assert len(design.communities) == 5
        assert all(c.richness == 36 for c in design.communities)

    def test_errors(self):
        with pytest.raises(RichnessExceedsSpeciesError):
            equiproportional_design(3, [4], [1])
        with pytest.raises(CountExceedsSubsetsError):
            equiproportional_design(4, [2], [7])

    def test_per_level_replicates(self):
        design = equiproportional_design(16, [1, 16], [16, 1], replicates=[2, 20])
        assert design.n_rows == 16 * 2 + 20


class TestCsvRoundTrip:
    def test_design_round_trip_bit_exact(self, tmp_path):
        design = nine_species_design()
        path = tmp_path / "nine.csv"
        save_design_csv(design, path)
        loaded = load_design_csv(path)
        assert loaded == design
        for a, b in zip(loaded.expanded(), design.expanded()):
            assert a.proportions == b.proportions  # bitwise

    def test_published_table_precision_loads(self, tmp_path):
        # Six-decimal rows (0.333333 etc.) sum to 0.999999; the loader snaps
        # them back onto the simplex instead of rejecting the row.
        path = tmp_path / "table.csv"
        path.write_text(
            "p1,p2,p3,p4\n"
            "0.333333,0.333333,0.333333,0\n"
            "0.9,0.033333,0.033333,0.033333\n")
        design = load_design_csv(path)
        assert [c.key() for c in design.communities] == [
            (THIRD, THIRD, THIRD, 0.0), (0.9, DOM, DOM, DOM)]
        for comm in design.communities:
            assert abs(math.fsum(comm.proportions) - 1.0) <= 1e-9

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DesignParseError):
            load_design_csv(path)

    def test_bad_row_reports_position(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("p1,p2\n0.5,0.5\n0.5,0.6\n")
        with pytest.raises(SumNotOneError, match="row 3"):
            load_design_csv(path)

    def test_unparseable_cell(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text("p1,p2\n0.5,oops\n")
        with pytest.raises(DesignParseError, match="row 2"):
            load_design_csv(path)

    def test_dataset_round_trip_with_structures(self, tmp_path):
        design = cross_with_structure(
            design_from_rows([(0.5, 0.5), (1.0, 0.0)], replicates=2),
            "treatment", ["A", "B"])
        y = np.arange(design.n_rows, dtype=float) + 0.25
        path = tmp_path / "data.csv"
        save_dataset_csv(design, y, path)
        loaded, y2 = load_dataset_csv(path)
        assert loaded == design
        assert np.array_equal(y, y2)

    def test_dataset_requires_response(self, tmp_path):
        path = tmp_path / "noy.csv"
        path.write_text("p1,p2\n0.5,0.5\n")
        with pytest.raises(DesignParseError, match="'y'"):
            load_dataset_csv(path)

    def test_comment_lines_ignored(self, tmp_path):
        path = tmp_path / "commented.csv"
        path.write_text("# provenance line\np1,p2\n0.5,0.5\n")
        assert load_design_csv(path).species_count == 2


class TestStructureCrossing:
    def test_cross_with_structure(self):
        base = design_from_rows([(1.0, 0.0), (0.5, 0.5)], replicates=3)
        crossed = cross_with_structure(base, "treatment", ["A", "B"])
        assert len(crossed.communities) == 4
        assert crossed.n_rows == 12
        assert crossed.communities[0].structures == {"treatment": "A"}
        assert crossed.communities[1].structures == {"treatment": "B"}
