from funlib.progression.cohorts import (
    Cohort,
    CohortArrays,
    Individual,
    Observation,
    ablate_features,
    split_folds,
)
from funlib.progression.errors import ArgumentError, CohortValidationError

from .conftest import make_individual

import numpy as np
import unittest


def cohort_of(n, n_features=3, n_visits=2, missing_every=0):
    individuals = []
    for j in range(n):
        rows = []
        for t in range(n_visits):
            row = [float(j + t + i) for i in range(n_features)]
            if missing_every and (j + t) % missing_every == 0:
                row[0] = None
            rows.append(row)
        labels = ["CN" if j % 2 == 0 else "MCI"] * n_visits
        individuals.append(make_individual("s%02d" % j, rows, labels))
    return Cohort(
        individuals, ["F%d" % i for i in range(n_features)], ["increasing"] * n_features
    )


class TestObservation(unittest.TestCase):
    def test_missing_values_become_nan(self):
        o = Observation([1.0, 2.0, 3.0], [False, True, False], 6.0)
        assert np.isnan(o.values[1])
        assert o.values[0] == 1.0
        assert o.visit_time == 6.0

    def test_invalid(self):
        with self.assertRaises(CohortValidationError):
            Observation([1.0, np.inf], [False, False], 0.0)
        with self.assertRaises(CohortValidationError):
            Observation([1.0, 2.0], [False], 0.0)
        with self.assertRaises(CohortValidationError):
            Observation([1.0, 2.0], [False, False], -1.0)

        # non-finite values are fine where missing
        Observation([1.0, np.inf], [False, True], 0.0)

    def test_frozen(self):
        o = Observation([1.0, 2.0], [False, False], 0.0)
        with self.assertRaises(TypeError):
            o.visit_time = 3.0
        with self.assertRaises(ValueError):
            o.values[0] = 5.0


class TestIndividual(unittest.TestCase):
    def test_properties(self):
        ind = make_individual(
            "x", [[1.0, None], [2.0, 3.0]], ["CN", "MCI"], times=[0, 18]
        )
        assert ind.n_visits == 2
        assert ind.n_features == 2
        assert ind.baseline_label == "CN"
        np.testing.assert_array_equal(ind.intervals, [18.0])
        np.testing.assert_array_equal(ind.missing_mask, [[False, True], [False, False]])

    def test_validation(self):
        with self.assertRaises(CohortValidationError):
            Individual("x", [], [])
        with self.assertRaises(CohortValidationError):
            make_individual("x", [[1.0], [2.0]], ["CN"])
        with self.assertRaises(CohortValidationError):
            make_individual("x", [[1.0]], ["healthy"])
        with self.assertRaises(CohortValidationError):
            make_individual("x", [[1.0], [2.0]], ["CN", "CN"], times=[12, 12])
        with self.assertRaises(CohortValidationError):
            make_individual("x", [[1.0], [2.0]], ["CN", "CN"], times=[12, 0])


class TestCohort(unittest.TestCase):
    def test_validation(self):
        a = make_individual("a", [[1.0, 2.0]], ["CN"])
        with self.assertRaises(CohortValidationError):
            Cohort([a], ["F0"], ["increasing"])
        with self.assertRaises(CohortValidationError):
            Cohort([a], ["F0", "F0"], ["increasing"] * 2)
        with self.assertRaises(CohortValidationError):
            Cohort([a], ["F0", "F1"], ["increasing", "up"])
        with self.assertRaises(CohortValidationError):
            Cohort([a, a], ["F0", "F1"], ["increasing"] * 2)
        with self.assertRaises(CohortValidationError):
            Cohort([a], ["F0", "F1", "F2"], ["increasing"] * 3)

    def test_subsets(self):
        cohort = cohort_of(10, missing_every=3)
        assert len(cohort.subset([1, 3])) == 2
        assert cohort.subset([1, 3]).ids == ["s01", "s03"]

        complete = cohort.complete_subset()
        assert complete.n_missing() == 0
        assert all(not ind.missing_mask.any() for ind in complete)
        assert len(complete) < len(cohort)

    def test_arrays(self):
        cohort = cohort_of(3)
        short = make_individual("short", [[1.0, 2.0, 3.0]], ["AD"])
        cohort = cohort.with_individuals(list(cohort) + [short])

        arrays = CohortArrays.from_cohort(cohort, 12.0)
        assert arrays.shape == (4, 2, 3)
        np.testing.assert_array_equal(arrays.n_visits, [2, 2, 2, 1])
        assert arrays.missing[3, 1].all()
        assert not arrays.valid[3, 1]
        assert arrays.intervals[3, 0] == 12.0
        assert len(arrays[[0, 3]]) == 2


class TestFolds(unittest.TestCase):
    def test_partition(self):
        cohort = cohort_of(23)
        folds = split_folds(cohort, 5, seed=1)
        assert len(folds) == 5

        test_ids = [i for _, test in folds for i in test.ids]
        assert sorted(test_ids) == sorted(cohort.ids)
        for train, test in folds:
            assert not set(train.ids) & set(test.ids)
            assert len(train) + len(test) == len(cohort)

        # deterministic
        again = split_folds(cohort, 5, seed=1)
        assert [t.ids for _, t in folds] == [t.ids for _, t in again]

    def test_stratified(self):
        cohort = cohort_of(20)
        for _, test in split_folds(cohort, 5, seed=0, stratify=True):
            labels = test.baseline_labels()
            assert labels.count("CN") == labels.count("MCI") == 2

    def test_invalid(self):
        cohort = cohort_of(4)
        with self.assertRaises(ArgumentError):
            split_folds(cohort, 1, seed=0)
        with self.assertRaises(ArgumentError):
            split_folds(cohort, 5, seed=0)


class TestAblation(unittest.TestCase):
    def test_fractions(self):
        cohort = cohort_of(8, n_features=4, n_visits=3)
        observed = 8 * 3 * 4

        assert ablate_features(cohort, 0.0, seed=2) == cohort
        assert ablate_features(cohort, 1.0, seed=2).n_missing() == observed
        # 12 observed cells per individual, half of them discarded
        assert ablate_features(cohort, 0.5, seed=2).n_missing() == observed // 2

    def test_nested_masks(self):
        cohort = cohort_of(6, n_features=4, n_visits=3, missing_every=2)
        masks = [
            np.concatenate(
                [i.missing_mask.ravel() for i in ablate_features(cohort, f, 7)]
            )
            for f in (0.0, 0.25, 0.5, 0.75)
        ]
        for lower, higher in zip(masks[:-1], masks[1:]):
            assert np.all(higher[lower])
            assert higher.sum() > lower.sum()

    def test_invalid_fraction(self):
        with self.assertRaises(ArgumentError):
            ablate_features(cohort_of(2), 1.5, seed=0)
