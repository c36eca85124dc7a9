from ..freezable import Freezable

import numpy as np


class CohortArrays(Freezable):
    """A dense, padded view of a cohort, used by the batched algorithms.

    Individuals with fewer than ``T`` visits are padded at the end with
    visits at which every feature is missing, separated by one base interval.
    Under any model with stochastic transition matrices such padding leaves
    the likelihood and the posteriors of the real visits unchanged.

    Args:

        values (``ndarray``):

            Shape ``(J, T, I)``, ``nan`` where missing or padded.

        missing (``ndarray`` of ``bool``):

            Shape ``(J, T, I)``, ``True`` where missing or padded.

        intervals (``ndarray``):

            Shape ``(J, T - 1)``, gaps between consecutive visits in months.

        n_visits (``ndarray`` of ``int``):

            Shape ``(J,)``, the number of real visits per individual.
    """

    def __init__(self, values, missing, intervals, n_visits):
        self.values = np.asarray(values, dtype=np.float64)
        self.missing = np.asarray(missing, dtype=bool)
        self.intervals = np.asarray(intervals, dtype=np.float64)
        self.n_visits = np.asarray(n_visits, dtype=np.int64)

        assert self.values.ndim == 3, "values must be (J, T, I), got shape %s" % (
            self.values.shape,
        )
        assert (
            self.missing.shape == self.values.shape
        ), "missing mask shape %s does not match values shape %s" % (
            self.missing.shape,
            self.values.shape,
        )
        assert self.intervals.shape == (
            self.values.shape[0],
            max(self.values.shape[1] - 1, 0),
        ), "intervals shape %s does not match values shape %s" % (
            self.intervals.shape,
            self.values.shape,
        )

        self.freeze()

    @classmethod
    def from_cohort(cls, cohort, base_interval_months: float) -> "CohortArrays":
        n = len(cohort)
        t_max = max((ind.n_visits for ind in cohort), default=1)
        n_features = cohort.n_features

        values = np.full((n, t_max, n_features), np.nan)
        missing = np.ones((n, t_max, n_features), dtype=bool)
        intervals = np.full((n, t_max - 1), float(base_interval_months))
        n_visits = np.zeros(n, dtype=np.int64)

        for j, individual in enumerate(cohort):
            t = individual.n_visits
            values[j, :t] = individual.values
            missing[j, :t] = individual.missing_mask
            intervals[j, : t - 1] = individual.intervals
            n_visits[j] = t

        return cls(values, missing, intervals, n_visits)

    @classmethod
    def from_individual(cls, individual) -> "CohortArrays":
        return cls(
            individual.values[np.newaxis],
            individual.missing_mask[np.newaxis],
            individual.intervals[np.newaxis],
            [individual.n_visits],
        )

    @property
    def shape(self):
        """``(J, T, I)``: individuals, padded visits, features."""
        return self.values.shape

    @property
    def valid(self) -> np.ndarray:
        """``(J, T)`` mask of real (not padded) visits."""
        return np.arange(self.shape[1])[np.newaxis, :] < self.n_visits[:, np.newaxis]

    @property
    def valid_steps(self) -> np.ndarray:
        """``(J, T - 1)`` mask of transitions between two real visits."""
        return self.valid[:, 1:]

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, index):
        """Get the view restricted to the individuals selected by ``index``
        (an integer array or slice)."""

        if isinstance(index, (int, np.integer)):
            index = [index]
        return CohortArrays(
            self.values[index],
            self.missing[index],
            self.intervals[index],
            self.n_visits[index],
        )
