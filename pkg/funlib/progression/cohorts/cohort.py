from ..errors import ArgumentError, CohortValidationError
from ..freezable import Freezable

import numpy as np
from sklearn.model_selection import KFold, StratifiedKFold

import logging
from typing import Optional, Sequence

logger = logging.getLogger(__name__)

DIAGNOSES = ("CN", "MCI", "AD", "NA")
DIRECTIONS = ("increasing", "decreasing")


class Observation(Freezable):
    """The feature measurements of one individual at one visit.

    Args:

        values (``ndarray`` of ``float``):

            One value per feature. Values of missing features are ignored and
            stored as ``nan``.

        missing_mask (``ndarray`` of ``bool``):

            ``True`` where the feature was not measured at this visit.

        visit_time (``float``):

            Months since the baseline visit.
    """

    def __init__(self, values, missing_mask, visit_time):
        values = np.array(values, dtype=np.float64).reshape(-1)
        missing_mask = np.array(missing_mask, dtype=bool).reshape(-1)

        if values.shape != missing_mask.shape:
            raise CohortValidationError(
                "values (%d) and missing_mask (%d) differ in length"
                % (len(values), len(missing_mask))
            )
        if not np.all(np.isfinite(values[~missing_mask])):
            raise CohortValidationError(
                "observed values must be finite, got %s" % values[~missing_mask]
            )
        visit_time = float(visit_time)
        if not np.isfinite(visit_time) or visit_time < 0:
            raise CohortValidationError(
                "visit_time must be finite and >= 0, got %s" % visit_time
            )

        values[missing_mask] = np.nan

        self.values = values
        self.missing_mask = missing_mask
        self.visit_time = visit_time

        self.freeze()

    @property
    def n_features(self) -> int:
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return (
            self.visit_time == other.visit_time
            and np.array_equal(self.missing_mask, other.missing_mask)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    def __repr__(self):
        return "Observation(t=%s, missing=%d/%d)" % (
            self.visit_time,
            self.missing_mask.sum(),
            self.n_features,
        )


class Individual(Freezable):
    """A subject with one or more time-ordered visits.

    Args:

        id (``str``):

            Opaque subject identifier.

        observations (``list`` of :class:`Observation`):

            Visits, strictly ascending in ``visit_time``.

        diagnosis_labels (``list`` of ``str``):

            One label per visit, each one of ``CN``, ``MCI``, ``AD`` or ``NA``.
    """

    def __init__(self, id, observations, diagnosis_labels):
        observations = tuple(observations)
        diagnosis_labels = tuple(str(d) for d in diagnosis_labels)

        if len(observations) == 0:
            raise CohortValidationError("individual %s has no visits" % id)
        if len(diagnosis_labels) != len(observations):
            raise CohortValidationError(
                "individual %s has %d visits but %d diagnosis labels"
                % (id, len(observations), len(diagnosis_labels))
            )
        for label in diagnosis_labels:
            if label not in DIAGNOSES:
                raise CohortValidationError(
                    "individual %s has unknown diagnosis %r, expected one of %s"
                    % (id, label, DIAGNOSES)
                )
        n_features = {o.n_features for o in observations}
        if len(n_features) != 1:
            raise CohortValidationError(
                "individual %s has visits with differing feature counts %s"
                % (id, sorted(n_features))
            )
        times = [o.visit_time for o in observations]
        if any(b <= a for a, b in zip(times[:-1], times[1:])):
            raise CohortValidationError(
                "visits of individual %s are not strictly ascending: %s" % (id, times)
            )

        self.id = str(id)
        self.observations = observations
        self.diagnosis_labels = diagnosis_labels

        self.freeze()

    @property
    def n_visits(self) -> int:
        return len(self.observations)

    @property
    def n_features(self) -> int:
        return self.observations[0].n_features

    @property
    def values(self) -> np.ndarray:
        """Visit by feature matrix of values, ``nan`` where missing."""
        return np.stack([o.values for o in self.observations])

    @property
    def missing_mask(self) -> np.ndarray:
        return np.stack([o.missing_mask for o in self.observations])

    @property
    def visit_times(self) -> np.ndarray:
        return np.array([o.visit_time for o in self.observations])

    @property
    def intervals(self) -> np.ndarray:
        """Gaps between consecutive visits, in months."""
        return np.diff(self.visit_times)

    @property
    def baseline_label(self) -> str:
        return self.diagnosis_labels[0]

    def __eq__(self, other):
        if not isinstance(other, Individual):
            return NotImplemented
        return (
            self.id == other.id
            and self.diagnosis_labels == other.diagnosis_labels
            and self.observations == other.observations
        )

    def __repr__(self):
        return "Individual(%s, visits=%d)" % (self.id, self.n_visits)


class Cohort(Freezable):
    """A longitudinal cohort: individuals sharing the same feature panel.

    Args:

        individuals (``list`` of :class:`Individual`):

            The individuals of the cohort.

        feature_names (``list`` of ``str``):

            The names of the ``I >= 2`` features, in column order.

        feature_directions (``list`` of ``str``):

            Per feature, ``increasing`` if abnormal values are larger than
            normal ones, ``decreasing`` otherwise.
    """

    def __init__(self, individuals, feature_names, feature_directions):
        individuals = tuple(individuals)
        feature_names = tuple(str(n) for n in feature_names)
        feature_directions = tuple(str(d) for d in feature_directions)

        if len(feature_names) < 2:
            raise CohortValidationError(
                "a cohort needs at least 2 features, got %d" % len(feature_names)
            )
        if len(set(feature_names)) != len(feature_names):
            raise CohortValidationError(
                "feature names are not unique: %s" % (feature_names,)
            )
        if len(feature_directions) != len(feature_names):
            raise CohortValidationError(
                "got %d feature directions for %d features"
                % (len(feature_directions), len(feature_names))
            )
        for direction in feature_directions:
            if direction not in DIRECTIONS:
                raise CohortValidationError(
                    "feature direction must be one of %s, got %r"
                    % (DIRECTIONS, direction)
                )
        ids = set()
        for individual in individuals:
            if individual.n_features != len(feature_names):
                raise CohortValidationError(
                    "individual %s has %d features, expected %d"
                    % (individual.id, individual.n_features, len(feature_names))
                )
            if individual.id in ids:
                raise CohortValidationError(
                    "duplicate individual id %s" % individual.id
                )
            ids.add(individual.id)

        self.individuals = individuals
        self.feature_names = feature_names
        self.feature_directions = feature_directions

        self.freeze()

    def __len__(self):
        return len(self.individuals)

    def __iter__(self):
        return iter(self.individuals)

    def __getitem__(self, index):
        return self.individuals[index]

    def __eq__(self, other):
        if not isinstance(other, Cohort):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.feature_directions == other.feature_directions
            and self.individuals == other.individuals
        )

    def __repr__(self):
        return "Cohort(J=%d, I=%d)" % (len(self), self.n_features)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def ids(self) -> list[str]:
        return [i.id for i in self.individuals]

    @property
    def increasing(self) -> np.ndarray:
        """Boolean per feature, ``True`` where abnormal means larger."""
        return np.array([d == "increasing" for d in self.feature_directions])

    def n_missing(self) -> int:
        return int(sum(i.missing_mask.sum() for i in self.individuals))

    def baseline_labels(self) -> list[str]:
        return [i.baseline_label for i in self.individuals]

    def subset(self, indices: Sequence[int]) -> "Cohort":
        """Get a cohort holding the individuals at the given indices."""

        return Cohort(
            [self.individuals[i] for i in indices],
            self.feature_names,
            self.feature_directions,
        )

    def with_individuals(self, individuals) -> "Cohort":
        return Cohort(individuals, self.feature_names, self.feature_directions)

    def complete_subset(self) -> "Cohort":
        """Get the individuals that have no missing feature at any visit."""

        keep = [
            i for i, ind in enumerate(self.individuals) if not ind.missing_mask.any()
        ]
        logger.debug("%d of %d individuals have complete data", len(keep), len(self))
        return self.subset(keep)


def split_folds(
    cohort: Cohort, k: int, seed: int, stratify: bool = False
) -> list[tuple[Cohort, Cohort]]:
    """Split a cohort into ``k`` (train, test) folds over individuals.

    Test folds partition the individuals. With ``stratify``, folds preserve
    the proportions of baseline diagnoses.
    """

    n = len(cohort)
    if k < 2:
        raise ArgumentError("need at least 2 folds, got %d" % k)
    if k > n:
        raise ArgumentError("can't split %d individuals into %d folds" % (n, k))

    index = np.arange(n)
    if stratify:
        splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
        splits = splitter.split(index, cohort.baseline_labels())
    else:
        splitter = KFold(n_splits=k, shuffle=True, random_state=seed)
        splits = splitter.split(index)

    folds = []
    for train, test in splits:
        folds.append((cohort.subset(sorted(train)), cohort.subset(sorted(test))))

    logger.debug(
        "split %d individuals into folds of test sizes %s",
        n,
        [len(test) for _, test in folds],
    )
    return folds


def ablate_features(cohort: Cohort, fraction: float, seed: int) -> Cohort:
    """Discard a fraction of the observed feature cells of every individual.

    For an individual with ``m`` observed cells, ``round(fraction * m)`` of
    them (rounding half up) are chosen uniformly at random and marked missing.
    The cells discarded at a lower fraction are always a subset of those
    discarded at a higher one for the same ``seed``.
    """

    if not 0 <= fraction <= 1:
        raise ArgumentError("fraction must be in [0, 1], got %s" % fraction)

    streams = np.random.SeedSequence(seed).spawn(len(cohort))

    individuals = []
    for individual, stream in zip(cohort, streams):
        rng = np.random.default_rng(stream)
        missing = individual.missing_mask
        observed = np.flatnonzero(~missing)
        n_discard = int(np.floor(fraction * len(observed) + 0.5))
        # permute all observed cells, so larger fractions extend the prefix
        order = rng.permutation(observed)
        missing = missing.copy()
        missing.flat[order[:n_discard]] = True

        values = individual.values
        observations = [
            Observation(values[t], missing[t], o.visit_time)
            for t, o in enumerate(individual.observations)
        ]
        individuals.append(
            Individual(individual.id, observations, individual.diagnosis_labels)
        )

    ablated = cohort.with_individuals(individuals)
    logger.debug(
        "ablated %.2f of observed cells: %d -> %d missing",
        fraction,
        cohort.n_missing(),
        ablated.n_missing(),
    )
    return ablated
