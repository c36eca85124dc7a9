from funlib.progression.cohorts import Cohort, Individual, Observation
from funlib.progression.synth import default_ground_truth, simulate

import numpy as np
import pytest


@pytest.fixture(params=("csv", "json", "zarr", "h5"))
def cohort_path(request, tmp_path):
    # provides a path of every supported cohort format in a temporary
    # directory, to avoid artifacts
    suffixes = {"csv": ".csv", "json": ".json", "zarr": ".zarr", "h5": ".h5"}
    yield tmp_path / ("cohort" + suffixes[request.param])


def make_individual(id, rows, labels, times=None):
    """Build an individual from rows of values, ``None`` marking missing."""

    times = times if times is not None else [12.0 * t for t in range(len(rows))]
    observations = []
    for row, time in zip(rows, times):
        missing = [v is None for v in row]
        values = [np.nan if v is None else v for v in row]
        observations.append(Observation(values, missing, time))
    return Individual(id, observations, labels)


@pytest.fixture
def small_cohort():
    return Cohort(
        [
            make_individual("a", [[0.1, 1.0], [0.5, None]], ["CN", "MCI"]),
            make_individual("b", [[2.0, 3.0]], ["AD"]),
            make_individual(
                "c",
                [[None, -1.0], [1.5, 2.5], [2.5, 3.5]],
                ["MCI", "MCI", "AD"],
                times=[0.0, 6.0, 30.0],
            ),
        ],
        ["ABETA", "TAU"],
        ["decreasing", "increasing"],
    )


@pytest.fixture(scope="session")
def truth():
    return default_ground_truth(n_events=4, separation=4.0, self_transition=0.6)


@pytest.fixture(scope="session")
def synthetic(truth):
    return simulate(truth, 200, [0.0, 12.0, 24.0], missing_fraction=0.0, seed=3)
