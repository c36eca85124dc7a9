"""Individual staging and stage prediction for any :class:`StageModel`."""

from .inference import forward_backward_batch
from .markov import interval_transitions, transition_over_interval
from .stage_model import StageModel
from ..cohorts import CohortArrays
from ..errors import ArgumentError, DegenerateEmissionError

import numpy as np
import pandas as pd

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StagePath:
    """The most probable stage of every visit of one individual, the joint
    log-probability of path and visits, and the smoothed posteriors."""

    stages: np.ndarray
    log_prob: float
    posterior_by_visit: np.ndarray

    @property
    def max_posterior(self) -> np.ndarray:
        return self.posterior_by_visit.max(axis=1)

    @property
    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.stages) >= 0))


class StagePrediction(NamedTuple):
    stage: int
    distribution: np.ndarray


def viterbi_batch(
    log_emissions: np.ndarray,
    steps: np.ndarray,
    valid: np.ndarray,
    pi: np.ndarray,
    ids: Optional[Sequence[str]] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Log-domain Viterbi over a padded batch, see
    :func:`forward_backward_batch` for the arguments.

    Returns the ``(J, T)`` most probable stage paths (padded visits repeat
    the last real stage) and their ``(J,)`` joint log-probabilities. Ties are
    broken toward the lower stage.
    """

    n, t_max, k = log_emissions.shape
    with np.errstate(divide="ignore"):
        log_steps = np.log(steps)
        log_delta = np.log(pi)[np.newaxis, :] + log_emissions[:, 0]

    backpointers = np.zeros((n, t_max, k), dtype=np.int64)
    for t in range(t_max):
        if t > 0:
            scores = log_delta[:, :, np.newaxis] + log_steps[:, t - 1]
            backpointers[:, t] = np.argmax(scores, axis=1)
            log_delta = np.max(scores, axis=1) + log_emissions[:, t]
        dead = valid[:, t] & ~np.any(np.isfinite(log_delta), axis=1)
        if np.any(dead):
            j = int(np.flatnonzero(dead)[0])
            raise DegenerateEmissionError(
                "no stage path has nonzero probability",
                individual=ids[j] if ids is not None else j,
                visit=t,
            )

    paths = np.zeros((n, t_max), dtype=np.int64)
    paths[:, -1] = np.argmax(log_delta, axis=1)
    log_prob = log_delta[np.arange(n), paths[:, -1]]
    for t in range(t_max - 1, 0, -1):
        paths[:, t - 1] = backpointers[np.arange(n), t, paths[:, t]]

    return paths, log_prob


def _check_features(individual, model: StageModel):
    if individual.n_features != model.n_features:
        raise ArgumentError(
            "individual %s has %d features, model expects %d"
            % (individual.id, individual.n_features, model.n_features)
        )


def viterbi_stage(individual, model: StageModel) -> StagePath:
    """The jointly most probable stage path of ``individual``.

    Args:

        individual (:class:`Individual`):

            The individual to stage.

        model (:class:`StageModel`):

            A fitted event-based or continuous-time model.
    """

    _check_features(individual, model)
    arrays = CohortArrays.from_individual(individual)
    log_emissions = model.log_emissions(arrays)
    steps = interval_transitions(model.transition, arrays.intervals)
    ids = [individual.id]

    paths, log_prob = viterbi_batch(
        log_emissions, steps, arrays.valid, model.transition.pi, ids=ids
    )
    posteriors = forward_backward_batch(
        log_emissions, steps, arrays.valid, model.transition.pi, ids=ids
    )
    return StagePath(paths[0], float(log_prob[0]), posteriors.gamma[0])


def predict_next_stage(
    individual, model: StageModel, horizon_months: float = 12.0
) -> StagePrediction:
    """Predict the stage ``horizon_months`` after the last visit.

    The smoothed posterior of the last visit is propagated by the transition
    probabilities over the horizon. The predicted stage is the most probable
    one, the lower stage on ties.
    """

    if not horizon_months > 0:
        raise ArgumentError("horizon must be positive, got %s" % horizon_months)
    _check_features(individual, model)

    arrays = CohortArrays.from_individual(individual)
    posteriors = forward_backward_batch(
        model.log_emissions(arrays),
        interval_transitions(model.transition, arrays.intervals),
        arrays.valid,
        model.transition.pi,
        ids=[individual.id],
    )
    distribution = posteriors.gamma[0, -1] @ transition_over_interval(
        model.transition, horizon_months
    )
    distribution = distribution / distribution.sum()
    return StagePrediction(int(np.argmax(distribution)), distribution)


def baseline_stages(cohort, model: StageModel) -> np.ndarray:
    """Stage of every individual at their first visit, read off the Viterbi
    path over all their visits."""

    arrays = model.arrays(cohort)
    paths, _ = viterbi_batch(
        model.log_emissions(arrays),
        interval_transitions(model.transition, arrays.intervals, arrays.valid_steps),
        arrays.valid,
        model.transition.pi,
        ids=cohort.ids,
    )
    return paths[:, 0]


def _horizon_column(horizon_months: float) -> str:
    if float(horizon_months).is_integer():
        return "predicted_stage_%dm" % horizon_months
    return "predicted_stage_%gm" % horizon_months


def stage_cohort(
    cohort, model: StageModel, horizon_months: float = 12.0
) -> pd.DataFrame:
    """Stage every visit of ``cohort``.

    Returns a frame with one row per visit and the columns ``subject_id``,
    ``visit_time``, ``stage`` (Viterbi path), ``max_posterior`` and
    ``predicted_stage_12m`` (most probable stage ``horizon_months`` after the
    visit, from the smoothed posterior of the visit).
    """

    arrays = model.arrays(cohort)
    log_emissions = model.log_emissions(arrays)
    steps = interval_transitions(model.transition, arrays.intervals, arrays.valid_steps)
    pi = model.transition.pi

    paths, _ = viterbi_batch(log_emissions, steps, arrays.valid, pi, ids=cohort.ids)
    gamma = forward_backward_batch(
        log_emissions, steps, arrays.valid, pi, ids=cohort.ids
    ).gamma
    ahead = gamma @ transition_over_interval(model.transition, horizon_months)
    predicted = np.argmax(ahead, axis=2)

    valid = arrays.valid
    j, t = np.nonzero(valid)
    visit_times = np.concatenate([ind.visit_times for ind in cohort])
    logger.debug("staged %d visits of %d individuals", len(j), len(cohort))

    return pd.DataFrame(
        {
            "subject_id": [cohort.ids[i] for i in j],
            "visit_time": visit_times,
            "stage": paths[j, t],
            "max_posterior": gamma[j, t].max(axis=1),
            _horizon_column(horizon_months): predicted[j, t],
        }
    )


def predict_cohort(
    cohort, model: StageModel, horizon_months: float = 12.0
) -> pd.DataFrame:
    """One row per individual: the Viterbi stage at the last visit, the
    predicted stage ``horizon_months`` later and the predicted distribution
    (columns ``p_stage_0`` ... ``p_stage_N``)."""

    rows = []
    for individual in cohort:
        path = viterbi_stage(individual, model)
        prediction = predict_next_stage(individual, model, horizon_months)
        row = {
            "subject_id": individual.id,
            "last_visit_time": float(individual.visit_times[-1]),
            "current_stage": int(path.stages[-1]),
            "predicted_stage": prediction.stage,
            "horizon_months": float(horizon_months),
        }
        for k, p in enumerate(prediction.distribution):
            row["p_stage_%d" % k] = float(p)
        rows.append(row)
    return pd.DataFrame(rows)
