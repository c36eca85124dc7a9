from funlib.progression.cohorts import Cohort, CohortArrays
from funlib.progression.errors import ArgumentError
from funlib.progression.models import (
    EventSequence,
    FittedModel,
    GaussianParams,
    MixturePair,
    TransitionModel,
    baseline_stages,
    initial_transition,
    predict_cohort,
    predict_next_stage,
    stage_cohort,
    transition_over_interval,
    viterbi_stage,
)
from funlib.progression.models.markov import interval_transitions
from funlib.progression.models.staging import viterbi_batch

from .conftest import make_individual

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import itertools


def sharp_model(trans, pi=(1 / 3, 1 / 3, 1 / 3), monotone=True):
    """Two features whose values pin down the stage: 0 is normal, 10 is
    abnormal."""

    mixtures = [
        MixturePair(GaussianParams(10.0, 0.5, 0.5), GaussianParams(0.0, 0.5, 0.5), i)
        for i in range(2)
    ]
    transition = TransitionModel(pi, trans, monotone=monotone)
    return FittedModel(EventSequence([0, 1]), transition, mixtures, ["A", "B"])


def model_from_truth(truth):
    return FittedModel(
        truth.sequence, truth.transition, truth.mixtures, truth.feature_names
    )


def best_path(log_emissions, log_steps, log_pi):
    n_visits, n_stages = log_emissions.shape
    best, argmax = -np.inf, None
    for path in itertools.product(range(n_stages), repeat=n_visits):
        score = log_pi[path[0]] + log_emissions[0, path[0]]
        for t in range(1, n_visits):
            score += log_steps[t - 1, path[t - 1], path[t]] + log_emissions[t, path[t]]
        if score > best:
            best, argmax = score, path
    return np.array(argmax), best


def brute_force_viterbi(individual, model):
    arrays = CohortArrays.from_individual(individual)
    log_emissions = model.log_emissions(arrays)[0]
    steps = interval_transitions(model.transition, arrays.intervals)[0]
    with np.errstate(divide="ignore"):
        return best_path(log_emissions, np.log(steps), np.log(model.transition.pi))


@settings(max_examples=100, deadline=None)
@given(
    n_stages=st.integers(2, 5),
    intervals=st.lists(st.sampled_from([6.0, 12.0, 18.0, 24.0]), max_size=4),
    self_transition=st.floats(0.2, 0.9),
    seed=st.integers(0, 2**16),
)
def test_viterbi_batch_matches_brute_force(n_stages, intervals, self_transition, seed):
    rng = np.random.default_rng(seed)
    model = TransitionModel(
        rng.dirichlet(np.ones(n_stages)),
        initial_transition(n_stages, 2, self_transition),
    )
    n_visits = len(intervals) + 1
    log_emissions = rng.normal(scale=3.0, size=(n_visits, n_stages))
    steps = interval_transitions(model, np.array([intervals]).reshape(1, -1))

    paths, log_prob = viterbi_batch(
        log_emissions[np.newaxis], steps, np.ones((1, n_visits), dtype=bool), model.pi
    )
    with np.errstate(divide="ignore"):
        expected, best = best_path(log_emissions, np.log(steps[0]), np.log(model.pi))

    np.testing.assert_array_equal(paths[0], expected)
    assert log_prob[0] == pytest.approx(best, rel=1e-9, abs=1e-9)
    assert np.all(np.diff(paths[0]) >= 0)


def test_viterbi_matches_brute_force(truth, synthetic):
    model = model_from_truth(truth)
    for individual in list(synthetic.cohort)[:10]:
        path = viterbi_stage(individual, model)
        expected, log_prob = brute_force_viterbi(individual, model)

        np.testing.assert_array_equal(path.stages, expected)
        assert path.log_prob == pytest.approx(log_prob)
        assert path.is_monotone
        np.testing.assert_allclose(path.posterior_by_visit.sum(axis=1), 1.0)


def test_viterbi_irregular_visits(truth):
    model = model_from_truth(truth)
    individual = make_individual(
        "x",
        [[0.2, -0.1, 0.3, 0.0], [4.1, None, 0.2, -0.3], [3.9, 4.2, 3.7, None]],
        ["CN", "MCI", "AD"],
        times=[0.0, 6.0, 30.0],
    )
    path = viterbi_stage(individual, model)
    expected, log_prob = brute_force_viterbi(individual, model)
    np.testing.assert_array_equal(path.stages, expected)
    assert path.log_prob == pytest.approx(log_prob)


def test_sharp_staging():
    model = sharp_model([[0.5, 0.5, 0.0], [0.0, 0.3, 0.7], [0.0, 0.0, 1.0]])
    individual = make_individual(
        "x", [[0.0, 0.0], [10.0, 0.0], [10.0, 10.0]], ["CN", "MCI", "AD"]
    )
    path = viterbi_stage(individual, model)
    np.testing.assert_array_equal(path.stages, [0, 1, 2])
    np.testing.assert_allclose(path.max_posterior, 1.0)


def test_predict_next_stage():
    trans = np.array([[0.5, 0.5, 0.0], [0.0, 0.3, 0.7], [0.0, 0.0, 1.0]])
    model = sharp_model(trans)
    individual = make_individual("x", [[0.0, 0.0], [10.0, 0.0]], ["CN", "MCI"])

    prediction = predict_next_stage(individual, model, 12.0)
    np.testing.assert_allclose(prediction.distribution, [0.0, 0.3, 0.7], atol=1e-12)
    assert prediction.stage == 2

    two_years = predict_next_stage(individual, model, 24.0)
    np.testing.assert_allclose(
        two_years.distribution, np.array([0.0, 1.0, 0.0]) @ trans @ trans, atol=1e-12
    )

    with pytest.raises(ArgumentError):
        predict_next_stage(individual, model, 0.0)


def test_predict_ties_and_identity():
    # equal split between staying and moving on picks the lower stage
    model = sharp_model([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]])
    individual = make_individual("x", [[10.0, 0.0]], ["MCI"])
    assert predict_next_stage(individual, model).stage == 1

    frozen = sharp_model(np.eye(3))
    for row, stage in (([0.0, 0.0], 0), ([10.0, 0.0], 1), ([10.0, 10.0], 2)):
        individual = make_individual("x", [row], ["NA"])
        assert predict_next_stage(individual, frozen, 12.0).stage == stage
        assert predict_next_stage(individual, frozen, 7.0).stage == stage


def test_wrong_feature_count(truth):
    model = model_from_truth(truth)
    with pytest.raises(ArgumentError):
        viterbi_stage(make_individual("x", [[0.0, 1.0]], ["CN"]), model)


def test_baseline_stages(truth, synthetic):
    model = model_from_truth(truth)
    cohort = synthetic.cohort.subset(range(20))
    stages = baseline_stages(cohort, model)

    expected = [viterbi_stage(individual, model).stages[0] for individual in cohort]
    np.testing.assert_array_equal(stages, expected)

    # the only informative visit is the later one
    sharp = sharp_model([[0.4, 0.6, 0.0], [0.0, 0.3, 0.7], [0.0, 0.0, 1.0]])
    late = Cohort(
        [make_individual("a", [[None, None], [10.0, 10.0]], ["NA", "AD"])],
        ["A", "B"],
        ["increasing", "increasing"],
    )
    np.testing.assert_array_equal(baseline_stages(late, sharp), [2])


def test_stage_cohort():
    model = sharp_model([[0.4, 0.6, 0.0], [0.0, 0.3, 0.7], [0.0, 0.0, 1.0]])
    cohort = Cohort(
        [
            make_individual("a", [[0.0, 0.0], [10.0, 0.0]], ["CN", "MCI"]),
            make_individual("b", [[10.0, 10.0]], ["AD"]),
        ],
        ["A", "B"],
        ["increasing", "increasing"],
    )
    frame = stage_cohort(cohort, model)

    assert list(frame.columns) == [
        "subject_id",
        "visit_time",
        "stage",
        "max_posterior",
        "predicted_stage_12m",
    ]
    assert list(frame["subject_id"]) == ["a", "a", "b"]
    assert list(frame["visit_time"]) == [0.0, 12.0, 0.0]
    assert list(frame["stage"]) == [0, 1, 2]
    assert list(frame["predicted_stage_12m"]) == [1, 2, 2]

    assert "predicted_stage_6m" in stage_cohort(cohort, model, 6.0).columns

    predictions = predict_cohort(cohort, model, 12.0)
    assert list(predictions["current_stage"]) == [1, 2]
    assert list(predictions["predicted_stage"]) == [2, 2]
    assert predictions["p_stage_2"].iloc[0] == pytest.approx(0.7)
    assert [c for c in predictions.columns if c.startswith("p_stage_")] == [
        "p_stage_0",
        "p_stage_1",
        "p_stage_2",
    ]


def test_predicted_distribution_matches_propagation(truth, synthetic):
    model = model_from_truth(truth)
    individual = synthetic.cohort[0]
    path = viterbi_stage(individual, model)
    prediction = predict_next_stage(individual, model, 18.0)
    np.testing.assert_allclose(
        prediction.distribution,
        path.posterior_by_visit[-1] @ transition_over_interval(model.transition, 18.0),
    )
