from funlib.progression.cohorts import Cohort, CohortArrays
from funlib.progression.config import CTHMMConfig
from funlib.progression.errors import ArgumentError, BaselineFitError, ModelFormatError
from funlib.progression.models import (
    CTHMMModel,
    TransitionModel,
    fit_cthmm,
    load_model,
    save_model,
    stage_cthmm,
)
from funlib.progression.models.baseline import (
    _conditional_moments,
    _record_log_likelihood,
)

from .conftest import make_individual

import numpy as np
import pytest
from scipy.stats import multivariate_normal, norm


def blob_cohort(n=40, missing=0.0, seed=0):
    rng = np.random.default_rng(seed)
    individuals = []
    for j in range(n):
        label = "CN" if j % 2 == 0 else "AD"
        center = 0.0 if label == "CN" else 5.0
        rows = []
        for _ in range(3):
            row = list(rng.normal(center, 0.5, size=2))
            if rng.random() < missing:
                row[rng.integers(2)] = None
            rows.append(row)
        individuals.append(make_individual("s%02d" % j, rows, [label] * 3))
    return Cohort(individuals, ["A", "B"], ["increasing", "increasing"])


def two_state_model(trans=None):
    transition = TransitionModel(
        [0.5, 0.5],
        trans if trans is not None else [[0.9, 0.1], [0.1, 0.9]],
        band_width=1,
        monotone=False,
    )
    return CTHMMModel(
        transition, [[0.0, 0.0], [5.0, 5.0]], np.eye(2) * 0.25, ["A", "B"]
    )


def test_two_blobs():
    model = fit_cthmm(blob_cohort(), n_states=2, config=CTHMMConfig(band_width=1))

    assert model.n_stages == 2
    # states are ordered from control-like to patient-like
    np.testing.assert_allclose(model.means[0], [0.0, 0.0], atol=0.3)
    np.testing.assert_allclose(model.means[1], [5.0, 5.0], atol=0.3)
    np.testing.assert_allclose(model.covariance, np.eye(2) * 0.25, atol=0.1)
    np.testing.assert_allclose(model.transition.trans, np.eye(2), atol=1e-3)

    diagnostics = model.diagnostics
    assert diagnostics.converged
    assert np.all(np.diff(diagnostics.log_likelihood_trace) >= -1e-6)


def test_deterministic():
    cohort = blob_cohort(missing=0.2, seed=1)
    config = CTHMMConfig(band_width=1, seed=4)
    a = fit_cthmm(cohort, n_states=3, config=config)
    b = fit_cthmm(cohort, n_states=3, config=config)
    np.testing.assert_array_equal(a.means, b.means)
    np.testing.assert_array_equal(a.transition.trans, b.transition.trans)
    assert a.diagnostics.log_likelihood_trace == b.diagnostics.log_likelihood_trace


def test_missing_data_fit():
    model = fit_cthmm(blob_cohort(missing=0.4, seed=2), n_states=2)
    np.testing.assert_allclose(model.means[0], [0.0, 0.0], atol=0.4)
    np.testing.assert_allclose(model.means[1], [5.0, 5.0], atol=0.4)
    assert np.all(np.diff(model.diagnostics.log_likelihood_trace) >= -1e-6)


def test_diagonal_covariance():
    model = fit_cthmm(
        blob_cohort(), n_states=2, config=CTHMMConfig(covariance="diagonal")
    )
    assert model.covariance.shape == (2, 2)
    np.testing.assert_allclose(model.covariance, 0.25, atol=0.1)
    assert model.state_covariances().shape == (2, 2, 2)


def test_default_state_count():
    model = fit_cthmm(blob_cohort())
    assert model.n_stages == 3


def test_too_few_visits():
    cohort = blob_cohort(n=1)
    with pytest.raises(BaselineFitError):
        fit_cthmm(cohort, n_states=4)
    with pytest.raises(ArgumentError):
        fit_cthmm(cohort, n_states=1)


def test_marginal_emissions():
    model = two_state_model()
    individual = make_individual(
        "x", [[1.0, None], [None, None], [1.0, 2.0]], ["NA"] * 3
    )
    log_emissions = model.log_emissions(CohortArrays.from_individual(individual))[0]

    np.testing.assert_allclose(
        log_emissions[0], [norm.logpdf(1.0, 0.0, 0.5), norm.logpdf(1.0, 5.0, 0.5)]
    )
    np.testing.assert_array_equal(log_emissions[1], [0.0, 0.0])
    assert log_emissions[2, 1] == pytest.approx(
        multivariate_normal.logpdf([1.0, 2.0], [5.0, 5.0], np.eye(2) * 0.25)
    )


def test_conditional_moments():
    cov = np.array([[1.0, 0.5], [0.5, 2.0]])
    mean = np.array([1.0, -1.0])
    x = np.array([[3.0, np.nan], [np.nan, np.nan], [0.0, 0.0]])
    observed = ~np.isnan(x)

    x_hat, correction = _conditional_moments(x, observed, mean, cov)
    assert x_hat[0, 1] == pytest.approx(-1.0 + 0.5 * (3.0 - 1.0))
    assert correction[0, 1, 1] == pytest.approx(2.0 - 0.25)
    np.testing.assert_allclose(x_hat[1], mean)
    np.testing.assert_allclose(correction[1], cov)
    np.testing.assert_array_equal(x_hat[2], [0.0, 0.0])
    np.testing.assert_array_equal(correction[2], 0.0)


def test_log_likelihood_decrease_is_noted(caplog):
    trace = []
    notes = []
    _record_log_likelihood(trace, -100.0, notes)
    _record_log_likelihood(trace, -90.0, notes)
    assert notes == []

    with caplog.at_level("WARNING"):
        _record_log_likelihood(trace, -95.0, notes)
    assert trace == [-100.0, -90.0, -95.0]
    assert notes == ["log-likelihood decreased during EM"]
    assert "decreased" in caplog.text

    # changes within the tie tolerance are not decreases
    _record_log_likelihood(trace, -95.0 - 1e-12, notes)
    assert len(notes) == 1


def test_identity_transitions_keep_state():
    model = two_state_model(np.eye(2))
    individual = make_individual(
        "x", [[0.1, -0.2], [4.0, 4.0], [0.3, 0.1]], ["NA"] * 3, times=[0, 6, 30]
    )
    path = stage_cthmm(individual, model)

    arrays = CohortArrays.from_individual(individual)
    totals = np.log(model.transition.pi) + model.log_emissions(arrays)[0].sum(axis=0)
    np.testing.assert_array_equal(path.stages, [np.argmax(totals)] * 3)


def test_paths_may_step_back():
    model = two_state_model()
    individual = make_individual("x", [[0.0, 0.0], [5.0, 5.0], [0.0, 0.0]], ["NA"] * 3)
    np.testing.assert_array_equal(stage_cthmm(individual, model).stages, [0, 1, 0])


def test_validation():
    transition = TransitionModel([0.5, 0.5], np.eye(2), band_width=1, monotone=False)
    with pytest.raises(ArgumentError):
        CTHMMModel(transition, [[0.0, 0.0]], np.eye(2), ["A", "B"])
    with pytest.raises(ArgumentError):
        CTHMMModel(transition, np.zeros((2, 2)), [[1.0, 2.0], [0.0, 1.0]], ["A", "B"])
    with pytest.raises(ArgumentError):
        CTHMMModel(transition, np.zeros((2, 2)), -np.eye(2), ["A", "B"])
    with pytest.raises(ArgumentError):
        CTHMMModel(
            transition, np.zeros((2, 2)), np.zeros((2, 2)), ["A", "B"], "diagonal"
        )


def test_save_and_load(tmp_path):
    model = fit_cthmm(blob_cohort(), n_states=2)
    path = tmp_path / "cthmm.json"
    save_model(model, path, run={"seed": 0})

    restored = load_model(path)
    assert isinstance(restored, CTHMMModel)
    np.testing.assert_array_equal(restored.means, model.means)
    np.testing.assert_array_equal(restored.covariance, model.covariance)
    assert restored.diagnostics == model.diagnostics

    d = model.to_dict()
    d["model_type"] = "ebhmm"
    with pytest.raises(ModelFormatError):
        CTHMMModel.from_dict(d)
