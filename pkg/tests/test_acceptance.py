"""End-to-end checks on synthetic cohorts. The cross-validated ones take
minutes, deselect them with ``-m "not slow"``."""

from funlib.progression.config import CTHMMSection, FitConfig, RunConfig
from funlib.progression.evaluation import cross_validated_auroc, missing_data_sweep
from funlib.progression.models import (
    FittedModel,
    fit,
    fit_mixtures,
    sojourn_times,
    total_log_likelihood,
)
from funlib.progression.synth import (
    default_ground_truth,
    recovery_report,
    sample_cohort,
    sample_stage_paths,
)

import numpy as np
import pytest
from scipy.special import logsumexp
from scipy.stats import norm


def test_single_visit_likelihood_is_a_mixture():
    truth = default_ground_truth(n_events=5, separation=2.5, seed=3)
    cohort = sample_cohort(truth, 200, [0.0], missing_fraction=0.2, seed=5)
    model = FittedModel(
        truth.sequence, truth.transition, truth.mixtures, truth.feature_names
    )

    expected = 0.0
    for individual in cohort:
        x = individual.values[0]
        observed = ~individual.missing_mask[0]
        terms = []
        for k in range(truth.n_events + 1):
            log_density = np.log(truth.transition.pi[k])
            for i, pair in enumerate(truth.mixtures):
                if not observed[i]:
                    continue
                component = (
                    pair.patient if truth.sequence.positions[i] < k else pair.control
                )
                log_density += norm.logpdf(x[i], component.mu, component.sigma)
            terms.append(log_density)
        expected += logsumexp(terms)

    assert total_log_likelihood(cohort, model) == pytest.approx(expected, rel=1e-12)


def test_simulated_dwell_times():
    truth = default_ground_truth(n_events=3, self_transition=0.5, band_width=1)
    transition = truth.transition.replace(pi=np.array([1.0, 0.0, 0.0, 0.0]))
    schedule = np.arange(0, 12 * 40, 12.0)
    stages = sample_stage_paths(transition, schedule, 10_000, np.random.default_rng(0))

    expected = sojourn_times(transition) / transition.base_interval_months
    for k in range(transition.n_stages - 1):
        # every path passes through every stage, one visit per base interval
        visits = (stages == k).sum(axis=1)
        assert visits.mean() == pytest.approx(expected[k], rel=0.05)


def test_simulated_transition_frequencies():
    truth = default_ground_truth(n_events=3, self_transition=0.5, band_width=2)
    transition = truth.transition.replace(pi=np.full(4, 0.25))
    stages = sample_stage_paths(
        transition, np.arange(0, 120, 12.0), 10_000, np.random.default_rng(1)
    )

    counts = np.zeros((4, 4))
    np.add.at(counts, (stages[:, :-1].ravel(), stages[:, 1:].ravel()), 1)
    frequencies = counts / counts.sum(axis=1, keepdims=True)
    np.testing.assert_allclose(frequencies, transition.trans, atol=0.02)


@pytest.mark.slow
def test_parameter_recovery():
    taus = []
    errors = []
    for seed in range(5):
        truth = default_ground_truth(n_events=6, separation=3.0, seed=seed)
        cohort = sample_cohort(truth, 300, [0.0, 12.0, 24.0], seed=seed)
        mixtures = fit_mixtures(cohort)
        model = fit(cohort, mixtures, FitConfig(self_transition=0.5))
        report = recovery_report(model, truth)
        taus.append(report["kendall_tau"])
        errors.append(report["max_transition_error"])

    assert np.mean(taus) >= 0.9
    assert np.mean(errors) <= 0.1


@pytest.fixture(scope="module")
def conversion_cohort():
    truth = default_ground_truth(n_events=6, separation=3.0, self_transition=0.6)
    return sample_cohort(truth, 300, [0.0, 12.0, 24.0], missing_fraction=0.05, seed=21)


@pytest.mark.slow
def test_event_model_ranks_converters_better(conversion_cohort):
    config = RunConfig(cthmm=CTHMMSection(max_iter=200))
    ebhmm = cross_validated_auroc(conversion_cohort, "ebhmm", 5, 0, config)
    cthmm = cross_validated_auroc(conversion_cohort, "cthmm", 5, 0, config)

    assert ebhmm.data_mode == "full"
    assert cthmm.data_mode == "subset"
    assert ebhmm.mean >= cthmm.mean + 0.05


@pytest.mark.slow
def test_missing_values_barely_hurt(conversion_cohort):
    complete = conversion_cohort.complete_subset()
    rows = missing_data_sweep(complete, fractions=(0.0, 0.25, 0.5, 0.75), k=5, seed=0)
    none, _, half, most = [r.mean for r in rows]

    assert abs(half - none) <= 0.05
    assert none - most < 0.15
