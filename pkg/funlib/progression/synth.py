"""Synthetic cohorts sampled from known event-based model parameters.

A :class:`GroundTruth` fixes the event sequence, the stage transitions and the
patient/control distributions of every feature. Sampled cohorts are used to
check that fitting recovers the truth, and to evaluate staging on cohorts
whose stages are known.
"""

from .cohorts import Cohort, Individual, Observation
from .cohorts.cohort import DIAGNOSES
from .errors import ArgumentError, ModelFormatError
from .freezable import Freezable
from .models.markov import TransitionModel, initial_transition, transition_over_interval
from .models.mixture import GaussianParams, MixturePair
from .models.sequence import EventSequence

import numpy as np
from scipy.stats import kendalltau

import json
import logging
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

logger = logging.getLogger(__name__)

TRUTH_FORMAT_VERSION = 1


def default_label_rule(n_events: int) -> tuple:
    """Diagnosis per stage range, ``((first, last, label), ...)``.

    For 12 events, stages 0-2 are CN, 3-8 MCI and 9-12 AD. Other event
    counts scale these proportions, keeping at least one CN and one AD stage.
    """

    if n_events < 1:
        raise ArgumentError("need at least one event, got %d" % n_events)
    n_stages = n_events + 1
    n_cn = max(1, int(round(3 * n_stages / 13)))
    n_mci = int(round(6 * n_stages / 13))
    n_mci = max(0, min(n_mci, n_stages - n_cn - 1))

    rule = [(0, n_cn - 1, "CN")]
    if n_mci > 0:
        rule.append((n_cn, n_cn + n_mci - 1, "MCI"))
    rule.append((n_cn + n_mci, n_events, "AD"))
    return tuple(rule)


def _check_label_rule(rule, n_events: int) -> tuple:
    rule = tuple((int(lo), int(hi), str(label)) for lo, hi, label in rule)
    expected = 0
    for lo, hi, label in rule:
        if lo != expected or hi < lo:
            raise ArgumentError(
                "label rule %s must cover stages 0..%d in consecutive ranges"
                % (rule, n_events)
            )
        if label not in DIAGNOSES:
            raise ArgumentError("unknown diagnosis %r in label rule" % label)
        expected = hi + 1
    if expected != n_events + 1:
        raise ArgumentError(
            "label rule %s must cover stages 0..%d in consecutive ranges"
            % (rule, n_events)
        )
    return rule


class GroundTruth(Freezable):
    """Parameters of an event-based model to sample cohorts from.

    Args:

        sequence (:class:`EventSequence`):

            The true event sequence.

        transition (:class:`TransitionModel`):

            Stage transitions over ``len(sequence) + 1`` stages.

        mixtures (``list`` of :class:`MixturePair`):

            Patient and control distributions of every feature.

        feature_names (``list`` of ``str``):

            Names of the features.

        label_rule (``tuple``, optional):

            ``(first_stage, last_stage, diagnosis)`` ranges covering every
            stage, defaults to :func:`default_label_rule`.
    """

    def __init__(
        self,
        sequence: EventSequence,
        transition: TransitionModel,
        mixtures: Sequence[MixturePair],
        feature_names: Sequence[str],
        label_rule=None,
    ):
        n_events = len(sequence)
        mixtures = tuple(sorted(mixtures, key=lambda p: p.feature_index))
        if [p.feature_index for p in mixtures] != list(range(n_events)):
            raise ArgumentError("need one mixture per event, got %d" % len(mixtures))
        if len(feature_names) != n_events:
            raise ArgumentError(
                "got %d feature names for %d events" % (len(feature_names), n_events)
            )
        if transition.n_stages != n_events + 1:
            raise ArgumentError(
                "%d events need %d stages, got %d"
                % (n_events, n_events + 1, transition.n_stages)
            )

        self.sequence = sequence
        self.transition = transition
        self.mixtures = mixtures
        self.feature_names = tuple(feature_names)
        self.label_rule = _check_label_rule(
            label_rule if label_rule is not None else default_label_rule(n_events),
            n_events,
        )

        self.freeze()

    @property
    def n_events(self) -> int:
        return len(self.sequence)

    @property
    def feature_directions(self) -> list[str]:
        return ["increasing" if p.increasing else "decreasing" for p in self.mixtures]

    def labels(self, stages) -> np.ndarray:
        """Diagnoses of an array of stages."""

        stages = np.asarray(stages)
        bounds = np.array([hi for _, hi, _ in self.label_rule])
        names = np.array([label for _, _, label in self.label_rule])
        return names[np.searchsorted(bounds, stages)]

    def to_dict(self) -> dict:
        return {
            "format_version": TRUTH_FORMAT_VERSION,
            "feature_names": list(self.feature_names),
            "sequence": self.sequence.names(self.feature_names),
            "transition": self.transition.to_dict(),
            "mixtures": [
                dict(feature=self.feature_names[p.feature_index], **p.to_dict())
                for p in self.mixtures
            ],
            "label_rule": [list(r) for r in self.label_rule],
        }

    @classmethod
    def from_dict(cls, d) -> "GroundTruth":
        if d.get("format_version") != TRUTH_FORMAT_VERSION:
            raise ModelFormatError(
                "unsupported ground truth version %r" % d.get("format_version")
            )
        try:
            feature_names = list(d["feature_names"])
            return cls(
                EventSequence.from_names(d["sequence"], feature_names),
                TransitionModel.from_dict(d["transition"]),
                [MixturePair.from_dict(m) for m in d["mixtures"]],
                feature_names,
                label_rule=d.get("label_rule"),
            )
        except (KeyError, TypeError) as e:
            raise ModelFormatError("malformed ground truth: %s" % e) from e

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "GroundTruth":
        path = Path(path)
        if not path.exists():
            raise ModelFormatError("ground truth file %s does not exist" % path)
        with open(path, "r") as f:
            try:
                return cls.from_dict(json.load(f))
            except json.JSONDecodeError as e:
                raise ModelFormatError("%s is not valid JSON: %s" % (path, e)) from e


def default_ground_truth(
    n_events: int = 6,
    separation: float = 3.0,
    self_transition: float = 0.5,
    band_width: int = 2,
    base_interval_months: float = 12.0,
    seed: Optional[int] = None,
) -> GroundTruth:
    """A ground truth with unit-variance features whose patient means lie
    ``separation`` standard deviations above the control means, stage 0 at
    baseline for half of the individuals and the rest spread uniformly, and
    the banded transitions of :func:`initial_transition`.

    With a ``seed``, the true sequence is a random permutation, otherwise the
    identity.
    """

    if seed is None:
        order = np.arange(n_events)
    else:
        order = np.random.default_rng(seed).permutation(n_events)

    n_stages = n_events + 1
    pi = np.full(n_stages, 0.5 / n_events)
    pi[0] = 0.5
    transition = TransitionModel(
        pi,
        initial_transition(n_stages, band_width, self_transition),
        base_interval_months=base_interval_months,
        band_width=band_width,
    )
    mixtures = [
        MixturePair(
            patient=GaussianParams(separation, 1.0, 0.5),
            control=GaussianParams(0.0, 1.0, 0.5),
            feature_index=i,
        )
        for i in range(n_events)
    ]
    names = ["F%d" % i for i in range(n_events)]
    return GroundTruth(EventSequence(order), transition, mixtures, names)


def _check_schedule(visit_schedule) -> np.ndarray:
    schedule = np.asarray(visit_schedule, dtype=np.float64).reshape(-1)
    if len(schedule) == 0:
        raise ArgumentError("visit schedule is empty")
    if np.any(schedule < 0) or np.any(np.diff(schedule) <= 0):
        raise ArgumentError(
            "visit schedule must be non-negative and strictly ascending, got %s"
            % schedule
        )
    return schedule


def sample_stage_paths(
    transition: TransitionModel,
    visit_schedule: Sequence[float],
    n_individuals: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """``(n_individuals, T)`` stage paths: initial stages from ``pi``, then
    one jump per gap of the schedule using the transition probabilities over
    that gap."""

    schedule = _check_schedule(visit_schedule)
    stages = np.empty((n_individuals, len(schedule)), dtype=np.int64)
    stages[:, 0] = rng.choice(transition.n_stages, size=n_individuals, p=transition.pi)

    for t, gap in enumerate(np.diff(schedule), start=1):
        cumulative = np.cumsum(transition_over_interval(transition, gap), axis=1)
        u = rng.random(n_individuals)
        jumps = np.sum(cumulative[stages[:, t - 1]] < u[:, np.newaxis], axis=1)
        stages[:, t] = np.minimum(jumps, transition.n_stages - 1)

    return stages


class SyntheticCohort(NamedTuple):
    cohort: Cohort
    stages: np.ndarray


def simulate(
    truth: GroundTruth,
    n_individuals: int,
    visit_schedule: Sequence[float],
    missing_fraction: float = 0.0,
    seed: int = 0,
) -> SyntheticCohort:
    """Like :func:`sample_cohort`, but also returns the ``(J, T)`` true
    stages."""

    if n_individuals < 1:
        raise ArgumentError("need at least one individual, got %d" % n_individuals)
    if not 0 <= missing_fraction < 1:
        raise ArgumentError(
            "missing fraction must be in [0, 1), got %s" % missing_fraction
        )
    schedule = _check_schedule(visit_schedule)

    rng = np.random.default_rng(seed)
    stages = sample_stage_paths(truth.transition, schedule, n_individuals, rng)

    shape = stages.shape + (truth.n_events,)
    positions = truth.sequence.positions[np.newaxis, np.newaxis, :]
    occurred = positions < stages[..., np.newaxis]
    mu_p = np.array([p.patient.mu for p in truth.mixtures])
    s_p = np.array([p.patient.sigma for p in truth.mixtures])
    mu_c = np.array([p.control.mu for p in truth.mixtures])
    s_c = np.array([p.control.sigma for p in truth.mixtures])
    z = rng.standard_normal(shape)
    values = np.where(occurred, mu_p + s_p * z, mu_c + s_c * z)
    missing = rng.random(shape) < missing_fraction
    labels = truth.labels(stages)

    width = len(str(n_individuals - 1))
    individuals = []
    for j in range(n_individuals):
        observations = [
            Observation(values[j, t], missing[j, t], schedule[t])
            for t in range(len(schedule))
        ]
        individuals.append(
            Individual("S%0*d" % (width, j), observations, [str(l) for l in labels[j]])
        )

    cohort = Cohort(individuals, truth.feature_names, truth.feature_directions)
    logger.info(
        "sampled %d individuals at %d visits, %d missing cells",
        n_individuals,
        len(schedule),
        int(missing.sum()),
    )
    return SyntheticCohort(cohort, stages)


def sample_cohort(
    truth: GroundTruth,
    n_individuals: int,
    visit_schedule: Sequence[float],
    missing_fraction: float = 0.0,
    seed: int = 0,
) -> Cohort:
    """Sample a cohort from ``truth``.

    Every individual starts in a stage drawn from ``pi`` and moves between
    the visits of ``visit_schedule`` (months) following the transition
    probabilities over each gap. Features whose event has occurred are drawn
    from the patient component, the others from the control component.
    Each value is then discarded independently with probability
    ``missing_fraction``, and visits are labelled by ``truth.label_rule``.
    """

    return simulate(truth, n_individuals, visit_schedule, missing_fraction, seed).cohort


def kendall_tau(fitted: EventSequence, true: EventSequence) -> float:
    """Kendall rank correlation of the event positions of two sequences."""

    if len(fitted) != len(true):
        raise ArgumentError(
            "sequences of %d and %d events can not be compared"
            % (len(fitted), len(true))
        )
    if len(fitted) < 2:
        return 1.0
    tau, _ = kendalltau(fitted.positions, true.positions)
    return float(tau)


def recovery_report(model, truth: GroundTruth) -> dict:
    """How well a fitted model recovers ``truth``: Kendall tau of the
    sequences and the largest absolute error of in-band transition entries."""

    if list(model.feature_names) != list(truth.feature_names):
        raise ArgumentError(
            "model features %s do not match ground truth features %s"
            % (list(model.feature_names), list(truth.feature_names))
        )
    band = truth.transition.trans > 0
    errors = np.abs(model.transition.trans - truth.transition.trans)
    return {
        "kendall_tau": kendall_tau(model.sequence, truth.sequence),
        "fitted_sequence": model.sequence.names(model.feature_names),
        "true_sequence": truth.sequence.names(truth.feature_names),
        "max_transition_error": float(errors[band].max()),
        "mean_transition_error": float(errors[band].mean()),
    }
