"""Event-based hidden Markov model inference.

The model places the events of a cohort's features in a group-level
sequence. An individual at stage ``k`` has experienced the first ``k`` events
of the sequence, and stages evolve between visits as a Markov chain. Fitting
alternates between scoring re-orderings of the sequence (each scored after a
single forward-backward pass and transition update from a fixed
initialization) and accepting the best one, until a full sweep over the
events leaves the sequence unchanged.
"""

from .markov import TransitionModel, apply_structure_prior, interval_transitions
from .mixture import MixturePair, log_event_likelihoods, stage_log_emissions
from .sequence import EventSequence
from .stage_model import StageModel
from ..cohorts import CohortArrays
from ..config import FitConfig
from ..errors import (
    ArgumentError,
    DegenerateEmissionError,
    EmbeddingError,
    ModelFormatError,
)
from ..freezable import Freezable

import numpy as np
from scipy.special import logsumexp

import logging
from dataclasses import dataclass
from multiprocessing.pool import ThreadPool
from typing import NamedTuple, Optional, Sequence

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
TIE_TOLERANCE = 1e-9


class PosteriorTables(Freezable):
    """Smoothed stage posteriors of one individual.

    Args:

        gamma (``ndarray``):

            ``(T, K)``, ``gamma[t, a]`` is the probability of stage ``a`` at
            visit ``t`` given all visits.

        xi (``ndarray``):

            ``(T - 1, K, K)``, ``xi[t, a, b]`` is the probability of stage
            ``a`` at visit ``t`` and stage ``b`` at visit ``t + 1``.

        log_likelihood (``float``):

            Log marginal likelihood of the visits.
    """

    def __init__(self, gamma, xi, log_likelihood: float):
        self.gamma = np.array(gamma, dtype=np.float64)
        self.xi = np.array(xi, dtype=np.float64)
        self.log_likelihood = float(log_likelihood)

        assert self.gamma.ndim == 2, "gamma must be (T, K), got %s" % (
            self.gamma.shape,
        )
        assert self.xi.shape == (
            self.gamma.shape[0] - 1,
            self.gamma.shape[1],
            self.gamma.shape[1],
        ), "xi shape %s does not match gamma shape %s" % (
            self.xi.shape,
            self.gamma.shape,
        )

        self.freeze()

    @property
    def n_visits(self) -> int:
        return self.gamma.shape[0]


class BatchPosteriors(NamedTuple):
    """Forward-backward results for a padded batch of ``J`` individuals.
    ``gamma`` and ``xi`` are ``None`` if only likelihoods were requested."""

    log_likelihood: np.ndarray
    gamma: Optional[np.ndarray]
    xi: Optional[np.ndarray]


class TransitionEstimate(NamedTuple):
    pi: np.ndarray
    trans: np.ndarray
    notes: tuple


def forward_backward_batch(
    log_emissions: np.ndarray,
    steps: np.ndarray,
    valid: np.ndarray,
    pi: np.ndarray,
    posteriors: bool = True,
    ids: Optional[Sequence[str]] = None,
) -> BatchPosteriors:
    """Log-domain forward-backward over a padded batch.

    Args:

        log_emissions (``ndarray``):

            ``(J, T, K)`` log emission densities. Padded visits must have a
            log emission of 0 at every stage.

        steps (``ndarray``):

            ``(J, T - 1, K, K)`` transition matrices between consecutive
            visits, the identity for padded steps.

        valid (``ndarray``):

            ``(J, T)`` mask of real visits.

        pi (``ndarray``):

            Initial stage probabilities.

        posteriors (``bool``):

            Whether to run the backward pass and return ``gamma`` and ``xi``.

        ids (``list`` of ``str``, optional):

            Individual ids, used in error messages.
    """

    log_emissions = np.asarray(log_emissions, dtype=np.float64)
    n, t_max, _ = log_emissions.shape

    with np.errstate(divide="ignore"):
        log_steps = np.log(steps)
        log_pi = np.log(pi)

    def degenerate(j, t):
        individual = ids[j] if ids is not None else j
        if np.all(np.isneginf(log_emissions[j, t])):
            reason = "emission density is zero at every stage"
        else:
            reason = "visit is impossible under the stage transitions"
        return DegenerateEmissionError(reason, individual=individual, visit=t)

    log_alpha = np.empty_like(log_emissions)
    with np.errstate(invalid="ignore"):
        for t in range(t_max):
            if t == 0:
                log_alpha[:, 0] = log_pi[np.newaxis, :] + log_emissions[:, 0]
            else:
                log_alpha[:, t] = (
                    logsumexp(
                        log_alpha[:, t - 1, :, np.newaxis] + log_steps[:, t - 1], axis=1
                    )
                    + log_emissions[:, t]
                )
            dead = valid[:, t] & ~np.any(np.isfinite(log_alpha[:, t]), axis=1)
            if np.any(dead):
                raise degenerate(int(np.flatnonzero(dead)[0]), t)

    log_likelihood = logsumexp(log_alpha[:, -1], axis=1)
    if not posteriors:
        return BatchPosteriors(log_likelihood, None, None)

    log_beta = np.zeros_like(log_emissions)
    with np.errstate(invalid="ignore"):
        for t in range(t_max - 2, -1, -1):
            ahead = log_emissions[:, t + 1] + log_beta[:, t + 1]
            log_beta[:, t] = logsumexp(
                log_steps[:, t] + ahead[:, np.newaxis, :], axis=2
            )

    gamma = np.exp(log_alpha + log_beta - log_likelihood[:, np.newaxis, np.newaxis])
    gamma /= gamma.sum(axis=2, keepdims=True)

    ahead = log_emissions[:, 1:] + log_beta[:, 1:]
    xi = np.exp(
        log_alpha[:, :-1, :, np.newaxis]
        + log_steps
        + ahead[:, :, np.newaxis, :]
        - log_likelihood[:, np.newaxis, np.newaxis, np.newaxis]
    )
    if t_max > 1:
        xi /= xi.sum(axis=(2, 3), keepdims=True)

    return BatchPosteriors(log_likelihood, gamma, xi)


def forward_backward(
    emissions, intervals, model: TransitionModel, log_space: bool = False
) -> PosteriorTables:
    """Smoothed posteriors and log marginal likelihood of one individual.

    Args:

        emissions (``ndarray``):

            ``(T, K)`` emission densities of every visit at every stage, or
            their logarithms if ``log_space`` is set.

        intervals (``list`` of ``float``):

            The ``T - 1`` gaps between visits, in months.

        model (:class:`TransitionModel`):

            Initial stage probabilities and transitions.
    """

    emissions = np.asarray(emissions, dtype=np.float64)
    if emissions.ndim != 2 or emissions.shape[1] != model.n_stages:
        raise ArgumentError(
            "expected emissions of shape (T, %d), got %s"
            % (model.n_stages, emissions.shape)
        )
    n_visits = emissions.shape[0]
    intervals = np.asarray(intervals, dtype=np.float64).reshape(-1)
    if len(intervals) != n_visits - 1:
        raise ArgumentError(
            "%d visits need %d intervals, got %d"
            % (n_visits, n_visits - 1, len(intervals))
        )
    if np.any(~(intervals > 0)):
        raise ArgumentError("intervals must be positive, got %s" % intervals)

    if log_space:
        log_emissions = emissions
    else:
        if np.any(emissions < 0):
            raise ArgumentError("emission densities must be >= 0")
        with np.errstate(divide="ignore"):
            log_emissions = np.log(emissions)

    result = forward_backward_batch(
        log_emissions[np.newaxis],
        interval_transitions(model, intervals[np.newaxis]),
        np.ones((1, n_visits), dtype=bool),
        model.pi,
    )
    return PosteriorTables(result.gamma[0], result.xi[0], result.log_likelihood[0])


def expected_unit_transitions(
    xi: np.ndarray,
    intervals: np.ndarray,
    valid_steps: np.ndarray,
    model: TransitionModel,
) -> np.ndarray:
    """Expected numbers of ``a -> b`` transitions over single base intervals.

    A gap of ``m`` base intervals (rounded to the nearest integer) hides
    ``m - 1`` unobserved stages. Its pair posterior ``xi`` is spread over the
    unit transitions of every ``m`` step path of ``model`` between the two
    visited stages, weighted by the probability of the path. Gaps shorter
    than half a base interval are not counted.

    Args:

        xi (``ndarray``):

            ``(J, T - 1, K, K)`` pair posteriors between consecutive visits.

        intervals (``ndarray``):

            ``(J, T - 1)`` visit gaps in months.

        valid_steps (``ndarray``):

            ``(J, T - 1)`` mask of steps between two real visits.

        model (:class:`TransitionModel`):

            The transition model ``xi`` was computed under.
    """

    trans = model.trans
    counts = np.zeros_like(trans)
    multiples = np.where(
        valid_steps, np.rint(intervals / model.base_interval_months), 0
    ).astype(np.int64)

    for m in np.unique(multiples[multiples >= 1]):
        pairs = xi[multiples == m].sum(axis=0)
        if m == 1:
            counts += pairs
            continue
        powers = [np.linalg.matrix_power(trans, s) for s in range(m)]
        reach = powers[-1] @ trans
        # pairs[a, b] / P^m[a, b], dropping mass the m step chain can not carry
        ratio = np.divide(pairs, reach, out=np.zeros_like(pairs), where=reach > 0)
        counts += trans * sum(
            powers[s].T @ ratio @ powers[m - 1 - s].T for s in range(m)
        )

    return counts


def estimate_transition(pi, counts, initial: TransitionModel) -> TransitionEstimate:
    """Turn expected initial stages and expected transition counts into a
    new ``(pi, trans)`` under the band structure of ``initial``."""

    pi = np.asarray(pi, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    notes = []

    if counts.sum() <= 0:
        notes.append(
            "no visit gaps of half a base interval or more, "
            "keeping the initial transition matrix"
        )
        trans = initial.trans
    else:
        for a in np.flatnonzero(counts.sum(axis=1) <= 0):
            notes.append(
                "stage %d is never occupied before a transition, "
                "set to self-transition" % a
            )
        trans = apply_structure_prior(counts, initial.band_width, initial.monotone)

    return TransitionEstimate(pi / pi.sum(), trans, tuple(notes))


def update_transition(
    posteriors: Sequence[PosteriorTables],
    initial: TransitionModel,
    intervals: Optional[Sequence[Sequence[float]]] = None,
) -> TransitionEstimate:
    """A single M-step for ``pi`` and ``trans``.

    ``pi`` is the average first-visit posterior. ``trans[a, b]`` is the
    expected number of ``a -> b`` transitions over the expected number of
    transitions out of ``a``, restricted to the band of ``initial`` and
    renormalized.

    Args:

        posteriors (``list`` of :class:`PosteriorTables`):

            One table per individual.

        initial (:class:`TransitionModel`):

            The model the posteriors were computed under. Provides the band
            structure, and the transition matrix to keep if no transitions
            were observed.

        intervals (``list`` of ``list`` of ``float``, optional):

            Visit gaps per individual. If given, gaps of several base
            intervals count as that many unit transitions, see
            :func:`expected_unit_transitions`. Otherwise every gap counts as
            one base interval.
    """

    if len(posteriors) == 0:
        raise ArgumentError("no posteriors to update the transitions from")

    k = initial.n_stages
    counts = np.zeros((k, k))
    for j, tables in enumerate(posteriors):
        if tables.n_visits < 2:
            continue
        if intervals is None:
            gaps = np.full(tables.n_visits - 1, initial.base_interval_months)
        else:
            gaps = np.asarray(intervals[j], dtype=np.float64)
        counts += expected_unit_transitions(
            tables.xi[np.newaxis],
            gaps[np.newaxis],
            np.ones((1, len(gaps)), dtype=bool),
            initial,
        )

    pi = np.mean([tables.gamma[0] for tables in posteriors], axis=0)
    return estimate_transition(pi, counts, initial)


@dataclass(frozen=True)
class FitDiagnostics:
    """``log_likelihood_trace`` holds the accepted log-likelihood after the
    initialization and after every event visited by the coordinate ascent."""

    log_likelihood_trace: tuple
    iterations: int
    converged: bool
    restarts: int = 1
    notes: tuple = ()

    @property
    def log_likelihood(self) -> float:
        return self.log_likelihood_trace[-1]

    def to_dict(self) -> dict:
        return {
            "log_likelihood_trace": list(self.log_likelihood_trace),
            "iterations": self.iterations,
            "converged": self.converged,
            "restarts": self.restarts,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d) -> "FitDiagnostics":
        return cls(
            log_likelihood_trace=tuple(float(v) for v in d["log_likelihood_trace"]),
            iterations=int(d["iterations"]),
            converged=bool(d["converged"]),
            restarts=int(d.get("restarts", 1)),
            notes=tuple(d.get("notes", ())),
        )


class FittedModel(Freezable, StageModel):
    """A fitted event-based hidden Markov model.

    Args:

        sequence (:class:`EventSequence`):

            The event sequence.

        transition (:class:`TransitionModel`):

            Stage transitions over ``len(sequence) + 1`` stages.

        mixtures (``list`` of :class:`MixturePair`):

            Patient and control distributions, one per feature.

        feature_names (``list`` of ``str``):

            Names of the features, in feature index order.

        diagnostics (:class:`FitDiagnostics`, optional):

            How the fit went.
    """

    model_type = "ebhmm"

    def __init__(
        self,
        sequence: EventSequence,
        transition: TransitionModel,
        mixtures: Sequence[MixturePair],
        feature_names: Sequence[str],
        diagnostics: Optional[FitDiagnostics] = None,
    ):
        mixtures = tuple(mixtures)
        feature_names = tuple(feature_names)
        if not len(sequence) == len(mixtures) == len(feature_names):
            raise ArgumentError(
                "sequence of %d events, %d mixtures and %d feature names do not match"
                % (len(sequence), len(mixtures), len(feature_names))
            )
        if [p.feature_index for p in mixtures] != list(range(len(mixtures))):
            raise ArgumentError("mixtures must be given in feature index order")
        if transition.n_stages != len(sequence) + 1:
            raise ArgumentError(
                "%d events need %d stages, transition model has %d"
                % (len(sequence), len(sequence) + 1, transition.n_stages)
            )

        self.sequence = sequence
        self._transition = transition
        self.mixtures = mixtures
        self.feature_names = feature_names
        self.diagnostics = diagnostics

        self.freeze()

    @property
    def transition(self) -> TransitionModel:
        return self._transition

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def log_emissions(self, arrays: CohortArrays) -> np.ndarray:
        log_p, log_c = log_event_likelihoods(
            arrays.values, arrays.missing, self.mixtures
        )
        return stage_log_emissions(log_p, log_c, self.sequence)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "model_type": self.model_type,
            "feature_names": list(self.feature_names),
            "sequence": self.sequence.names(self.feature_names),
            "transition": self.transition.to_dict(),
            "mixtures": [
                dict(feature=self.feature_names[p.feature_index], **p.to_dict())
                for p in self.mixtures
            ],
            "diagnostics": (
                self.diagnostics.to_dict() if self.diagnostics is not None else None
            ),
        }

    @classmethod
    def from_dict(cls, d) -> "FittedModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise ModelFormatError(
                "unsupported model format version %r" % d.get("format_version")
            )
        if d.get("model_type", cls.model_type) != cls.model_type:
            raise ModelFormatError(
                "expected a %s model, got %r" % (cls.model_type, d.get("model_type"))
            )
        try:
            feature_names = list(d["feature_names"])
            mixtures = sorted(
                (MixturePair.from_dict(m) for m in d["mixtures"]),
                key=lambda p: p.feature_index,
            )
            diagnostics = d.get("diagnostics")
            return cls(
                EventSequence.from_names(d["sequence"], feature_names),
                TransitionModel.from_dict(d["transition"]),
                mixtures,
                feature_names,
                FitDiagnostics.from_dict(diagnostics) if diagnostics else None,
            )
        except (KeyError, TypeError) as e:
            raise ModelFormatError("malformed model document: %s" % e) from e
        except ArgumentError as e:
            raise ModelFormatError("invalid model: %s" % e) from e

    def __repr__(self):
        return "FittedModel(sequence=%s, %r)" % (
            self.sequence.names(self.feature_names),
            self.transition,
        )


def posterior_tables(cohort, model: StageModel) -> list[PosteriorTables]:
    """Smoothed posteriors of every individual of ``cohort``."""

    arrays = model.arrays(cohort)
    result = _run_batch(arrays, model, posteriors=True, ids=cohort.ids)
    tables = []
    for j, individual in enumerate(cohort):
        t = individual.n_visits
        tables.append(
            PosteriorTables(
                result.gamma[j, :t], result.xi[j, : t - 1], result.log_likelihood[j]
            )
        )
    return tables


def total_log_likelihood(cohort, model: StageModel) -> float:
    """``log P(Y | model)`` summed over the individuals of ``cohort``."""

    arrays = model.arrays(cohort)
    result = _run_batch(arrays, model, posteriors=False, ids=cohort.ids)
    return float(np.sum(result.log_likelihood))


def _run_batch(arrays: CohortArrays, model: StageModel, posteriors: bool, ids=None):
    return forward_backward_batch(
        model.log_emissions(arrays),
        interval_transitions(model.transition, arrays.intervals, arrays.valid_steps),
        arrays.valid,
        model.transition.pi,
        posteriors=posteriors,
        ids=ids,
    )


def initial_sequence(
    cohort, mixtures: Sequence[MixturePair], patient_label: str = "AD"
) -> EventSequence:
    """Order events by the fraction of ``patient_label`` values that are more
    likely under the patient component than under the control component,
    most frequently abnormal first. Ties keep feature index order."""

    fractions = []
    for i, pair in enumerate(mixtures):
        x = np.array(
            [
                obs.values[i]
                for ind in cohort
                for obs, label in zip(ind.observations, ind.diagnosis_labels)
                if label == patient_label and not obs.missing_mask[i]
            ]
        )
        if len(x) == 0:
            fractions.append(0.0)
        else:
            fractions.append(
                float(
                    np.mean(pair.patient.log_density(x) > pair.control.log_density(x))
                )
            )

    order = sorted(range(len(mixtures)), key=lambda i: (-fractions[i], i))
    logger.debug("abnormal fractions %s give initial sequence %s", fractions, order)
    return EventSequence(order)


class _Score(NamedTuple):
    sequence: EventSequence
    log_likelihood: float
    transition: TransitionModel
    notes: tuple


class _CandidateScorer:
    """Scores a sequence after one forward-backward pass and one transition
    update, both starting from the same initial transition model. Sequences
    under which some visit is impossible score ``-inf``."""

    def __init__(
        self, arrays: CohortArrays, log_p, log_c, initial: TransitionModel, ids
    ):
        self.arrays = arrays
        self.log_p = log_p
        self.log_c = log_c
        self.initial = initial
        self.ids = ids
        self.initial_steps = interval_transitions(
            initial, arrays.intervals, arrays.valid_steps
        )

    def __call__(self, sequence: EventSequence) -> _Score:
        log_emissions = stage_log_emissions(self.log_p, self.log_c, sequence)
        transition = self.initial
        notes: tuple = ()

        try:
            e_step = forward_backward_batch(
                log_emissions,
                self.initial_steps,
                self.arrays.valid,
                self.initial.pi,
                ids=self.ids,
            )
            estimate = estimate_transition(
                e_step.gamma[:, 0].mean(axis=0),
                expected_unit_transitions(
                    e_step.xi,
                    self.arrays.intervals,
                    self.arrays.valid_steps,
                    self.initial,
                ),
                self.initial,
            )
            transition = self.initial.replace(pi=estimate.pi, trans=estimate.trans)
            notes = estimate.notes

            steps = interval_transitions(
                transition, self.arrays.intervals, self.arrays.valid_steps
            )
            log_likelihood = float(
                np.sum(
                    forward_backward_batch(
                        log_emissions,
                        steps,
                        self.arrays.valid,
                        transition.pi,
                        posteriors=False,
                        ids=self.ids,
                    ).log_likelihood
                )
            )
        except (EmbeddingError, DegenerateEmissionError) as e:
            logger.debug("sequence %s can not be scored: %s", sequence, e)
            log_likelihood = -np.inf

        logger.debug("sequence %s scores %s", sequence, log_likelihood)
        return _Score(sequence, log_likelihood, transition, notes)


def improves(new: float, old: float) -> bool:
    """Whether log-likelihood ``new`` beats ``old`` by more than
    ``TIE_TOLERANCE``, relative to the magnitude of ``old``."""

    if not np.isfinite(old):
        return new > old
    return new > old + TIE_TOLERANCE * max(1.0, abs(old))


def fit(
    cohort,
    mixtures: Sequence[MixturePair],
    config: Optional[FitConfig] = None,
    patient_label: str = "AD",
) -> FittedModel:
    """Fit the event sequence and stage transitions of ``cohort``.

    Args:

        cohort (:class:`Cohort`):

            The training cohort.

        mixtures (``list`` of :class:`MixturePair`):

            Patient and control distributions of every feature, as returned
            by :func:`fit_mixtures`. They stay fixed.

        config (:class:`FitConfig`, optional):

            Base interval, band width, iteration limit, restarts, seed and
            number of threads.

        patient_label (``str``):

            Diagnosis used to derive the initial sequence.
    """

    config = config if config is not None else FitConfig()
    mixtures = sorted(mixtures, key=lambda p: p.feature_index)
    if [p.feature_index for p in mixtures] != list(range(cohort.n_features)):
        raise ArgumentError(
            "need one mixture per feature of the cohort (%d), got indices %s"
            % (cohort.n_features, [p.feature_index for p in mixtures])
        )

    arrays = CohortArrays.from_cohort(cohort, config.base_interval_months)
    log_p, log_c = log_event_likelihoods(arrays.values, arrays.missing, mixtures)
    initial = TransitionModel.initial(
        cohort.n_features + 1,
        base_interval_months=config.base_interval_months,
        band_width=config.band_width,
        self_transition=config.self_transition,
    )
    scorer = _CandidateScorer(arrays, log_p, log_c, initial, cohort.ids)

    starts = [initial_sequence(cohort, mixtures, patient_label)]
    rng = np.random.default_rng(config.seed)
    for _ in range(config.random_restarts - 1):
        starts.append(EventSequence(rng.permutation(cohort.n_features)))

    pool = ThreadPool(config.threads) if config.threads > 1 else None
    try:
        best = None
        for restart, start in enumerate(starts):
            result = _coordinate_ascent(scorer, start, config.max_outer_iter, pool)
            logger.info(
                "restart %d from %s ended at %s with log-likelihood %s",
                restart,
                start,
                result[0].sequence,
                result[0].log_likelihood,
            )
            if best is None or result[0].log_likelihood > best[0].log_likelihood:
                best = result
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    score, trace, iterations, converged, notes = best
    if not converged:
        logger.warning(
            "event sequence did not converge within %d sweeps", config.max_outer_iter
        )

    diagnostics = FitDiagnostics(
        log_likelihood_trace=tuple(trace),
        iterations=iterations,
        converged=converged,
        restarts=len(starts),
        notes=tuple(notes) + score.notes,
    )
    model = FittedModel(
        score.sequence, score.transition, mixtures, cohort.feature_names, diagnostics
    )
    logger.info("fitted %r", model)
    return model


def _coordinate_ascent(scorer, start: EventSequence, max_outer_iter: int, pool):
    current = scorer(start)
    trace = [current.log_likelihood]
    n_events = len(start)
    converged = False
    identifiable = True

    iterations = 0
    while iterations < max_outer_iter:
        iterations += 1
        changed = False
        identifiable = False

        for feature in range(n_events):
            candidates = [
                current.sequence.move(feature, p) for p in range(n_events)
            ]
            if pool is not None:
                scores = pool.map(scorer, candidates)
            else:
                scores = [scorer(c) for c in candidates]

            incumbent = current.sequence.position_of(feature)
            lls = np.array([s.log_likelihood for s in scores])
            lls[incumbent] = current.log_likelihood
            if improves(lls.max(), lls.min()):
                identifiable = True

            best = int(np.argmax(lls))
            if improves(lls[best], lls[incumbent]):
                logger.info(
                    "moving event %d from position %d to %d, log-likelihood %s -> %s",
                    feature,
                    incumbent,
                    best,
                    lls[incumbent],
                    lls[best],
                )
                current = scores[best]
                changed = True
            trace.append(current.log_likelihood)

        if not changed:
            converged = True
            break

    notes = []
    if not identifiable:
        notes.append(
            "all candidate sequences score within a relative %s of each other, the "
            "sequence is not identifiable from this cohort" % TIE_TOLERANCE
        )
    return current, trace, iterations, converged, notes
