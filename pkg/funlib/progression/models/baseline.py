"""Continuous-time hidden Markov model with Gaussian emissions.

An unstructured baseline for the event-based model: ``K`` hidden states with
multivariate Gaussian emissions and a banded, non-monotone transition
matrix. Visits with missing features use the marginal Gaussian of their
observed features, and the M-step uses the conditional expectations of the
missing features, so EM stays exact on incomplete data.
"""

from .inference import (
    estimate_transition,
    expected_unit_transitions,
    forward_backward_batch,
    improves,
)
from .markov import TransitionModel, initial_transition, interval_transitions
from .stage_model import StageModel
from .staging import StagePath, viterbi_stage
from ..cohorts import CohortArrays
from ..config import CTHMMConfig
from ..errors import ArgumentError, BaselineFitError, ModelFormatError
from ..freezable import Freezable

import numpy as np
from scipy.stats import multivariate_normal
from sklearn.cluster import KMeans

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class CTHMMDiagnostics:
    log_likelihood_trace: tuple
    iterations: int
    converged: bool
    notes: tuple = ()

    @property
    def log_likelihood(self) -> float:
        return self.log_likelihood_trace[-1]

    def to_dict(self) -> dict:
        return {
            "log_likelihood_trace": list(self.log_likelihood_trace),
            "iterations": self.iterations,
            "converged": self.converged,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d) -> "CTHMMDiagnostics":
        return cls(
            log_likelihood_trace=tuple(float(v) for v in d["log_likelihood_trace"]),
            iterations=int(d["iterations"]),
            converged=bool(d["converged"]),
            notes=tuple(d.get("notes", ())),
        )


class CTHMMModel(Freezable, StageModel):
    """A fitted CT-HMM.

    Args:

        transition (:class:`TransitionModel`):

            Initial state probabilities and banded state transitions.

        means (``ndarray``):

            ``(K, I)`` emission means, one row per state.

        covariance (``ndarray``):

            The ``(I, I)`` emission covariance shared by all states if
            ``covariance_type`` is ``"shared"``, or the ``(K, I)`` per-state
            variances if it is ``"diagonal"``.

        feature_names (``list`` of ``str``):

            Names of the features.
    """

    model_type = "cthmm"

    def __init__(
        self,
        transition: TransitionModel,
        means,
        covariance,
        feature_names: Sequence[str],
        covariance_type: str = "shared",
        diagnostics: Optional[CTHMMDiagnostics] = None,
    ):
        means = np.array(means, dtype=np.float64)
        covariance = np.array(covariance, dtype=np.float64)
        feature_names = tuple(feature_names)
        k, n_features = transition.n_stages, len(feature_names)

        if means.shape != (k, n_features):
            raise ArgumentError(
                "expected means of shape %s, got %s" % ((k, n_features), means.shape)
            )
        if covariance_type == "shared":
            if covariance.shape != (n_features, n_features):
                raise ArgumentError(
                    "expected a shared covariance of shape %s, got %s"
                    % ((n_features, n_features), covariance.shape)
                )
            if not np.allclose(covariance, covariance.T):
                raise ArgumentError("emission covariance is not symmetric")
            try:
                np.linalg.cholesky(covariance)
            except np.linalg.LinAlgError as e:
                raise ArgumentError(
                    "emission covariance is not positive definite"
                ) from e
        elif covariance_type == "diagonal":
            if covariance.shape != (k, n_features):
                raise ArgumentError(
                    "expected per-state variances of shape %s, got %s"
                    % ((k, n_features), covariance.shape)
                )
            if not np.all(covariance > 0):
                raise ArgumentError("emission variances must be positive")
        else:
            raise ArgumentError("unknown covariance type %r" % covariance_type)

        self._transition = transition
        self.means = means
        self.covariance = covariance
        self.covariance_type = covariance_type
        self.feature_names = feature_names
        self.diagnostics = diagnostics

        self.freeze()

    @property
    def transition(self) -> TransitionModel:
        return self._transition

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def state_covariances(self) -> np.ndarray:
        """``(K, I, I)`` emission covariance of every state."""

        k = self.n_stages
        if self.covariance_type == "shared":
            return np.broadcast_to(self.covariance, (k,) + self.covariance.shape)
        return np.stack([np.diag(v) for v in self.covariance])

    def log_emissions(self, arrays: CohortArrays) -> np.ndarray:
        n, t_max, n_features = arrays.shape
        x = arrays.values.reshape(-1, n_features)
        observed = ~arrays.missing.reshape(-1, n_features)
        return _marginal_log_densities(
            x, observed, self.means, self.state_covariances()
        ).reshape(n, t_max, self.n_stages)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "model_type": self.model_type,
            "feature_names": list(self.feature_names),
            "transition": self.transition.to_dict(),
            "means": self.means.tolist(),
            "covariance_type": self.covariance_type,
            "covariance": self.covariance.tolist(),
            "diagnostics": (
                self.diagnostics.to_dict() if self.diagnostics is not None else None
            ),
        }

    @classmethod
    def from_dict(cls, d) -> "CTHMMModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise ModelFormatError(
                "unsupported model format version %r" % d.get("format_version")
            )
        if d.get("model_type") != cls.model_type:
            raise ModelFormatError(
                "expected a %s model, got %r" % (cls.model_type, d.get("model_type"))
            )
        try:
            diagnostics = d.get("diagnostics")
            return cls(
                TransitionModel.from_dict(d["transition"]),
                d["means"],
                d["covariance"],
                d["feature_names"],
                covariance_type=d.get("covariance_type", "shared"),
                diagnostics=(
                    CTHMMDiagnostics.from_dict(diagnostics) if diagnostics else None
                ),
            )
        except (KeyError, TypeError) as e:
            raise ModelFormatError("malformed model document: %s" % e) from e
        except ArgumentError as e:
            raise ModelFormatError("invalid model: %s" % e) from e

    def __repr__(self):
        return "CTHMMModel(states=%d, features=%d, covariance=%s)" % (
            self.n_stages,
            self.n_features,
            self.covariance_type,
        )


def _patterns(observed: np.ndarray):
    """Group rows by their pattern of observed features."""

    patterns, inverse = np.unique(observed, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    for p, pattern in enumerate(patterns):
        yield pattern, np.flatnonzero(inverse == p)


def _marginal_log_densities(x, observed, means, covariances) -> np.ndarray:
    log_densities = np.zeros((len(x), len(means)))
    for pattern, rows in _patterns(observed):
        if not pattern.any():
            continue
        obs = np.flatnonzero(pattern)
        for k, (mean, cov) in enumerate(zip(means, covariances)):
            log_densities[rows, k] = multivariate_normal.logpdf(
                x[np.ix_(rows, obs)], mean=mean[obs], cov=cov[np.ix_(obs, obs)]
            )
    return log_densities


def _conditional_moments(x, observed, mean, cov):
    """Expected values of every row given its observed features, and the
    covariance of its missing features, per pattern of observed features.

    Returns ``(x_hat, correction)`` with ``x_hat`` of shape ``(n, I)`` and
    ``correction`` of shape ``(n, I, I)``, zero outside the missing block.
    """

    n, n_features = x.shape
    x_hat = np.empty_like(x)
    correction = np.zeros((n, n_features, n_features))

    for pattern, rows in _patterns(observed):
        obs = np.flatnonzero(pattern)
        mis = np.flatnonzero(~pattern)
        x_hat[np.ix_(rows, obs)] = x[np.ix_(rows, obs)]
        if len(mis) == 0:
            continue
        if len(obs) == 0:
            x_hat[np.ix_(rows, mis)] = mean[mis]
            correction[np.ix_(rows, mis, mis)] = cov[np.ix_(mis, mis)]
            continue

        cov_oo = cov[np.ix_(obs, obs)]
        cov_mo = cov[np.ix_(mis, obs)]
        regression = np.linalg.solve(cov_oo, cov_mo.T).T
        residual = x[np.ix_(rows, obs)] - mean[obs]
        x_hat[np.ix_(rows, mis)] = mean[mis] + residual @ regression.T
        conditional = cov[np.ix_(mis, mis)] - regression @ cov_mo.T
        correction[np.ix_(rows, mis, mis)] = conditional

    return x_hat, correction


def _initial_clusters(data: np.ndarray, n_states: int, config: CTHMMConfig):
    if len(data) < n_states:
        raise BaselineFitError(
            "%d visits can not be clustered into %d states" % (len(data), n_states)
        )
    for attempt in range(config.kmeans_attempts):
        kmeans = KMeans(
            n_clusters=n_states, n_init=1, random_state=config.seed + attempt
        )
        labels = kmeans.fit_predict(data)
        sizes = np.bincount(labels, minlength=n_states)
        if np.all(sizes > 0):
            return kmeans.cluster_centers_, labels
        logger.debug(
            "k-means attempt %d left %d empty clusters", attempt, np.sum(sizes == 0)
        )
    raise BaselineFitError(
        "k-means left empty clusters after %d attempts" % config.kmeans_attempts
    )


def _severity_axis(data, labels, patient_label, control_label) -> np.ndarray:
    patients = labels == patient_label
    controls = labels == control_label
    if patients.any() and controls.any():
        axis = data[patients].mean(axis=0) - data[controls].mean(axis=0)
        if np.linalg.norm(axis) > 1e-12:
            return axis
    logger.debug("no %s/%s axis, ordering states along the first principal direction",
                 control_label, patient_label)
    _, _, vt = np.linalg.svd(data - data.mean(axis=0), full_matrices=False)
    axis = vt[0]
    return axis if axis[np.argmax(np.abs(axis))] > 0 else -axis


def fit_cthmm(
    cohort,
    n_states: Optional[int] = None,
    config: Optional[CTHMMConfig] = None,
    patient_label: str = "AD",
    control_label: str = "CN",
) -> CTHMMModel:
    """Fit a CT-HMM to ``cohort`` by EM.

    Emission means start at k-means centroids of the visits (missing values
    imputed by feature means for the clustering only), ordered along the
    ``control_label`` to ``patient_label`` mean axis. EM runs until the total
    log-likelihood changes by less than ``config.tol``.

    Args:

        cohort (:class:`Cohort`):

            The training cohort.

        n_states (``int``, optional):

            Number of hidden states, defaults to ``config.n_states`` or the
            number of features + 1.

        config (:class:`CTHMMConfig`, optional):

            Fit settings.
    """

    config = config if config is not None else CTHMMConfig()
    if n_states is None:
        n_states = (
            config.n_states if config.n_states is not None else cohort.n_features + 1
        )
    if n_states < 2:
        raise ArgumentError("need at least 2 states, got %d" % n_states)

    arrays = CohortArrays.from_cohort(cohort, config.base_interval_months)
    valid = arrays.valid
    x = arrays.values[valid]
    observed = ~arrays.missing[valid]
    visit_labels = np.array([label for ind in cohort for label in ind.diagnosis_labels])

    feature_means = np.array(
        [
            x[observed[:, i], i].mean() if observed[:, i].any() else np.nan
            for i in range(x.shape[1])
        ]
    )
    if np.any(np.isnan(feature_means)):
        raise BaselineFitError(
            "features %s are never observed"
            % [cohort.feature_names[i] for i in np.flatnonzero(np.isnan(feature_means))]
        )
    imputed = np.where(observed, x, feature_means)

    centers, clusters = _initial_clusters(imputed, n_states, config)
    axis = _severity_axis(imputed, visit_labels, patient_label, control_label)
    order = np.argsort(centers @ axis, kind="stable")
    means = centers[order]

    regularization = config.reg_covar * np.eye(x.shape[1])
    if config.covariance == "shared":
        covariance = np.atleast_2d(np.cov(imputed, rowvar=False)) + regularization
    else:
        overall = imputed.var(axis=0)
        covariance = np.stack(
            [
                (
                    imputed[clusters == c].var(axis=0)
                    if np.sum(clusters == c) > 1
                    else overall
                )
                for c in order
            ]
        )
        covariance = np.maximum(covariance, overall * 1e-3) + config.reg_covar

    transition = TransitionModel(
        np.full(n_states, 1.0 / n_states),
        initial_transition(
            n_states, config.band_width, config.self_transition, monotone=False
        ),
        base_interval_months=config.base_interval_months,
        band_width=config.band_width,
        monotone=False,
    )
    model = CTHMMModel(
        transition, means, covariance, cohort.feature_names, config.covariance
    )

    trace = []
    notes = []
    converged = False
    iteration = 0
    for iteration in range(1, config.max_iter + 1):
        posteriors = forward_backward_batch(
            model.log_emissions(arrays),
            interval_transitions(
                model.transition, arrays.intervals, arrays.valid_steps
            ),
            valid,
            model.transition.pi,
            ids=cohort.ids,
        )
        log_likelihood = float(np.sum(posteriors.log_likelihood))
        logger.debug(
            "CT-HMM EM iteration %d: log-likelihood %s", iteration, log_likelihood
        )

        _record_log_likelihood(trace, log_likelihood, notes)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < config.tol:
            converged = True
            break

        model = _m_step(model, arrays, posteriors, x, observed, config, notes)

    if not converged:
        logger.warning("CT-HMM EM did not converge in %d iterations", config.max_iter)

    model = CTHMMModel(
        model.transition,
        model.means,
        model.covariance,
        model.feature_names,
        model.covariance_type,
        CTHMMDiagnostics(
            tuple(trace), iteration, converged, tuple(dict.fromkeys(notes))
        ),
    )
    logger.info("fitted %r, log-likelihood %s", model, trace[-1])
    return model


def _record_log_likelihood(trace, log_likelihood, notes):
    """Append to the EM trace. Regularizing the covariances after the
    M-step and fractional visit gaps can lower the log-likelihood slightly."""

    if trace and improves(trace[-1], log_likelihood):
        logger.warning(
            "CT-HMM log-likelihood decreased from %s to %s", trace[-1], log_likelihood
        )
        notes.append("log-likelihood decreased during EM")
    trace.append(log_likelihood)


def _m_step(model, arrays, posteriors, x, observed, config, notes) -> CTHMMModel:
    estimate = estimate_transition(
        posteriors.gamma[:, 0].mean(axis=0),
        expected_unit_transitions(
            posteriors.xi, arrays.intervals, arrays.valid_steps, model.transition
        ),
        model.transition,
    )
    notes.extend(estimate.notes)
    transition = model.transition.replace(pi=estimate.pi, trans=estimate.trans)

    weights = posteriors.gamma[arrays.valid]
    covariances = model.state_covariances()
    n_features = x.shape[1]

    means = model.means.copy()
    scatter = np.zeros((model.n_stages, n_features, n_features))
    totals = weights.sum(axis=0)
    for k in range(model.n_stages):
        if totals[k] <= 1e-12:
            notes.append("state %d has no posterior mass, keeping its emission" % k)
            scatter[k] = covariances[k] * max(totals[k], 0.0)
            continue
        x_hat, correction = _conditional_moments(
            x, observed, model.means[k], covariances[k]
        )
        w = weights[:, k]
        means[k] = w @ x_hat / totals[k]
        centered = x_hat - means[k]
        scatter[k] = (centered * w[:, np.newaxis]).T @ centered + np.einsum(
            "n,nij->ij", w, correction
        )

    if config.covariance == "shared":
        covariance = scatter.sum(axis=0) / totals.sum()
        covariance = 0.5 * (covariance + covariance.T)
        covariance += config.reg_covar * np.eye(n_features)
    else:
        covariance = model.covariance.copy()
        for k in range(model.n_stages):
            if totals[k] > 1e-12:
                covariance[k] = np.diag(scatter[k]) / totals[k] + config.reg_covar

    return CTHMMModel(
        transition, means, covariance, model.feature_names, model.covariance_type
    )


def stage_cthmm(individual, model: CTHMMModel) -> StagePath:
    """Most probable state path of ``individual``. Unlike event-based paths,
    CT-HMM paths may step back within the transition band."""

    return viterbi_stage(individual, model)
