"""Patient/control Gaussian event distributions.

Each feature gets a two-component Gaussian mixture: the control component
describes values before the feature's event, the patient component values
after it. A missing value has density 1 under both components, so it never
changes the relative likelihood of stages.
"""

from .sequence import EventSequence
from ..config import MixtureConfig
from ..errors import ArgumentError, MixtureFitError

import numpy as np
from scipy.stats import norm

import logging
from dataclasses import dataclass
from multiprocessing.pool import ThreadPool
from typing import Optional, Sequence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaussianParams:
    mu: float
    sigma: float
    weight: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ArgumentError("sigma must be positive, got %s" % self.sigma)
        if not 0 <= self.weight <= 1:
            raise ArgumentError("weight must be in [0, 1], got %s" % self.weight)
        if not np.isfinite(self.mu):
            raise ArgumentError("mu must be finite, got %s" % self.mu)

    def log_density(self, x):
        return norm.logpdf(x, loc=self.mu, scale=self.sigma)

    def to_dict(self) -> dict:
        return {"mu": self.mu, "sigma": self.sigma, "weight": self.weight}


@dataclass(frozen=True)
class MixturePair:
    """The patient and control components of one feature.

    ``increasing`` records the abnormal direction of the feature: the patient
    mean is never below (``increasing``) or above (decreasing) the control
    mean. ``converged`` is ``False`` if the fit stopped at its iteration limit.
    """

    patient: GaussianParams
    control: GaussianParams
    feature_index: int
    increasing: bool = True
    converged: bool = True

    def __post_init__(self):
        if abs(self.patient.weight + self.control.weight - 1) > 1e-9:
            raise ArgumentError(
                "mixture weights must sum to 1, got %s + %s"
                % (self.patient.weight, self.control.weight)
            )
        sign = 1 if self.increasing else -1
        if sign * (self.patient.mu - self.control.mu) < 0:
            raise ArgumentError(
                "patient mean %s of feature %d is not on the abnormal side of "
                "control mean %s"
                % (self.patient.mu, self.feature_index, self.control.mu)
            )

    def to_dict(self) -> dict:
        return {
            "feature_index": self.feature_index,
            "increasing": self.increasing,
            "converged": self.converged,
            "patient": self.patient.to_dict(),
            "control": self.control.to_dict(),
        }

    @classmethod
    def from_dict(cls, d) -> "MixturePair":
        return cls(
            patient=GaussianParams(**d["patient"]),
            control=GaussianParams(**d["control"]),
            feature_index=int(d["feature_index"]),
            increasing=bool(d.get("increasing", True)),
            converged=bool(d.get("converged", True)),
        )


def fit_mixtures(
    cohort,
    patient_label: str = "AD",
    control_label: str = "CN",
    config: Optional[MixtureConfig] = None,
    threads: int = 1,
) -> list[MixturePair]:
    """Fit one :class:`MixturePair` per feature of ``cohort``.

    Components are initialized from the values of visits labelled
    ``patient_label`` and ``control_label`` and then refined by EM over the
    values of all visits with a diagnosis. Visits labelled ``NA`` are left
    out. Component means stay within ``config.max_shift_sd`` labelled-group
    standard deviations of their initial values and the patient mean stays on
    the abnormal side.

    Args:

        cohort (:class:`Cohort`):

            The cohort to fit to. Missing values are skipped.

        patient_label, control_label (``str``):

            Diagnoses of the visits that define the two groups.

        config (:class:`MixtureConfig`, optional):

            Fit settings.

        threads (``int``):

            Number of features to fit concurrently.
    """

    config = config if config is not None else MixtureConfig()

    values = []
    labels = []
    individual = []
    for j, ind in enumerate(cohort):
        values.append(ind.values)
        labels.extend(ind.diagnosis_labels)
        individual.extend([j] * ind.n_visits)
    all_values = np.concatenate(values, axis=0)
    labels = np.array(labels)
    individual = np.array(individual)

    def fit_feature(i):
        x = all_values[:, i]
        observed = ~np.isnan(x)
        diagnosed = observed & (labels != "NA")
        patients = observed & (labels == patient_label)
        controls = observed & (labels == control_label)
        name = cohort.feature_names[i]

        for group, mask in ((patient_label, patients), (control_label, controls)):
            n_individuals = len(np.unique(individual[mask]))
            if n_individuals < config.min_group_size:
                raise MixtureFitError(
                    "feature %s has observed values for only %d %s individuals, "
                    "need at least %d"
                    % (name, n_individuals, group, config.min_group_size)
                )

        return fit_feature_mixture(
            x[diagnosed],
            x[patients],
            x[controls],
            feature_index=i,
            increasing=bool(cohort.increasing[i]),
            config=config,
            name=name,
        )

    features = range(cohort.n_features)
    if threads > 1:
        with ThreadPool(threads) as pool:
            pairs = pool.map(fit_feature, features)
    else:
        pairs = [fit_feature(i) for i in features]

    logger.info(
        "fitted mixtures for %d features, %d converged",
        len(pairs),
        sum(p.converged for p in pairs),
    )
    return pairs


def fit_feature_mixture(
    values: np.ndarray,
    patient_values: np.ndarray,
    control_values: np.ndarray,
    feature_index: int,
    increasing: bool = True,
    config: Optional[MixtureConfig] = None,
    name: Optional[str] = None,
) -> MixturePair:
    """Constrained two-component EM for a single feature.

    Returns the iterate with the highest mixture log-likelihood. If the
    log-likelihood did not settle within ``config.max_iter`` iterations, the
    returned pair has ``converged=False``.
    """

    config = config if config is not None else MixtureConfig()
    name = name if name is not None else str(feature_index)
    sign = 1.0 if increasing else -1.0

    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0 or len(patient_values) == 0 or len(control_values) == 0:
        raise MixtureFitError("no labelled values to fit feature %s" % name)

    fallback_sd = np.std(values) if np.std(values) > 0 else 1.0
    sd_p = _group_sd(patient_values, fallback_sd)
    sd_c = _group_sd(control_values, fallback_sd)

    mu_p = float(np.mean(patient_values))
    mu_c = float(np.mean(control_values))
    if sign * (mu_p - mu_c) < 0:
        logger.debug(
            "labelled means of feature %s are reversed (%s, %s), starting from "
            "their midpoint",
            name,
            mu_p,
            mu_c,
        )
        mu_p = mu_c = 0.5 * (mu_p + mu_c)

    bounds_p = (mu_p - config.max_shift_sd * sd_p, mu_p + config.max_shift_sd * sd_p)
    bounds_c = (mu_c - config.max_shift_sd * sd_c, mu_c + config.max_shift_sd * sd_c)
    floor_p = config.sigma_floor * sd_p
    floor_c = config.sigma_floor * sd_c

    params = np.array(
        [
            mu_p,
            sd_p,
            mu_c,
            sd_c,
            len(patient_values) / (len(patient_values) + len(control_values)),
        ]
    )

    best_ll = -np.inf
    best = params
    previous_ll = None
    converged = False
    for iteration in range(config.max_iter):
        mu_p, s_p, mu_c, s_c, w_p = params
        w_p = np.clip(w_p, 1e-12, 1 - 1e-12)
        log_p = np.log(w_p) + norm.logpdf(values, mu_p, s_p)
        log_c = np.log1p(-w_p) + norm.logpdf(values, mu_c, s_c)
        log_total = np.logaddexp(log_p, log_c)
        resp_p = np.exp(log_p - log_total)
        ll = float(np.sum(log_total))

        if ll > best_ll:
            best_ll = ll
            best = params

        if previous_ll is not None and abs(ll - previous_ll) < config.tol:
            converged = True
            break
        previous_ll = ll

        params = _m_step(
            values,
            resp_p,
            params,
            sign,
            bounds_p,
            bounds_c,
            floor_p,
            floor_c,
        )

    if not converged:
        logger.warning(
            "mixture EM of feature %s did not converge in %d iterations, "
            "keeping best iterate",
            name,
            config.max_iter,
        )
    else:
        logger.debug(
            "mixture EM of feature %s converged after %d iterations", name, iteration
        )

    mu_p, s_p, mu_c, s_c, w_p = best
    return MixturePair(
        patient=GaussianParams(float(mu_p), float(s_p), float(w_p)),
        control=GaussianParams(float(mu_c), float(s_c), float(1 - w_p)),
        feature_index=feature_index,
        increasing=increasing,
        converged=converged,
    )


def _group_sd(values, fallback: float) -> float:
    if len(values) > 1 and np.std(values, ddof=1) > 0:
        return float(np.std(values, ddof=1))
    return float(fallback)


def _m_step(values, resp_p, params, sign, bounds_p, bounds_c, floor_p, floor_c):
    mu_p, s_p, mu_c, s_c, _ = params
    resp_c = 1 - resp_p
    n_p = resp_p.sum()
    n_c = resp_c.sum()

    if n_p > 0:
        mu_p = np.sum(resp_p * values) / n_p
        s_p = np.sqrt(np.sum(resp_p * (values - mu_p) ** 2) / n_p)
    if n_c > 0:
        mu_c = np.sum(resp_c * values) / n_c
        s_c = np.sqrt(np.sum(resp_c * (values - mu_c) ** 2) / n_c)

    mu_p = np.clip(mu_p, *bounds_p)
    mu_c = np.clip(mu_c, *bounds_c)
    if sign * (mu_p - mu_c) < 0:
        mu_p = mu_c = 0.5 * (mu_p + mu_c)

    return np.array(
        [mu_p, max(s_p, floor_p), mu_c, max(s_c, floor_c), n_p / len(values)]
    )


def event_likelihood_pair(x: Optional[float], pair: MixturePair) -> tuple[float, float]:
    """Densities of ``x`` under the patient and the control component.

    ``None`` stands for a missing value and yields ``(1.0, 1.0)``.
    """

    if x is None:
        return 1.0, 1.0
    if not np.isfinite(x):
        raise ArgumentError("observed value must be finite, got %s" % x)
    return (
        float(np.exp(pair.patient.log_density(x))),
        float(np.exp(pair.control.log_density(x))),
    )


def log_event_likelihoods(
    values: np.ndarray, missing: np.ndarray, pairs: Sequence[MixturePair]
) -> tuple[np.ndarray, np.ndarray]:
    """Patient and control log densities of ``values`` (shape ``(..., I)``),
    0 wherever ``missing`` is set."""

    mu_p = np.array([p.patient.mu for p in pairs])
    s_p = np.array([p.patient.sigma for p in pairs])
    mu_c = np.array([p.control.mu for p in pairs])
    s_c = np.array([p.control.sigma for p in pairs])

    x = np.where(missing, 0.0, values)
    log_p = np.where(missing, 0.0, norm.logpdf(x, mu_p, s_p))
    log_c = np.where(missing, 0.0, norm.logpdf(x, mu_c, s_c))
    return log_p, log_c


def stage_log_emissions(
    log_p: np.ndarray, log_c: np.ndarray, sequence: EventSequence
) -> np.ndarray:
    """Log emission of every stage ``k = 0..I`` given per-feature log
    densities of shape ``(..., I)``. Features at positions ``< k`` use the
    patient density, the others the control density."""

    order = sequence.order
    gain = (log_p - log_c)[..., order]
    cumulative = np.concatenate(
        [np.zeros(gain.shape[:-1] + (1,)), np.cumsum(gain, axis=-1)], axis=-1
    )
    return log_c.sum(axis=-1, keepdims=True) + cumulative


def stage_emission(
    observation, k: int, sequence: EventSequence, pairs: Sequence[MixturePair]
) -> float:
    """Emission density of ``observation`` at stage ``k``."""

    n_features = len(pairs)
    if not 0 <= k <= n_features:
        raise ArgumentError("stage %d out of range [0, %d]" % (k, n_features))

    log_p, log_c = log_event_likelihoods(
        observation.values, observation.missing_mask, pairs
    )
    occurred = sequence.order[:k]
    pending = sequence.order[k:]
    return float(np.exp(log_p[occurred].sum() + log_c[pending].sum()))
