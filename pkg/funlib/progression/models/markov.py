"""Stage transition models.

A :class:`TransitionModel` holds a row-stochastic matrix of transition
probabilities over one base interval (12 months by default). Transitions over
other intervals are obtained from matrix powers, or, for non-integer multiples
of the base interval, from the continuous-time generator
``G = log(trans) / base_interval``.
"""

from ..errors import ArgumentError, EmbeddingError, TimelineError
from ..freezable import Freezable

import numpy as np
import pandas as pd
from scipy.linalg import expm, logm

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

logger = logging.getLogger(__name__)

STOCHASTIC_ATOL = 1e-9


class TransitionModel(Freezable):
    """Initial stage probabilities and per-interval stage transitions.

    Args:

        pi (``ndarray``):

            Probabilities of the ``N + 1`` stages at the first visit.

        trans (``ndarray``):

            ``(N + 1, N + 1)`` row-stochastic matrix, ``trans[a, b]`` is the
            probability of being in stage ``b`` one base interval after being
            in stage ``a``.

        base_interval_months (``float``):

            The interval ``trans`` refers to.

        band_width (``int``):

            Transitions may only skip ahead by at most this many stages.

        monotone (``bool``):

            If set, ``trans`` has no mass below the diagonal (stages never
            decrease). Otherwise the band applies in both directions.
    """

    def __init__(
        self,
        pi,
        trans,
        base_interval_months: float = 12.0,
        band_width: int = 2,
        monotone: bool = True,
    ):
        pi = np.array(pi, dtype=np.float64).reshape(-1)
        trans = np.array(trans, dtype=np.float64)
        n = len(pi)

        if trans.shape != (n, n):
            raise ArgumentError(
                "transition matrix of shape %s does not match %d stages"
                % (trans.shape, n)
            )
        if np.any(pi < 0) or abs(pi.sum() - 1) > STOCHASTIC_ATOL:
            raise ArgumentError("initial probabilities are not stochastic: %s" % pi)
        if np.any(trans < 0) or np.any(
            np.abs(trans.sum(axis=1) - 1) > STOCHASTIC_ATOL
        ):
            raise ArgumentError("transition matrix is not row-stochastic:\n%s" % trans)
        if base_interval_months <= 0:
            raise ArgumentError(
                "base interval must be positive, got %s" % base_interval_months
            )
        if band_width < 1:
            raise ArgumentError("band width must be >= 1, got %s" % band_width)
        outside = ~band_mask(n, band_width, monotone) & (trans > 0)
        if np.any(outside):
            a, b = np.argwhere(outside)[0]
            raise ArgumentError(
                "transition %d -> %d has mass %s outside the %s band of width %d"
                % (
                    a,
                    b,
                    trans[a, b],
                    "monotone" if monotone else "symmetric",
                    band_width,
                )
            )

        self.pi = pi
        self.trans = trans
        self.base_interval_months = float(base_interval_months)
        self.band_width = int(band_width)
        self.monotone = bool(monotone)

        self.freeze()

    @classmethod
    def initial(
        cls,
        n_stages: int,
        base_interval_months: float = 12.0,
        band_width: int = 2,
        self_transition: float = 0.9,
        monotone: bool = True,
    ) -> "TransitionModel":
        """Uniform ``pi`` and the banded matrix of :func:`initial_transition`."""

        return cls(
            np.full(n_stages, 1.0 / n_stages),
            initial_transition(n_stages, band_width, self_transition, monotone),
            base_interval_months=base_interval_months,
            band_width=band_width,
            monotone=monotone,
        )

    @property
    def n_stages(self) -> int:
        return len(self.pi)

    @property
    def self_transitions(self) -> np.ndarray:
        return np.diag(self.trans).copy()

    def replace(self, pi=None, trans=None) -> "TransitionModel":
        return TransitionModel(
            self.pi if pi is None else pi,
            self.trans if trans is None else trans,
            base_interval_months=self.base_interval_months,
            band_width=self.band_width,
            monotone=self.monotone,
        )

    def to_dict(self) -> dict:
        return {
            "pi": self.pi.tolist(),
            "trans": self.trans.tolist(),
            "base_interval_months": self.base_interval_months,
            "band_width": self.band_width,
            "monotone": self.monotone,
        }

    @classmethod
    def from_dict(cls, d) -> "TransitionModel":
        return cls(
            d["pi"],
            d["trans"],
            base_interval_months=d.get("base_interval_months", 12.0),
            band_width=d.get("band_width", 2),
            monotone=d.get("monotone", True),
        )

    def __repr__(self):
        return "TransitionModel(stages=%d, base=%s months, band=%d, %s)" % (
            self.n_stages,
            self.base_interval_months,
            self.band_width,
            "monotone" if self.monotone else "symmetric",
        )


def band_mask(n_stages: int, band_width: int, monotone: bool = True) -> np.ndarray:
    """Entries a transition matrix may be nonzero at."""

    offset = np.arange(n_stages)[np.newaxis, :] - np.arange(n_stages)[:, np.newaxis]
    if monotone:
        return (offset >= 0) & (offset <= band_width)
    return np.abs(offset) <= band_width


def initial_transition(
    n_stages: int,
    band_width: int = 2,
    self_transition: float = 0.9,
    monotone: bool = True,
) -> np.ndarray:
    """A banded matrix with ``self_transition`` on the diagonal and the rest
    of each row spread evenly over the other in-band entries. Rows without
    other in-band entries (the last stage of a monotone model) stay put."""

    mask = band_mask(n_stages, band_width, monotone)
    np.fill_diagonal(mask, False)
    trans = np.zeros((n_stages, n_stages))
    for a in range(n_stages):
        targets = np.flatnonzero(mask[a])
        if len(targets) == 0:
            trans[a, a] = 1.0
        else:
            trans[a, a] = self_transition
            trans[a, targets] = (1 - self_transition) / len(targets)
    return trans


def apply_structure_prior(raw, band_width: int, monotone: bool = True) -> np.ndarray:
    """Restrict ``raw`` to the transition band and renormalize its rows.

    Entries outside ``[a, a + band_width]`` (``monotone``) or outside
    ``[a - band_width, a + band_width]`` are zeroed. Rows left without mass
    become self-transitions.
    """

    if band_width < 1:
        raise ArgumentError("band width must be >= 1, got %s" % band_width)
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise ArgumentError("expected a square matrix, got shape %s" % (raw.shape,))
    if np.any(raw < 0) or not np.all(np.isfinite(raw)):
        raise ArgumentError("transition counts must be finite and >= 0")

    n = raw.shape[0]
    masked = np.where(band_mask(n, band_width, monotone), raw, 0.0)
    sums = masked.sum(axis=1)

    trans = np.zeros_like(masked)
    has_mass = sums > 0
    trans[has_mass] = masked[has_mass] / sums[has_mass, np.newaxis]
    empty = np.flatnonzero(~has_mass)
    trans[empty, empty] = 1.0
    return trans


def generator(model: TransitionModel) -> np.ndarray:
    """The continuous-time generator ``log(trans) / base_interval``, in units
    of 1 / month, using the principal matrix logarithm.

    Raises :class:`EmbeddingError` if ``trans`` has no real logarithm."""

    eigenvalues = np.linalg.eigvals(model.trans)
    on_negative_axis = (np.abs(eigenvalues.imag) < 1e-12) & (eigenvalues.real <= 1e-12)
    if np.any(on_negative_axis):
        raise EmbeddingError(
            "transition matrix has no real logarithm (eigenvalues %s):\n%s"
            % (np.round(eigenvalues, 6), model.trans)
        )

    log_trans, error = logm(model.trans, disp=False)
    if np.iscomplexobj(log_trans):
        if np.max(np.abs(log_trans.imag)) > 1e-8:
            raise EmbeddingError(
                "matrix logarithm of transition matrix is complex:\n%s" % model.trans
            )
        log_trans = log_trans.real
    logger.debug("matrix logarithm estimated error %s", error)

    return np.asarray(log_trans) / model.base_interval_months


def transition_over_interval(model: TransitionModel, delta_months: float) -> np.ndarray:
    """Stage transition probabilities over ``delta_months``.

    Integer multiples of the base interval use matrix powers of ``trans``,
    anything else ``expm(delta * generator(model))``. The result is clipped to
    ``[0, 1]`` and its rows renormalized.
    """

    if not delta_months > 0:
        raise ArgumentError("interval must be positive, got %s" % delta_months)

    ratio = delta_months / model.base_interval_months
    steps = int(round(ratio))
    if steps >= 1 and abs(ratio - steps) < 1e-9:
        probabilities = np.linalg.matrix_power(model.trans, steps)
    else:
        probabilities = expm(delta_months * generator(model))
        if model.monotone:
            probabilities = np.triu(probabilities)

    probabilities = np.clip(probabilities, 0.0, 1.0)
    return probabilities / probabilities.sum(axis=1, keepdims=True)


def sojourn_times(model: TransitionModel) -> np.ndarray:
    """Expected months spent in each stage, ``base / (1 - q_kk)``. Absorbing
    stages (``q_kk = 1``) get ``inf``."""

    q = model.self_transitions
    sojourns = np.full(len(q), np.inf)
    leaving = q < 1
    sojourns[leaving] = model.base_interval_months / (1.0 - q[leaving])
    return sojourns


@dataclass(frozen=True)
class Timeline:
    """Expected time course of the events of a sequence.

    ``sojourns`` holds the expected months spent in each of the ``N + 1``
    stages, ``event_times`` the months after entering stage 0 at which each
    of the ``N`` events (in sequence order) occurs.
    """

    sojourns: np.ndarray
    event_times: np.ndarray
    event_names: tuple
    base_interval_months: float = 12.0

    @property
    def total_span_months(self) -> float:
        return float(self.event_times[-1]) if len(self.event_times) else 0.0

    @property
    def total_span_years(self) -> float:
        return self.total_span_months / 12.0

    def to_dict(self) -> dict:
        return {
            "event_names": list(self.event_names),
            "event_times_months": [float(t) for t in self.event_times],
            "sojourns_months": [
                float(s) if np.isfinite(s) else None for s in self.sojourns
            ],
            "base_interval_months": self.base_interval_months,
            "total_span_years": self.total_span_years,
        }

    def to_frame(self) -> pd.DataFrame:
        """One row per event. ``cumulative_years`` of the last row is the
        total span of the timeline."""

        months = [float(t) for t in self.event_times]
        return pd.DataFrame(
            {
                "event_name": list(self.event_names),
                "event_time_months": months,
                "cumulative_years": [m / 12.0 for m in months],
            }
        )

    def write_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False)

    def write_json(self, path: Union[str, Path], extra: Optional[dict] = None) -> None:
        d = self.to_dict()
        if extra:
            d.update(extra)
        with open(path, "w") as f:
            json.dump(d, f, indent=2)


def event_timeline(
    model: TransitionModel,
    sequence,
    feature_names: Optional[Sequence[str]] = None,
) -> Timeline:
    """Cumulative expected event times: event ``n`` of the sequence happens
    after the expected dwell in stages ``0..n``. The final stage's sojourn is
    not part of the timeline."""

    n_events = len(sequence)
    if model.n_stages != n_events + 1:
        raise ArgumentError(
            "model has %d stages, a sequence of %d events needs %d"
            % (model.n_stages, n_events, n_events + 1)
        )

    sojourns = sojourn_times(model)
    absorbing = np.flatnonzero(~np.isfinite(sojourns[:n_events]))
    if len(absorbing) > 0:
        raise TimelineError(
            "stage %d is absorbing before the final stage, its sojourn is infinite"
            % absorbing[0]
        )

    if feature_names is None:
        names = tuple(str(i) for i in sequence.order)
    else:
        names = tuple(sequence.names(feature_names))

    return Timeline(
        sojourns=sojourns,
        event_times=np.cumsum(sojourns[:n_events]),
        event_names=names,
        base_interval_months=model.base_interval_months,
    )


def interval_transitions(
    model: TransitionModel,
    intervals: np.ndarray,
    valid_steps: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Transition matrices for every gap of a ``(J, T - 1)`` interval array,
    shape ``(J, T - 1, K, K)``. Each distinct gap is computed once; steps
    outside ``valid_steps`` get the identity."""

    intervals = np.asarray(intervals, dtype=np.float64)
    k = model.n_stages
    steps = np.broadcast_to(np.eye(k), intervals.shape + (k, k)).copy()
    if intervals.size == 0:
        return steps

    if valid_steps is None:
        valid_steps = np.ones(intervals.shape, dtype=bool)
    if not np.any(valid_steps):
        return steps
    gaps, inverse = np.unique(intervals[valid_steps], return_inverse=True)
    matrices = np.stack([transition_over_interval(model, gap) for gap in gaps])
    steps[valid_steps] = matrices[inverse.reshape(-1)]
    return steps
