from .markov import TransitionModel
from ..cohorts import CohortArrays
from ..errors import ArgumentError

import numpy as np

import json
import logging
from abc import ABC, abstractmethod

logger = logging.getLogger(__name__)


class StageModel(ABC):
    """
    Interface for hidden stage models of longitudinal cohorts.

    A stage model combines a :class:`TransitionModel` over ``K`` stages with
    per-stage emission densities of the visit values. Implementations only
    provide the emissions; decoding and prediction work on any stage model::

        # model is a StageModel

        # log emission densities of every visit at every stage
        log_emissions = model.log_emissions(CohortArrays.from_cohort(cohort, 12))

        # decoding
        path = viterbi_stage(individual, model)
    """

    model_type: str = ""

    @property
    @abstractmethod
    def transition(self) -> TransitionModel:
        """
        The initial stage probabilities and stage transitions.
        """
        pass

    @property
    @abstractmethod
    def n_features(self) -> int:
        pass

    @abstractmethod
    def log_emissions(self, arrays: CohortArrays) -> np.ndarray:
        """
        Log emission densities of all (padded) visits.

        Arguments:

            arrays (:class:`CohortArrays`):

                Visits of shape ``(J, T, I)``.

        Returns:

            An array of shape ``(J, T, K)``. Visits with every feature
            missing have a log emission of 0 at every stage.
        """
        pass

    @abstractmethod
    def to_dict(self) -> dict:
        """
        Serialize the model to a JSON-compatible dictionary, including
        ``format_version`` and ``model_type``.
        """
        pass

    @classmethod
    @abstractmethod
    def from_dict(cls, d: dict) -> "StageModel":
        """
        Restore a model from :meth:`to_dict` output. Raises
        :class:`ModelFormatError` on version or type mismatch.
        """
        pass

    @property
    def n_stages(self) -> int:
        return self.transition.n_stages

    @property
    def base_interval_months(self) -> float:
        return self.transition.base_interval_months

    def arrays(self, cohort) -> CohortArrays:
        if cohort.n_features != self.n_features:
            raise ArgumentError(
                "cohort has %d features, model expects %d"
                % (cohort.n_features, self.n_features)
            )
        return CohortArrays.from_cohort(cohort, self.base_interval_months)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))
