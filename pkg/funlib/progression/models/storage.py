from .baseline import CTHMMModel
from .inference import FittedModel
from .stage_model import StageModel
from ..errors import ModelFormatError

import json
import logging
from pathlib import Path
from typing import Optional, Union

logger = logging.getLogger(__name__)

MODEL_TYPES = {
    FittedModel.model_type: FittedModel,
    CTHMMModel.model_type: CTHMMModel,
}


def model_from_dict(d: dict) -> StageModel:
    if not isinstance(d, dict):
        raise ModelFormatError("model document must be a JSON object")
    model_type = d.get("model_type")
    if model_type not in MODEL_TYPES:
        raise ModelFormatError(
            "unknown model_type %r, expected one of %s"
            % (model_type, sorted(MODEL_TYPES))
        )
    return MODEL_TYPES[model_type].from_dict(d)


def save_model(
    model: StageModel, path: Union[str, Path], run: Optional[dict] = None
) -> None:
    """Write ``model`` as a JSON document.

    Args:

        model (:class:`StageModel`):

            A fitted event-based or CT-HMM model.

        path (``str`` or ``Path``):

            Where to write the document.

        run (``dict``, optional):

            Run metadata (config hash, seed) stored under ``"run"``.
    """

    d = model.to_dict()
    if run is not None:
        d["run"] = run
    logger.debug("writing %s model to %s", model.model_type, path)
    with open(path, "w") as f:
        json.dump(d, f, indent=2, sort_keys=True)


def load_model(path: Union[str, Path]) -> StageModel:
    """Read a model written by :func:`save_model`. The ``model_type`` field
    decides which model class is returned."""

    path = Path(path)
    if not path.exists():
        raise ModelFormatError("model file %s does not exist" % path)
    logger.debug("reading model from %s", path)
    with open(path, "r") as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise ModelFormatError(
                "model file %s is not valid JSON: %s" % (path, e)
            ) from e
    return model_from_dict(d)
