"""Run configuration.

A run is configured from a YAML or TOML file plus command line overrides::

    base_interval_months: 12
    band_width: 2
    seed: 42
    mixture:
      max_shift_sd: 1.0
    cthmm:
      covariance: shared
    feature_directions:
      ABETA: decreasing

Unknown keys are rejected. The module-level configs (``MixtureConfig``,
``FitConfig``, ``CTHMMConfig`` and ``EvalConfig``) are derived from a
``RunConfig`` so that every component sees the same shared values.
"""

from .errors import ConfigError

import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import yaml

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

DIRECTIONS = ("increasing", "decreasing")
DATA_MODES = ("full", "subset")


def _check(condition: bool, message: str, *args) -> None:
    if not condition:
        raise ConfigError(message % args)


@dataclass(frozen=True)
class MixtureConfig:
    """Settings for the per-feature patient/control mixture fit.

    Args:

        max_iter:

            Maximum number of EM iterations per feature.

        tol:

            Convergence threshold on the absolute change of the mixture
            log-likelihood between iterations.

        max_shift_sd:

            How far, in labelled-group standard deviations, component means
            may move away from their label-based initial values.

        sigma_floor:

            Lower bound on component standard deviations, as a fraction of
            the labelled-group standard deviation.

        min_group_size:

            Minimum number of patient and control individuals with an
            observed value of each feature.
    """

    max_iter: int = 100
    tol: float = 1e-8
    max_shift_sd: float = 1.0
    sigma_floor: float = 1e-6
    min_group_size: int = 5

    def __post_init__(self):
        _check(
            self.max_iter >= 1,
            "mixture.max_iter must be >= 1, got %s",
            self.max_iter,
        )
        _check(self.tol > 0, "mixture.tol must be positive, got %s", self.tol)
        _check(
            self.max_shift_sd >= 0,
            "mixture.max_shift_sd must be >= 0, got %s",
            self.max_shift_sd,
        )
        _check(
            0 < self.sigma_floor < 1,
            "mixture.sigma_floor must be in (0, 1), got %s",
            self.sigma_floor,
        )
        _check(
            self.min_group_size >= 1,
            "mixture.min_group_size must be >= 1, got %s",
            self.min_group_size,
        )


@dataclass(frozen=True)
class FitConfig:
    base_interval_months: float = 12.0
    band_width: int = 2
    max_outer_iter: int = 100
    random_restarts: int = 1
    self_transition: float = 0.9
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        _check(
            self.base_interval_months > 0,
            "base_interval_months must be positive, got %s",
            self.base_interval_months,
        )
        _check(self.band_width >= 1, "band_width must be >= 1, got %s", self.band_width)
        _check(
            self.max_outer_iter >= 1,
            "max_outer_iter must be >= 1, got %s",
            self.max_outer_iter,
        )
        _check(
            self.random_restarts >= 1,
            "random_restarts must be >= 1, got %s",
            self.random_restarts,
        )
        _check(
            0 < self.self_transition < 1,
            "self_transition must be in (0, 1), got %s",
            self.self_transition,
        )
        _check(self.threads >= 1, "threads must be >= 1, got %s", self.threads)


@dataclass(frozen=True)
class CTHMMConfig:
    """Settings for the continuous-time HMM baseline. ``n_states`` of ``None``
    means one state per stage of the event-based model (features + 1)."""

    n_states: Optional[int] = None
    base_interval_months: float = 12.0
    band_width: int = 2
    tol: float = 1e-2
    max_iter: int = 500
    covariance: str = "shared"
    reg_covar: float = 1e-6
    kmeans_attempts: int = 10
    self_transition: float = 0.9
    seed: int = 0

    def __post_init__(self):
        _check(
            self.n_states is None or self.n_states >= 2,
            "cthmm.n_states must be >= 2, got %s",
            self.n_states,
        )
        _check(
            self.base_interval_months > 0,
            "base_interval_months must be positive, got %s",
            self.base_interval_months,
        )
        _check(self.band_width >= 1, "band_width must be >= 1, got %s", self.band_width)
        _check(self.tol > 0, "cthmm.tol must be positive, got %s", self.tol)
        _check(self.max_iter >= 1, "cthmm.max_iter must be >= 1, got %s", self.max_iter)
        _check(
            self.covariance in ("shared", "diagonal"),
            "cthmm.covariance must be 'shared' or 'diagonal', got %r",
            self.covariance,
        )
        _check(
            self.reg_covar >= 0,
            "cthmm.reg_covar must be >= 0, got %s",
            self.reg_covar,
        )
        _check(
            self.kmeans_attempts >= 1,
            "cthmm.kmeans_attempts must be >= 1, got %s",
            self.kmeans_attempts,
        )
        _check(
            0 < self.self_transition < 1,
            "self_transition must be in (0, 1), got %s",
            self.self_transition,
        )


@dataclass(frozen=True)
class EvalConfig:
    """``data_mode`` of ``None`` leaves the choice to the model kind."""

    horizon_months: float = 24.0
    data_mode: Optional[str] = None
    stratify: bool = False
    patient_label: str = "AD"
    control_label: str = "CN"
    threads: int = 1

    def __post_init__(self):
        _check(
            self.horizon_months > 0,
            "horizon_months must be positive, got %s",
            self.horizon_months,
        )
        _check(
            self.data_mode is None or self.data_mode in DATA_MODES,
            "data_mode must be one of %s, got %r",
            DATA_MODES,
            self.data_mode,
        )
        _check(self.threads >= 1, "threads must be >= 1, got %s", self.threads)


@dataclass(frozen=True)
class PathsConfig:
    cohort: Optional[str] = None
    model: Optional[str] = None
    truth: Optional[str] = None
    out: Optional[str] = None


@dataclass(frozen=True)
class CTHMMSection:
    n_states: Optional[int] = None
    tol: float = 1e-2
    max_iter: int = 500
    covariance: str = "shared"
    reg_covar: float = 1e-6
    kmeans_attempts: int = 10
    data_mode: str = "subset"


@dataclass(frozen=True)
class RunConfig:
    base_interval_months: float = 12.0
    band_width: int = 2
    max_outer_iter: int = 100
    random_restarts: int = 1
    self_transition: float = 0.9
    seed: int = 0
    threads: int = 1
    folds: int = 5
    horizon_months: float = 24.0
    prediction_horizon_months: float = 12.0
    data_mode: Optional[str] = None
    stratify: bool = False
    patient_label: str = "AD"
    control_label: str = "CN"
    mixture: MixtureConfig = field(default_factory=MixtureConfig)
    cthmm: CTHMMSection = field(default_factory=CTHMMSection)
    paths: PathsConfig = field(default_factory=PathsConfig)
    feature_directions: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        _check(self.folds >= 2, "folds must be >= 2, got %s", self.folds)
        _check(
            self.prediction_horizon_months > 0,
            "prediction_horizon_months must be positive, got %s",
            self.prediction_horizon_months,
        )
        for name, direction in self.feature_directions.items():
            _check(
                direction in DIRECTIONS,
                "direction of feature %s must be one of %s, got %r",
                name,
                DIRECTIONS,
                direction,
            )
        _check(
            self.cthmm.data_mode in DATA_MODES,
            "cthmm.data_mode must be one of %s, got %r",
            DATA_MODES,
            self.cthmm.data_mode,
        )
        # the derived configs validate the shared values
        self.fit_config()
        self.cthmm_config()
        self.eval_config()

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "RunConfig":
        values = dict(values)
        nested = {
            "mixture": MixtureConfig,
            "cthmm": CTHMMSection,
            "paths": PathsConfig,
        }
        for key, section_cls in nested.items():
            if key in values:
                section = values[key]
                if not isinstance(section, Mapping):
                    raise ConfigError("section %r must be a mapping" % key)
                _reject_unknown(section_cls, section, prefix=key + ".")
                try:
                    values[key] = section_cls(**section)
                except TypeError as e:
                    raise ConfigError("invalid section %r: %s" % (key, e)) from e
        if "feature_directions" in values:
            if not isinstance(values["feature_directions"], Mapping):
                raise ConfigError("feature_directions must be a mapping")
            values["feature_directions"] = dict(values["feature_directions"])
        _reject_unknown(cls, values)
        return cls(**values)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError("config file %s does not exist" % path)

        logger.debug("reading run config from %s", path)
        if path.suffix in (".yaml", ".yml"):
            with open(path, "r") as f:
                try:
                    values = yaml.safe_load(f)
                except yaml.YAMLError as e:
                    raise ConfigError("failed to parse %s: %s" % (path, e)) from e
        elif path.suffix == ".toml":
            with open(path, "rb") as f:
                try:
                    values = tomllib.load(f)
                except tomllib.TOMLDecodeError as e:
                    raise ConfigError("failed to parse %s: %s" % (path, e)) from e
        else:
            raise ConfigError("Unknown config format for %s" % path)

        if values is None:
            values = {}
        if not isinstance(values, Mapping):
            raise ConfigError("config file %s must contain a mapping" % path)
        return cls.from_dict(values)

    def with_overrides(self, **overrides) -> "RunConfig":
        """Return a copy with the given top-level values replaced. ``None``
        values are ignored, so unset command line flags do not override the
        file."""

        overrides = {k: v for k, v in overrides.items() if v is not None}
        _reject_unknown(type(self), overrides)
        return dataclasses.replace(self, **overrides)

    def with_paths(self, **paths) -> "RunConfig":
        paths = {k: str(v) for k, v in paths.items() if v is not None}
        return dataclasses.replace(self, paths=dataclasses.replace(self.paths, **paths))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["feature_directions"] = dict(self.feature_directions)
        return d

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form of this config. Paths and the
        thread count do not change results and are excluded."""

        d = self.to_dict()
        del d["paths"]
        del d["threads"]
        canonical = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def data_mode_for(self, model_kind: Optional[str] = None) -> str:
        """The data mode of ``model_kind``. An explicit ``data_mode`` applies
        to every model. Otherwise the CT-HMM uses ``cthmm.data_mode`` and
        everything else the full cohort."""

        if self.data_mode is not None:
            return self.data_mode
        if model_kind == "cthmm":
            return self.cthmm.data_mode
        return "full"

    def fit_config(self) -> FitConfig:
        return FitConfig(
            base_interval_months=self.base_interval_months,
            band_width=self.band_width,
            max_outer_iter=self.max_outer_iter,
            random_restarts=self.random_restarts,
            self_transition=self.self_transition,
            seed=self.seed,
            threads=self.threads,
        )

    def cthmm_config(self) -> CTHMMConfig:
        return CTHMMConfig(
            n_states=self.cthmm.n_states,
            base_interval_months=self.base_interval_months,
            band_width=self.band_width,
            tol=self.cthmm.tol,
            max_iter=self.cthmm.max_iter,
            covariance=self.cthmm.covariance,
            reg_covar=self.cthmm.reg_covar,
            kmeans_attempts=self.cthmm.kmeans_attempts,
            self_transition=self.self_transition,
            seed=self.seed,
        )

    def eval_config(self) -> EvalConfig:
        return EvalConfig(
            horizon_months=self.horizon_months,
            data_mode=self.data_mode,
            stratify=self.stratify,
            patient_label=self.patient_label,
            control_label=self.control_label,
            threads=self.threads,
        )


def _reject_unknown(cls, values: Mapping[str, Any], prefix: str = "") -> None:
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(
            "unknown config key(s): %s" % ", ".join(prefix + k for k in unknown)
        )
