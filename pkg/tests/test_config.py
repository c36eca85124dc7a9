from funlib.progression.config import CTHMMSection, MixtureConfig, RunConfig
from funlib.progression.errors import ConfigError

import pytest


def test_defaults():
    config = RunConfig()
    assert config.base_interval_months == 12.0
    assert config.band_width == 2
    assert config.folds == 5
    assert config.fit_config().threads == 1
    assert config.cthmm_config().n_states is None
    assert config.eval_config().horizon_months == 24.0


def test_data_modes():
    config = RunConfig()
    assert config.data_mode_for("ebhmm") == "full"
    assert config.data_mode_for("cthmm") == "subset"
    assert config.data_mode_for() == "full"

    config = RunConfig(data_mode="full")
    assert config.data_mode_for("cthmm") == "full"

    config = RunConfig.from_dict({"cthmm": {"data_mode": "full"}})
    assert config.data_mode_for("cthmm") == "full"
    assert config.eval_config().data_mode is None


def test_yaml(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(
        "band_width: 3\n"
        "seed: 42\n"
        "mixture:\n"
        "  max_shift_sd: 0.5\n"
        "cthmm:\n"
        "  covariance: diagonal\n"
        "feature_directions:\n"
        "  ABETA: decreasing\n"
        "paths:\n"
        "  cohort: cohort.csv\n"
    )
    config = RunConfig.from_file(path)

    assert config.band_width == 3
    assert config.seed == 42
    assert config.mixture == MixtureConfig(max_shift_sd=0.5)
    assert config.cthmm_config().covariance == "diagonal"
    assert config.cthmm_config().band_width == 3
    assert config.feature_directions == {"ABETA": "decreasing"}
    assert config.paths.cohort == "cohort.csv"


def test_toml(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        "base_interval_months = 6.0\n" "folds = 3\n" "[cthmm]\n" "n_states = 4\n"
    )
    config = RunConfig.from_file(path)
    assert config.fit_config().base_interval_months == 6.0
    assert config.folds == 3
    assert config.cthmm == CTHMMSection(n_states=4)


def test_empty_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("")
    assert RunConfig.from_file(path) == RunConfig()


@pytest.mark.parametrize(
    "text",
    [
        "unknown: 1\n",
        "mixture:\n  iterations: 3\n",
        "mixture: 3\n",
        "band_width: 0\n",
        "folds: 1\n",
        "self_transition: 1.0\n",
        "data_mode: partial\n",
        "cthmm:\n  covariance: full\n",
        "cthmm:\n  data_mode: partial\n",
        "feature_directions:\n  ABETA: down\n",
        "[1, 2]\n",
        "band_width: [\n",
    ],
)
def test_invalid(tmp_path, text):
    path = tmp_path / "run.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        RunConfig.from_file(path)


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "missing.yaml")
    path = tmp_path / "run.ini"
    path.write_text("seed = 1\n")
    with pytest.raises(ConfigError):
        RunConfig.from_file(path)


def test_overrides():
    config = RunConfig(seed=1, folds=4)
    overridden = config.with_overrides(seed=7, folds=None)
    assert overridden.seed == 7
    assert overridden.folds == 4

    with pytest.raises(ConfigError):
        config.with_overrides(colour="blue")

    with_paths = config.with_paths(cohort="a.csv", model=None)
    assert with_paths.paths.cohort == "a.csv"
    assert with_paths.paths.model is None


def test_config_hash():
    config = RunConfig(seed=3)
    assert config.config_hash() == RunConfig(seed=3).config_hash()
    assert len(config.config_hash()) == 64

    # neither paths nor threads change results
    assert config.with_paths(cohort="x.csv").config_hash() == config.config_hash()
    assert config.with_overrides(threads=8).config_hash() == config.config_hash()

    assert config.with_overrides(seed=4).config_hash() != config.config_hash()
    assert (
        RunConfig(seed=3, mixture=MixtureConfig(tol=1e-6)).config_hash()
        != config.config_hash()
    )
