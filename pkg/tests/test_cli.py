from funlib.progression.cli import build_arg_parser, load_config, main
from funlib.progression.cohorts import load_cohort
from funlib.progression.models import FittedModel, load_model

import pandas as pd
import pytest

import json


def error_of(capsys):
    err = capsys.readouterr().err
    lines = [line for line in err.splitlines() if line.startswith("{")]
    assert lines, err
    return json.loads(lines[-1])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A simulated cohort and an event-based model fitted to it."""

    root = tmp_path_factory.mktemp("cli")
    cohort = root / "cohort.json"
    model = root / "model.json"

    assert (
        main(
            [
                "simulate",
                "--events", "4",
                "--separation", "4",
                "--n", "120",
                "--seed", "1",
                "--threads", "1",
                "--out", str(cohort),
            ]
        )
        == 0
    )
    fit = ["fit", "--cohort", str(cohort), "--out", str(model), "--threads", "1"]
    assert main(fit) == 0
    return root


def test_simulate_outputs(workspace):
    cohort = load_cohort(workspace / "cohort.json")
    assert len(cohort) == 120
    assert cohort.feature_names == ("F0", "F1", "F2", "F3")

    with open(workspace / "cohort.truth.json") as f:
        truth = json.load(f)
    assert truth["run"]["seed"] == 1
    assert len(truth["run"]["config_hash"]) == 64
    assert sorted(truth["sequence"]) == ["F0", "F1", "F2", "F3"]


def test_fit_output(workspace):
    model = load_model(workspace / "model.json")
    assert isinstance(model, FittedModel)
    assert model.diagnostics is not None

    with open(workspace / "model.json") as f:
        d = json.load(f)
    assert d["run"]["seed"] == 1
    assert d["model_type"] == "ebhmm"


def test_recover(workspace):
    report = workspace / "recovery.json"
    code = main(
        [
            "recover",
            "--model", str(workspace / "model.json"),
            "--truth", str(workspace / "cohort.truth.json"),
            "--out", str(report),
        ]
    )
    assert code == 0
    with open(report) as f:
        d = json.load(f)
    assert -1.0 <= d["kendall_tau"] <= 1.0
    assert "config_hash" in d["run"]


def test_timeline(workspace, capsys):
    out = workspace / "timeline.json"
    model = str(workspace / "model.json")
    assert main(["timeline", "--model", model, "--out", str(out)]) == 0
    with open(out) as f:
        d = json.load(f)
    assert len(d["event_names"]) == 4
    assert d["event_times_months"] == sorted(d["event_times_months"])
    assert "run" in d

    capsys.readouterr()
    assert main(["timeline", "--model", model]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# config_hash=")
    assert lines[1] == "event_name,event_time_months,cumulative_years"
    assert len(lines) == 6


def test_stage_and_predict(workspace):
    staged = workspace / "stages.csv"
    args = [
        "--cohort",
        str(workspace / "cohort.json"),
        "--model",
        str(workspace / "model.json"),
    ]

    assert main(["stage"] + args + ["--out", str(staged)]) == 0
    frame = pd.read_csv(staged, comment="#")
    assert list(frame.columns) == [
        "subject_id",
        "visit_time",
        "stage",
        "max_posterior",
        "predicted_stage_12m",
    ]
    assert len(frame) == 120 * 3
    assert frame["stage"].between(0, 4).all()

    predicted = workspace / "predictions.csv"
    assert main(["predict"] + args + ["--horizon", "24", "--out", str(predicted)]) == 0
    frame = pd.read_csv(predicted, comment="#")
    assert len(frame) == 120
    assert (frame["horizon_months"] == 24.0).all()
    assert frame["predicted_stage"].between(0, 4).all()


def test_config_file(workspace, tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text(
        "seed: 5\n"
        "band_width: 1\n"
        "paths:\n"
        "  cohort: %s\n"
        "  out: %s\n" % (workspace / "cohort.json", tmp_path / "model.json")
    )
    assert main(["fit", "--config", str(config)]) == 0
    model = load_model(tmp_path / "model.json")
    assert model.transition.band_width == 1

    with open(tmp_path / "model.json") as f:
        assert json.load(f)["run"]["seed"] == 5


def test_load_config(tmp_path):
    parser = build_arg_parser()
    args = parser.parse_args(
        ["fit", "--cohort", "c.csv", "--seed", "9", "--band-width", "3"]
    )
    config = load_config(args)
    assert config.seed == 9
    assert config.band_width == 3
    assert config.threads >= 1
    assert config.paths.cohort == "c.csv"
    assert config.paths.model is None


def test_errors(tmp_path, capsys):
    assert main(["fit", "--out", str(tmp_path / "m.json")]) == 2
    assert error_of(capsys)["error"] == "ArgumentError"

    missing = str(tmp_path / "missing.csv")
    assert main(["fit", "--cohort", missing, "--out", str(tmp_path / "m.json")]) == 3
    assert error_of(capsys)["error"] == "CohortFormatError"

    config = tmp_path / "bad.yaml"
    config.write_text("colour: blue\n")
    assert main(["fit", "--config", str(config)]) == 12
    assert error_of(capsys)["exit_code"] == 12

    model = tmp_path / "broken.json"
    model.write_text("{")
    assert main(["timeline", "--model", str(model)]) == 13
    assert error_of(capsys)["error"] == "ModelFormatError"
