from funlib.progression.cohorts import load_cohort, save_cohort
from funlib.progression.errors import (
    ArgumentError,
    CohortFormatError,
    CohortSchemaError,
    CohortValidationError,
)

import h5py
import numpy as np
import pytest

import json


def test_round_trip(small_cohort, cohort_path):
    save_cohort(small_cohort, cohort_path)
    loaded = load_cohort(
        cohort_path, feature_directions=small_cohort.feature_directions
    )

    assert loaded == small_cohort
    assert loaded.feature_names == ("ABETA", "TAU")
    assert loaded.feature_directions == ("decreasing", "increasing")
    c = loaded[2]
    np.testing.assert_array_equal(c.visit_times, [0.0, 6.0, 30.0])
    assert c.missing_mask[0, 0]
    assert c.diagnosis_labels == ("MCI", "MCI", "AD")


def test_stored_directions(small_cohort, tmp_path):
    path = tmp_path / "cohort.json"
    save_cohort(small_cohort, path)
    assert load_cohort(path).feature_directions == ("decreasing", "increasing")

    flipped = load_cohort(path, feature_directions={"ABETA": "increasing"})
    assert flipped.feature_directions == ("increasing", "increasing")


def test_csv_defaults_to_increasing(small_cohort, tmp_path):
    path = tmp_path / "cohort.csv"
    save_cohort(small_cohort, path)
    assert load_cohort(path).feature_directions == ("increasing", "increasing")


def test_existing_container(small_cohort, tmp_path):
    path = tmp_path / "cohort.zarr"
    save_cohort(small_cohort, path)
    with pytest.raises(ArgumentError) as e:
        save_cohort(small_cohort, path)
    assert e.value.exit_code == 2
    save_cohort(small_cohort.subset([0]), path, delete=True)
    assert len(load_cohort(path)) == 1


def write(path, text):
    path.write_text(text)
    return path


def test_csv_errors(tmp_path):
    header = "subject_id,visit_time,diagnosis,A,B\n"

    path = write(
        tmp_path / "bad_value.csv", header + "s1,0,CN,1.0,2.0\ns1,12,CN,x,2.0\n"
    )
    with pytest.raises(CohortFormatError) as e:
        load_cohort(path)
    assert e.value.row == 3
    assert e.value.column == "A"

    path = write(tmp_path / "bad_label.csv", header + "s1,0,healthy,1.0,2.0\n")
    with pytest.raises(CohortFormatError) as e:
        load_cohort(path)
    assert e.value.row == 2
    assert e.value.column == "diagnosis"

    path = write(tmp_path / "no_time.csv", header + "s1,,CN,1.0,2.0\n")
    with pytest.raises(CohortFormatError) as e:
        load_cohort(path)
    assert e.value.column == "visit_time"

    path = write(tmp_path / "no_diagnosis.csv", "subject_id,visit_time,A,B\ns1,0,1,2\n")
    with pytest.raises(CohortSchemaError):
        load_cohort(path)

    path = write(tmp_path / "order.csv", header + "s1,12,CN,1,2\ns1,0,CN,1,2\n")
    with pytest.raises(CohortValidationError):
        load_cohort(path)

    with pytest.raises(CohortFormatError):
        load_cohort(tmp_path / "missing.csv")
    with pytest.raises(CohortFormatError):
        load_cohort(tmp_path / "cohort.txt")


def test_csv_missing_cells(tmp_path):
    path = write(
        tmp_path / "cohort.csv",
        "subject_id,visit_time,diagnosis,A,B\n"
        "s1,0,CN,1.5,\n"
        "s1,12,,,2.5\n"
        "s2,0,AD,3,4\n",
    )
    cohort = load_cohort(path)

    assert cohort.ids == ["s1", "s2"]
    s1 = cohort[0]
    np.testing.assert_array_equal(s1.missing_mask, [[False, True], [True, False]])
    assert s1.diagnosis_labels == ("CN", "NA")
    assert cohort.n_missing() == 2


def test_json_errors(tmp_path):
    path = write(tmp_path / "broken.json", '{"feature_names": [')
    with pytest.raises(CohortFormatError):
        load_cohort(path)

    path = write(tmp_path / "schema.json", '{"individuals": []}')
    with pytest.raises(CohortSchemaError):
        load_cohort(path)

    path = write(
        tmp_path / "records.json",
        '{"feature_names": ["A"], "individuals": [["s1", "CN"]]}',
    )
    with pytest.raises(CohortSchemaError):
        load_cohort(path)

    path = write(
        tmp_path / "observations.json",
        '{"feature_names": ["A"], "individuals": '
        '[{"id": "s1", "diagnosis_labels": ["CN"], "observations": [3]}]}',
    )
    with pytest.raises(CohortSchemaError):
        load_cohort(path)


def test_container_errors(small_cohort, tmp_path):
    path = tmp_path / "cohort.h5"
    save_cohort(small_cohort, path)
    with h5py.File(path, mode="a") as f:
        meta = json.loads(f.attrs["cohort"])
        del meta["ids"]
        f.attrs["cohort"] = json.dumps(meta)
    with pytest.raises(CohortSchemaError):
        load_cohort(path)

    with h5py.File(path, mode="a") as f:
        f.attrs["cohort"] = "{not json"
    with pytest.raises(CohortFormatError):
        load_cohort(path)
