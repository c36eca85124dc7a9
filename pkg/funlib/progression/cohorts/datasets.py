from .arrays import CohortArrays
from .cohort import DIAGNOSES, Cohort, Individual, Observation
from ..errors import (
    ArgumentError,
    CohortFormatError,
    CohortSchemaError,
    CohortValidationError,
)

import h5py
import numpy as np
import pandas as pd
import zarr

import json
import logging
import os
import shutil
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

logger = logging.getLogger(__name__)

COHORT_FORMAT_VERSION = 1
REQUIRED_COLUMNS = ("subject_id", "visit_time", "diagnosis")

Directions = Optional[Union[Mapping[str, str], Sequence[str]]]


def infer_format(path: Union[str, Path]) -> str:
    path = str(path).rstrip("/")
    if path.endswith(".csv"):
        return "csv"
    elif path.endswith(".json"):
        return "json"
    elif path.endswith(".zarr"):
        return "zarr"
    elif path.endswith(".h5") or path.endswith(".hdf"):
        return "h5"
    raise CohortFormatError("Unknown cohort format for %s" % path)


def load_cohort(
    path: Union[str, Path],
    format: Optional[str] = None,
    feature_directions: Directions = None,
) -> Cohort:
    """Read a cohort from a CSV, JSON, Zarr or HDF5 file.

    Args:

        path:

            The file to read. For Zarr this is a directory.

        format:

            One of ``csv``, ``json``, ``zarr`` or ``h5``. If not given, the
            format is inferred from the file suffix.

        feature_directions:

            Abnormal direction per feature, either a mapping from feature
            name to ``increasing``/``decreasing`` or a sequence in column
            order. Overrides directions stored in the file. CSV files carry
            no directions; without this argument all features are taken as
            ``increasing``.

    Returns:

        The :class:`Cohort`. Empty cells are marked as missing.
    """

    path = Path(path)
    format = format if format is not None else infer_format(path)

    if not path.exists():
        raise CohortFormatError("cohort file %s does not exist" % path)

    logger.debug("opening %s cohort %s", format, path)
    if format == "csv":
        cohort = _read_csv(path, feature_directions)
    elif format == "json":
        cohort = _read_json(path, feature_directions)
    elif format in ("zarr", "h5"):
        cohort = _read_container(path, format, feature_directions)
    else:
        logger.error("don't know cohort format %s of %s", format, path)
        raise CohortFormatError("Unknown cohort format %r for %s" % (format, path))

    logger.debug(
        "opened cohort %s with %d individuals and %d features",
        path,
        len(cohort),
        cohort.n_features,
    )
    return cohort


def save_cohort(
    cohort: Cohort,
    path: Union[str, Path],
    format: Optional[str] = None,
    delete: bool = False,
) -> None:
    """Write a cohort such that :func:`load_cohort` restores it exactly.

    Args:

        cohort:

            The cohort to write.

        path:

            The destination file (a directory for Zarr).

        format:

            One of ``csv``, ``json``, ``zarr`` or ``h5``, inferred from the
            suffix if not given.

        delete:

            Whether to replace an existing Zarr or HDF5 container. The default
            is to raise instead.
    """

    path = Path(path)
    format = format if format is not None else infer_format(path)

    logger.debug("writing %s cohort %s", format, path)
    if format == "csv":
        _write_csv(cohort, path)
    elif format == "json":
        with open(path, "w") as f:
            json.dump(cohort_to_dict(cohort), f, indent=1)
    elif format in ("zarr", "h5"):
        _write_container(cohort, path, format, delete)
    else:
        raise CohortFormatError("Unknown cohort format %r for %s" % (format, path))


def cohort_to_dict(cohort: Cohort) -> dict:
    return {
        "format_version": COHORT_FORMAT_VERSION,
        "feature_names": list(cohort.feature_names),
        "feature_directions": list(cohort.feature_directions),
        "individuals": [
            {
                "id": individual.id,
                "diagnosis_labels": list(individual.diagnosis_labels),
                "observations": [
                    {
                        "visit_time": o.visit_time,
                        "values": {
                            name: (None if m else float(v))
                            for name, v, m in zip(
                                cohort.feature_names, o.values, o.missing_mask
                            )
                        },
                    }
                    for o in individual.observations
                ],
            }
            for individual in cohort
        ],
    }


def cohort_from_dict(d: Mapping, feature_directions: Directions = None) -> Cohort:
    try:
        feature_names = list(d["feature_names"])
        records = d["individuals"]
    except (KeyError, TypeError) as e:
        raise CohortSchemaError("cohort document is missing key %s" % e) from e
    if not isinstance(records, list):
        raise CohortSchemaError("individuals must be a list of records")

    directions = _resolve_directions(
        feature_names, feature_directions, d.get("feature_directions")
    )

    individuals = []
    for r, record in enumerate(records):
        if not isinstance(record, Mapping):
            raise CohortSchemaError("individual record %d is not a mapping" % r)
        try:
            subject_id = record["id"]
            labels = record["diagnosis_labels"]
            observations = record["observations"]
        except KeyError as e:
            raise CohortSchemaError(
                "individual record %d is missing key %s" % (r, e)
            ) from e
        if not isinstance(observations, list):
            raise CohortSchemaError(
                "observations of individual %s must be a list" % subject_id
            )

        visits = []
        for o in observations:
            values = o.get("values", {}) if isinstance(o, Mapping) else None
            if not isinstance(values, Mapping):
                raise CohortSchemaError(
                    "individual %s has an observation without a values mapping"
                    % subject_id
                )
            if set(values) != set(feature_names):
                raise CohortSchemaError(
                    "individual %s has features %s, expected %s"
                    % (subject_id, sorted(values), sorted(feature_names))
                )
            parsed = []
            for name in feature_names:
                value = values[name]
                if value is not None and not isinstance(value, (int, float)):
                    raise CohortFormatError(
                        "non-numeric value %r" % (value,), row=r, column=name
                    )
                parsed.append(np.nan if value is None else float(value))
            row = np.array(parsed)
            try:
                visit_time = float(o["visit_time"])
            except (KeyError, TypeError, ValueError) as e:
                raise CohortFormatError(
                    "invalid visit time", row=r, column="visit_time"
                ) from e
            visits.append(Observation(row, np.isnan(row), visit_time))

        individuals.append(Individual(subject_id, visits, labels))

    return Cohort(individuals, feature_names, directions)


def _resolve_directions(feature_names, given: Directions, stored=None) -> list[str]:
    if given is None:
        given = stored
    if given is None:
        logger.warning(
            "no feature directions given, assuming abnormal values are increasing"
        )
        return ["increasing"] * len(feature_names)

    if isinstance(given, Mapping):
        unknown = sorted(set(given) - set(feature_names))
        if unknown:
            raise CohortSchemaError(
                "directions given for unknown features %s" % unknown
            )
        missing = [name for name in feature_names if name not in given]
        if missing:
            logger.warning(
                "no direction given for features %s, assuming increasing", missing
            )
        return [given.get(name, "increasing") for name in feature_names]

    given = list(given)
    if len(given) != len(feature_names):
        raise CohortSchemaError(
            "got %d feature directions for %d features"
            % (len(given), len(feature_names))
        )
    return given


def _read_csv(path: Path, feature_directions: Directions) -> Cohort:
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise CohortFormatError("cohort file %s is empty" % path) from e
    except pd.errors.ParserError as e:
        # rows with a different number of fields than the header
        raise CohortSchemaError("inconsistent columns in %s: %s" % (path, e)) from e

    short_rows = np.flatnonzero(df.isna().any(axis=1).to_numpy())
    if len(short_rows) > 0:
        raise CohortSchemaError(
            "row %d of %s has fewer fields than the header" % (short_rows[0] + 2, path)
        )

    columns = list(df.columns)
    for column in REQUIRED_COLUMNS:
        if column not in columns:
            raise CohortSchemaError(
                "cohort file %s lacks required column %r" % (path, column)
            )
    if columns[: len(REQUIRED_COLUMNS)] != list(REQUIRED_COLUMNS):
        raise CohortSchemaError(
            "cohort file %s must start with columns %s, got %s"
            % (path, REQUIRED_COLUMNS, columns[: len(REQUIRED_COLUMNS)])
        )
    feature_names = columns[len(REQUIRED_COLUMNS) :]
    directions = _resolve_directions(feature_names, feature_directions)

    visit_times = _parse_column(df, "visit_time", allow_missing=False)
    values = np.stack(
        [_parse_column(df, name, allow_missing=True) for name in feature_names], axis=1
    )
    diagnoses = []
    for r, label in enumerate(df["diagnosis"]):
        label = label.strip() or "NA"
        if label not in DIAGNOSES:
            raise CohortFormatError(
                "unknown diagnosis %r" % label, row=r + 2, column="diagnosis"
            )
        diagnoses.append(label)

    rows_by_subject: dict[str, list[int]] = {}
    for r, subject_id in enumerate(df["subject_id"]):
        subject_id = subject_id.strip()
        if not subject_id:
            raise CohortFormatError("empty subject id", row=r + 2, column="subject_id")
        rows_by_subject.setdefault(subject_id, []).append(r)

    individuals = []
    for subject_id, rows in rows_by_subject.items():
        observations = [
            Observation(values[r], np.isnan(values[r]), visit_times[r]) for r in rows
        ]
        try:
            individuals.append(
                Individual(subject_id, observations, [diagnoses[r] for r in rows])
            )
        except CohortValidationError as e:
            raise CohortValidationError(
                "%s (rows %s of %s)" % (e, [r + 2 for r in rows], path)
            ) from e

    return Cohort(individuals, feature_names, directions)


def _parse_column(df, column: str, allow_missing: bool) -> np.ndarray:
    parsed = np.empty(len(df))
    for r, cell in enumerate(df[column]):
        cell = cell.strip()
        if cell == "":
            if not allow_missing:
                raise CohortFormatError("missing value", row=r + 2, column=column)
            parsed[r] = np.nan
            continue
        try:
            parsed[r] = float(cell)
        except ValueError as e:
            raise CohortFormatError(
                "can't parse %r as a number" % cell, row=r + 2, column=column
            ) from e
        if not np.isfinite(parsed[r]):
            raise CohortFormatError(
                "non-finite value %r" % cell, row=r + 2, column=column
            )
    return parsed


def _write_csv(cohort: Cohort, path: Path) -> None:
    rows = []
    for individual in cohort:
        for o, label in zip(individual.observations, individual.diagnosis_labels):
            # repr round-trips float64 exactly
            rows.append(
                [individual.id, repr(o.visit_time), label]
                + [
                    "" if m else repr(float(v))
                    for v, m in zip(o.values, o.missing_mask)
                ]
            )
    df = pd.DataFrame(
        rows, columns=list(REQUIRED_COLUMNS) + list(cohort.feature_names), dtype=object
    )
    df.to_csv(path, index=False)


def _read_json(path: Path, feature_directions: Directions) -> Cohort:
    with open(path, "r") as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise CohortFormatError(
                "can't parse %s as JSON: %s" % (path, e.msg), row=e.lineno
            ) from e
    return cohort_from_dict(d, feature_directions)


def _read_container(path: Path, format: str, feature_directions: Directions) -> Cohort:
    if format == "zarr":
        try:
            container = zarr.open(str(path), mode="r")
        except Exception as e:
            logger.error("failed to open %s", path)
            raise CohortFormatError("can't open zarr container %s" % path) from e
    else:
        try:
            container = h5py.File(path, mode="r")
        except OSError as e:
            logger.error("failed to open %s", path)
            raise CohortFormatError("can't open HDF5 file %s" % path) from e

    try:
        for name in ("values", "missing", "visit_times", "n_visits"):
            if name not in container:
                raise CohortSchemaError("container %s lacks dataset %r" % (path, name))
        if "cohort" not in container.attrs:
            raise CohortSchemaError("container %s lacks the cohort attribute" % path)
        try:
            meta = json.loads(container.attrs["cohort"])
        except (TypeError, ValueError) as e:
            raise CohortFormatError(
                "cohort attribute of %s is not valid JSON" % path
            ) from e
        values = np.asarray(container["values"][:])
        missing = np.asarray(container["missing"][:], dtype=bool)
        visit_times = np.asarray(container["visit_times"][:])
        n_visits = np.asarray(container["n_visits"][:])
    finally:
        if format == "h5":
            container.close()

    try:
        feature_names = list(meta["feature_names"])
        ids = list(meta["ids"])
        diagnosis_labels = list(meta["diagnosis_labels"])
        stored_directions = meta.get("feature_directions")
    except (AttributeError, KeyError, TypeError) as e:
        raise CohortSchemaError(
            "cohort attribute of %s is missing key %s" % (path, e)
        ) from e
    directions = _resolve_directions(
        feature_names, feature_directions, stored_directions
    )
    if values.shape[0] != len(ids) or values.shape[2] != len(feature_names):
        raise CohortSchemaError(
            "values of shape %s don't match %d ids and %d features"
            % (values.shape, len(ids), len(feature_names))
        )
    if len(diagnosis_labels) != len(ids):
        raise CohortSchemaError(
            "%d diagnosis label lists for %d ids" % (len(diagnosis_labels), len(ids))
        )

    individuals = []
    records = zip(ids, diagnosis_labels)
    for j, (subject_id, labels) in enumerate(records):
        t = int(n_visits[j])
        observations = [
            Observation(values[j, v], missing[j, v], visit_times[j, v])
            for v in range(t)
        ]
        individuals.append(Individual(subject_id, observations, labels))

    return Cohort(individuals, feature_names, directions)


def _write_container(cohort: Cohort, path: Path, format: str, delete: bool) -> None:
    if path.exists():
        if not delete:
            raise ArgumentError(
                "Existing cohort container found, please manually delete %s" % path
            )
        logger.info("replacing existing cohort container %s", path)
        if path.is_dir():
            shutil.rmtree(path)
        else:
            os.remove(path)

    arrays = CohortArrays.from_cohort(cohort, base_interval_months=0.0)
    visit_times = np.full(arrays.shape[:2], np.nan)
    for j, individual in enumerate(cohort):
        visit_times[j, : individual.n_visits] = individual.visit_times

    meta = json.dumps(
        {
            "format_version": COHORT_FORMAT_VERSION,
            "feature_names": list(cohort.feature_names),
            "feature_directions": list(cohort.feature_directions),
            "ids": cohort.ids,
            "diagnosis_labels": [list(i.diagnosis_labels) for i in cohort],
        }
    )
    datasets = {
        "values": arrays.values,
        "missing": arrays.missing,
        "visit_times": visit_times,
        "n_visits": arrays.n_visits,
    }

    if format == "zarr":
        root = zarr.open_group(str(path), mode="w")
        for name, data in datasets.items():
            root.create_dataset(name, data=data, chunks=False)
        root.attrs["cohort"] = meta
    else:
        with h5py.File(path, mode="w") as f:
            for name, data in datasets.items():
                f.create_dataset(name, data=data)
            f.attrs["cohort"] = meta

    logger.debug("wrote %s container %s", format, path)
