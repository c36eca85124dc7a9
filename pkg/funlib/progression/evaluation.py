"""Conversion prediction benchmarks.

Individuals are staged at their baseline visit and predicted to convert
(CN to MCI or AD, MCI to AD) within a horizon if their stage exceeds a
threshold. Sweeping the threshold over all stages gives a ROC curve, and the
area under it is cross-validated over folds of individuals, with every model
(mixtures included) fitted on the training folds only.
"""

from .cohorts import Cohort, ablate_features, split_folds
from .config import RunConfig
from .errors import ArgumentError, EvaluationError
from .models import baseline_stages, fit, fit_cthmm, fit_mixtures

import numpy as np
import pandas as pd
from sklearn.metrics import auc

import logging
from collections import Counter
from dataclasses import dataclass
from multiprocessing.pool import ThreadPool
from typing import Mapping, Optional, Sequence, Union

logger = logging.getLogger(__name__)

MODEL_KINDS = ("ebhmm", "cthmm")
MODEL_LABELS = {"ebhmm": "EB-HMM", "cthmm": "CT-HMM"}
SEVERITY = {"CN": 0, "MCI": 1, "AD": 2}


@dataclass(frozen=True)
class ConversionLabel:
    subject_id: str
    converted: bool
    baseline_group: str


@dataclass(frozen=True)
class RocResult:
    """``thresholds`` holds ``(threshold, tpr, fpr)`` triples, where
    individuals staged at or above ``threshold`` are predicted to convert,
    ordered from the strictest to the loosest threshold."""

    auc: float
    thresholds: tuple
    n_pos: int
    n_neg: int

    @property
    def tpr(self) -> np.ndarray:
        return np.array([t[1] for t in self.thresholds])

    @property
    def fpr(self) -> np.ndarray:
        return np.array([t[2] for t in self.thresholds])

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "thresholds": [list(t) for t in self.thresholds],
        }


@dataclass(frozen=True)
class CVResult:
    model_kind: str
    data_mode: str
    mean: float
    sd: float
    fold_aucs: tuple
    n_individuals: int

    @property
    def skipped_folds(self) -> tuple:
        return tuple(i for i, a in enumerate(self.fold_aucs) if a is None)

    @property
    def label(self) -> str:
        return "%s (%s)" % (MODEL_LABELS[self.model_kind], self.data_mode)

    def to_dict(self) -> dict:
        return {
            "model": self.label,
            "model_kind": self.model_kind,
            "data_mode": self.data_mode,
            "mean": self.mean,
            "sd": self.sd,
            "fold_aucs": list(self.fold_aucs),
            "skipped_folds": list(self.skipped_folds),
            "n_individuals": self.n_individuals,
        }


@dataclass(frozen=True)
class SweepRow:
    fraction: float
    mean: float
    sd: float
    n_missing: int

    def to_dict(self) -> dict:
        return {
            "fraction": self.fraction,
            "mean": self.mean,
            "sd": self.sd,
            "n_missing": self.n_missing,
        }


def conversion_labels_with_exclusions(
    cohort: Cohort, horizon_months: float = 24.0
) -> tuple[list[ConversionLabel], dict]:
    """Conversion labels of the eligible individuals of ``cohort`` and the
    number of excluded individuals per reason (``baseline_na``,
    ``baseline_ad``, ``no_follow_up``).

    An individual is eligible if their baseline diagnosis is CN or MCI and
    they have at least one labelled visit within ``horizon_months`` after
    baseline. They converted if any of these visits has a more severe
    diagnosis than the baseline.
    """

    if not horizon_months > 0:
        raise ArgumentError("horizon must be positive, got %s" % horizon_months)

    labels = []
    exclusions: Counter = Counter()
    for individual in cohort:
        baseline = individual.diagnosis_labels[0]
        if baseline == "NA":
            exclusions["baseline_na"] += 1
            continue
        if baseline == "AD":
            exclusions["baseline_ad"] += 1
            continue

        t0 = individual.visit_times[0]
        follow_up = [
            label
            for time, label in zip(
                individual.visit_times[1:], individual.diagnosis_labels[1:]
            )
            if time - t0 <= horizon_months and label != "NA"
        ]
        if not follow_up:
            exclusions["no_follow_up"] += 1
            continue

        converted = any(SEVERITY[label] > SEVERITY[baseline] for label in follow_up)
        labels.append(ConversionLabel(individual.id, converted, baseline))

    return labels, dict(exclusions)


def conversion_labels(
    cohort: Cohort, horizon_months: float = 24.0
) -> list[ConversionLabel]:
    """Like :func:`conversion_labels_with_exclusions`, raising
    :class:`EvaluationError` if no individual is eligible."""

    labels, exclusions = conversion_labels_with_exclusions(cohort, horizon_months)
    if exclusions:
        logger.info("excluded from conversion labels: %s", exclusions)
    if not labels:
        raise EvaluationError(
            "no individual of %d is eligible for conversion labels within %s months "
            "(excluded: %s)" % (len(cohort), horizon_months, exclusions)
        )
    return labels


def stage_threshold_auroc(
    stages: Union[Mapping[str, int], Sequence[int]],
    labels: Sequence[ConversionLabel],
    n_stages: Optional[int] = None,
) -> RocResult:
    """ROC of predicting conversion by thresholding stages.

    Args:

        stages (``dict`` or ``list`` of ``int``):

            Baseline stage per subject id, or per label in the order of
            ``labels``.

        labels (``list`` of :class:`ConversionLabel`):

            Who converted.

        n_stages (``int``, optional):

            Number of stages, so thresholds run from ``n_stages`` (nobody
            predicted to convert) down to 0 (everybody). Defaults to the
            highest given stage + 1.
    """

    if isinstance(stages, Mapping):
        try:
            staged = np.array([stages[label.subject_id] for label in labels])
        except KeyError as e:
            raise ArgumentError("no stage for subject %s" % e) from e
    else:
        staged = np.asarray(stages)
        if len(staged) != len(labels):
            raise ArgumentError(
                "got %d stages for %d conversion labels" % (len(staged), len(labels))
            )

    converted = np.array([label.converted for label in labels], dtype=bool)
    n_pos = int(converted.sum())
    n_neg = len(converted) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError(
            "AUC is undefined with %d converters and %d non-converters" % (n_pos, n_neg)
        )

    top = n_stages if n_stages is not None else int(staged.max()) + 1
    thresholds = []
    for threshold in range(top, -1, -1):
        predicted = staged >= threshold
        tpr = float(np.sum(predicted & converted)) / n_pos
        fpr = float(np.sum(predicted & ~converted)) / n_neg
        thresholds.append((threshold, tpr, fpr))

    fpr = np.array([t[2] for t in thresholds])
    tpr = np.array([t[1] for t in thresholds])
    return RocResult(float(auc(fpr, tpr)), tuple(thresholds), n_pos, n_neg)


def _fit_model(train: Cohort, model_kind: str, config: RunConfig):
    if model_kind == "ebhmm":
        mixtures = fit_mixtures(
            train,
            patient_label=config.patient_label,
            control_label=config.control_label,
            config=config.mixture,
        )
        return fit(
            train, mixtures, config.fit_config(), patient_label=config.patient_label
        )
    elif model_kind == "cthmm":
        return fit_cthmm(
            train,
            config=config.cthmm_config(),
            patient_label=config.patient_label,
            control_label=config.control_label,
        )
    raise ArgumentError(
        "unknown model kind %r, expected one of %s" % (model_kind, MODEL_KINDS)
    )


def _fold_auc(
    fold: int, train: Cohort, test: Cohort, model_kind: str, config: RunConfig
):
    model = _fit_model(train, model_kind, config)
    try:
        labels = conversion_labels(test, config.horizon_months)
        stages = dict(zip(test.ids, baseline_stages(test, model)))
        result = stage_threshold_auroc(stages, labels, n_stages=model.n_stages)
    except EvaluationError as e:
        logger.warning("skipping fold %d: %s", fold, e)
        return None
    logger.info(
        "fold %d: AUC %.3f (%d converters, %d non-converters)",
        fold,
        result.auc,
        result.n_pos,
        result.n_neg,
    )
    return result.auc


def _summarize(aucs: Sequence[Optional[float]], what: str) -> tuple[float, float]:
    defined = [a for a in aucs if a is not None]
    if not defined:
        raise EvaluationError("AUC is undefined in every fold of %s" % what)
    mean = float(np.mean(defined))
    sd = float(np.std(defined, ddof=1)) if len(defined) > 1 else 0.0
    return mean, sd


def _cross_validate(
    cohort: Cohort, model_kind: str, k: int, seed: int, config: RunConfig
) -> list[Optional[float]]:
    if model_kind not in MODEL_KINDS:
        raise ArgumentError(
            "unknown model kind %r, expected one of %s" % (model_kind, MODEL_KINDS)
        )
    folds = split_folds(cohort, k, seed, stratify=config.stratify)
    jobs = [
        (i, train, test, model_kind, config) for i, (train, test) in enumerate(folds)
    ]
    if config.threads > 1:
        with ThreadPool(config.threads) as pool:
            return pool.starmap(_fold_auc, jobs)
    return [_fold_auc(*job) for job in jobs]


def _select(cohort: Cohort, data_mode: str) -> Cohort:
    if data_mode == "subset":
        return cohort.complete_subset()
    if data_mode != "full":
        raise ArgumentError("unknown data mode %r" % data_mode)
    return cohort


def cross_validated_auroc(
    cohort: Cohort,
    model_kind: str = "ebhmm",
    k: int = 5,
    seed: int = 0,
    config: Optional[RunConfig] = None,
) -> CVResult:
    """Cross-validated conversion AUC of ``model_kind`` on ``cohort``.

    Args:

        cohort (:class:`Cohort`):

            The cohort. In ``subset`` data mode only individuals without
            missing values are used.

        model_kind (``str``):

            ``ebhmm`` or ``cthmm``.

        k (``int``):

            Number of folds.

        seed (``int``):

            Seed of the fold split.

        config (:class:`RunConfig`, optional):

            Model, horizon and data mode settings.
    """

    config = config if config is not None else RunConfig()
    data_mode = config.data_mode_for(model_kind)
    selected = _select(cohort, data_mode)
    aucs = _cross_validate(selected, model_kind, k, seed, config)
    mean, sd = _summarize(aucs, "%s (%s)" % (model_kind, data_mode))
    result = CVResult(model_kind, data_mode, mean, sd, tuple(aucs), len(selected))
    logger.info("%s: %.3f +- %.3f", result.label, mean, sd)
    return result


def compare_models(
    cohort: Cohort,
    k: int = 5,
    seed: int = 0,
    config: Optional[RunConfig] = None,
    model_kinds: Sequence[str] = MODEL_KINDS,
    data_modes: Sequence[Optional[str]] = ("full", "subset"),
) -> list[CVResult]:
    """Cross-validated AUC of every model kind in every data mode. A data mode
    of ``None`` uses the default of the model kind."""

    config = config if config is not None else RunConfig()
    results = []
    for model_kind in model_kinds:
        for data_mode in data_modes:
            results.append(
                cross_validated_auroc(
                    cohort,
                    model_kind,
                    k,
                    seed,
                    config.with_overrides(data_mode=data_mode),
                )
            )
    return results


def missing_data_sweep(
    cohort: Cohort,
    fractions: Sequence[float] = (0.25, 0.5, 0.75),
    k: int = 5,
    seed: int = 0,
    config: Optional[RunConfig] = None,
    model_kind: str = "ebhmm",
) -> list[SweepRow]:
    """Cross-validated AUC after discarding a fraction of the observed
    values.

    The cohort is restricted to complete individuals first in ``subset``
    data mode. Every fraction uses the same ablation seed, so each discards a
    superset of the values discarded by smaller fractions, and the same fold
    split.
    """

    config = config if config is not None else RunConfig()
    selected = _select(cohort, config.data_mode_for(model_kind))

    rows = []
    for fraction in fractions:
        ablated = ablate_features(selected, fraction, seed)
        aucs = _cross_validate(ablated, model_kind, k, seed, config)
        mean, sd = _summarize(aucs, "fraction %s" % fraction)
        logger.info("discarding %d%%: %.3f +- %.3f", round(100 * fraction), mean, sd)
        rows.append(SweepRow(float(fraction), mean, sd, ablated.n_missing()))
    return rows


def _format_auc(mean: float, sd: float) -> str:
    return "%.3f ± %.2f" % (mean, sd)


def comparison_table(results: Sequence[CVResult]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "Model": [r.label for r in results],
            "AU-ROC": [_format_auc(r.mean, r.sd) for r in results],
            "Folds": [
                "%d/%d" % (len(r.fold_aucs) - len(r.skipped_folds), len(r.fold_aucs))
                for r in results
            ],
            "N": [r.n_individuals for r in results],
        }
    )


def sweep_table(rows: Sequence[SweepRow]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "Discarded": ["%d%%" % round(100 * r.fraction) for r in rows],
            "AU-ROC": [_format_auc(r.mean, r.sd) for r in rows],
            "Missing cells": [r.n_missing for r in rows],
        }
    )


def format_table(table: pd.DataFrame) -> str:
    """Aligned plain text rendering of a result table."""

    return table.to_string(index=False)
