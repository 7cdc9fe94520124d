"""End-to-end pipeline runner, percentile metrics and CSV report emission."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateProjection,
    EmptyInput,
    InsufficientRedundancy,
    IoFailure,
    ModelMissing,
    NoLabels,
    SingularNormalMatrix,
)
from .estimator.baselines import ElevationWeightFit, heuristic_weights
from .estimator.features import guess_state
from .estimator.network import ModelParams, load_model, predict_errors
from .regulator import regulate_measurements, regulate_weights
from .selector import SelectorConfig, select_measurements
from .solver import WlsConfig, geometry_matrix, horizontal_error, wls_solve
from .types import Epoch

METHODS = (
    "wls_unit",
    "wls_cn0",
    "wls_elevation",
    "regulate_weights",
    "regulate_measurements",
)
_REGULATED = ("regulate_weights", "regulate_measurements")


@dataclass(frozen=True)
class PipelineSpec:
    """Which weighting/correction path to run and with what knobs."""

    method: str
    use_selector: bool = False
    model_path: str | None = None
    selector_config: SelectorConfig = SelectorConfig()
    wls_config: WlsConfig = WlsConfig()

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")


@dataclass(frozen=True)
class EpochScore:
    """Outcome of one epoch: either a scored fix or a skip reason."""

    epoch_id: int
    region_id: str
    n_all: int
    n_used: int
    horizontal_error: float
    iterations: int
    converged: bool
    skipped: str | None
    mean_abs_err_before: float
    mean_abs_err_after: float


@dataclass(frozen=True)
class EvalReport:
    """Per-epoch scores plus the aggregates the reports are built from."""

    method: str
    oracle_errors: bool
    use_selector: bool
    scores: tuple[EpochScore, ...]
    train_regions: tuple[str, ...] = ()
    eval_regions: tuple[str, ...] = ()
    seed: int | None = None

    @property
    def horizontal_errors(self) -> np.ndarray:
        return np.array([s.horizontal_error for s in self.scores if s.skipped is None])

    @property
    def p50(self) -> float:
        return percentile(self.horizontal_errors, 50.0)

    @property
    def p95(self) -> float:
        return percentile(self.horizontal_errors, 95.0)

    @property
    def nonconverged_count(self) -> int:
        return sum(1 for s in self.scores if s.skipped is None and not s.converged)

    @property
    def skipped_count(self) -> int:
        return sum(1 for s in self.scores if s.skipped is not None)

    def _measurement_stats(self, attr: str) -> np.ndarray:
        vals = [getattr(s, attr) for s in self.scores if s.skipped is None and np.isfinite(getattr(s, attr))]
        return np.asarray(vals)

    @property
    def err_before_mean(self) -> float:
        vals = self._measurement_stats("mean_abs_err_before")
        return float(vals.mean()) if vals.size else float("nan")

    @property
    def err_before_median(self) -> float:
        vals = self._measurement_stats("mean_abs_err_before")
        return float(np.median(vals)) if vals.size else float("nan")

    @property
    def err_after_mean(self) -> float:
        vals = self._measurement_stats("mean_abs_err_after")
        return float(vals.mean()) if vals.size else float("nan")

    @property
    def err_after_median(self) -> float:
        vals = self._measurement_stats("mean_abs_err_after")
        return float(np.median(vals)) if vals.size else float("nan")


def percentile(values: Sequence[float], p: float) -> float:
    """Linear-interpolation percentile of the sample."""
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise EmptyInput("no values to take a percentile of")
    if not 0.0 <= p <= 100.0:
        raise ValueError(f"percentile rank must be in [0, 100], got {p}")
    return float(np.percentile(vals, p))


def _skip(epoch: Epoch, reason: str) -> EpochScore:
    return EpochScore(
        epoch_id=epoch.epoch_id,
        region_id=epoch.region_id,
        n_all=len(epoch),
        n_used=0,
        horizontal_error=float("nan"),
        iterations=0,
        converged=False,
        skipped=reason,
        mean_abs_err_before=float("nan"),
        mean_abs_err_after=float("nan"),
    )


def score_epoch(
    spec: PipelineSpec,
    epoch: Epoch,
    model: ModelParams | None,
    oracle_errors: bool,
    elevation_fit: ElevationWeightFit | None,
) -> EpochScore:
    """Run the configured pipeline on one epoch and score against truth."""
    if epoch.truth is None:
        raise NoLabels(f"epoch {epoch.epoch_id} has no truth state to score against")

    e_hat = None
    if oracle_errors:
        if not epoch.has_truth_errors():
            raise NoLabels(f"epoch {epoch.epoch_id} lacks per-measurement truth errors")
        e_hat = epoch.truth_errors()
    elif model is not None:
        e_hat = predict_errors(model, epoch)

    sub = epoch
    if spec.use_selector:
        mask = select_measurements(e_hat, spec.selector_config)
        sub = epoch.subset(mask)
        e_hat = e_hat[mask]
    if len(sub) < 4:
        return _skip(epoch, "too_few_measurements")

    labels = sub.truth_errors() if sub.has_truth_errors() else None
    before = float(np.mean(np.abs(labels))) if labels is not None else float("nan")
    if labels is not None:
        resid = labels - (e_hat if e_hat is not None else 0.0)
        after = float(np.mean(np.abs(resid)))
    else:
        after = float("nan")

    if spec.method == "regulate_measurements":
        sub = regulate_measurements(sub, e_hat)
        weights = np.ones(len(sub))
    elif spec.method == "regulate_weights":
        H = geometry_matrix(sub, guess_state(sub))
        try:
            weights = regulate_weights(H, e_hat)
        except (DegenerateProjection, InsufficientRedundancy) as exc:
            return _skip(epoch, type(exc).__name__)
    elif spec.method == "wls_unit":
        weights = np.ones(len(sub))
    elif spec.method == "wls_cn0":
        weights = heuristic_weights("cn0", sub)
    else:  # wls_elevation, membership checked at construction
        weights = heuristic_weights("elevation", sub, elevation_fit)

    try:
        result = wls_solve(sub, weights, guess_state(sub), spec.wls_config)
    except SingularNormalMatrix as exc:
        return _skip(epoch, type(exc).__name__)

    return EpochScore(
        epoch_id=epoch.epoch_id,
        region_id=epoch.region_id,
        n_all=len(epoch),
        n_used=len(sub),
        horizontal_error=horizontal_error(result.state, epoch.truth),
        iterations=result.iterations,
        converged=result.converged,
        skipped=None,
        mean_abs_err_before=before,
        mean_abs_err_after=after,
    )


def run_pipeline(
    spec: PipelineSpec,
    dataset: Sequence[Epoch],
    oracle_errors: bool = False,
    elevation_fit: ElevationWeightFit | None = None,
    allow_train_overlap: bool = False,
    seed: int | None = None,
) -> EvalReport:
    """Score every epoch of the dataset under the configured pipeline.

    Epochs whose solver hit the iteration cap are scored on the last iterate
    and reported in nonconverged_count; epochs the method cannot handle
    (degenerate weight projection, too few measurements, singular normal
    matrix) are skipped with the reason recorded.
    """
    if len(dataset) == 0:
        raise EmptyInput("empty dataset")
    needs_estimates = spec.method in _REGULATED or spec.use_selector
    model = None
    if needs_estimates and not oracle_errors:
        if spec.model_path is None:
            raise ModelMissing(
                f"method {spec.method!r} needs error estimates; give model_path or oracle errors"
            )
        model = load_model(spec.model_path)
    eval_regions = tuple(sorted({ep.region_id for ep in dataset}))
    if model is not None and not allow_train_overlap:
        overlap = sorted(set(model.train_regions) & set(eval_regions))
        if overlap:
            raise ValueError(
                f"model was trained on evaluation regions {overlap}; "
                "hold these out or evaluate elsewhere"
            )
    scores = tuple(score_epoch(spec, ep, model, oracle_errors, elevation_fit) for ep in dataset)
    return EvalReport(
        method=spec.method,
        oracle_errors=oracle_errors,
        use_selector=spec.use_selector,
        scores=scores,
        train_regions=model.train_regions if model is not None else (),
        eval_regions=eval_regions,
        seed=seed,
    )


def emit_reports(report: EvalReport, out_dir: str) -> dict[str, str]:
    """Write cdf.csv, summary.csv and trace.csv; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "cdf": os.path.join(out_dir, "cdf.csv"),
        "summary": os.path.join(out_dir, "summary.csv"),
        "trace": os.path.join(out_dir, "trace.csv"),
    }
    try:
        errors = np.sort(report.horizontal_errors)
        with open(paths["cdf"], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["horizontal_error", "cumulative_fraction"])
            for i, err in enumerate(errors, start=1):
                writer.writerow([repr(float(err)), repr(i / errors.size)])

        with open(paths["summary"], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "method",
                    "oracle_errors",
                    "use_selector",
                    "epochs",
                    "p50",
                    "p95",
                    "mean_abs_err_before",
                    "median_abs_err_before",
                    "mean_abs_err_after",
                    "median_abs_err_after",
                    "nonconverged",
                    "skipped",
                ]
            )
            writer.writerow(
                [
                    report.method,
                    int(report.oracle_errors),
                    int(report.use_selector),
                    len(report.scores),
                    repr(report.p50),
                    repr(report.p95),
                    repr(report.err_before_mean),
                    repr(report.err_before_median),
                    repr(report.err_after_mean),
                    repr(report.err_after_median),
                    report.nonconverged_count,
                    report.skipped_count,
                ]
            )

        with open(paths["trace"], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch_id", "region_id", "mean_abs_err", "mean_abs_prediction_dev"])
            for s in report.scores:
                if s.skipped is not None:
                    continue
                writer.writerow(
                    [s.epoch_id, s.region_id, repr(s.mean_abs_err_before), repr(s.mean_abs_err_after)]
                )
    except OSError as exc:
        raise IoFailure(f"cannot write reports under {out_dir}: {exc}") from exc
    return paths


@dataclass(frozen=True)
class MultiSeedSummary:
    """Across-seed spread of the headline percentiles."""

    p50_values: tuple[float, ...]
    p95_values: tuple[float, ...]

    @property
    def p50_mean(self) -> float:
        return float(np.mean(self.p50_values))

    @property
    def p50_std(self) -> float:
        return float(np.std(self.p50_values))

    @property
    def p95_mean(self) -> float:
        return float(np.mean(self.p95_values))

    @property
    def p95_std(self) -> float:
        return float(np.std(self.p95_values))


def aggregate_reports(reports: Sequence[EvalReport]) -> MultiSeedSummary:
    if len(reports) == 0:
        raise EmptyInput("no reports to aggregate")
    return MultiSeedSummary(
        p50_values=tuple(r.p50 for r in reports),
        p95_values=tuple(r.p95 for r in reports),
    )
