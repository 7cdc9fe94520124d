import csv
import math

import numpy as np
import pytest

from gnssfix import (
    ElevationWeightFit,
    EmptyInput,
    EpochGraph,
    ModelMissing,
    SceneConfig,
    SelectorConfig,
    TrainConfig,
    WlsConfig,
    generate_epoch,
    sample_sky_mask,
    save_model,
    train,
)
from gnssfix.evaluation import (
    EpochScore,
    EvalReport,
    MultiSeedSummary,
    PipelineSpec,
    aggregate_reports,
    emit_reports,
    percentile,
    run_pipeline,
)
from gnssfix.simulator import N_MASK_BINS, epoch_seed

from util import ORIGIN, make_epoch

ALL_METHODS = ("wls_unit", "wls_cn0", "wls_elevation", "regulate_weights", "regulate_measurements")


def _noiseless_dataset(count=30):
    scene = SceneConfig(
        region_id="clean",
        receiver_origin=ORIGIN,
        sky_mask_bins=tuple([0.0] * N_MASK_BINS),
        los_sigma_base=0.0,
        nlos_mean_extra=0.0,
        nlos_sigma=0.0,
        guess_offset_sigma=15.0,
    )
    return [
        generate_epoch(scene, k, np.random.default_rng(epoch_seed(0, "clean", k)))
        for k in range(count)
    ]


def _urban_dataset(count=150, region="urb"):
    mask_rng = np.random.default_rng(11)
    scene = SceneConfig(
        region_id=region,
        receiver_origin=ORIGIN,
        sky_mask_bins=tuple(sample_sky_mask("urban", mask_rng).tolist()),
    )
    return [
        generate_epoch(scene, k, np.random.default_rng(epoch_seed(0, region, k)))
        for k in range(count)
    ]


def _score(epoch_id=0, he=1.0, skipped=None, converged=True, before=5.0, after=1.0):
    return EpochScore(
        epoch_id=epoch_id,
        region_id="r",
        n_all=8,
        n_used=8,
        horizontal_error=he,
        iterations=3,
        converged=converged,
        skipped=skipped,
        mean_abs_err_before=before,
        mean_abs_err_after=after,
    )


def test_percentile_examples():
    assert percentile([1.0, 2.0, 3.0], 50.0) == pytest.approx(2.0)
    assert percentile([5.0], 3.0) == pytest.approx(5.0)
    assert percentile([5.0], 99.0) == pytest.approx(5.0)
    assert percentile(np.arange(100.0), 95.0) == pytest.approx(94.05)


def test_percentile_validation():
    with pytest.raises(EmptyInput):
        percentile([], 50.0)
    with pytest.raises(ValueError):
        percentile([1.0], 101.0)


def test_percentiles_nondecreasing(rng):
    vals = rng.normal(0, 20, 500)
    ps = [percentile(vals, p) for p in np.linspace(0, 100, 41)]
    assert np.all(np.diff(ps) >= 0.0)


def test_pipeline_spec_validation():
    with pytest.raises(ValueError):
        PipelineSpec(method="kalman")
    PipelineSpec(method="wls_unit")


@pytest.mark.parametrize("method", ALL_METHODS)
def test_noiseless_dataset_all_methods(method):
    data = _noiseless_dataset(30)
    spec = PipelineSpec(method=method)
    fit = ElevationWeightFit(a=1.0, b=0.5)
    report = run_pipeline(spec, data, oracle_errors=True, elevation_fit=fit)
    assert report.skipped_count == 0
    assert report.p95 < 1e-3


def test_oracle_measurement_regulation_on_noisy_data():
    data = _urban_dataset(150)
    spec = PipelineSpec(method="regulate_measurements")
    report = run_pipeline(spec, data, oracle_errors=True)
    assert report.p95 < 1e-2
    # oracle corrections null out the measurement error entirely
    assert report.err_after_mean == pytest.approx(0.0, abs=1e-12)
    assert report.err_before_mean > 1.0


def test_oracle_weight_regulation_on_noisy_data():
    data = _urban_dataset(150)
    spec = PipelineSpec(method="regulate_weights")
    report = run_pipeline(spec, data, oracle_errors=True)
    assert report.p95 < 1e-1


def test_unit_wls_suffers_on_noisy_data():
    data = _urban_dataset(150)
    report = run_pipeline(PipelineSpec(method="wls_unit"), data)
    assert report.p95 > 5.0  # urban errors push the plain solver off target


def test_selector_with_oracle_errors_drops_outliers():
    data = _urban_dataset(100)
    base = run_pipeline(PipelineSpec(method="wls_unit"), data)
    sel = run_pipeline(
        PipelineSpec(method="wls_unit", use_selector=True, selector_config=SelectorConfig(n_req=8)),
        data,
        oracle_errors=True,
    )
    used = [s.n_used for s in sel.scores if s.skipped is None]
    alls = [s.n_all for s in sel.scores if s.skipped is None]
    assert sum(used) < sum(alls)  # something was actually dropped
    assert sel.p95 < base.p95


def test_regulated_method_requires_model_or_oracle():
    data = _urban_dataset(5)
    with pytest.raises(ModelMissing):
        run_pipeline(PipelineSpec(method="regulate_measurements"), data)


def test_pipeline_counts_nonconverged():
    data = _urban_dataset(40)
    spec = PipelineSpec(method="wls_unit", wls_config=WlsConfig(max_iterations=1, convergence_tol=1e-10))
    report = run_pipeline(spec, data)
    assert report.nonconverged_count == len(data)
    # still scored: horizontal errors exist for every epoch
    assert report.horizontal_errors.size == len(data)


def test_pipeline_skips_tiny_epochs(rng):
    data = [make_epoch(rng, n=3, errors=rng.normal(0, 3, 3))]
    report = run_pipeline(PipelineSpec(method="wls_unit"), data)
    assert report.skipped_count == 1
    assert report.scores[0].skipped == "too_few_measurements"
    with pytest.raises(EmptyInput):
        run_pipeline(PipelineSpec(method="wls_unit"), [])


def test_provenance_guard_blocks_train_eval_overlap(rng, tmp_path):
    epochs = [
        make_epoch(
            rng, n=6, errors=rng.normal(0, 4, 6), cn0=rng.uniform(25, 50, 6), epoch_id=k, region="overlap-zone"
        )
        for k in range(12)
    ]
    model = train(epochs, TrainConfig(batch_size=4, iterations=5, seed=0), hidden=8)
    path = str(tmp_path / "model.json")
    save_model(model, path)
    spec = PipelineSpec(method="regulate_measurements", model_path=path)
    with pytest.raises(ValueError):
        run_pipeline(spec, epochs)
    report = run_pipeline(spec, epochs, allow_train_overlap=True)
    assert report.train_regions == ("overlap-zone",)
    assert report.eval_regions == ("overlap-zone",)


def test_emit_cdf_rows(tmp_path):
    report = EvalReport(
        method="wls_unit",
        oracle_errors=False,
        use_selector=False,
        scores=tuple(_score(epoch_id=i, he=v) for i, v in enumerate([4.0, 3.0, 5.0])),
    )
    paths = emit_reports(report, str(tmp_path))
    rows = list(csv.reader(open(paths["cdf"])))
    assert rows[0] == ["horizontal_error", "cumulative_fraction"]
    got = [(float(r[0]), float(r[1])) for r in rows[1:]]
    assert got == [(3.0, pytest.approx(1 / 3)), (4.0, pytest.approx(2 / 3)), (5.0, pytest.approx(1.0))]


def test_emit_trace_zeros_for_perfect_predictions(tmp_path):
    report = EvalReport(
        method="regulate_measurements",
        oracle_errors=True,
        use_selector=False,
        scores=tuple(_score(epoch_id=i, after=0.0) for i in range(4)),
    )
    paths = emit_reports(report, str(tmp_path))
    rows = list(csv.reader(open(paths["trace"])))
    assert rows[0] == ["epoch_id", "region_id", "mean_abs_err", "mean_abs_prediction_dev"]
    assert all(float(r[3]) == 0.0 for r in rows[1:])
    assert len(rows) == 5


def test_emit_summary_matches_percentile_oracle(tmp_path, rng):
    hes = rng.uniform(0.5, 80.0, 37)
    report = EvalReport(
        method="wls_cn0",
        oracle_errors=False,
        use_selector=False,
        scores=tuple(_score(epoch_id=i, he=float(v)) for i, v in enumerate(hes)),
    )
    paths = emit_reports(report, str(tmp_path))
    rows = list(csv.reader(open(paths["summary"])))
    header, values = rows
    by_name = dict(zip(header, values))
    assert float(by_name["p50"]) == percentile(hes, 50.0)
    assert float(by_name["p95"]) == percentile(hes, 95.0)
    assert int(by_name["epochs"]) == 37
    # trace skips nothing here, cdf has one row per epoch
    cdf_rows = list(csv.reader(open(paths["cdf"])))
    assert len(cdf_rows) == 38


def test_emit_reports_skips_skipped_epochs(tmp_path):
    scores = (_score(epoch_id=0, he=2.0), _score(epoch_id=1, he=float("nan"), skipped="too_few_measurements"))
    report = EvalReport(method="wls_unit", oracle_errors=False, use_selector=False, scores=scores)
    paths = emit_reports(report, str(tmp_path))
    assert len(list(csv.reader(open(paths["cdf"])))) == 2  # header + 1
    assert len(list(csv.reader(open(paths["trace"])))) == 2
    summary = dict(zip(*list(csv.reader(open(paths["summary"])))))
    assert int(summary["skipped"]) == 1


def test_aggregate_reports():
    reports = [
        EvalReport(
            method="wls_unit",
            oracle_errors=False,
            use_selector=False,
            scores=tuple(_score(epoch_id=i, he=v + off) for i, v in enumerate([1.0, 2.0, 3.0])),
            seed=s,
        )
        for s, off in ((0, 0.0), (1, 1.0))
    ]
    summary = aggregate_reports(reports)
    assert summary.p50_values == (2.0, 3.0)
    assert summary.p50_mean == pytest.approx(2.5)
    assert summary.p50_std == pytest.approx(0.5)
    with pytest.raises(EmptyInput):
        aggregate_reports([])


def test_multiseed_summary_math():
    s = MultiSeedSummary(p50_values=(1.0, 3.0), p95_values=(10.0, 10.0))
    assert s.p50_mean == 2.0 and s.p50_std == 1.0
    assert s.p95_mean == 10.0 and s.p95_std == 0.0
