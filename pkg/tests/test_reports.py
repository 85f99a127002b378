import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
import pytest

from quantsig.errors import MissingManifest, MissingMetrics
from quantsig.marketdata import validate_series
from quantsig.metrics import regression_report, roc_auc
from quantsig.plots import price_chart, roc_chart
from quantsig.reports import (ReportBundle, load_runs, merge_runs, metrics_frame, read_manifest, regression_rows,
                              render_metrics_text)
from quantsig.run_config import RunConfig
from quantsig.synthetic import synthetic_ohlcv, synthetic_tweets


def _bundle(directory, config, values):
    bundle = ReportBundle(directory)
    frame = metrics_frame({"Linear Regression": regression_rows("test", regression_report([1, 2, 3], values))})
    bundle.write_metrics(frame, "demo")
    bundle.write_manifest("train-price", config, [], {"model": config.model})
    return bundle


def test_metrics_frame_layout():
    report = regression_report([1, 2, 3], [1, 2, 4])
    frame = metrics_frame({"A": regression_rows("validation", report) + regression_rows("test", report),
                           "B": regression_rows("test", report)})
    assert list(frame.columns) == ["split", "metric", "A", "B"]
    assert list(frame["metric"][:5]) == ["R2", "Explained Variation", "MAPE", "RMSE", "MAE"]
    assert np.isnan(frame["B"].iloc[0])
    text = render_metrics_text(frame, "Demo")
    assert text.startswith("Demo\n====")
    assert "[validation]" in text and "[test]" in text


def test_manifest_lists_outputs_and_config(tmp_path):
    config = RunConfig(seed=5)
    _bundle(tmp_path, config, [1, 2, 4])
    manifest = read_manifest(tmp_path)
    assert manifest["command"] == "train-price"
    assert manifest["config_hash"] == config.config_hash()
    assert manifest["seed"] == "5"
    assert manifest["output"] == "metrics.csv,metrics.txt"
    assert manifest["config.symbol"] == "AAPL"


def test_discard_removes_written_files(tmp_path):
    bundle = _bundle(tmp_path, RunConfig(), [1, 2, 4])
    bundle.discard()
    assert list(tmp_path.iterdir()) == []


def test_merge_suffixes_conflicting_columns(tmp_path):
    _bundle(tmp_path / "a", RunConfig(), [1, 2, 4])
    _bundle(tmp_path / "b", RunConfig(seed=9), [1, 2, 3])
    runs = load_runs([tmp_path])
    merged = merge_runs(runs)
    suffix = runs[1].config_hash[:8]
    assert list(merged.columns) == ["split", "metric", "Linear Regression", f"Linear Regression [{suffix}]"]


def test_load_runs_needs_a_manifest(tmp_path):
    with pytest.raises(MissingManifest):
        load_runs([tmp_path])


def test_runs_without_metrics_are_skipped(tmp_path):
    ReportBundle(tmp_path / "features").write_manifest("features", RunConfig(), [])
    with pytest.raises(MissingMetrics):
        load_runs([tmp_path])
    _bundle(tmp_path / "linear", RunConfig(), [1, 2, 4])
    assert [run.directory.name for run in load_runs([tmp_path])] == ["linear"]


def test_price_chart_is_svg():
    svg = price_chart(["2020-01-02", "2020-01-03", "2020-01-06"], [1.0, 2.0, 3.0], [1.1, 1.9, 3.2], "AAPL")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    polylines = [element for element in root.iter() if element.tag.endswith("polyline")]
    assert len(polylines) == 2
    assert "stroke-dasharray" in polylines[1].attrib
    assert "2020-01-02" in svg


def test_roc_chart_zoom_is_deterministic():
    curve = roc_auc([0, 0, 1, 1], [0.1, 0.6, 0.4, 0.9])
    assert roc_chart({"LR": curve}, zoom=True) == roc_chart({"LR": curve}, zoom=True)
    assert "AUC 0.750" in roc_chart({"LR": curve})


def test_synthetic_fixtures_are_seeded():
    series = synthetic_ohlcv(n_days=50)
    assert series == synthetic_ohlcv(n_days=50)
    assert validate_series(series) == []
    tweets = synthetic_tweets(n_tweets=100)
    pd.testing.assert_frame_equal(tweets, synthetic_tweets(n_tweets=100))
    assert sorted(tweets["Sentiment"].unique()) == [-1, 1]
