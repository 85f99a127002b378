import numpy as np
import pandas as pd
import pytest

from quantsig.cli import main
from quantsig.reports import read_manifest
from tests.conftest import SMALL_CSV

FAST_SENTIMENT = {"max_size": "100", "n_trees": "10", "epochs": "20"}


def _write_config(path, **values):
    path.write_text("".join(f"{key}={value}\n" for key, value in values.items()), encoding="utf-8")
    return str(path)


def _metric(run_dir, split, metric, column):
    frame = pd.read_csv(run_dir / "metrics.csv")
    row = frame[(frame["split"] == split) & (frame["metric"] == metric)]
    return float(row[column].iloc[0])


@pytest.fixture
def price_config(tmp_path, price_csv):
    return _write_config(tmp_path / "price.env", price_csv=price_csv, symbol="AAPL")


class TestFetch:
    def test_second_fetch_is_cache_hit(self, fixture_server, monkeypatch, tmp_path, capsys):
        fixture_server.routes["/history/AAPL.csv"] = (200, SMALL_CSV.encode())
        monkeypatch.setenv("QUANTSIG_DATA_URL", fixture_server.template())
        monkeypatch.setenv("QUANTSIG_CACHE", str(tmp_path / "cache"))
        argv = ["fetch", "AAPL", "2020-01-01", "2020-02-01"]
        assert main(argv) == 0
        first = capsys.readouterr().out
        assert "cache hit" not in first
        assert "5 rows for AAPL (0 skipped)" in first
        assert main(argv) == 0
        assert "cache hit" in capsys.readouterr().out
        assert len(fixture_server.requests) == 1

    def test_unknown_symbol_exits_2(self, fixture_server, monkeypatch, tmp_path, capsys):
        monkeypatch.setenv("QUANTSIG_DATA_URL", fixture_server.template())
        monkeypatch.setenv("QUANTSIG_CACHE", str(tmp_path / "cache"))
        assert main(["fetch", "NOPE", "2020-01-01", "2020-02-01"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_reversed_dates_exit_1(self, tmp_path, capsys):
        assert main(["fetch", "AAPL", "2020-02-01", "2020-01-01"]) == 1


class TestUsage:
    def test_unknown_price_model(self, price_config, tmp_path):
        assert main(["train-price", "--config", price_config, "--model", "svm", "--out", str(tmp_path / "r")]) == 1

    def test_bad_flag(self):
        assert main(["train-price", "--no-such-flag"]) == 1

    def test_unknown_config_key(self, tmp_path):
        assert main(["features", "--config", _write_config(tmp_path / "bad.env", colour="blue")]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["features", "--config", str(tmp_path / "missing.env")]) == 1

    def test_unwritable_log_file(self, tmp_path):
        assert main(["features", "--log-file", str(tmp_path / "no_dir" / "run.log")]) == 1


NOT_UTF8 = b"Date,Open,High,Low,Close,Adj Close,Volume\n2020-01-02,1,2,0.5,1.5,1.5,10 \xff\xfe\n"


class TestBadInputFiles:
    def test_missing_price_csv_exits_2(self, tmp_path, capsys):
        config = _write_config(tmp_path / "p.env", price_csv=tmp_path / "missing.csv")
        assert main(["train-price", "--config", config, "--out", str(tmp_path / "run")]) == 2
        assert "missing.csv" in capsys.readouterr().err

    def test_price_csv_that_is_not_utf8_exits_2(self, tmp_path):
        prices = tmp_path / "latin1.csv"
        prices.write_bytes(NOT_UTF8)
        config = _write_config(tmp_path / "p.env", price_csv=prices)
        assert main(["features", "--config", config, "--out", str(tmp_path / "run")]) == 2

    def test_missing_features_csv_exits_2(self, tmp_path):
        config = _write_config(tmp_path / "p.env", features_csv=tmp_path / "nope.csv")
        assert main(["train-price", "--config", config, "--out", str(tmp_path / "run")]) == 2

    def test_missing_tweets_csv_exits_2(self, tmp_path):
        config = _write_config(tmp_path / "s.env", tweets_csv=tmp_path / "missing.csv")
        assert main(["train-sentiment", "--config", config, "--out", str(tmp_path / "run")]) == 2

    def test_tweets_csv_that_is_not_utf8_exits_2(self, tmp_path):
        corpus = tmp_path / "tweets.csv"
        corpus.write_bytes(b"Text,Sentiment\nstock \xff\xfe up,1\nstock down,-1\n")
        config = _write_config(tmp_path / "s.env", tweets_csv=corpus)
        assert main(["train-sentiment", "--config", config, "--out", str(tmp_path / "run")]) == 2

    def test_empty_tweets_csv_exits_2(self, tmp_path):
        corpus = tmp_path / "tweets.csv"
        corpus.write_text("", encoding="utf-8")
        config = _write_config(tmp_path / "s.env", tweets_csv=corpus)
        assert main(["train-sentiment", "--config", config, "--out", str(tmp_path / "run")]) == 2

    def test_body_that_is_not_utf8_exits_2(self, fixture_server, monkeypatch, tmp_path):
        fixture_server.routes["/history/AAPL.csv"] = (200, NOT_UTF8)
        monkeypatch.setenv("QUANTSIG_DATA_URL", fixture_server.template())
        monkeypatch.setenv("QUANTSIG_CACHE", str(tmp_path / "cache"))
        assert main(["fetch", "AAPL", "2020-01-01", "2020-02-01"]) == 2
        assert not (tmp_path / "cache").exists() or not any((tmp_path / "cache").iterdir())


def test_features_command(price_config, tmp_path):
    out = tmp_path / "features"
    assert main(["features", "--config", price_config, "--out", str(out)]) == 0
    frame = pd.read_csv(out / "features.csv")
    assert len(frame) == 3000 - 200
    assert frame.columns[0] == "date" and frame.columns[-1] == "target"
    assert "selection (training split)" in (out / "features.txt").read_text()
    manifest = read_manifest(out)
    assert manifest["command"] == "features"
    assert "input.aapl_like.csv" in manifest


class TestTrainPrice:
    def test_linear_run_writes_bundle(self, price_config, tmp_path, capsys):
        out = tmp_path / "linear"
        assert main(["train-price", "--config", price_config, "--out", str(out)]) == 0
        for name in ("metrics.csv", "metrics.txt", "predictions.csv", "price.svg", "linear.qsm", "scaler.qsm",
                     "notes.txt", "manifest.txt"):
            assert (out / name).is_file(), name
        assert (out / "price.svg").read_text().startswith("<svg")
        predictions = pd.read_csv(out / "predictions.csv")
        assert set(predictions["split"]) == {"validation", "test"}
        assert "Linear Regression" in capsys.readouterr().out

    def test_reruns_are_byte_identical(self, price_config, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["train-price", "--config", price_config, "--out", str(first)]) == 0
        assert main(["train-price", "--config", price_config, "--out", str(second)]) == 0
        for name in ("metrics.csv", "manifest.txt", "predictions.csv", "linear.qsm"):
            assert (first / name).read_bytes() == (second / name).read_bytes(), name

    def test_short_history_fails_without_partial_outputs(self, tmp_path):
        short = tmp_path / "short.csv"
        short.write_text(SMALL_CSV, encoding="utf-8")
        out = tmp_path / "run"
        config = _write_config(tmp_path / "short.env", price_csv=short)
        assert main(["train-price", "--config", config, "--out", str(out)]) == 3
        assert not (out / "manifest.txt").exists()

    def test_small_lstm_run(self, tmp_path, price_csv):
        config = _write_config(tmp_path / "lstm.env", price_csv=price_csv, model="lstm", epochs=2,
                               hidden_size=4, window_length=10)
        out = tmp_path / "lstm"
        assert main(["train-price", "--config", config, "--out", str(out)]) == 0
        assert (out / "lstm.qsm").is_file()
        assert np.isfinite(_metric(out, "test", "RMSE", "LSTM"))

    @pytest.mark.slow
    def test_same_day_features_leak_next_day_does_not(self, price_config, tmp_path):
        same_day, next_day = tmp_path / "h0", tmp_path / "h1"
        assert main(["train-price", "--config", price_config, "--out", str(same_day)]) == 0
        assert main(["train-price", "--config", price_config, "--horizon", "1", "--out", str(next_day)]) == 0
        assert _metric(same_day, "test", "R2", "Linear Regression") >= 0.99
        assert _metric(same_day, "test", "Explained Variation", "Linear Regression") >= 0.99
        assert _metric(next_day, "test", "MAPE", "Linear Regression") > \
            1.2 * _metric(same_day, "test", "MAPE", "Linear Regression")


class TestTrainSentiment:
    def test_all_families_small_corpus(self, tmp_path, small_tweets_csv):
        config = _write_config(tmp_path / "s.env", tweets_csv=small_tweets_csv, **FAST_SENTIMENT)
        out = tmp_path / "sentiment"
        assert main(["train-sentiment", "--config", config, "--out", str(out)]) == 0
        frame = pd.read_csv(out / "metrics.csv")
        assert list(frame.columns[2:]) == ["LR", "GNB", "BNB", "DT", "RF", "KNN", "SVM", "XGB", "ANN"]
        aucs = frame[frame["metric"] == "AUC"].iloc[:, 2:].to_numpy()
        assert ((aucs >= 0) & (aucs <= 1)).all()
        for name in ("roc.svg", "roc_zoom.svg", "vocabulary.txt", "pca.qsm", "scaler.qsm", "svm.qsm"):
            assert (out / name).is_file(), name
        assert read_manifest(out)["families"] == "lr,gnb,bnb,dt,rf,knn,svm,xgb,ann"

    def test_single_family_matches_all(self, tmp_path, small_tweets_csv):
        config = _write_config(tmp_path / "s.env", tweets_csv=small_tweets_csv, **FAST_SENTIMENT)
        alone, together = tmp_path / "svm", tmp_path / "all"
        assert main(["train-sentiment", "--config", config, "--model", "svm", "--out", str(alone)]) == 0
        assert main(["train-sentiment", "--config", config, "--model", "all", "--out", str(together)]) == 0
        assert (alone / "svm.qsm").read_bytes() == (together / "svm.qsm").read_bytes()

    def test_reruns_are_byte_identical(self, tmp_path, small_tweets_csv):
        config = _write_config(tmp_path / "s.env", tweets_csv=small_tweets_csv, **FAST_SENTIMENT)
        first, second = tmp_path / "a", tmp_path / "b"
        for out in (first, second):
            assert main(["train-sentiment", "--config", config, "--seed", "3", "--out", str(out)]) == 0
        for name in ("metrics.csv", "manifest.txt", "predictions.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes(), name

    def test_one_class_corpus_exits_3(self, tmp_path):
        corpus = tmp_path / "one_class.csv"
        texts = ["stock gains strong", "stock falls weak", "market flat quiet"] * 10
        pd.DataFrame({"Text": texts, "Sentiment": [1] * len(texts)}).to_csv(corpus, index=False)
        config = _write_config(tmp_path / "s.env", tweets_csv=corpus, **FAST_SENTIMENT)
        out = tmp_path / "run"
        assert main(["train-sentiment", "--config", config, "--out", str(out)]) == 3
        assert not (out / "manifest.txt").exists()

    def test_missing_label_column_exits_2(self, tmp_path, small_tweets_csv):
        config = _write_config(tmp_path / "s.env", tweets_csv=small_tweets_csv)
        assert main(["train-sentiment", "--config", config, "--label-col", "Mood",
                     "--out", str(tmp_path / "run")]) == 2

    def test_single_class_test_split_keeps_the_run(self, tmp_path, small_tweets_csv):
        frame = pd.read_csv(small_tweets_csv)
        frame.loc[len(frame) - 100:, "Sentiment"] = 1
        corpus = tmp_path / "late_positive.csv"
        frame.to_csv(corpus, index=False)
        config = _write_config(tmp_path / "s.env", tweets_csv=corpus, **FAST_SENTIMENT)
        out = tmp_path / "run"
        assert main(["train-sentiment", "--config", config, "--model", "lr", "--out", str(out)]) == 0
        assert np.isnan(_metric(out, "test", "AUC", "LR"))
        assert 0.0 <= _metric(out, "validation", "AUC", "LR") <= 1.0
        assert (out / "manifest.txt").is_file()

    @pytest.mark.slow
    def test_accuracy_bands_on_full_corpus(self, tmp_path, tweets_csv):
        config = _write_config(tmp_path / "s.env", tweets_csv=tweets_csv)
        out = tmp_path / "full"
        assert main(["train-sentiment", "--config", config, "--out", str(out)]) == 0
        for family in ("SVM", "LR"):
            assert 0.67 <= _metric(out, "test", "Accuracy", family) <= 0.83
        assert _metric(out, "test", "AUC", "SVM") >= 0.70

        predictions = pd.read_csv(out / "predictions.csv")
        test_labels = predictions[predictions["split"] == "test"]["label"]
        baseline = max(test_labels.mean(), 1 - test_labels.mean())
        for family in ("LR", "GNB", "BNB", "DT", "RF", "KNN", "SVM", "XGB", "ANN"):
            assert _metric(out, "test", "Accuracy", family) >= baseline + 0.05, family


class TestReport:
    def test_empty_directory_exits_2(self, tmp_path, capsys):
        assert main(["report", str(tmp_path)]) == 2
        assert "manifest" in capsys.readouterr().err

    def test_duplicate_runs_are_merged_once(self, price_config, tmp_path, capsys):
        runs = tmp_path / "runs"
        for name in ("a", "b"):
            assert main(["train-price", "--config", price_config, "--out", str(runs / name)]) == 0
        capsys.readouterr()
        merged = tmp_path / "merged"
        assert main(["report", str(runs), "--out", str(merged)]) == 0
        assert "1 run(s)" in capsys.readouterr().out
        frame = pd.read_csv(merged / "metrics.csv")
        assert list(frame.columns) == ["split", "metric", "Linear Regression"]

    def test_price_models_side_by_side(self, tmp_path, price_csv, capsys):
        linear = _write_config(tmp_path / "linear.env", price_csv=price_csv)
        lstm = _write_config(tmp_path / "lstm.env", price_csv=price_csv, model="lstm", epochs=1,
                             hidden_size=4, window_length=10)
        assert main(["train-price", "--config", linear, "--out", str(tmp_path / "linear")]) == 0
        assert main(["train-price", "--config", lstm, "--out", str(tmp_path / "lstm")]) == 0
        capsys.readouterr()
        assert main(["report", str(tmp_path / "linear"), str(tmp_path / "lstm")]) == 0
        printed = capsys.readouterr().out
        assert "Linear Regression" in printed and "LSTM" in printed
        assert "config mismatch" not in printed

    def test_feature_runs_are_skipped(self, price_config, tmp_path, capsys):
        runs = tmp_path / "runs"
        assert main(["features", "--config", price_config, "--out", str(runs / "features")]) == 0
        assert main(["report", str(runs)]) == 2
        assert "metrics.csv" in capsys.readouterr().err
        assert main(["train-price", "--config", price_config, "--out", str(runs / "linear")]) == 0
        capsys.readouterr()
        assert main(["report", str(runs)]) == 0
        assert "1 run(s)" in capsys.readouterr().out
