"""
quantsig command line.

    fetch            download (or reuse cached) OHLCV history
    features         build the technical feature frame
    train-price      linear regression or LSTM closing-price prediction
    train-sentiment  tweet sentiment classifiers, one family or all nine
    report           merge finished runs into side-by-side tables

Exit codes: 0 success, 1 usage, 2 data acquisition, 3 training/evaluation.
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from quantsig.errors import ConfigError, QuantSigError, SeriesTooShort, TrainingError, UsageError
from quantsig.indicators import build_feature_frame
from quantsig.marketdata import OhlcvSeries, cache_path, fetch_history, read_ohlcv_file, validate_series
from quantsig.metrics import classification_report, regression_report, roc_auc
from quantsig.models import (CLASSIFIER_FAMILIES, FAMILY_LABELS, REGRESSOR_FAMILIES, fit_classifier,
                             fit_linear_regression, fit_lstm, save_model)
from quantsig.models.base import STREAM_SHUFFLE, random_stream
from quantsig.plots import price_chart, roc_chart
from quantsig.preprocess import (FeatureMatrix, SplitIndices, apply_minmax, chronological_split, fit_minmax,
                                 fit_minmax_values, pca_fit, pca_transform, select_features)
from quantsig.reports import (ReportBundle, classification_rows, config_mismatches, load_runs, merge_runs,
                              metrics_frame, regression_rows, render_metrics_text)
from quantsig.run_config import RunConfig
from quantsig.textcorpus import build_vocabulary, load_tweets_csv, vectorize

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
EVALUATED_SPLITS = ("validation", "test")
MAX_FAMILY_WORKERS = 8


class QuantSigArgumentParser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; quantsig reserves 2 for data errors."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def configure_logging(verbose: bool = False, log_file: Optional[str] = None) -> None:
    """Root logger setup: stderr always, plus a file when asked."""
    load_dotenv()
    level_name = "DEBUG" if verbose else os.environ.get("QUANTSIG_LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, logging.INFO)
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        try:
            handlers.append(logging.FileHandler(log_file))
        except OSError as exc:
            raise ConfigError(f"cannot open log file {log_file}: {exc}") from exc
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers)
    logging.getLogger().setLevel(level)


def _parse_day(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise ConfigError(f"expected an ISO date (YYYY-MM-DD), got {text!r}") from exc


def load_run_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    return config.with_overrides(
        seed=args.seed,
        out_dir=args.out,
        horizon=args.horizon,
        text_col=args.text_col,
        label_col=args.label_col,
        model=getattr(args, "model", None),
    )


# --- data and features ---

def _load_series(config: RunConfig, refresh: bool) -> Tuple[OhlcvSeries, List[Path]]:
    if config.price_csv:
        path = Path(config.price_csv)
        return read_ohlcv_file(path, config.symbol), [path]
    endpoint = config.endpoint_config()
    start, end = config.start_date, config.end_date
    series = fetch_history(config.symbol, start, end, endpoint, refresh=refresh)
    return series, [cache_path(config.symbol, start, end, endpoint)]


def _feature_frame(config: RunConfig, refresh: bool) -> Tuple[FeatureMatrix, Optional[OhlcvSeries], List[Path]]:
    if config.features_csv and config.model != "lstm":
        path = Path(config.features_csv)
        return FeatureMatrix.from_csv(path), None, [path]
    series, inputs = _load_series(config, refresh)
    matrix = build_feature_frame(series, config.indicator_config(), horizon=config.horizon)
    return matrix, series, inputs


def _date_range(matrix: FeatureMatrix, rows: range) -> str:
    first, last = matrix.index[rows.start], matrix.index[rows.stop - 1]
    return f"{first}..{last}"


def cmd_fetch(args: argparse.Namespace, config: RunConfig) -> int:
    symbol = args.symbol or config.symbol
    start = _parse_day(args.start) if args.start else config.start_date
    end = _parse_day(args.end) if args.end else config.end_date
    if not start < end:
        raise ConfigError(f"start {start} must be before end {end}")
    endpoint = config.endpoint_config()
    series = fetch_history(symbol, start, end, endpoint, refresh=args.refresh)
    if series.origin == "cache":
        print("cache hit")
    print(f"{len(series)} rows for {symbol} ({series.skipped_rows} skipped)")
    violations = validate_series(series)
    if violations:
        print(f"{len(violations)} validation issue(s):")
        for violation in violations:
            print(f"  bar {violation.index}: {violation.reason}")
    else:
        print("validation: clean")
    print(cache_path(symbol, start, end, endpoint))
    return 0


def cmd_features(args: argparse.Namespace, config: RunConfig) -> int:
    bundle = ReportBundle(Path(config.out_dir))
    try:
        series, inputs = _load_series(config, args.refresh)
        matrix = build_feature_frame(series, config.indicator_config(), horizon=config.horizon)
        split = chronological_split(matrix.n_rows, config.split_fractions)
        _, selection = select_features(matrix.take(split.train), config.top_k, config.redundancy)
        matrix.to_csv(bundle.path("features.csv"))
        lines = [f"rows={matrix.n_rows}", f"horizon={config.horizon}", "columns:"]
        lines += [f"  {name}" for name in matrix.column_names]
        lines += ["", "selection (training split):", selection.to_text()]
        bundle.write_text("features.txt", "\n".join(lines) + "\n")
        bundle.write_manifest("features", config, inputs, {"test_range": _date_range(matrix, split.test)})
    except QuantSigError:
        bundle.discard()
        raise
    print(f"{matrix.n_rows} rows x {matrix.n_cols} columns -> {bundle.out_dir / 'features.csv'}")
    return 0


# --- price regression ---

@dataclass
class PriceFit:
    predictions: np.ndarray
    models: Dict[str, object]
    notes: List[str]


def _fit_linear(matrix: FeatureMatrix, split: SplitIndices, config: RunConfig) -> PriceFit:
    train = matrix.take(split.train)
    selected, selection = select_features(train, config.top_k, config.redundancy)
    scaler = fit_minmax(selected)
    scaled = apply_minmax(matrix.select_columns(selected.column_names), scaler)
    model = fit_linear_regression(scaled.take(split.train).rows, train.target,
                                  feature_names=selected.column_names)
    return PriceFit(model.predict(scaled.rows), {"linear.qsm": model, "scaler.qsm": scaler},
                    ["selection (training split):", selection.to_text()])


def _fit_price_lstm(matrix: FeatureMatrix, series: OhlcvSeries, split: SplitIndices, config: RunConfig) -> PriceFit:
    """Each row's target close is predicted from the `window_length` closes strictly before it."""
    cfg = config.train_config("lstm")
    closes = series.closes
    position = {day: i for i, day in enumerate(series.dates)}
    targets = np.array([position[day] + config.horizon for day in matrix.index])
    if targets.min() < cfg.window_length:
        raise SeriesTooShort(f"first target at bar {targets.min()} leaves no room for a "
                             f"{cfg.window_length}-bar window")
    train_closes = closes[:targets[split.train.stop - 1] + 1]
    scaler = fit_minmax_values(train_closes, "close")
    model = fit_lstm(scaler.transform(train_closes), cfg, scaler)
    windows = np.stack([closes[t - cfg.window_length:t] for t in targets])
    return PriceFit(model.predict(windows), {"lstm.qsm": model, "scaler.qsm": scaler},
                    [f"final training mse (scaled)={model.loss_history[-1]:.6g}"])


def cmd_train_price(args: argparse.Namespace, config: RunConfig) -> int:
    if config.model not in REGRESSOR_FAMILIES:
        raise ConfigError(f"unknown price model {config.model!r}; valid: {', '.join(REGRESSOR_FAMILIES)}")
    config.train_config()
    label = FAMILY_LABELS[config.model]
    bundle = ReportBundle(Path(config.out_dir))
    try:
        matrix, series, inputs = _feature_frame(config, args.refresh)
        if matrix.target is None:
            raise ConfigError("feature matrix has no target column")
        split = chronological_split(matrix.n_rows, config.split_fractions)
        if config.model == "linear":
            fit = _fit_linear(matrix, split, config)
        else:
            fit = _fit_price_lstm(matrix, series, split, config)

        rows = []
        for name in EVALUATED_SPLITS:
            part = getattr(split, name)
            report = regression_report(matrix.target[part.start:part.stop], fit.predictions[part.start:part.stop])
            rows += regression_rows(name, report)
        frame = metrics_frame({label: rows})
        symbol = series.symbol if series is not None else Path(config.features_csv).stem
        bundle.write_metrics(frame, f"{symbol} close prediction, horizon {config.horizon}")

        evaluated = [(name, index) for name in EVALUATED_SPLITS for index in getattr(split, name)]
        bundle.write_frame("predictions.csv", pd.DataFrame({
            "date": [str(matrix.index[i]) for _, i in evaluated],
            "split": [name for name, _ in evaluated],
            "actual": [matrix.target[i] for _, i in evaluated],
            "predicted": [fit.predictions[i] for _, i in evaluated],
        }))
        test = split.test
        bundle.write_text("price.svg", price_chart(
            list(matrix.index[test.start:test.stop]), matrix.target[test.start:test.stop],
            fit.predictions[test.start:test.stop], f"{symbol} {label}: predicted vs actual close (test split)"))
        for name, model in fit.models.items():
            save_model(model, bundle.path(name))
        bundle.write_text("notes.txt", "\n".join(fit.notes) + "\n")
        bundle.write_manifest("train-price", config, inputs, {
            "model": config.model, "horizon": str(config.horizon), "test_range": _date_range(matrix, test)})
    except QuantSigError:
        bundle.discard()
        raise
    print(render_metrics_text(frame, f"{label} ({config.out_dir})"))
    return 0


# --- sentiment classification ---

@dataclass
class FamilyResult:
    family: str
    model: Optional[object] = None
    scores: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    error: Optional[QuantSigError] = None


def _sentiment_families(model: str) -> List[str]:
    if model == "all":
        return list(CLASSIFIER_FAMILIES)
    if model not in CLASSIFIER_FAMILIES:
        raise ConfigError(f"unknown sentiment model {model!r}; valid: {', '.join(CLASSIFIER_FAMILIES)}, all")
    return [model]


def _train_family(family: str, inputs: Dict[str, np.ndarray], y: np.ndarray, train: range,
                  config: RunConfig) -> FamilyResult:
    # family index, not run order, derives the seed: one family alone equals the same family in `all`
    seed = config.seed ^ CLASSIFIER_FAMILIES.index(family)
    X = inputs["binary"] if family == "bnb" else inputs["pca"]
    try:
        model = fit_classifier(X[train.start:train.stop], y[train.start:train.stop],
                               config.train_config(family, seed=seed))
        return FamilyResult(family, model, model.decision_scores(X), model.predict_labels(X))
    except QuantSigError as exc:
        logger.error("❌ %s failed: %s", FAMILY_LABELS[family], exc)
        return FamilyResult(family, error=exc)


def cmd_train_sentiment(args: argparse.Namespace, config: RunConfig) -> int:
    if config.model in REGRESSOR_FAMILIES and getattr(args, "model", None) is None:
        config = config.with_overrides(model="all")
    families = _sentiment_families(config.model)
    for family in families:
        config.train_config(family)
    if not config.tweets_csv:
        raise ConfigError("tweets_csv is not set")
    bundle = ReportBundle(Path(config.out_dir))
    try:
        tweets_path = Path(config.tweets_csv)
        records, _ = load_tweets_csv(tweets_path, config.text_col, config.label_col)
        if config.sentiment_shuffle:
            order = random_stream(config.seed, 0, STREAM_SHUFFLE).permutation(len(records))
            records = [records[i] for i in order]
        split = chronological_split(len(records), config.split_fractions)
        train = split.train

        vocabulary = build_vocabulary(records[train.start:train.stop], config.min_df, config.max_size)
        counts = vectorize(records, vocabulary, "tf")
        presence = vectorize(records, vocabulary, "binary")
        tf_matrix = FeatureMatrix(tuple(vocabulary.tokens), counts.to_dense(),
                                  target=counts.labels.astype(float), index=tuple(r.id for r in records))
        scaler = fit_minmax(tf_matrix.take(train))
        scaled = apply_minmax(tf_matrix, scaler)
        pca = pca_fit(scaled.take(train).rows, n_components=config.pca_components or None,
                      variance_ratio=config.pca_variance)
        inputs = {"pca": pca_transform(scaled.rows, pca), "binary": presence.to_dense()}
        y = counts.labels
        logger.info("Sentiment inputs: %d tweets, %d tokens, %d principal components",
                    len(records), len(vocabulary), pca.n_components)

        with ThreadPoolExecutor(max_workers=min(MAX_FAMILY_WORKERS, len(families))) as executor:
            results = list(executor.map(lambda family: _train_family(family, inputs, y, train, config), families))
        failed = [result for result in results if result.error is not None]
        trained = [result for result in results if result.error is None]
        if not trained:
            if len(failed) == 1:
                raise failed[0].error
            raise TrainingError("every family failed: " + "; ".join(
                f"{FAMILY_LABELS[r.family]}: {r.error}" for r in failed))

        metrics: Dict[str, List] = {}
        curves = {}
        for result in trained:
            label = FAMILY_LABELS[result.family]
            metrics[label] = []
            for name in EVALUATED_SPLITS:
                part = getattr(split, name)
                truth = y[part.start:part.stop]
                report = classification_report(truth, result.labels[part.start:part.stop])
                if len(np.unique(truth)) < 2:
                    logger.warning("%s: %s split holds one class, AUC left undefined", label, name)
                    auc = float("nan")
                else:
                    curve = roc_auc(truth, result.scores[part.start:part.stop])
                    auc = curve.auc
                    if name == "test":
                        curves[label] = curve
                metrics[label] += classification_rows(name, report, auc)
        frame = metrics_frame(metrics)
        bundle.write_metrics(frame, "Tweet sentiment classification")

        evaluated = [(name, index) for name in EVALUATED_SPLITS for index in getattr(split, name)]
        predictions = pd.DataFrame({
            "id": [records[i].id for _, i in evaluated],
            "split": [name for name, _ in evaluated],
            "label": [int(y[i]) for _, i in evaluated],
        })
        for result in trained:
            predictions[FAMILY_LABELS[result.family]] = [result.scores[i] for _, i in evaluated]
        bundle.write_frame("predictions.csv", predictions)
        bundle.write_text("roc.svg", roc_chart(curves, "ROC, test split"))
        bundle.write_text("roc_zoom.svg", roc_chart(curves, "ROC, test split (upper left)", zoom=True))
        for result in trained:
            save_model(result.model, bundle.path(f"{result.family}.qsm"))
        save_model(scaler, bundle.path("scaler.qsm"))
        save_model(pca, bundle.path("pca.qsm"))
        bundle.write_text("vocabulary.txt", "\n".join(vocabulary.tokens) + "\n")
        extra = {"model": config.model, "families": ",".join(r.family for r in trained),
                 "test_range": f"{records[split.test.start].id}..{records[split.test.stop - 1].id}"}
        if failed:
            extra["failed"] = ",".join(r.family for r in failed)
        bundle.write_manifest("train-sentiment", config, [tweets_path], extra)
    except QuantSigError:
        bundle.discard()
        raise

    for result in failed:
        print(f"{FAMILY_LABELS[result.family]} skipped: {result.error}", file=sys.stderr)
    print(render_metrics_text(frame, f"Sentiment ({config.out_dir})"))
    return 0


# --- report ---

def cmd_report(args: argparse.Namespace, config: RunConfig) -> int:
    runs = load_runs(args.runs)
    merged = merge_runs(runs)
    mismatches = config_mismatches(runs)
    lines = [render_metrics_text(merged, f"{len(runs)} run(s)")]
    for key, values in mismatches.items():
        lines.append(f"config mismatch: {key}: " + " | ".join(values))
    text = "\n".join(lines) + "\n"
    if args.out:
        bundle = ReportBundle(Path(args.out))
        bundle.write_frame("metrics.csv", merged)
        bundle.write_text("metrics.txt", text)
    print(text, end="")
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    "fetch": cmd_fetch,
    "features": cmd_features,
    "train-price": cmd_train_price,
    "train-sentiment": cmd_train_sentiment,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value run config file")
    common.add_argument("--seed", type=int, help="global seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument("--refresh", action="store_true", help="ignore cached price history")
    common.add_argument("--horizon", type=int, help="target offset in bars: 0 same-day, 1 next-day")
    common.add_argument("--text-col", dest="text_col", help="tweet text column")
    common.add_argument("--label-col", dest="label_col", help="tweet label column")
    common.add_argument("--log-file", dest="log_file", help="also write logs to this file")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = QuantSigArgumentParser(prog="quantsig", description="Stock price and tweet sentiment prediction")
    commands = parser.add_subparsers(dest="command", parser_class=QuantSigArgumentParser)
    commands.required = True

    fetch = commands.add_parser("fetch", parents=[common], help="download or reuse cached OHLCV history")
    fetch.add_argument("symbol", nargs="?")
    fetch.add_argument("start", nargs="?")
    fetch.add_argument("end", nargs="?")
    commands.add_parser("features", parents=[common], help="build the technical feature frame")
    price = commands.add_parser("train-price", parents=[common], help="closing-price regression")
    price.add_argument("--model", help=f"one of {', '.join(REGRESSOR_FAMILIES)}")
    sentiment = commands.add_parser("train-sentiment", parents=[common], help="tweet sentiment classifiers")
    sentiment.add_argument("--model", help=f"one of {', '.join(CLASSIFIER_FAMILIES)} or all")
    report = commands.add_parser("report", parents=[common], help="merge run directories")
    report.add_argument("runs", nargs="+")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        configure_logging(args.verbose, args.log_file)
        config = load_run_config(args)
        return COMMANDS[args.command](args, config)
    except QuantSigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
