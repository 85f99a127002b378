import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quantsig.errors import ConfigError, InsufficientHistory, LengthMismatch, SpanTooLarge, WindowTooLarge
from quantsig.indicators import (IndicatorConfig, build_feature_frame, ema, feature_column_names, macd, obv,
                                 rsi, sma)
from quantsig.synthetic import synthetic_ohlcv


def test_sma_uses_previous_closes():
    result = sma([1, 2, 3, 4], 2)
    assert np.isnan(result.values[:2]).all()
    np.testing.assert_allclose(result.values[2:], [1.5, 2.5])
    assert result.defined_from == 2
    assert result.name == "sma_2"


def test_sma_window_must_fit():
    with pytest.raises(WindowTooLarge):
        sma([1, 2, 3], 3)


def test_ema_seed_and_recursion():
    result = ema([2, 4, 6], 2)
    assert np.isnan(result.values[0])
    np.testing.assert_allclose(result.values[1:], [3.0, 5.0])


def test_ema_span_must_fit():
    with pytest.raises(SpanTooLarge):
        ema([1, 2], 3)


def test_obv_example():
    np.testing.assert_allclose(obv([10, 11, 11, 9], [5, 3, 7, 2]).values, [0, 3, 3, 1])


def test_obv_length_mismatch():
    with pytest.raises(LengthMismatch):
        obv([1, 2, 3], [1, 2])


def test_rsi_example():
    closes = [44, 44.5, 44.25, 45, 45.5]
    assert rsi(closes, 4).values[4] == pytest.approx(87.5)
    inverted = rsi(closes, 4, variant="inverted")
    assert inverted.values[4] == pytest.approx(12.5)
    assert inverted.name == "rsi_4_inverted"


def test_rsi_edge_values():
    rising = [1, 2, 3, 4, 5]
    assert rsi(rising, 3).values[3:].tolist() == [100.0, 100.0]
    assert rsi(rising, 3, variant="inverted").values[3:].tolist() == [0.0, 0.0]
    assert rsi([3, 3, 3, 3], 2).values[2:].tolist() == [50.0, 50.0]


def test_rsi_unknown_variant():
    with pytest.raises(ConfigError):
        rsi([1, 2, 3], 1, variant="wilder")


def test_macd_is_antisymmetric():
    closes = synthetic_ohlcv(n_days=80).closes
    forward = macd(closes, 5, 9).values
    backward = macd(closes, 9, 5).values
    np.testing.assert_allclose(forward[8:], -backward[8:])
    assert macd(closes, 5, 9).name == "macd_5_9"


def test_macd_spans_must_differ():
    with pytest.raises(ConfigError):
        macd([1, 2, 3, 4], 2, 2)


def _naive_sma(closes, window):
    return [np.nan] * window + [sum(closes[t - window:t]) / window for t in range(window, len(closes))]


def _naive_rsi(closes, period):
    out = [np.nan] * period
    for t in range(period, len(closes)):
        diffs = [closes[i] - closes[i - 1] for i in range(t - period + 1, t + 1)]
        gain = sum(d for d in diffs if d > 0) / period
        loss = sum(-d for d in diffs if d < 0) / period
        if gain == 0 and loss == 0:
            out.append(50.0)
        elif loss == 0:
            out.append(100.0)
        else:
            out.append(100 - 100 / (1 + gain / loss))
    return out


series_strategy = st.lists(st.floats(min_value=1.0, max_value=500.0, allow_nan=False), min_size=12, max_size=60)


@settings(max_examples=60, deadline=None)
@given(series_strategy, st.integers(1, 10))
def test_sma_matches_naive_loop(closes, window):
    np.testing.assert_allclose(sma(closes, window).values, _naive_sma(closes, window), rtol=1e-9)


@settings(max_examples=60, deadline=None)
@given(series_strategy, st.integers(1, 10))
def test_rsi_matches_naive_loop(closes, period):
    np.testing.assert_allclose(rsi(closes, period).values, _naive_rsi(closes, period), rtol=1e-7, atol=1e-7)


@settings(max_examples=60, deadline=None)
@given(series_strategy, st.integers(1, 10))
def test_rsi_stays_in_range(closes, period):
    values = rsi(closes, period).values[period:]
    assert ((values >= 0) & (values <= 100)).all()


def _naive_ema(closes, span):
    gamma = 2.0 / (span + 1)
    out = [np.nan] * (span - 1)
    current = sum(closes[:span]) / span
    out.append(current)
    for price in closes[span:]:
        current = (price - current) * gamma + current
        out.append(current)
    return out


def _naive_obv(closes, volumes):
    out = [0.0]
    for t in range(1, len(closes)):
        if closes[t] > closes[t - 1]:
            out.append(out[-1] + volumes[t])
        elif closes[t] < closes[t - 1]:
            out.append(out[-1] - volumes[t])
        else:
            out.append(out[-1])
    return out


@settings(max_examples=60, deadline=None)
@given(series_strategy, st.integers(1, 12))
def test_ema_matches_naive_loop(closes, span):
    np.testing.assert_allclose(ema(closes, span).values, _naive_ema(closes, span), rtol=1e-9, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(series_strategy, st.integers(1, 6), st.integers(7, 12))
def test_macd_matches_naive_loop(closes, short, long):
    expected = np.array(_naive_ema(closes, short)) - np.array(_naive_ema(closes, long))
    np.testing.assert_allclose(macd(closes, short, long).values, expected, rtol=1e-9, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(100, 600), st.integers(0, 10_000)), min_size=1, max_size=60))
def test_obv_matches_naive_loop(bars):
    closes = [price / 4 for price, _ in bars]
    volumes = [volume for _, volume in bars]
    result = obv(closes, volumes).values
    np.testing.assert_allclose(result, _naive_obv(closes, volumes), atol=1e-9)
    steps = np.abs(np.diff(result))
    assert all(step in (0, volume) for step, volume in zip(steps, volumes[1:]))


cent_series = st.lists(st.integers(100, 50_000), min_size=15, max_size=60).map(lambda cents: [c / 100 for c in cents])


@settings(max_examples=60, deadline=None)
@given(cent_series, st.integers(1, 500))
def test_adding_a_constant_shifts_levels_only(closes, offset):
    shifted = [price + offset for price in closes]
    np.testing.assert_allclose(sma(shifted, 5).values, sma(closes, 5).values + offset, rtol=1e-9)
    np.testing.assert_allclose(ema(shifted, 5).values, ema(closes, 5).values + offset, rtol=1e-9)
    np.testing.assert_allclose(macd(shifted, 3, 7).values, macd(closes, 3, 7).values, atol=1e-8)
    np.testing.assert_allclose(rsi(shifted, 5).values, rsi(closes, 5).values, atol=1e-6)


@settings(max_examples=60, deadline=None)
@given(cent_series, st.integers(1, 5))
def test_dropping_leading_bars_keeps_the_tail(closes, skip):
    for full, tail in ((sma(closes, 4), sma(closes[skip:], 4)), (rsi(closes, 4), rsi(closes[skip:], 4))):
        np.testing.assert_allclose(tail.values[4:], full.values[skip + 4:], rtol=1e-9)


def test_constant_series():
    flat = [7.5] * 30
    assert set(sma(flat, 5).values[5:]) == {7.5}
    assert set(ema(flat, 5).values[4:]) == {7.5}
    assert set(macd(flat, 3, 6).values[5:]) == {0.0}
    assert set(obv(flat, range(30)).values) == {0.0}
    assert set(rsi(flat, 5).values[5:]) == {50.0}


def test_ema_span_one_copies_closes():
    closes = synthetic_ohlcv(n_days=40).closes
    np.testing.assert_allclose(ema(closes, 1).values, closes, rtol=1e-12)


def test_macd_positive_on_rising_ramp():
    ramp = np.arange(1.0, 21.0)
    values = macd(ramp, 3, 8).values
    assert np.isnan(values[:7]).all()
    assert (values[7:] > 0).all()


def test_obv_on_rising_prices_sums_volumes():
    volumes = [4, 1, 5, 9, 2]
    np.testing.assert_array_equal(obv([1, 2, 3, 4, 5], volumes).values, [0, 1, 6, 15, 17])


def test_rsi_alternating_steps_is_fifty():
    closes = [10, 11, 10, 11, 10, 11, 10, 11]
    np.testing.assert_allclose(rsi(closes, 4).values[4:], 50.0)


def test_default_columns():
    names = feature_column_names(IndicatorConfig())
    assert len(names) == 24
    assert names[:4] == ["open", "high", "low", "volume"]
    assert names[-5:] == [f"lag_close_{d}" for d in (1, 2, 3, 5, 10)]
    assert IndicatorConfig().warm_up == 200


def test_feature_frame_shape():
    series = synthetic_ohlcv(n_days=300)
    frame = build_feature_frame(series)
    assert frame.n_cols == 24
    assert frame.n_rows == 300 - 200
    assert frame.index[0] == series.dates[200]
    assert not np.isnan(frame.rows).any()
    np.testing.assert_allclose(frame.target, series.closes[200:])


def test_feature_frame_horizon_shifts_target():
    series = synthetic_ohlcv(n_days=300)
    same_day = build_feature_frame(series, horizon=0)
    next_day = build_feature_frame(series, horizon=1)
    assert next_day.n_rows == same_day.n_rows - 1
    np.testing.assert_allclose(next_day.target, series.closes[201:])
    np.testing.assert_allclose(next_day.rows, same_day.rows[:-1])


def test_feature_frame_lag_columns():
    series = synthetic_ohlcv(n_days=260)
    frame = build_feature_frame(series)
    closes = series.closes
    np.testing.assert_allclose(frame.column("lag_close_1"), closes[199:-1])
    np.testing.assert_allclose(frame.column("lag_close_10"), closes[190:-10])


def test_feature_frame_needs_history():
    with pytest.raises(InsufficientHistory):
        build_feature_frame(synthetic_ohlcv(n_days=200))


def test_feature_frame_is_deterministic_across_workers():
    series = synthetic_ohlcv(n_days=260)
    one = build_feature_frame(series, max_workers=1)
    many = build_feature_frame(series, max_workers=8)
    assert one.column_names == many.column_names
    np.testing.assert_array_equal(one.rows, many.rows)


def test_feature_frame_columns_match_standalone_indicators():
    series = synthetic_ohlcv(n_days=300)
    frame = build_feature_frame(series)
    closes = series.closes
    np.testing.assert_array_equal(frame.column("sma_5"), sma(closes, 5).values[200:])
    np.testing.assert_array_equal(frame.column("ema_50"), ema(closes, 50).values[200:])
