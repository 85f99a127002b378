"""
Technical indicators and the price feature frame.

All indicators take a closing-price sequence and return an IndicatorSeries
aligned to it, with NaN marking the warm-up indices where the value is
undefined. Conventions that differ from common charting packages:

- SMA(t, N) averages the N closes strictly before day t (t-N .. t-1).
- EMA is seeded at index span-1 with the mean of the first `span` closes.
- RSI averages gains/losses with a plain mean over the trailing window;
  the `inverted` variant returns 100/(1+RS) without the leading `100 -`.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from quantsig.errors import ConfigError, InsufficientHistory, LengthMismatch, SpanTooLarge, WindowTooLarge
from quantsig.marketdata import OhlcvSeries
from quantsig.preprocess import FeatureMatrix

logger = logging.getLogger(__name__)

RSI_VARIANTS = ("standard", "inverted")
BASE_COLUMNS = ("open", "high", "low", "volume")


@dataclass(frozen=True)
class IndicatorConfig:
    sma_windows: Tuple[int, ...] = (5, 10, 20, 50, 100, 200)
    ema_spans: Tuple[int, ...] = (5, 10, 20, 50, 100, 200)
    macd_short: int = 12
    macd_long: int = 16
    rsi_period: int = 14
    rsi_variant: str = "standard"
    lag_depths: Tuple[int, ...] = (1, 2, 3, 5, 10)

    def __post_init__(self):
        for name in ("sma_windows", "ema_spans", "lag_depths"):
            values = tuple(int(v) for v in getattr(self, name))
            if any(v < 1 for v in values):
                raise ConfigError(f"{name} values must be >= 1, got {values}")
            object.__setattr__(self, name, values)
        if min(self.macd_short, self.macd_long, self.rsi_period) < 1:
            raise ConfigError("macd_short, macd_long and rsi_period must be >= 1")
        if self.macd_short == self.macd_long:
            raise ConfigError(f"macd_short and macd_long must differ, both are {self.macd_short}")
        if self.rsi_variant not in RSI_VARIANTS:
            raise ConfigError(f"rsi_variant must be one of {RSI_VARIANTS}, got {self.rsi_variant!r}")

    @property
    def warm_up(self) -> int:
        """First index at which every configured column is defined."""
        spans = [w for w in self.sma_windows] + [s - 1 for s in self.ema_spans]
        spans += [max(self.macd_short, self.macd_long) - 1, self.rsi_period]
        spans += list(self.lag_depths)
        return max(spans)


@dataclass(frozen=True)
class IndicatorSeries:
    name: str
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    @property
    def defined_from(self) -> int:
        defined = np.flatnonzero(~np.isnan(self.values))
        return int(defined[0]) if defined.size else len(self.values)


def _as_prices(closes: Sequence[float]) -> np.ndarray:
    return np.asarray(closes, dtype=float)


def sma(closes: Sequence[float], window: int) -> IndicatorSeries:
    prices = _as_prices(closes)
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    if window >= len(prices):
        raise WindowTooLarge(f"window {window} needs more than {len(prices)} closes")
    values = np.full(len(prices), np.nan)
    # windows ending at t-1, so drop the window that ends on the last close
    values[window:] = sliding_window_view(prices, window)[:-1].mean(axis=1)
    return IndicatorSeries(f"sma_{window}", values)


def ema(closes: Sequence[float], span: int) -> IndicatorSeries:
    prices = _as_prices(closes)
    if span < 1:
        raise ConfigError(f"span must be >= 1, got {span}")
    if span > len(prices):
        raise SpanTooLarge(f"span {span} exceeds {len(prices)} closes")
    gamma = 2.0 / (span + 1)
    values = np.full(len(prices), np.nan)
    current = prices[:span].mean()
    values[span - 1] = current
    for t in range(span, len(prices)):
        current = (prices[t] - current) * gamma + current
        values[t] = current
    return IndicatorSeries(f"ema_{span}", values)


def macd(closes: Sequence[float], short: int = 12, long: int = 16) -> IndicatorSeries:
    if short == long:
        raise ConfigError(f"short and long spans must differ, both are {short}")
    if short < 1 or long < 1:
        raise ConfigError("MACD spans must be >= 1")
    values = ema(closes, short).values - ema(closes, long).values
    return IndicatorSeries(f"macd_{short}_{long}", values)


def obv(closes: Sequence[float], volumes: Sequence[float]) -> IndicatorSeries:
    prices = _as_prices(closes)
    flows = np.asarray(volumes, dtype=float)
    if len(prices) != len(flows):
        raise LengthMismatch(f"{len(prices)} closes vs {len(flows)} volumes")
    if len(prices) < 1:
        raise LengthMismatch("obv needs at least one bar")
    signed = np.sign(np.diff(prices)) * flows[1:]
    return IndicatorSeries("obv", np.concatenate([[0.0], np.cumsum(signed)]))


def rsi(closes: Sequence[float], period: int = 14, variant: str = "standard") -> IndicatorSeries:
    prices = _as_prices(closes)
    if variant not in RSI_VARIANTS:
        raise ConfigError(f"variant must be one of {RSI_VARIANTS}, got {variant!r}")
    if period < 1:
        raise ConfigError(f"period must be >= 1, got {period}")
    if period >= len(prices):
        raise WindowTooLarge(f"period {period} needs more than {len(prices)} closes")

    changes = np.diff(prices)
    avg_gain = sliding_window_view(np.clip(changes, 0.0, None), period).mean(axis=1)
    avg_loss = sliding_window_view(np.clip(-changes, 0.0, None), period).mean(axis=1)

    flat = (avg_gain == 0) & (avg_loss == 0)
    no_loss = (avg_loss == 0) & ~flat
    with np.errstate(divide="ignore", invalid="ignore"):
        rs = np.where(avg_loss > 0, avg_gain / np.where(avg_loss > 0, avg_loss, 1.0), np.inf)
    if variant == "standard":
        index = np.where(no_loss, 100.0, 100.0 - 100.0 / (1.0 + rs))
    else:
        index = np.where(no_loss, 0.0, 100.0 / (1.0 + rs))
    index = np.where(flat, 50.0, index)

    values = np.full(len(prices), np.nan)
    values[period:] = index
    return IndicatorSeries(f"rsi_{period}" if variant == "standard" else f"rsi_{period}_inverted", values)


def feature_column_names(cfg: IndicatorConfig) -> List[str]:
    names = list(BASE_COLUMNS)
    names += [f"sma_{w}" for w in cfg.sma_windows]
    names += [f"ema_{s}" for s in cfg.ema_spans]
    names += ["macd", "rsi", "obv"]
    names += [f"lag_close_{d}" for d in cfg.lag_depths]
    return names


def _lagged(closes: np.ndarray, depth: int) -> np.ndarray:
    values = np.full(len(closes), np.nan)
    values[depth:] = closes[:-depth]
    return values


def build_feature_frame(series: OhlcvSeries, cfg: IndicatorConfig = IndicatorConfig(),
                        horizon: int = 0, max_workers: int = 4) -> FeatureMatrix:
    """Assemble the technical feature frame for `series`.

    The target is the close `horizon` bars after each row's date: 0 keeps the
    same-day close (same-day open/high/low are features, so the target leaks),
    1 predicts the next close. Rows with any undefined value are dropped.
    """
    if horizon < 0:
        raise ConfigError(f"horizon must be >= 0, got {horizon}")
    n = len(series)
    warm_up = cfg.warm_up
    if n - warm_up - horizon < 1:
        raise InsufficientHistory(
            f"{n} bars cannot cover a warm-up of {warm_up} plus horizon {horizon}")
    closes = series.closes

    builders: List[Callable[[], np.ndarray]] = [
        lambda name=name: series.column(name) for name in BASE_COLUMNS
    ]
    builders += [lambda w=w: sma(closes, w).values for w in cfg.sma_windows]
    builders += [lambda s=s: ema(closes, s).values for s in cfg.ema_spans]
    builders += [
        lambda: macd(closes, cfg.macd_short, cfg.macd_long).values,
        lambda: rsi(closes, cfg.rsi_period, cfg.rsi_variant).values,
        lambda: obv(closes, series.volumes).values,
    ]
    builders += [lambda d=d: _lagged(closes, d) for d in cfg.lag_depths]

    # map() keeps submission order, so the column layout never depends on scheduling
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        columns = list(pool.map(lambda build: build(), builders))

    table = np.column_stack(columns)
    target = np.full(n, np.nan)
    target[:n - horizon] = closes[horizon:]
    keep = ~np.isnan(table).any(axis=1) & ~np.isnan(target)
    dates = [d for d, kept in zip(series.dates, keep) if kept]
    logger.info("Feature frame for %s: %d rows x %d columns (dropped %d warm-up rows, horizon %d)",
                series.symbol or "<series>", int(keep.sum()), table.shape[1], int(n - keep.sum()), horizon)
    return FeatureMatrix(
        column_names=tuple(feature_column_names(cfg)),
        rows=table[keep],
        target=target[keep],
        index=tuple(dates),
    )
