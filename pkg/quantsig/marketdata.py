"""
Daily OHLCV acquisition
=======================

Parses Yahoo-style history CSV exports, fetches them from a configurable
HTTP endpoint, keeps byte-identical copies in a local cache and reports
bars that break the price/volume invariants.

CSV shape::

    Date,Open,High,Low,Close,Adj Close,Volume
    2010-01-04,7.62,7.66,7.58,7.64,6.56,493729600

`Adj Close` is optional and defaults to `Close`. Dates are ISO-8601.
"""

import io
import logging
import os
import threading
from dataclasses import dataclass, field
from datetime import date, datetime, time, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import requests
from dotenv import load_dotenv

from quantsig.errors import (
    ConfigError,
    DuplicateDate,
    EmptySeries,
    FileAccessError,
    MalformedHeader,
    MalformedNumber,
    NetworkError,
    SymbolNotFound,
)

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = (
    "https://query1.finance.yahoo.com/v7/finance/download/{symbol}"
    "?period1={period1}&period2={period2}&interval=1d&events=history"
)
REQUIRED_COLUMNS = ("Date", "Open", "High", "Low", "Close", "Volume")
CSV_HEADER = "Date,Open,High,Low,Close,Adj Close,Volume"
MISSING_CELLS = {"", "null", "nan", "na", "n/a"}

# one lock per cache file; the guard protects the dict itself
_cache_locks: Dict[Path, threading.Lock] = {}
_cache_locks_guard = threading.Lock()


@dataclass(frozen=True)
class OhlcvBar:
    date: date
    open: float
    high: float
    low: float
    close: float
    adj_close: float
    volume: int


@dataclass(frozen=True)
class OhlcvSeries:
    """Ordered daily bars for one symbol.

    `skipped_rows` and `origin` describe how the value was obtained and take
    no part in equality.
    """
    symbol: str
    bars: Tuple[OhlcvBar, ...]
    skipped_rows: int = field(default=0, compare=False)
    origin: str = field(default="", compare=False)

    def __len__(self) -> int:
        return len(self.bars)

    @property
    def dates(self) -> List[date]:
        return [bar.date for bar in self.bars]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(bar, name) for bar in self.bars], dtype=float)

    @property
    def closes(self) -> np.ndarray:
        return self.column("close")

    @property
    def volumes(self) -> np.ndarray:
        return self.column("volume")


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how history is fetched.

    `base_url` may use the placeholders {symbol}, {start}, {end} (ISO dates)
    and {period1}, {period2} (UTC epoch seconds, Yahoo style).
    """
    base_url: str = DEFAULT_BASE_URL
    timeout: float = 30.0
    cache_dir: Path = Path("data/cache")

    def __post_init__(self):
        if not self.timeout > 0:
            raise ConfigError(f"timeout must be positive, got {self.timeout}")
        object.__setattr__(self, "cache_dir", Path(self.cache_dir))

    @classmethod
    def from_env(cls, **overrides) -> "EndpointConfig":
        """Build a config, letting QUANTSIG_DATA_URL / QUANTSIG_CACHE win over defaults."""
        load_dotenv()
        values = {key: value for key, value in overrides.items() if value is not None}
        if os.environ.get("QUANTSIG_DATA_URL"):
            values["base_url"] = os.environ["QUANTSIG_DATA_URL"]
        if os.environ.get("QUANTSIG_CACHE"):
            values["cache_dir"] = Path(os.environ["QUANTSIG_CACHE"])
        return cls(**values)


@dataclass(frozen=True)
class Violation:
    index: int
    reason: str


@dataclass(frozen=True)
class GapViolation(Violation):
    gap_days: int = 0


def _parse_float(row: int, column: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedNumber(row, column, text) from None
    if not np.isfinite(value):
        raise MalformedNumber(row, column, text)
    return value


def _parse_volume(row: int, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    value = _parse_float(row, "Volume", text)
    if value != int(value):
        raise MalformedNumber(row, "Volume", text)
    return int(value)


def parse_ohlcv_csv(text: str, symbol: str = "") -> OhlcvSeries:
    """Parse a history CSV into an ascending OhlcvSeries.

    Rows with an empty price or volume cell are skipped and counted in
    `skipped_rows`. Row numbers in errors are file line numbers (header = 1).
    """
    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False,
                            skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise MalformedHeader("empty document, no header row") from None

    columns = {name.strip().lower(): name for name in frame.columns}
    missing = [name for name in REQUIRED_COLUMNS if name.lower() not in columns]
    if missing:
        raise MalformedHeader(f"header lacks columns {missing}; got {list(frame.columns)}")
    adj_column = columns.get("adj close")

    bars: List[OhlcvBar] = []
    skipped = 0
    for offset, record in enumerate(frame.itertuples(index=False)):
        row = offset + 2
        # short rows come back as NaN even with keep_default_na=False
        cells = {name: value if isinstance(value, str) else ""
                 for name, value in zip(frame.columns, record)}
        price_cells = {name: cells[columns[name.lower()]].strip()
                       for name in ("Open", "High", "Low", "Close", "Volume")}
        if any(value.lower() in MISSING_CELLS for value in price_cells.values()):
            skipped += 1
            continue
        raw_date = cells[columns["date"]].strip()
        try:
            bar_date = date.fromisoformat(raw_date)
        except ValueError:
            raise MalformedNumber(row, "Date", raw_date) from None
        close = _parse_float(row, "Close", price_cells["Close"])
        adj_text = cells[adj_column].strip() if adj_column else ""
        adj_close = close if adj_text.lower() in MISSING_CELLS else _parse_float(row, "Adj Close", adj_text)
        bars.append(OhlcvBar(
            date=bar_date,
            open=_parse_float(row, "Open", price_cells["Open"]),
            high=_parse_float(row, "High", price_cells["High"]),
            low=_parse_float(row, "Low", price_cells["Low"]),
            close=close,
            adj_close=adj_close,
            volume=_parse_volume(row, price_cells["Volume"]),
        ))

    if not bars:
        raise EmptySeries(f"no usable rows ({skipped} skipped)")
    bars.sort(key=lambda bar: bar.date)
    for previous, current in zip(bars, bars[1:]):
        if previous.date == current.date:
            raise DuplicateDate(current.date)
    if skipped:
        logger.warning("Skipped %d rows with empty cells for %s", skipped, symbol or "<csv>")
    return OhlcvSeries(symbol=symbol, bars=tuple(bars), skipped_rows=skipped)


def serialize_ohlcv_csv(series: OhlcvSeries) -> str:
    """Inverse of parse_ohlcv_csv; floats use their shortest exact repr."""
    lines = [CSV_HEADER]
    for bar in series.bars:
        lines.append(",".join([
            bar.date.isoformat(), repr(bar.open), repr(bar.high), repr(bar.low),
            repr(bar.close), repr(bar.adj_close), str(bar.volume),
        ]))
    return "\n".join(lines) + "\n"


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedHeader(f"{path} is not UTF-8 text: {exc.reason} at byte {exc.start}") from exc
    except OSError as exc:
        raise FileAccessError(path, exc.strerror or exc) from exc


def read_ohlcv_file(path, symbol: str = "") -> OhlcvSeries:
    path = Path(path)
    series = parse_ohlcv_csv(_read_text(path), symbol=symbol or path.stem)
    return OhlcvSeries(series.symbol, series.bars, series.skipped_rows, origin=str(path))


def cache_path(symbol: str, start: date, end: date, cfg: EndpointConfig) -> Path:
    return cfg.cache_dir / f"{symbol}_{start.isoformat()}_{end.isoformat()}.csv"


def _lock_for(path: Path) -> threading.Lock:
    with _cache_locks_guard:
        if path not in _cache_locks:
            _cache_locks[path] = threading.Lock()
        return _cache_locks[path]


def _epoch(day: date) -> int:
    return int(datetime.combine(day, time(0, 0), tzinfo=timezone.utc).timestamp())


def endpoint_url(symbol: str, start: date, end: date, cfg: EndpointConfig) -> str:
    return cfg.base_url.format(symbol=symbol, start=start.isoformat(), end=end.isoformat(),
                               period1=_epoch(start), period2=_epoch(end))


def fetch_history(symbol: str, start: date, end: date, cfg: EndpointConfig,
                  refresh: bool = False) -> OhlcvSeries:
    """Return the daily history for `symbol`, from cache when possible.

    A cache file is written only after its body parsed successfully, so a
    cached file is always a valid history.
    """
    if not start < end:
        raise ConfigError(f"start {start} must be before end {end}")
    target = cache_path(symbol, start, end, cfg)

    with _lock_for(target):
        if target.exists() and not refresh:
            logger.info("Cache hit for %s -> %s", symbol, target)
            series = parse_ohlcv_csv(_read_text(target), symbol=symbol)
            return OhlcvSeries(symbol, series.bars, series.skipped_rows, origin="cache")

        url = endpoint_url(symbol, start, end, cfg)
        logger.info("Downloading %s [%s -> %s] from %s", symbol, start, end, url)
        try:
            response = requests.get(url, timeout=cfg.timeout)
        except requests.RequestException as exc:
            raise NetworkError(f"request for {symbol} failed: {exc}") from exc
        if response.status_code == 404:
            raise SymbolNotFound(symbol, url)
        if response.status_code >= 400:
            raise NetworkError(f"HTTP {response.status_code} for {url}")

        body = response.content
        try:
            text = body.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise NetworkError(f"response for {symbol} is not UTF-8 text ({exc.reason} at byte {exc.start})") from exc
        series = parse_ohlcv_csv(text, symbol=symbol)

        partial = target.with_suffix(".csv.part")
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            partial.write_bytes(body)
            os.replace(partial, target)
        except OSError as exc:
            raise FileAccessError(target, exc.strerror or exc) from exc
        logger.info("Cached %s -> %s (%d bars)", symbol, target, len(series))
        return OhlcvSeries(symbol, series.bars, series.skipped_rows, origin="network")


def validate_series(series: OhlcvSeries, max_gap_days: int = 7) -> List[Violation]:
    """Report bars breaking price/volume invariants and calendar gaps over `max_gap_days`."""
    violations: List[Violation] = []
    for index, bar in enumerate(series.bars):
        reasons = []
        prices = {"open": bar.open, "high": bar.high, "low": bar.low,
                  "close": bar.close, "adj_close": bar.adj_close}
        non_positive = [name for name, value in prices.items() if not value > 0]
        if non_positive:
            reasons.append(f"non-positive {', '.join(non_positive)}")
        if bar.volume < 0:
            reasons.append("negative volume")
        if bar.low > min(bar.open, bar.close):
            reasons.append("low above open/close")
        if bar.high < max(bar.open, bar.close):
            reasons.append("high below open/close")
        if bar.high < bar.low:
            reasons.append("high below low")
        if reasons:
            violations.append(Violation(index, "; ".join(reasons)))

        if index > 0:
            gap = (bar.date - series.bars[index - 1].date).days
            if gap > max_gap_days:
                violations.append(GapViolation(index, f"{gap}-day gap before {bar.date}", gap_days=gap))
    return violations
