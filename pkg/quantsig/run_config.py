"""
Run configuration: one flat ``key=value`` file per experiment.

Blank or missing values mean the documented default. Lists are comma
separated. Unknown keys are rejected so typos never silently fall back
to a default.
"""

import hashlib
import logging
from dataclasses import dataclass, fields, replace
from datetime import date
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from dotenv import dotenv_values

from quantsig.errors import BadFractions, ConfigError, LeakageError
from quantsig.indicators import IndicatorConfig
from quantsig.marketdata import DEFAULT_BASE_URL, EndpointConfig
from quantsig.models.base import TrainConfig

logger = logging.getLogger(__name__)

# keys that only decide where results go; they never enter the config hash
OUTPUT_ONLY_KEYS = ("out_dir",)
FIT_SCOPES = ("train",)


@dataclass(frozen=True)
class RunConfig:
    # data
    endpoint_url: str = DEFAULT_BASE_URL
    timeout: float = 30.0
    cache_dir: str = "data/cache"
    symbol: str = "AAPL"
    start: str = "2010-01-01"
    end: str = "2021-12-31"
    price_csv: str = ""
    features_csv: str = ""
    # indicators
    sma_windows: Tuple[int, ...] = (5, 10, 20, 50, 100, 200)
    ema_spans: Tuple[int, ...] = (5, 10, 20, 50, 100, 200)
    macd_short: int = 12
    macd_long: int = 16
    rsi_period: int = 14
    rsi_variant: str = "standard"
    lag_depths: Tuple[int, ...] = (1, 2, 3, 5, 10)
    # split, selection, scaling
    horizon: int = 0
    train_fraction: float = 0.70
    validation_fraction: float = 0.15
    test_fraction: float = 0.15
    top_k: int = 10
    redundancy: float = 0.95
    fit_scope: str = "train"
    pca_components: int = 0
    pca_variance: float = 0.95
    # corpus
    tweets_csv: str = ""
    text_col: str = "Text"
    label_col: str = "Sentiment"
    min_df: int = 2
    max_size: int = 300
    sentiment_shuffle: bool = False
    # model
    model: str = "linear"
    epochs: Optional[int] = None
    learning_rate: Optional[float] = None
    l2: Optional[float] = None
    k: int = 5
    knn_metric: str = "euclidean"
    max_depth: Optional[int] = None
    min_samples_leaf: int = 2
    n_trees: int = 100
    max_features: Optional[int] = None
    bootstrap: bool = True
    hidden_size: Optional[int] = None
    window_length: int = 30
    batch_size: int = 32
    # output
    out_dir: str = "runs/latest"
    seed: int = 0

    def __post_init__(self):
        if self.fit_scope not in FIT_SCOPES:
            raise LeakageError(f"fit_scope={self.fit_scope!r}: scalers, PCA and feature selection "
                               "are only ever fit on the training split")
        fractions = self.split_fractions
        if any(not f > 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
            raise BadFractions(f"split fractions must be positive and sum to 1, got {fractions}")
        if self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k}")
        if not 0 < self.redundancy <= 1:
            raise ConfigError(f"redundancy must be in (0, 1], got {self.redundancy}")
        if self.pca_components < 0 or not 0 < self.pca_variance <= 1:
            raise ConfigError("pca_components must be >= 0 and pca_variance in (0, 1]")
        if self.horizon < 0:
            raise ConfigError(f"horizon must be >= 0, got {self.horizon}")
        _parse_date("start", self.start)
        _parse_date("end", self.end)

    @property
    def split_fractions(self) -> Tuple[float, float, float]:
        return (self.train_fraction, self.validation_fraction, self.test_fraction)

    @property
    def start_date(self) -> date:
        return _parse_date("start", self.start)

    @property
    def end_date(self) -> date:
        return _parse_date("end", self.end)

    def indicator_config(self) -> IndicatorConfig:
        return IndicatorConfig(sma_windows=self.sma_windows, ema_spans=self.ema_spans,
                               macd_short=self.macd_short, macd_long=self.macd_long,
                               rsi_period=self.rsi_period, rsi_variant=self.rsi_variant,
                               lag_depths=self.lag_depths)

    def endpoint_config(self) -> EndpointConfig:
        """Config values first, then QUANTSIG_DATA_URL / QUANTSIG_CACHE from the environment."""
        return EndpointConfig.from_env(base_url=self.endpoint_url, timeout=self.timeout,
                                       cache_dir=Path(self.cache_dir))

    def train_config(self, family: Optional[str] = None, seed: Optional[int] = None) -> TrainConfig:
        return TrainConfig(
            family=family or self.model, seed=self.seed if seed is None else seed,
            epochs=self.epochs, learning_rate=self.learning_rate, l2=self.l2, k=self.k,
            knn_metric=self.knn_metric, max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf,
            n_trees=self.n_trees, max_features=self.max_features, bootstrap=self.bootstrap,
            hidden_size=self.hidden_size, window_length=self.window_length, batch_size=self.batch_size,
        )

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        return replace(self, **{key: value for key, value in overrides.items() if value is not None})

    def as_items(self, include_output: bool = False) -> Dict[str, str]:
        items = {}
        for spec in fields(self):
            if spec.name in OUTPUT_ONLY_KEYS and not include_output:
                continue
            items[spec.name] = _render(getattr(self, spec.name))
        return items

    def canonical_text(self) -> str:
        return "".join(f"{key}={value}\n" for key, value in sorted(self.as_items().items()))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()

    @classmethod
    def from_mapping(cls, values: Dict[str, Optional[str]]) -> "RunConfig":
        known = {spec.name: spec for spec in fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        parsed = {}
        for key, raw in values.items():
            if raw is None or not raw.strip():
                continue
            parsed[key] = _coerce(key, raw.strip(), known[key].default)
        return cls(**parsed)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        config = cls.from_mapping(dict(dotenv_values(path)))
        logger.info("Loaded run config %s (hash %s)", path, config.config_hash()[:12])
        return config


def _parse_date(key: str, text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise ConfigError(f"{key} must be an ISO date, got {text!r}") from exc


def _render(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _coerce(key: str, raw: str, default: Any) -> Any:
    try:
        if isinstance(default, bool):
            lowered = raw.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return lowered in ("true", "1", "yes")
        if isinstance(default, tuple):
            return tuple(int(part) for part in raw.split(",") if part.strip())
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if default is None:
            # optional numeric keys: integers stay integers
            return int(raw) if raw.lstrip("-").isdigit() else float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"config key {key}: cannot parse {raw!r}") from exc
