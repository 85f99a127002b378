"""
Single-layer LSTM for next-step prediction of a univariate scaled series.

Gate blocks in the stacked weight matrices are ordered input, forget,
output, candidate:

    z = x_t @ wx + h @ wh + b
    i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
    c = f * c + i * g;  h = o * tanh(c)
    prediction = h_T @ wy + by
"""

import logging
from dataclasses import dataclass, field
from typing import ClassVar, Dict, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from quantsig.errors import DivergedLoss, SeriesTooShort, ShapeMismatch
from quantsig.models.base import (STREAM_INIT, STREAM_SHUFFLE, Adam, RegressorModel, TrainConfig,
                                  clip_by_global_norm, random_stream)
from quantsig.preprocess import ScalerParams

logger = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]
PARAM_NAMES = ("wx", "wh", "b", "wy", "by")
IDENTITY_SCALER = ScalerParams(("close",), np.array([0.0]), np.array([1.0]))


def init_lstm_params(hidden_size: int, rng: np.random.Generator, input_size: int = 1) -> Params:
    limit = 1.0 / np.sqrt(hidden_size)
    bias = np.zeros(4 * hidden_size)
    bias[hidden_size:2 * hidden_size] = 1.0  # forget gate starts open
    return {
        "wx": rng.uniform(-limit, limit, size=(input_size, 4 * hidden_size)),
        "wh": rng.uniform(-limit, limit, size=(hidden_size, 4 * hidden_size)),
        "b": bias,
        "wy": rng.uniform(-limit, limit, size=hidden_size),
        "by": np.zeros(1),
    }


def _inputs(windows: np.ndarray) -> np.ndarray:
    """(batch, steps) univariate windows -> (batch, steps, 1)."""
    return windows[:, :, None] if windows.ndim == 2 else windows


def lstm_forward(params: Params, windows: np.ndarray) -> Tuple[np.ndarray, List[tuple]]:
    x = _inputs(windows)
    batch, steps, _ = x.shape
    hidden = params["wh"].shape[0]
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    cache = []
    for t in range(steps):
        z = x[:, t] @ params["wx"] + h @ params["wh"] + params["b"]
        i = special.expit(z[:, :hidden])
        f = special.expit(z[:, hidden:2 * hidden])
        o = special.expit(z[:, 2 * hidden:3 * hidden])
        g = np.tanh(z[:, 3 * hidden:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tanh_c = np.tanh(c)
        h = o * tanh_c
        cache.append((x[:, t], h_prev, c_prev, i, f, o, g, tanh_c))
    return h @ params["wy"] + params["by"][0], cache


def lstm_loss_and_gradients(params: Params, windows: np.ndarray, targets: np.ndarray) -> Tuple[float, Params]:
    """Mean squared error of the next-step predictions and its gradient by backpropagation through time."""
    predictions, cache = lstm_forward(params, windows)
    batch = len(targets)
    error = predictions - targets
    loss = float(np.mean(error ** 2))

    hidden = params["wh"].shape[0]
    grads = {name: np.zeros_like(params[name]) for name in PARAM_NAMES}
    d_pred = 2.0 * error / batch
    h_last = cache[-1][5] * cache[-1][7]
    grads["wy"] = h_last.T @ d_pred
    grads["by"] = np.array([d_pred.sum()])

    dh = np.outer(d_pred, params["wy"])
    dc = np.zeros((batch, hidden))
    for x_t, h_prev, c_prev, i, f, o, g, tanh_c in reversed(cache):
        d_o = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c ** 2)
        dz = np.hstack([
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            d_o * o * (1.0 - o),
            dc * i * (1.0 - g ** 2),
        ])
        grads["wx"] += x_t.T @ dz
        grads["wh"] += h_prev.T @ dz
        grads["b"] += dz.sum(axis=0)
        dh = dz @ params["wh"].T
        dc = dc * f
    return loss, grads


def training_windows(series: np.ndarray, window_length: int) -> Tuple[np.ndarray, np.ndarray]:
    """Every run of `window_length` values paired with the value right after it."""
    series = np.asarray(series, dtype=float)
    windows = sliding_window_view(series, window_length)[:-1]
    return windows, series[window_length:]


@dataclass(frozen=True, eq=False)
class LstmModel(RegressorModel):
    family: ClassVar[str] = "lstm"
    wx: np.ndarray
    wh: np.ndarray
    b: np.ndarray
    wy: np.ndarray
    by: np.ndarray
    window_length: int
    scaler: ScalerParams = IDENTITY_SCALER
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def hidden_size(self) -> int:
        return self.wh.shape[0]

    @property
    def params(self) -> Params:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def _check(self, windows) -> np.ndarray:
        windows = np.asarray(windows, dtype=float)
        if windows.ndim == 1:
            windows = windows.reshape(1, -1)
        if windows.ndim != 2 or windows.shape[1] != self.window_length:
            raise ShapeMismatch(f"LSTM expects windows of {self.window_length} values, got shape {windows.shape}")
        return windows

    def predict_scaled(self, windows) -> np.ndarray:
        predictions, _ = lstm_forward(self.params, self._check(windows))
        return predictions

    def predict(self, windows) -> np.ndarray:
        """Windows of prices in, next-step prices out."""
        scaled = self.scaler.transform(self._check(windows))
        predictions, _ = lstm_forward(self.params, scaled)
        return self.scaler.inverse_transform(predictions)


def fit_lstm(series, cfg: TrainConfig, scaler: Optional[ScalerParams] = None) -> LstmModel:
    """Train on sliding windows of an already scaled series; `scaler` maps predictions back to prices."""
    series = np.asarray(series, dtype=float)
    if len(series) <= cfg.window_length:
        raise SeriesTooShort(f"series of {len(series)} values needs more than window_length={cfg.window_length}")
    windows, targets = training_windows(series, cfg.window_length)
    params = init_lstm_params(cfg.hidden_size, random_stream(cfg.seed, 0, STREAM_INIT))
    shuffle = random_stream(cfg.seed, 0, STREAM_SHUFFLE)
    optimizer = Adam(params, learning_rate=cfg.learning_rate)
    history = np.empty(cfg.epochs)

    for epoch in range(cfg.epochs):
        order = shuffle.permutation(len(targets))
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            _, grads = lstm_loss_and_gradients(params, windows[batch], targets[batch])
            clip_by_global_norm(grads, cfg.clip_norm)
            optimizer.step(params, grads)
        predictions, _ = lstm_forward(params, windows)
        history[epoch] = float(np.mean((predictions - targets) ** 2))
        if not np.isfinite(history[epoch]):
            raise DivergedLoss(f"LSTM loss became {history[epoch]} at epoch {epoch + 1}")
        if (epoch + 1) % 10 == 0 or epoch + 1 == cfg.epochs:
            logger.info("LSTM epoch %d/%d mse %.6g", epoch + 1, cfg.epochs, history[epoch])

    return LstmModel(window_length=cfg.window_length, scaler=scaler or IDENTITY_SCALER,
                     loss_history=history, **params)
