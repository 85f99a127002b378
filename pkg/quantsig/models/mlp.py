"""One-hidden-layer perceptron (tanh hidden units, sigmoid output) trained with Adam."""

import logging
from dataclasses import dataclass
from typing import ClassVar, Dict, Tuple

import numpy as np
from scipy import special

from quantsig.models.base import (STREAM_INIT, STREAM_SHUFFLE, Adam, ClassifierModel, TrainConfig,
                                  as_dense, check_width, random_stream)

logger = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]


def init_mlp_params(n_inputs: int, hidden_size: int, rng: np.random.Generator) -> Params:
    """Xavier-uniform weights, zero biases."""
    limit1 = np.sqrt(6.0 / (n_inputs + hidden_size))
    limit2 = np.sqrt(6.0 / (hidden_size + 1))
    return {
        "w1": rng.uniform(-limit1, limit1, size=(n_inputs, hidden_size)),
        "b1": np.zeros(hidden_size),
        "w2": rng.uniform(-limit2, limit2, size=hidden_size),
        "b2": np.zeros(1),
    }


def mlp_forward(params: Params, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    hidden = np.tanh(X @ params["w1"] + params["b1"])
    logits = hidden @ params["w2"] + params["b2"][0]
    return hidden, logits


def mlp_loss_and_gradients(params: Params, X: np.ndarray, y: np.ndarray, l2: float = 0.0) -> Tuple[float, Params]:
    """Mean binary cross-entropy (plus l2/2 on the weights) and its gradient for every parameter."""
    n = X.shape[0]
    hidden, logits = mlp_forward(params, X)
    loss = float(np.mean(np.logaddexp(0.0, logits) - y * logits))
    loss += 0.5 * l2 * float(np.sum(params["w1"] ** 2) + np.sum(params["w2"] ** 2))

    d_logits = (special.expit(logits) - y) / n
    d_hidden = np.outer(d_logits, params["w2"]) * (1.0 - hidden ** 2)
    grads = {
        "w2": hidden.T @ d_logits + l2 * params["w2"],
        "b2": np.array([d_logits.sum()]),
        "w1": X.T @ d_hidden + l2 * params["w1"],
        "b1": d_hidden.sum(axis=0),
    }
    return loss, grads


@dataclass(frozen=True, eq=False)
class MlpModel(ClassifierModel):
    family: ClassVar[str] = "ann"
    threshold: ClassVar[float] = 0.5
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w1.shape[1]

    @property
    def params(self) -> Params:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def decision_scores(self, X) -> np.ndarray:
        _, logits = mlp_forward(self.params, check_width(X, self.w1.shape[0]))
        return special.expit(logits)


def fit_mlp(X, y, cfg: TrainConfig) -> MlpModel:
    X = as_dense(X)
    y = np.asarray(y, dtype=float)
    params = init_mlp_params(X.shape[1], cfg.hidden_size, random_stream(cfg.seed, 0, STREAM_INIT))
    shuffle = random_stream(cfg.seed, 0, STREAM_SHUFFLE)
    optimizer = Adam(params, learning_rate=cfg.learning_rate)

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle.permutation(X.shape[0])
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            _, grads = mlp_loss_and_gradients(params, X[batch], y[batch], cfg.l2)
            optimizer.step(params, grads)
        if epoch % 50 == 0 or epoch == cfg.epochs:
            loss, _ = mlp_loss_and_gradients(params, X, y, cfg.l2)
            logger.info("MLP epoch %d/%d loss %.6f", epoch, cfg.epochs, loss)

    return MlpModel(**params)
