"""Full-batch gradient-ascent logistic regression with profiling.

The trainer records what the gray-box surrogate needs: the penultimate
iterate, the last step size and the per-point weights ``g_i = h(-y_i z_i)``
used in the final update, so that

    theta_K = theta_prev + alpha_last * sum_i y_i g_i x_i

holds for the recorded values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .dataset import Dataset
from .errors import DimensionMismatch, DivergenceError, InvalidArgument


def sigmoid(z):
    """Logistic function ``1 / (1 + exp(-z))``, overflow-free for any finite z."""
    out = expit(z)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LRHyper:
    iterations: int = 100
    step_size: float = 0.1
    l2_penalty: float = 0.0

    def __post_init__(self):
        if self.iterations < 2:
            raise InvalidArgument("need at least 2 iterations so a penultimate iterate exists")
        if not self.step_size > 0:
            raise InvalidArgument("step_size must be positive")
        if self.l2_penalty < 0:
            raise InvalidArgument("l2_penalty must be nonnegative")


@dataclass(frozen=True, eq=False)
class LRModel:
    theta: np.ndarray

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    def scores(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.theta

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.scores(X) >= 0, 1, -1)


@dataclass(frozen=True, eq=False)
class LRProfile:
    """Quantities recorded during the final gradient step.

    ``features`` is the training matrix the weights refer to. It is kept in
    memory for surrogate construction but not written by the serializer; the
    CLI re-attaches it from the training CSV.
    """

    theta_prev: np.ndarray
    alpha_last: float
    g: np.ndarray
    labels: np.ndarray
    features: np.ndarray | None = None
    l2_penalty: float = 0.0

    def reconstruct(self) -> np.ndarray:
        """theta_K rebuilt from the recorded final step."""
        step = self.features.T @ (self.labels * self.g)
        return self.theta_prev + self.alpha_last * (step - self.l2_penalty * self.theta_prev)


def log_likelihood(theta, X, y, l2_penalty: float = 0.0) -> float:
    z = np.asarray(X) @ theta
    return float(np.sum(log_expit(y * z)) - 0.5 * l2_penalty * theta @ theta)


def gradient(theta, X, y, l2_penalty: float = 0.0) -> np.ndarray:
    """Gradient of :func:`log_likelihood`: sum_i y_i x_i h(-y_i z_i) - lambda theta."""
    g = expit(-y * (X @ theta))
    return X.T @ (y * g) - l2_penalty * theta


def train_lr(train: Dataset, hyper: LRHyper = LRHyper()) -> tuple[LRModel, LRProfile]:
    if len(train) == 0:
        raise InvalidArgument("cannot train on an empty dataset")
    X, y = train.X, train.y.astype(float)
    theta = np.zeros(train.dim)
    for k in range(1, hyper.iterations + 1):
        theta_prev = theta
        g = expit(-y * (X @ theta_prev))
        theta = theta_prev + hyper.step_size * (X.T @ (y * g) - hyper.l2_penalty * theta_prev)
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(k)
    theta.setflags(write=False)
    profile = LRProfile(
        theta_prev=theta_prev,
        alpha_last=hyper.step_size,
        g=g,
        labels=train.y.copy(),
        features=X,
        l2_penalty=hyper.l2_penalty,
    )
    return LRModel(theta), profile


def lr_classify(model: LRModel, x) -> int:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.dim,):
        raise DimensionMismatch(f"model has dimension {model.dim}, point has shape {x.shape}")
    return 1 if float(model.theta @ x) >= 0 else -1


def evaluation_score(model, test: Dataset) -> int:
    """Number of misclassified points in ``test``."""
    if len(test) == 0:
        return 0
    return int(np.sum(model.predict(test.X) != test.y))
