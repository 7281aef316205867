"""Gradient-descent / AdaGrad harness, finite-difference checks and logistic regression."""

import logging
from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from metafair.errors import DegenerateLabels, InvalidArgument, NumericError

logger = logging.getLogger(__name__)

Params = dict[str, np.ndarray]

OPTIMIZERS = ("sgd", "adagrad")
ADAGRAD_EPS = 1e-8
MAX_HALVINGS = 40
DEFAULT_L2 = 1e-4


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "adagrad"
    learning_rate: float = 0.05
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    tolerance: float = 0.0

    def __post_init__(self):
        if self.method not in OPTIMIZERS:
            raise InvalidArgument(f"Unknown optimizer {self.method!r}; choose from {OPTIMIZERS}")
        if not self.learning_rate > 0:
            raise InvalidArgument("learning_rate must be positive")
        if self.epochs < 1:
            raise InvalidArgument("epochs must be positive")
        if self.batch_size < 1:
            raise InvalidArgument("batch_size must be positive")
        if self.tolerance < 0:
            raise InvalidArgument("tolerance must be non-negative")

    @classmethod
    def from_dict(cls, data: dict | None) -> "OptimizerConfig":
        return cls(**(data or {}))

    def with_seed(self, seed: int) -> "OptimizerConfig":
        return replace(self, seed=seed)


class Objective(ABC):
    """A differentiable objective that averages over examples.

    `rows` selects a mini-batch of example indices; None means every example.
    """

    @property
    @abstractmethod
    def n_examples(self) -> int:
        """Number of examples the objective averages over."""

    @abstractmethod
    def loss_and_grad(self, params: Params, rows: np.ndarray | None = None) -> tuple[float, Params]:
        """Objective value and gradient with respect to every parameter."""

    def loss(self, params: Params) -> float:
        return self.loss_and_grad(params)[0]


@dataclass
class OptimizationResult:
    params: Params
    losses: list[float] = field(default_factory=list)
    halvings: int = 0

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


def _copy(params: Params) -> Params:
    return {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}


def minimize(objective: Objective, params: Params, cfg: OptimizerConfig) -> OptimizationResult:
    """Run `cfg.epochs` passes of mini-batch SGD or AdaGrad.

    losses[0] is the initial objective and losses[e] the full objective after
    epoch e. An epoch that would increase the objective is rolled back and
    retried with half the step size, so `losses` is non-increasing.
    """
    params = _copy(params)
    accum = {k: np.zeros_like(v) for k, v in params.items()}
    rng = np.random.default_rng(cfg.seed)
    n = objective.n_examples
    lr = cfg.learning_rate
    halvings = 0

    loss = objective.loss(params)
    if not np.isfinite(loss):
        raise NumericError("Objective is not finite at the starting point")
    losses = [loss]

    for epoch in range(cfg.epochs):
        accepted = False
        while not accepted:
            trial, trial_accum = _copy(params), _copy(accum)
            if cfg.batch_size >= n:
                batches = [None]
            else:
                order = rng.permutation(n)
                batches = [order[i : i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]
            for rows in batches:
                _, grads = objective.loss_and_grad(trial, rows)
                for key, g in grads.items():
                    if cfg.method == "adagrad":
                        trial_accum[key] += g * g
                        trial[key] -= lr * g / (np.sqrt(trial_accum[key]) + ADAGRAD_EPS)
                    else:
                        trial[key] -= lr * g
            new_loss = objective.loss(trial)
            if np.isfinite(new_loss) and new_loss <= loss:
                accepted = True
            else:
                halvings += 1
                lr *= 0.5
                logger.debug(f"Epoch {epoch}: loss rose to {new_loss:.6g}, step size -> {lr:.3g}")
                if halvings > MAX_HALVINGS:
                    break
        if not accepted:
            logger.warning(f"Optimizer stalled after {epoch} epochs (step size {lr:.3g})")
            break

        improvement = loss - new_loss
        params, accum, loss = trial, trial_accum, new_loss
        losses.append(loss)
        logger.debug(f"Epoch {epoch}: loss {loss:.10g}")
        if cfg.tolerance > 0 and improvement <= cfg.tolerance * max(1.0, abs(loss)):
            break

    return OptimizationResult(params=params, losses=losses, halvings=halvings)


def flatten_params(params: Params) -> tuple[np.ndarray, list[tuple[str, tuple[int, ...]]]]:
    """Concatenate parameters (sorted by name) into one vector plus a layout."""
    layout = [(k, params[k].shape) for k in sorted(params)]
    theta = np.concatenate([params[k].ravel() for k, _ in layout]) if layout else np.zeros(0)
    return theta, layout


def unflatten_params(theta: np.ndarray, layout: list[tuple[str, tuple[int, ...]]]) -> Params:
    out, offset = {}, 0
    for key, shape in layout:
        size = int(np.prod(shape))
        out[key] = theta[offset : offset + size].reshape(shape).copy()
        offset += size
    return out


def objective_as_function(
    objective: Objective, layout: list[tuple[str, tuple[int, ...]]]
) -> Callable[[np.ndarray], tuple[float, np.ndarray]]:
    """Adapt an Objective to the flat (value, gradient) form used by grad_check."""

    def f(theta: np.ndarray) -> tuple[float, np.ndarray]:
        loss, grads = objective.loss_and_grad(unflatten_params(theta, layout))
        return loss, flatten_params(grads)[0]

    return f


def grad_check(
    f: Callable[[np.ndarray], tuple[float, np.ndarray]], theta, h: float = 1e-5
) -> float:
    """Max relative error between f's analytic gradient and central differences."""
    theta = np.asarray(theta, dtype=np.float64)
    value, analytic = f(theta)
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    if not np.isfinite(value):
        raise NumericError("Objective is not finite at theta")
    worst = 0.0
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step.flat[i] = h
        plus, minus = f(theta + step)[0], f(theta - step)[0]
        if not (np.isfinite(plus) and np.isfinite(minus)):
            raise NumericError(f"Objective is not finite at theta +/- h e_{i}")
        numeric = (plus - minus) / (2.0 * h)
        err = abs(analytic[i] - numeric) / (abs(analytic[i]) + abs(numeric) + 1e-12)
        worst = max(worst, err)
    return worst


@dataclass(frozen=True)
class LinearClassifier:
    weights: np.ndarray
    bias: float

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def accuracy(self, X, y) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y)))


class LogisticObjective(Objective):
    """Mean logistic loss with an L2 penalty on the weights (not the bias)."""

    def __init__(self, X: np.ndarray, y: np.ndarray, l2: float):
        self.X = X
        self.y = y
        self.l2 = l2

    @property
    def n_examples(self) -> int:
        return self.X.shape[0]

    def loss_and_grad(self, params: Params, rows: np.ndarray | None = None) -> tuple[float, Params]:
        X = self.X if rows is None else self.X[rows]
        y = self.y if rows is None else self.y[rows]
        w, b = params["w"], params["b"]
        margin = y * (X @ w + b[0])
        loss = float(np.mean(np.logaddexp(0.0, -margin)) + 0.5 * self.l2 * (w @ w))
        coef = -y * expit(-margin) / len(y)
        return loss, {"w": X.T @ coef + self.l2 * w, "b": np.array([coef.sum()])}


DEFAULT_LOGISTIC = OptimizerConfig(method="sgd", learning_rate=1.0, epochs=300, batch_size=1 << 30)


def fit_logistic(
    X, y, cfg: OptimizerConfig = DEFAULT_LOGISTIC, l2: float = DEFAULT_L2
) -> LinearClassifier:
    """Fit a binary logistic-regression classifier on +/-1 labels from zero weights."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise InvalidArgument(f"X shape {X.shape} does not match {y.size} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidArgument("Labels must be +1 or -1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DegenerateLabels("Logistic regression needs examples of both labels")
    objective = LogisticObjective(X, y, l2)
    start = {"w": np.zeros(X.shape[1]), "b": np.zeros(1)}
    result = minimize(objective, start, cfg)
    logger.debug(
        f"Logistic fit: loss {result.losses[0]:.6g} -> {result.final_loss:.6g} "
        f"over {len(result.losses) - 1} epochs"
    )
    return LinearClassifier(weights=result.params["w"], bias=float(result.params["b"][0]))
