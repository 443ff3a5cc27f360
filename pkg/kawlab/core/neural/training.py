"""
Adam training of networks on the squared-error objective, optionally with a
weight penalty lambda * J, and the multi-mask variant over zero-filled inputs.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from kawlab.common.errors import ArgumentError, SizeError, TrainingError
from kawlab.common.models import AdamConfig, TrainConfig
from kawlab.core.operators import MeasurementOperator
from kawlab.core.tensor_linalg import stack_complex

from .network import Gradients, Network, zero_filled

logger = logging.getLogger(__name__)

# J(net) -> (value, per-layer gradients shaped like Network.gradients output)
Regularizer = Callable[[Network], Tuple[float, Gradients]]


class Adam:
    """Adam over a network's trainable parameters, updated in place."""

    def __init__(self, net: Network, cfg: Optional[AdamConfig] = None):
        self.cfg = cfg or AdamConfig()
        self.params = net.parameters()
        self.m = [np.zeros_like(p) for _, _, p in self.params]
        self.v = [np.zeros_like(p) for _, _, p in self.params]
        self.t = 0

    def step(self, grads: Gradients) -> None:
        c = self.cfg
        self.t += 1
        bias1 = 1 - c.beta1 ** self.t
        bias2 = 1 - c.beta2 ** self.t
        for k, (li, name, p) in enumerate(self.params):
            g = grads[li].get(name)
            if g is None:
                continue
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * g * g
            p -= c.lr * (self.m[k] / bias1) / (np.sqrt(self.v[k] / bias2) + c.eps)


def weight_norm_penalty(net: Network) -> Tuple[float, Gradients]:
    """J = sum of squared Frobenius norms of trainable weight tensors."""
    value = 0.0
    grads: Gradients = [{} for _ in net.layers]
    for li, name, arr in net.parameters():
        if name == "W":
            value += float(np.sum(arr ** 2))
            grads[li][name] = 2 * arr
    return value, grads


@dataclass
class TrainResult:
    net: Network
    losses: List[float] = field(default_factory=list)
    delta: float = float("inf")
    epochs: int = 0

    def loss_csv(self) -> str:
        lines = ["epoch,loss"]
        lines.extend(f"{i},{v:.17g}" for i, v in enumerate(self.losses, 1))
        return "\n".join(lines) + "\n"


def training_error(net: Network, Y, X) -> float:
    """delta = max_j ||x_j - Psi(y_j)|| over the training set."""
    out = net.forward(np.asarray(Y, dtype=float))
    return float(np.max(np.linalg.norm(out - np.asarray(X, dtype=float), axis=1)))


def _check_set(net: Network, Y, X) -> Tuple[np.ndarray, np.ndarray]:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if Y.shape[0] == 0:
        raise ArgumentError("training set is empty")
    if Y.shape[0] != X.shape[0]:
        raise SizeError(f"{Y.shape[0]} inputs but {X.shape[0]} targets")
    if Y.shape[1] != net.n_in or X.shape[1] != net.n_out:
        raise SizeError(f"training pairs ({Y.shape[1]}, {X.shape[1]}) do not fit network ({net.n_in}, {net.n_out})")
    return Y, X


def train_regularized(net: Network, Y, X, lam: float, J: Union[str, Regularizer, None] = "weight_norm",
                      cfg: Optional[TrainConfig] = None) -> TrainResult:
    """
    Minimize (1/K) sum_j 1/2 ||x_j - Psi(y_j)||^2 + lam * J(Psi) with Adam.

    The network is copied; the caller's instance is left untouched. lam = 0
    never evaluates J, so the trajectory equals plain training.
    """
    cfg = cfg or TrainConfig()
    if lam < 0:
        raise ArgumentError(f"lambda must be nonnegative, got {lam}")
    if J == "weight_norm":
        J = weight_norm_penalty
    elif lam > 0 and not callable(J):
        raise ArgumentError(f"unknown regularizer {J!r}")
    Y, X = _check_set(net, Y, X)
    net = net.copy()
    opt = Adam(net, cfg.adam)
    rng = np.random.default_rng(cfg.seed)
    k = Y.shape[0]
    batch = k if cfg.batch_size == 0 else min(cfg.batch_size, k)
    result = TrainResult(net)

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(k) if batch < k else np.arange(k)
        epoch_loss = 0.0
        for start in range(0, k, batch):
            idx = order[start:start + batch]
            loss, grads = net.gradients(Y[idx], X[idx])
            if lam > 0:
                value, jgrads = J(net)
                loss += lam * value
                for g, jg in zip(grads, jgrads):
                    for name, arr in jg.items():
                        g[name] = g[name] + lam * arr if name in g else lam * arr
            if not np.isfinite(loss):
                raise TrainingError("loss is not finite", epoch)
            opt.step(grads)
            epoch_loss += loss * idx.size / k
        result.losses.append(epoch_loss)
        result.epochs = epoch
        if epoch % cfg.log_every == 0:
            logger.info(f"epoch {epoch}: loss {epoch_loss:.3e}")
        if cfg.target_error is not None and training_error(net, Y, X) <= cfg.target_error:
            logger.info(f"Target error {cfg.target_error} reached after {epoch} epochs")
            break

    result.delta = training_error(net, Y, X)
    logger.info(f"Training finished: {result.epochs} epochs, delta={result.delta:.3e}")
    return result


def train(net: Network, Y, X, cfg: Optional[TrainConfig] = None) -> TrainResult:
    """Plain squared-error training; returns the trained copy, loss curve and delta."""
    return train_regularized(net, Y, X, 0.0, None, cfg)


def multi_mask_pairs(images: Sequence, masks: Sequence[MeasurementOperator]) -> Tuple[np.ndarray, np.ndarray]:
    """Stacked zero-filled inputs and targets for every (image, mask) pair."""
    if not masks:
        raise ArgumentError("need at least one mask")
    images = np.asarray(images, dtype=complex)
    n = images.shape[-1]
    ys, xs = [], []
    for A in masks:
        if A.n != n:
            raise SizeError(f"mask operator has N={A.n}, images have {n}")
        ys.append(stack_complex(zero_filled(A, A.apply(images))))
        xs.append(stack_complex(images))
    return np.concatenate(ys), np.concatenate(xs)


def train_multi_mask(net: Network, images: Sequence, masks: Sequence[MeasurementOperator],
                     cfg: Optional[TrainConfig] = None) -> TrainResult:
    """Training loss averaged over all K images times L sampling masks."""
    Y, X = multi_mask_pairs(images, masks)
    return train(net, Y, X, cfg)
