"""Minibatch SGD training for ReLU networks with MSE + L2 loss.

Deliberately minimal: plain gradient steps, per-epoch reshuffling, and
best-epoch parameter selection. Inputs and targets are standardized
internally; the returned network has the standardization folded into its
first and last layers so it maps raw problem units.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .net import LabeledDataset, ReluNetwork

__all__ = [
    "TrainConfig",
    "loss",
    "gradients",
    "sgd_train",
    "dataset_to_csv",
    "dataset_from_csv",
]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 32
    learning_rate: float = 0.01
    l2_lambda: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def _forward_all(net: ReluNetwork, x: np.ndarray):
    """Batch forward pass keeping pre-activations and activations per layer."""
    pres, acts = [], [x]
    last = net.depth - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        pre = acts[-1] @ w.T + b
        pres.append(pre)
        acts.append(np.maximum(0.0, pre) if k < last else pre)
    return pres, acts


def loss(net: ReluNetwork, batch: LabeledDataset, l2_lambda: float) -> float:
    """(1/N) sum ||y - f(x)||^2 plus l2_lambda * sum of squared parameters."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    _, acts = _forward_all(net, batch.inputs)
    resid = acts[-1] - batch.targets
    mse = float(np.sum(resid * resid)) / len(batch)
    reg = sum(float(np.sum(w * w)) + float(np.sum(b * b))
              for w, b in zip(net.weights, net.biases))
    return mse + l2_lambda * reg


def gradients(net: ReluNetwork, batch: LabeledDataset, l2_lambda: float):
    """Exact reverse-mode gradient of loss; returns (dW list, db list).

    The ReLU subgradient at exactly zero input is taken as 0.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    n = len(batch)
    pres, acts = _forward_all(net, batch.inputs)
    grad_w = [None] * net.depth
    grad_b = [None] * net.depth
    delta = 2.0 / n * (acts[-1] - batch.targets)
    for k in range(net.depth - 1, -1, -1):
        grad_w[k] = delta.T @ acts[k] + 2.0 * l2_lambda * net.weights[k]
        grad_b[k] = delta.sum(axis=0) + 2.0 * l2_lambda * net.biases[k]
        if k > 0:
            delta = (delta @ net.weights[k]) * (pres[k - 1] > 0.0)
    return grad_w, grad_b


def _standardize_stats(a: np.ndarray):
    mu = a.mean(axis=0)
    sigma = a.std(axis=0)
    sigma = np.where(sigma > 0.0, sigma, 1.0)
    return mu, sigma


def _fold_standardization(net: ReluNetwork, mu_x, sigma_x, mu_y, sigma_y) -> ReluNetwork:
    """Return a network in raw units equivalent to standardize -> net -> destandardize."""
    ws = [w.copy() for w in net.weights]
    bs = [b.copy() for b in net.biases]
    bs[0] = bs[0] - ws[0] @ (mu_x / sigma_x)
    ws[0] = ws[0] / sigma_x
    ws[-1] = sigma_y[:, None] * ws[-1]
    bs[-1] = sigma_y * bs[-1] + mu_y
    return ReluNetwork(net.layer_dims, ws, bs)


def sgd_train(net: ReluNetwork, dataset: LabeledDataset, config: TrainConfig) -> ReluNetwork:
    """Train with plain SGD; returns the best-epoch parameters in raw units.

    The provided network supplies the initial parameters (in standardized
    space). After every epoch the full-dataset loss is evaluated and the
    parameters with the lowest value seen are kept.
    """
    if dataset.inputs.shape[1] != net.input_dim:
        raise ValueError(
            f"dataset input width {dataset.inputs.shape[1]} != {net.input_dim}")
    if dataset.targets.shape[1] != net.output_dim:
        raise ValueError(
            f"dataset target width {dataset.targets.shape[1]} != {net.output_dim}")

    mu_x, sigma_x = _standardize_stats(dataset.inputs)
    mu_y, sigma_y = _standardize_stats(dataset.targets)
    x = (dataset.inputs - mu_x) / sigma_x
    y = (dataset.targets - mu_y) / sigma_y
    std_data = LabeledDataset(x, y)

    rng = np.random.default_rng(config.seed)
    ws = [w.copy() for w in net.weights]
    bs = [b.copy() for b in net.biases]
    work = ReluNetwork(net.layer_dims, ws, bs)

    best_loss = loss(work, std_data, config.l2_lambda)
    best = ([w.copy() for w in work.weights], [b.copy() for b in work.biases])
    n = len(std_data)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = LabeledDataset(x[idx], y[idx])
            gw, gb = gradients(work, batch, config.l2_lambda)
            ws = [w - config.learning_rate * g for w, g in zip(work.weights, gw)]
            bs = [b - config.learning_rate * g for b, g in zip(work.biases, gb)]
            work = ReluNetwork(work.layer_dims, ws, bs)
        epoch_loss = loss(work, std_data, config.l2_lambda)
        if epoch_loss < best_loss:
            best_loss = epoch_loss
            best = ([w.copy() for w in work.weights], [b.copy() for b in work.biases])

    trained = ReluNetwork(net.layer_dims, best[0], best[1])
    return _fold_standardization(trained, mu_x, sigma_x, mu_y, sigma_y)


def dataset_to_csv(data: LabeledDataset) -> str:
    """CSV text with input columns x1..xn then target columns y1..ym."""
    n_in = data.inputs.shape[1]
    n_out = data.targets.shape[1]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{i + 1}" for i in range(n_in)] + [f"y{i + 1}" for i in range(n_out)])
    for xi, yi in zip(data.inputs, data.targets):
        writer.writerow([repr(float(v)) for v in xi] + [repr(float(v)) for v in yi])
    return buf.getvalue()


def dataset_from_csv(text: str) -> LabeledDataset:
    """Parse the CSV dialect of dataset_to_csv; header row is required."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty dataset file") from None
    n_in = sum(1 for h in header if h.strip().startswith("x"))
    n_out = sum(1 for h in header if h.strip().startswith("y"))
    if n_in == 0 or n_out == 0 or n_in + n_out != len(header):
        raise ValueError("header must name input columns x* then target columns y*")
    rows = [list(map(float, row)) for row in reader if row]
    if not rows:
        raise ValueError("dataset file has no data rows")
    arr = np.array(rows, dtype=float)
    if arr.shape[1] != n_in + n_out:
        raise ValueError("data row width inconsistent with header")
    return LabeledDataset(arr[:, :n_in], arr[:, n_in:])
