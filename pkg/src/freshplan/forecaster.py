"""Two-branch TCN with attention fusion, trained per product on cost windows.

One branch convolves the scaled 15-day cost history, the other the 7x10
solar-term bit matrix of the target week; attention fuses both into a single
feature row and an affine head emits the 7 scaled daily costs.  Training
minimizes MSE on scaled targets with Adam, full-batch by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import layers
from .autodiff import Adam, ParamSet, Tensor
from .errors import InputError, InvariantError
from .pipeline import HORIZON_DAYS, INPUT_DAYS, Normalizer, WindowSample

TERM_WIDTH = 10


@dataclass
class ModelConfig:
    channels: int = 16
    kernel_size: int = 3
    dilations: list[int] = field(default_factory=lambda: [1, 2])


@dataclass
class ForecasterModel:
    cost_branch: layers.TcnBranch
    term_branch: layers.TcnBranch
    head: layers.DenseLayer
    normalizer: Normalizer
    product_id: str

    def __post_init__(self):
        if self.cost_branch.out_width != self.term_branch.out_width:
            raise InputError("branches must share feature width")
        if self.head.weights.data.shape != (self.cost_branch.out_width, HORIZON_DAYS):
            raise InputError("head must map the branch feature width to the 7-day horizon")

    @classmethod
    def create(cls, normalizer: Normalizer, product_id: str, seed: int,
               config: ModelConfig | None = None) -> "ForecasterModel":
        config = config if config is not None else ModelConfig()
        rng = np.random.default_rng(seed)
        cost_branch = layers.TcnBranch.create(
            rng, 1, config.channels, config.kernel_size, config.dilations)
        term_branch = layers.TcnBranch.create(
            rng, TERM_WIDTH, config.channels, config.kernel_size, config.dilations)
        head = layers.DenseLayer.create(rng, config.channels, HORIZON_DAYS)
        return cls(cost_branch, term_branch, head, normalizer, product_id)

    def params(self) -> ParamSet:
        named = self.cost_branch.named_params("cost")
        named += self.term_branch.named_params("term")
        named += [("head.weights", self.head.weights), ("head.bias", self.head.bias)]
        return ParamSet(named)

    def forward(self, history: Tensor, terms: Tensor) -> Tensor:
        """history [B, 15, 1] and terms [B, 7, 10] -> scaled predictions [B, 7]."""
        fused = layers.attention_fuse_graph(
            self.cost_branch.apply(history), self.term_branch.apply(terms))
        return self.head.apply(fused)

    def predict_scaled(self, histories: np.ndarray, term_matrices: np.ndarray) -> np.ndarray:
        """Batched forward pass on already-scaled inputs, no graph kept."""
        out = self.forward(Tensor(histories[:, :, None]), Tensor(term_matrices))
        return out.data


@dataclass
class TrainReport:
    final_loss: float
    loss_curve: list[float]


def _stack_samples(samples: list[WindowSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    histories = np.stack([s.history for s in samples])
    terms = np.stack([s.future_terms for s in samples])
    targets = np.stack([s.target for s in samples])
    return histories, terms, targets


def train(
    model: ForecasterModel,
    samples: list[WindowSample],
    epochs: int = 100,
    lr: float = 1e-3,
    seed: int = 0,
    batch_size: int | None = None,
) -> TrainReport:
    """Adam on MSE over scaled targets; one loss-curve entry per epoch.

    The default is full-batch (each epoch is one update on the mean loss over
    all samples); `batch_size` switches to deterministic shuffled mini-batches.
    """
    if not samples:
        raise InputError("empty samples")
    histories, terms, targets = _stack_samples(samples)
    params = model.params()
    optimizer = Adam(params, lr=lr)
    rng = np.random.default_rng(seed)

    loss_curve: list[float] = []
    for _ in range(epochs):
        if batch_size is None or batch_size >= len(samples):
            batches = [slice(None)]
        else:
            order = rng.permutation(len(samples))
            batches = [order[i:i + batch_size] for i in range(0, len(samples), batch_size)]
        epoch_loss = 0.0
        for batch in batches:
            h = Tensor(histories[batch][:, :, None])
            t = Tensor(terms[batch])
            y = Tensor(targets[batch])
            loss = ad.mean((model.forward(h, t) - y) ** 2)
            ad.backward(loss)
            optimizer.step()
            count = len(samples) if isinstance(batch, slice) else len(batch)
            epoch_loss += float(loss.data) * count
        loss_curve.append(epoch_loss / len(samples))
        if not np.isfinite(loss_curve[-1]):
            raise InvariantError(f"{model.product_id}: training loss diverged")
    return TrainReport(final_loss=loss_curve[-1] if loss_curve else float("nan"),
                       loss_curve=loss_curve)


def predict(model: ForecasterModel, history, future_terms,
            input_days: int = INPUT_DAYS) -> np.ndarray:
    """Forecast 7 raw daily costs from the last `input_days` raw costs and the
    week's term bits."""
    history = np.asarray(history, dtype=np.float64)
    if history.shape != (input_days,):
        raise InputError(f"history must have length {input_days}, got shape {history.shape}")
    future_terms = np.asarray(future_terms, dtype=np.float64)
    if future_terms.shape != (HORIZON_DAYS, TERM_WIDTH):
        raise InputError(f"future_terms must be {HORIZON_DAYS}x{TERM_WIDTH}")
    scaled = model.normalizer.normalize(history)
    out = model.predict_scaled(scaled[None, :], future_terms[None, :, :])
    return model.normalizer.inverse(out[0])


@dataclass
class MetricsReport:
    mse: float
    mae: float
    rmse: float


def evaluate(y, y_hat) -> MetricsReport:
    """MSE, MAE and RMSE of a prediction against the truth."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.size == 0:
        raise InputError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    err = y - y_hat
    mse = float(np.mean(err ** 2))
    return MetricsReport(mse=mse, mae=float(np.mean(np.abs(err))), rmse=float(np.sqrt(mse)))


# -- evaluation helpers -------------------------------------------------------


def holdout_split(samples: list[WindowSample], fraction: float = 0.2) -> tuple[list[WindowSample], list[WindowSample]]:
    """Chronological split; the last `fraction` of windows is held out."""
    if not samples:
        raise InputError("empty samples")
    cut = max(1, int(round(len(samples) * (1.0 - fraction))))
    cut = min(cut, len(samples) - 1) if len(samples) > 1 else 1
    return samples[:cut], samples[cut:]


def holdout_mse(model: ForecasterModel, samples: list[WindowSample], space: str = "raw") -> float:
    """Mean squared error of the model over windows, in raw or normalized space."""
    if space not in ("raw", "normalized"):
        raise InputError(f"space must be 'raw' or 'normalized', got {space!r}")
    histories, terms, targets = _stack_samples(samples)
    preds = model.predict_scaled(histories, terms)
    if space == "raw":
        preds = model.normalizer.inverse(preds)
        targets = model.normalizer.inverse(targets)
    return float(np.mean((preds - targets) ** 2))


def naive_mse(samples: list[WindowSample], normalizer: Normalizer, space: str = "raw") -> float:
    """MSE of repeating each window's last observed value across the horizon."""
    histories, _, targets = _stack_samples(samples)
    preds = np.repeat(histories[:, -1:], targets.shape[1], axis=1)
    if space == "raw":
        preds = normalizer.inverse(preds)
        targets = normalizer.inverse(targets)
    return float(np.mean((preds - targets) ** 2))
