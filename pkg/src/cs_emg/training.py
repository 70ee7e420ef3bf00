"""Minibatch Adam training with validation-based model selection."""
from __future__ import annotations

import csv
import logging
import time
import warnings
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .errors import ConfigError, InputError, ShapeError
from .spatial import one_hot

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 148
    learning_rate: float = 0.00006
    max_epoch: int = 10000
    early_stop_patience: int = 1500
    alpha: float = nn.DEFAULT_ALPHA
    seed: int = 0
    channel_mask: tuple = (True,) * 6
    filter_size: int = 5

    def __post_init__(self):
        object.__setattr__(self, "channel_mask", tuple(bool(c) for c in self.channel_mask))
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2 for batch normalization")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.max_epoch < 1:
            raise ConfigError("max_epoch must be at least 1")
        if self.early_stop_patience < 1:
            raise ConfigError("early_stop_patience must be at least 1")
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if len(self.channel_mask) != 6:
            raise ConfigError("channel_mask needs 6 entries")
        if not any(self.channel_mask):
            raise ConfigError("channel_mask enables no channel")
        if self.filter_size < 1:
            raise ConfigError("filter_size must be positive")

    def architecture(self, **overrides):
        return nn.Architecture(channel_mask=self.channel_mask, filter_size=self.filter_size, **overrides)

    def to_dict(self):
        d = asdict(self)
        d["channel_mask"] = list(self.channel_mask)
        return d


# -- Adam ----------------------------------------------------------------------------


@dataclass
class AdamState:
    m: OrderedDict
    v: OrderedDict
    step: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls(
            OrderedDict((n, np.zeros_like(p)) for n, p in params.items()),
            OrderedDict((n, np.zeros_like(p)) for n, p in params.items()),
        )


def adam_step(params, grads, state, learning_rate, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    state.step += 1
    c1 = 1.0 - beta1**state.step
    c2 = 1.0 - beta2**state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= learning_rate * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


# -- data containers -----------------------------------------------------------------


@dataclass
class GridSet:
    """Scaled grids for N samples: six (N, 6, 7, d) arrays plus 0/1 labels."""

    grids: list
    labels: np.ndarray
    subject_ids: tuple = ()

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        for g in self.grids:
            if g is not None and g.shape[0] != self.labels.size:
                raise ShapeError("grid batch size does not match label count")

    def __len__(self):
        return int(self.labels.size)

    def take(self, idx):
        return [None if g is None else g[idx] for g in self.grids]


# -- training ------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundRecord:
    epoch: int
    ce: float
    se: float
    reg: float
    total: float
    val_accuracy: float
    elapsed: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_round: int = -1
    stop_reason: str = ""

    @property
    def best_accuracy(self):
        return self.records[self.best_round].val_accuracy

    def deterministic_view(self):
        """Everything except wall-clock timings."""
        return (
            [(r.epoch, r.ce, r.se, r.reg, r.total, r.val_accuracy) for r in self.records],
            self.best_round,
            self.stop_reason,
        )

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            # wall-clock time is left out so identical runs write identical files
            w.writerow(["round", "epoch", "ce", "se", "reg", "total", "val_accuracy", "best"])
            for i, r in enumerate(self.records):
                w.writerow([i, r.epoch, repr(r.ce), repr(r.se), repr(r.reg), repr(r.total),
                            repr(r.val_accuracy), int(i == self.best_round)])


def _minibatches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        if idx.size >= 2:
            yield idx


def train_model(train, validation, config=TrainConfig(), arch=None, callback=None):
    """Train a GridNet and return (best model, history).

    One evaluation round follows every epoch; the round with the highest
    validation accuracy wins (earliest on ties). Training stops after
    ``max_epoch`` epochs or ``early_stop_patience`` rounds without
    improvement. ``callback(round_index, record)`` may return True to stop.
    """
    if len(train) == 0 or len(validation) == 0:
        raise ValueError("train and validation sets must be non-empty")
    if np.unique(validation.labels).size < 2:
        warnings.warn("validation set contains a single class", RuntimeWarning, stacklevel=2)
    if arch is None:
        arch = config.architecture()
    elif arch.channel_mask != config.channel_mask or arch.filter_size != config.filter_size:
        raise ConfigError("architecture disagrees with the config's channel_mask / filter_size")

    model = nn.GridNet(arch, seed=config.seed)
    state = AdamState.zeros_like(model.params)
    rng = np.random.default_rng([config.seed, 1])
    y_train = one_hot(train.labels)
    history = TrainHistory()
    best_model, best_acc, since_best = None, -np.inf, 0
    start = time.perf_counter()

    for epoch in range(config.max_epoch):
        ce = se = 0.0
        used = 0
        reg = 0.0
        for idx in _minibatches(len(train), config.batch_size, rng):
            probs, trace = nn.model_forward(model, train.take(idx), "train")
            terms = nn.compute_loss(probs, y_train[idx], model, config.alpha)
            grads = nn.backward(trace, y_train[idx], config.alpha)
            adam_step(model.params, grads, state, config.learning_rate)
            ce += terms.ce
            se += terms.se
            reg = terms.reg
            used += idx.size
        used = max(used, 1)
        _, val_pred, _ = predict(model, validation.grids)
        acc = float(np.mean(val_pred == validation.labels))
        rec = RoundRecord(epoch, ce / used, se / used, reg, ce / used + se / used + reg, acc,
                          time.perf_counter() - start)
        history.records.append(rec)
        round_idx = len(history.records) - 1
        log.debug("epoch %d: loss %.5f val_acc %.4f", epoch, rec.total, acc)
        if acc > best_acc:
            best_acc, best_model, since_best = acc, model.copy(), 0
            history.best_round = round_idx
        else:
            since_best += 1
        if callback is not None and callback(round_idx, rec):
            history.stop_reason = "callback"
            break
        if since_best >= config.early_stop_patience:
            history.stop_reason = "early-stop"
            break
    else:
        history.stop_reason = "max-epoch"
    log.info("training stopped (%s) after %d rounds; best round %d, val acc %.4f",
             history.stop_reason, len(history.records), history.best_round, best_acc)
    return best_model, history


def predict(model, grids, batch_size=256):
    """Infer-mode probabilities, hard labels and tie flags.

    Hard label is the argmax of the pair; an exact tie goes to label 1.
    """
    active = model.arch.active_channels
    n = None
    for c in active:
        g = np.asarray(grids[c], dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise InputError(f"channel {c} input contains non-finite values; was it scaled?")
        n = g.shape[0]
    probs = np.empty((n, 2))
    for start in range(0, n, batch_size):
        sl = slice(start, start + batch_size)
        chunk = [None if grids[c] is None or c not in active else grids[c][sl] for c in range(len(grids))]
        probs[sl], _ = nn.model_forward(model, chunk, "infer")
    ties = probs[:, 0] == probs[:, 1]
    labels = np.where(probs[:, 1] >= probs[:, 0], 1, 0)
    return probs, labels, ties
