"""Training loop: batched BCE + SGD momentum, per-epoch dev accuracy, early
stopping with best-weight restoration.

Early-stop semantics (both implemented, ``best_patience`` is the default):
  * best_patience: the non-improvement counter resets only on a new strict
    maximum of dev accuracy; stop once it reaches ``patience``.
  * monotone_decrease: the counter grows only while accuracy strictly
    decreases epoch-over-epoch and resets otherwise.
Ties on the best accuracy keep the earlier epoch's snapshot. Whatever stops
the run (counter or max_epochs), the best epoch's weights are restored into
the live store before returning.
"""

import math
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from seatnet import swt
from seatnet.errors import ConfigError, DataError, TrainingDivergedError
from seatnet.imgops import crop, replicate_gray, rescale_short_side, rotate90, to_grayscale
from seatnet.model import forward_infer, forward_train, trainable_names
from seatnet.optim import OptimizerState, sgd_momentum_step
from seatnet.pnm import decode_pnm
from seatnet.rng import PURPOSE_CROP, PURPOSE_DROPOUT, PURPOSE_SHUFFLE, Rng, derive_seed


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    momentum: float = 0.9
    patience: int = 8
    batch_size: int = 32
    max_epochs: int = 200
    seed: int = 0
    stop_mode: str = "best_patience"
    rotation_augmentation: bool = False
    freeze_extractor: bool = False
    positive_class_weight: float = 1.0
    threshold: float = 0.5

    def __post_init__(self):
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.stop_mode not in ("best_patience", "monotone_decrease"):
            raise ConfigError(f"unknown stop_mode {self.stop_mode!r}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    dev_accuracy: float
    wall_time_s: float


@dataclass
class EarlyStopState:
    best_accuracy: float = -math.inf
    best_epoch: int = 0
    best_snapshot: object = None
    counter: int = 0
    prev_accuracy: float = None


def early_stop_update(state, epoch, dev_accuracy, weights, patience,
                      mode="best_patience"):
    """Fold one epoch's dev accuracy into the stopper; returns 'continue' or
    'stop'. Snapshots the weights on every new strict maximum."""
    if not 0.0 <= dev_accuracy <= 1.0:
        raise ConfigError(f"dev accuracy {dev_accuracy} outside [0, 1]")
    if dev_accuracy > state.best_accuracy:
        state.best_accuracy = dev_accuracy
        state.best_epoch = epoch
        state.best_snapshot = weights.snapshot()
        improved = True
    else:
        improved = False
    if mode == "best_patience":
        state.counter = 0 if improved else state.counter + 1
    elif mode == "monotone_decrease":
        if state.prev_accuracy is not None and dev_accuracy < state.prev_accuracy:
            state.counter += 1
        else:
            state.counter = 0
    else:
        raise ConfigError(f"unknown stop_mode {mode!r}")
    state.prev_accuracy = dev_accuracy
    return "stop" if state.counter >= patience else "continue"


class _SampleCache:
    """Decoded, grayscaled, rescaled images kept in memory so per-epoch work
    is only the crop/augment/affine tail."""

    def __init__(self, records, rescale_target):
        self.images = []
        self.labels = np.empty(len(records), dtype=np.float32)
        for i, rec in enumerate(records):
            img = decode_pnm(rec.image_path)
            if img.shape[0] == 3:
                img = to_grayscale(img)
            self.images.append(rescale_short_side(img, rescale_target))
            self.labels[i] = rec.label

    def train_batch(self, indices, input_size, rotation, crop_rng):
        out = np.empty((len(indices), 3, input_size, input_size), dtype=np.float32)
        for row, idx in enumerate(indices):
            img = crop(self.images[idx], input_size, mode="random", rng=crop_rng)
            if rotation:
                img = rotate90(img, crop_rng.randint(4))
            out[row] = 2.0 * replicate_gray(img) - 1.0
        return out, self.labels[list(indices)]

    def eval_tensor(self, input_size):
        out = np.empty((len(self.images), 3, input_size, input_size), dtype=np.float32)
        for i, img in enumerate(self.images):
            out[i] = 2.0 * replicate_gray(crop(img, input_size, mode="center")) - 1.0
        return out


def accuracy_on(config, weights, xs, labels, threshold=0.5, chunk=64):
    """Infer-mode accuracy over a preprocessed tensor, chunked for memory."""
    hits = 0
    for start in range(0, len(xs), chunk):
        probs = forward_infer(config, weights, xs[start : start + chunk])
        pred = probs >= threshold
        hits += int((pred == (labels[start : start + chunk] > 0.5)).sum())
    return hits / len(xs)


def train(model_config, weights, train_records, dev_records, config,
          checkpoint_dir=None, on_epoch=None):
    """Run the full loop; returns (weights restored to the best epoch, stats).

    Per epoch: shuffle with an epoch-keyed stream, iterate batches (final
    partial batch kept), train-mode forward, BCE, backward, SGD-momentum
    step; then dev accuracy at the decision threshold with center crops in
    infer mode; then the early stopper. ``on_epoch`` (if given) receives each
    EpochStats as it is produced. ``checkpoint_dir`` gets best.swt (updated
    on every new best) and final.swt (last epoch's weights, pre-restore).
    """
    if not train_records:
        raise DataError("training split is empty")
    if not dev_records:
        raise DataError("dev split is empty")
    eff_model = model_config
    if config.freeze_extractor and not model_config.freeze_extractor:
        eff_model = replace(model_config, freeze_extractor=True)

    train_cache = _SampleCache(train_records, eff_model.rescale_short_side)
    dev_cache = _SampleCache(dev_records, eff_model.rescale_short_side)
    dev_xs = dev_cache.eval_tensor(eff_model.input_size)

    names = trainable_names(eff_model)
    opt = OptimizerState(
        {n: weights[n] for n in names}, config.learning_rate, config.momentum
    )
    stopper = EarlyStopState()
    stats = []
    n = len(train_records)
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.monotonic()
        order = list(range(n))
        Rng(derive_seed(config.seed, PURPOSE_SHUFFLE, epoch)).shuffle(order)
        crop_rng = Rng(derive_seed(config.seed, PURPOSE_CROP, epoch))
        drop_rng = Rng(derive_seed(config.seed, PURPOSE_DROPOUT, epoch))
        loss_sum = 0.0
        for batch_idx, start in enumerate(range(0, n, config.batch_size)):
            indices = order[start : start + config.batch_size]
            xs, ys = train_cache.train_batch(
                indices, eff_model.input_size, config.rotation_augmentation, crop_rng
            )
            fwd = forward_train(eff_model, weights, xs, drop_rng)
            loss = fwd.graph.bce_loss(
                fwd.prob, ys, pos_weight=config.positive_class_weight
            )
            if not math.isfinite(loss.value):
                raise TrainingDivergedError(epoch, batch_idx, loss.value)
            grads = fwd.graph.backward(loss)
            named_grads = {
                name: fwd.graph.grad(grads, var) for name, var in fwd.params.items()
            }
            sgd_momentum_step(weights, named_grads, opt)
            loss_sum += loss.value * len(indices)
        dev_acc = accuracy_on(
            eff_model, weights, dev_xs, dev_cache.labels, config.threshold
        )
        entry = EpochStats(
            epoch=epoch,
            train_loss=loss_sum / n,
            dev_accuracy=dev_acc,
            wall_time_s=time.monotonic() - t0,
        )
        stats.append(entry)
        decision = early_stop_update(
            stopper, epoch, dev_acc, weights, config.patience, config.stop_mode
        )
        if checkpoint_dir and stopper.best_epoch == epoch:
            swt.save_swt(weights, os.path.join(checkpoint_dir, "best.swt"))
        if on_epoch is not None:
            on_epoch(entry)
        if decision == "stop":
            break
    if checkpoint_dir:
        swt.save_swt(weights, os.path.join(checkpoint_dir, "final.swt"))
    weights.restore(stopper.best_snapshot)
    return weights, stats
