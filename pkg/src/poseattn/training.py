"""Losses, stratified splitting, and the training loop.

The classification loss is a batch-mean binary cross-entropy on the sigmoid
output.  The attention loss is a binary cross-entropy between the predicted
attention map and the keypoint-derived pseudo ground truth, averaged over the
contributing samples and all grid cells; samples without a ground-truth mask
simply drop out of it.  The variants differ only in the loss:

  * plain / sam:  classification BCE alone.
  * super_sam:    lambda * class BCE + (1 - lambda) * attention BCE.

Training runs Adam over seeded mini-batch shuffles with early stopping on the
validation loss (the same blended loss the variant trains on) and restores
the best epoch's weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import Tensor, gather_rows
from .model import ATTENTION_GRID, INPUT_SHAPE, VARIANTS, ClassifierModel
from .optim import adam_step
from .supervision import PPE_TYPES, NoSupervision, PpeTypeConfig, pseudo_gt_mask

__all__ = [
    "bce_class", "bce_attention", "joint_loss",
    "stratified_split", "TrainConfig", "EpochStats", "TrainResult", "train",
    "predict", "evaluate_accuracy", "evaluate_attention_bce", "mean_mask_iou",
    "sweep_lambda", "DEFAULT_BCE_EPSILON",
]

DEFAULT_BCE_EPSILON = 1e-7
EVAL_BATCH = 128


# -- losses -------------------------------------------------------------------


def _check_binary(arr: np.ndarray, what: str) -> None:
    if not np.isin(arr, (0.0, 1.0)).all():
        raise ValueError(f"{what} must contain only 0 and 1")


def bce_class(predictions: Tensor | np.ndarray, labels,
              epsilon: float = DEFAULT_BCE_EPSILON) -> Tensor:
    """Batch-mean binary cross-entropy; predictions clamped to [eps, 1-eps]."""
    if not isinstance(predictions, Tensor):
        predictions = Tensor(predictions)
    if predictions.data.size == 0:
        raise ValueError("need at least one prediction")
    y = np.asarray(labels, dtype=predictions.dtype)
    if y.shape != predictions.shape:
        raise ValueError(
            f"labels shape {y.shape} does not match predictions {predictions.shape}")
    _check_binary(y, "labels")
    p = predictions.clip(epsilon, 1.0 - epsilon)
    return -(p.log() * y + (1.0 - p).log() * (1.0 - y)).mean()


def bce_attention(predicted: Tensor | np.ndarray,
                  ground_truth: Sequence[np.ndarray | None],
                  epsilon: float = DEFAULT_BCE_EPSILON) -> Tensor:
    """Mean BCE between predicted attention maps and pseudo ground truth.

    ``predicted`` holds a batch of maps, shape (B, 1, h, w) or (B, h, w);
    ``ground_truth`` is a parallel sequence of binary (h, w) arrays with None
    marking samples that carry no supervision.  The mean runs over the
    contributing samples and all cells; with no contributors the loss is a
    constant 0 that contributes no gradient.
    """
    if not isinstance(predicted, Tensor):
        predicted = Tensor(predicted)
    if len(ground_truth) != predicted.shape[0]:
        raise ValueError(
            f"{len(ground_truth)} ground-truth entries for batch of {predicted.shape[0]}")
    grid = predicted.shape[-2:]
    present = [i for i, m in enumerate(ground_truth) if m is not None]
    if not present:
        return Tensor(np.zeros((), dtype=predicted.dtype))
    gt = np.stack([np.asarray(ground_truth[i], dtype=predicted.dtype) for i in present])
    if gt.shape[-2:] != grid:
        raise ValueError(f"ground-truth grid {gt.shape[-2:]} does not match predicted {grid}")
    _check_binary(gt, "ground-truth masks")
    sub = gather_rows(predicted, present)
    gt = gt.reshape(sub.shape)
    p = sub.clip(epsilon, 1.0 - epsilon)
    return -(p.log() * gt + (1.0 - p).log() * (1.0 - gt)).mean()


def joint_loss(class_loss, attention_loss, lam: float):
    """Blend the two losses: lam * class + (1 - lam) * attention."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return class_loss * lam + attention_loss * (1.0 - lam)


# -- numpy twins of the losses for gradient-free evaluation --------------------


def _bce_mean_np(p: np.ndarray, y: np.ndarray, epsilon: float) -> float:
    c = np.clip(p.astype(np.float64), epsilon, 1.0 - epsilon)
    return float(-(y * np.log(c) + (1.0 - y) * np.log(1.0 - c)).mean())


def _bce_attention_np(masks: np.ndarray, gts: Sequence[np.ndarray | None],
                      epsilon: float) -> float:
    present = [i for i, m in enumerate(gts) if m is not None]
    if not present:
        return 0.0
    p = masks[present].reshape(len(present), -1).astype(np.float64)
    g = np.stack([np.asarray(gts[i], dtype=np.float64) for i in present]).reshape(len(present), -1)
    c = np.clip(p, epsilon, 1.0 - epsilon)
    return float(-(g * np.log(c) + (1.0 - g) * np.log(1.0 - c)).mean())


# -- stratified split ----------------------------------------------------------


def _label_of(sample) -> int:
    if hasattr(sample, "label"):
        return int(sample.label)
    return int(sample[1])


def stratified_split(samples: Sequence, ratios: tuple[float, float, float],
                     seed: int) -> tuple[list, list, list]:
    """Split into (train, val, test) preserving class ratios to within one sample.

    Each class is shuffled with the seeded generator and partitioned by
    largest-remainder apportionment of the three ratios, so every subset's
    per-class count is within 1 of the exact fractional share.  Classes with
    fewer than 3 samples are rejected.
    """
    if len(ratios) != 3 or any(not r > 0 for r in ratios):
        raise ValueError(f"need three positive ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got sum {sum(ratios)}")
    by_class: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        by_class.setdefault(_label_of(s), []).append(i)
    rng = np.random.default_rng(seed)
    parts: tuple[list, list, list] = ([], [], [])
    for label in sorted(by_class):
        idx = np.array(by_class[label])
        n = len(idx)
        if n < 3:
            raise ValueError(f"class {label} has only {n} samples; need at least 3")
        order = idx[rng.permutation(n)]
        exact = [r * n for r in ratios]
        counts = [int(np.floor(e)) for e in exact]
        remainders = sorted(range(3), key=lambda k: (-(exact[k] - counts[k]), k))
        for k in remainders[: n - sum(counts)]:
            counts[k] += 1
        stops = np.cumsum(counts)
        parts[0].extend(order[:stops[0]])
        parts[1].extend(order[stops[0]:stops[1]])
        parts[2].extend(order[stops[1]:stops[2]])
    return tuple([samples[i] for i in part] for part in parts)


# -- training -------------------------------------------------------------------


@dataclass
class TrainConfig:
    variant: str = "super_sam"
    lambda_: float = 0.5
    learning_rate: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 150
    patience: int = 10
    seed: int = 0
    bce_epsilon: float = DEFAULT_BCE_EPSILON

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lambda_}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ValueError(f"max epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 0:
            raise ValueError(f"patience must be >= 0, got {self.patience}")
        if not 0.0 < self.bce_epsilon < 0.5:
            raise ValueError(f"bce epsilon must lie in (0, 0.5), got {self.bce_epsilon}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    model: ClassifierModel
    history: list[EpochStats]
    best_epoch: int
    best_val_loss: float


def _stack_images(samples: Sequence) -> np.ndarray:
    x = np.stack([s.image for s in samples]).astype(np.float32)
    if x.shape[1:] != INPUT_SHAPE:
        raise ValueError(f"samples must be {INPUT_SHAPE} crops, got {x.shape[1:]}")
    return x


def _gt_masks(samples: Sequence, ppe: PpeTypeConfig) -> list[np.ndarray | None]:
    h, w = ATTENTION_GRID
    out = []
    for s in samples:
        crop = (0.0, 0.0, float(s.image.shape[-1]), float(s.image.shape[-2]))
        try:
            out.append(pseudo_gt_mask(s.skeleton, ppe, crop, h, w))
        except NoSupervision:
            out.append(None)
    return out


def predict(model: ClassifierModel, samples: Sequence,
            batch_size: int = EVAL_BATCH) -> tuple[np.ndarray, np.ndarray | None]:
    """Forward a sample list; returns (probs (N,), masks (N, 1, h, w) or None)."""
    x = _stack_images(samples)
    probs, masks = [], []
    for start in range(0, len(x), batch_size):
        p, m = model.forward(Tensor(x[start:start + batch_size]))
        probs.append(p.data)
        if m is not None:
            masks.append(m.data)
    return np.concatenate(probs), (np.concatenate(masks) if masks else None)


def _split_loss(variant: str, lam: float, probs: np.ndarray, y: np.ndarray,
                masks: np.ndarray | None, gts, epsilon: float) -> float:
    cls = _bce_mean_np(probs, y, epsilon)
    if variant != "super_sam":
        return cls
    att = _bce_attention_np(masks, gts, epsilon)
    return lam * cls + (1.0 - lam) * att


def train(train_samples: Sequence, val_samples: Sequence, config: TrainConfig,
          ppe: PpeTypeConfig = PPE_TYPES["helmet"]) -> TrainResult:
    """Train a classifier variant; returns the best-epoch model plus history.

    Mini-batch order reshuffles every epoch from the seeded generator.  After
    each epoch the validation loss is evaluated; when it fails to improve for
    more than ``patience`` consecutive epochs, training stops and the weights
    of the best validation epoch are restored.
    """
    if not len(train_samples) or not len(val_samples):
        raise ValueError("train and validation sets must be non-empty")
    x_train = _stack_images(train_samples)
    y_train = np.array([s.label for s in train_samples], dtype=np.float32)
    x_val = _stack_images(val_samples)
    y_val = np.array([s.label for s in val_samples], dtype=np.float32)
    _check_binary(y_train, "labels")
    _check_binary(y_val, "labels")

    supervised = config.variant == "super_sam"
    gt_train = _gt_masks(train_samples, ppe) if supervised else [None] * len(train_samples)
    gt_val = _gt_masks(val_samples, ppe) if supervised else [None] * len(val_samples)

    model = ClassifierModel.initialize(config.variant, seed=config.seed)
    params = model.parameters()
    rng = np.random.default_rng(config.seed)

    history: list[EpochStats] = []
    best_val = np.inf
    best_epoch = 0
    best_weights: dict[str, np.ndarray] = {}
    stale = 0

    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(len(x_train))
        batch_losses = []
        for b, start in enumerate(range(0, len(perm), config.batch_size)):
            idx = perm[start:start + config.batch_size]
            probs, mask = model.forward(Tensor(x_train[idx]))
            loss = bce_class(probs, y_train[idx], config.bce_epsilon)
            if supervised:
                att = bce_attention(mask, [gt_train[i] for i in idx], config.bce_epsilon)
                loss = joint_loss(loss, att, config.lambda_)
            value = float(loss.data)
            if not np.isfinite(value):
                raise RuntimeError(
                    f"non-finite training loss {value} at epoch {epoch}, batch {b}")
            loss.backward()
            adam_step(params, config.learning_rate)
            batch_losses.append(value)

        val_probs, val_masks = [], []
        for start in range(0, len(x_val), EVAL_BATCH):
            p, m = model.forward(Tensor(x_val[start:start + EVAL_BATCH]))
            val_probs.append(p.data)
            if m is not None:
                val_masks.append(m.data)
        vp = np.concatenate(val_probs)
        vm = np.concatenate(val_masks) if val_masks else None
        val_loss = _split_loss(config.variant, config.lambda_, vp, y_val, vm,
                               gt_val, config.bce_epsilon)
        if not np.isfinite(val_loss):
            raise RuntimeError(f"non-finite validation loss at epoch {epoch}")
        val_acc = float(((vp >= 0.5) == (y_val == 1.0)).mean())
        history.append(EpochStats(epoch, float(np.mean(batch_losses)), val_loss, val_acc))

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_weights = {p.name: p.data.copy() for p in params}
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break

    for p in params:
        p.data[...] = best_weights[p.name]
    return TrainResult(model, history, best_epoch, best_val)


# -- evaluation helpers ----------------------------------------------------------


def evaluate_accuracy(model: ClassifierModel, samples: Sequence) -> float:
    """Fraction of samples whose thresholded probability matches the label."""
    probs, _ = predict(model, samples)
    labels = np.array([s.label for s in samples])
    return float(((probs >= 0.5) == (labels == 1)).mean())


def evaluate_attention_bce(model: ClassifierModel, samples: Sequence,
                           ppe: PpeTypeConfig = PPE_TYPES["helmet"],
                           epsilon: float = DEFAULT_BCE_EPSILON) -> float:
    """Mean per-cell BCE of the attention maps against pseudo ground truth."""
    _, masks = predict(model, samples)
    if masks is None:
        raise ValueError("model has no attention maps (plain variant)")
    return _bce_attention_np(masks, _gt_masks(samples, ppe), epsilon)


def mean_mask_iou(model: ClassifierModel, samples: Sequence,
                  ppe: PpeTypeConfig = PPE_TYPES["helmet"],
                  threshold: float = 0.5) -> float:
    """Mean IoU of the thresholded attention map against the pseudo-GT cells."""
    _, masks = predict(model, samples)
    if masks is None:
        raise ValueError("model has no attention maps (plain variant)")
    gts = _gt_masks(samples, ppe)
    scores = []
    for m, gt in zip(masks, gts):
        if gt is None:
            continue
        pred = m.reshape(gt.shape) > threshold
        truth = gt > 0.5
        union = np.logical_or(pred, truth).sum()
        inter = np.logical_and(pred, truth).sum()
        scores.append(inter / union if union else 0.0)
    if not scores:
        raise ValueError("no samples carry attention supervision")
    return float(np.mean(scores))


def sweep_lambda(train_samples: Sequence, val_samples: Sequence,
                 config: TrainConfig, lambdas: Sequence[float],
                 ppe: PpeTypeConfig = PPE_TYPES["helmet"]) -> tuple[float, list[dict]]:
    """Train super_sam once per lambda; pick the best validation accuracy.

    Returns ``(best_lambda, table)`` where table rows carry lambda, the best
    validation accuracy reached, and the training result.  Ties go to the
    first (lowest) lambda.
    """
    if not lambdas:
        raise ValueError("need at least one lambda to sweep")
    table = []
    for lam in lambdas:
        cfg = TrainConfig(variant="super_sam", lambda_=lam,
                          learning_rate=config.learning_rate,
                          batch_size=config.batch_size,
                          max_epochs=config.max_epochs, patience=config.patience,
                          seed=config.seed, bce_epsilon=config.bce_epsilon)
        result = train(train_samples, val_samples, cfg, ppe)
        acc = max(h.val_accuracy for h in result.history)
        table.append({"lambda": lam, "val_accuracy": acc, "result": result})
    best = max(table, key=lambda row: row["val_accuracy"])
    return best["lambda"], table
