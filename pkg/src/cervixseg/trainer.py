"""Training and evaluation engine.

Adam on the composite loss, per-epoch validation, best-validation-loss and
final checkpoints, JSONL history. Everything is deterministic for a fixed
seed: parameter init, batch order and augmentation draws all derive from it.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import ConfigError, TrainingError
from .losses import LossWeights, total_loss
from .metrics import MetricsReport, confusion_and_rates, iou, roc_auc
from .model import MultiTaskUNet, NetworkConfig, build_model, load_checkpoint, save_checkpoint
from .phantom import Sample
from .preprocess import AugmentationPolicy, SplitManifest, balance_and_augment

__all__ = ["TrainConfig", "RunRecord", "train", "evaluate", "overfit_probe", "load_split_samples"]


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 4
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    weight_decay: float = 5e-4
    seed: int = 0
    loss: LossWeights = field(default_factory=LossWeights)
    network: NetworkConfig = field(default_factory=NetworkConfig.desk)
    augmentation: AugmentationPolicy = field(default_factory=AugmentationPolicy)
    balance_splits: tuple[str, ...] = ("train", "val")
    balance_ratio: float = 0.5
    majority_multiplier: int = 1
    pos_weight_mode: str = "auto"  # "auto": neg/pos of the training data as fed; "fixed": use loss.pos_weight

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs: need >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size: need >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate: need > 0, got {self.learning_rate}")
        if self.pos_weight_mode not in ("auto", "fixed"):
            raise ConfigError(f"pos_weight_mode: expected 'auto' or 'fixed', got {self.pos_weight_mode!r}")
        self.network.validate()


@dataclass
class RunRecord:
    config: dict
    history: list[dict]
    best_epoch: int
    best_val_loss: float
    checkpoint_best: str
    checkpoint_last: str
    wall_clock_sec: float

    def to_json(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))


def _batch_tensors(samples: list[Sample]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    images = torch.from_numpy(np.stack([s.image for s in samples])[:, None]).float()
    masks = torch.from_numpy(np.stack([s.mask for s in samples])[:, None]).float()
    labels = torch.tensor([float(s.label) for s in samples])
    return images, masks, labels


def _decay_param_groups(model: MultiTaskUNet, weight_decay: float) -> list[dict]:
    # Regularize conv/dense weight matrices only; biases and norm parameters
    # train without decay.
    decay, no_decay = [], []
    for name, p in model.named_parameters():
        (decay if p.ndim > 1 else no_decay).append(p)
    return [
        {"params": decay, "weight_decay": weight_decay},
        {"params": no_decay, "weight_decay": 0.0},
    ]


def _check_finite(value: torch.Tensor, epoch: int, step: int) -> None:
    if not torch.isfinite(value):
        raise TrainingError(f"non-finite loss at epoch {epoch}, step {step}: {value.item()}")


def _epoch_pass(
    model: MultiTaskUNet,
    samples: list[Sample],
    order: np.ndarray,
    batch_size: int,
    weights: LossWeights,
    optimizer: torch.optim.Optimizer | None,
    epoch: int,
) -> dict:
    training = optimizer is not None
    model.train(training)
    seg_sum = cls_sum = 0.0
    n_batches = 0
    with torch.enable_grad() if training else torch.no_grad():
        for start in range(0, len(order), batch_size):
            batch = [samples[i] for i in order[start : start + batch_size]]
            images, masks, labels = _batch_tensors(batch)
            out = model(images)
            total, seg, cls = total_loss(masks, out.seg_probs, labels, out.cls_probs, weights)
            _check_finite(total, epoch, n_batches)
            if training:
                optimizer.zero_grad()
                total.backward()
                optimizer.step()
            seg_sum += seg.item()
            cls_sum += cls.item()
            n_batches += 1
    n = max(n_batches, 1)
    seg_mean, cls_mean = seg_sum / n, cls_sum / n
    # total recorded as the exact sum of its components
    return {"total": seg_mean + cls_mean, "seg": seg_mean, "cls": cls_mean}


def load_split_samples(
    samples: list[Sample], splits: SplitManifest
) -> dict[str, list[Sample]]:
    """Materialize per-split sample lists from a split manifest."""
    by_id = {s.sample_id: s for s in samples}
    out: dict[str, list[Sample]] = {}
    for name, ids in splits.splits.items():
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise FileNotFoundError(f"split '{name}' references unknown sample ids: {missing[:5]}")
        out[name] = [by_id[i] for i in ids]
    return out


def train(
    config: TrainConfig,
    samples: list[Sample],
    splits: SplitManifest,
    run_dir,
) -> RunRecord:
    """Optimize the multi-task network; write run artifacts under run_dir.

    Layout: config.json, history.jsonl (one epoch per line),
    checkpoints/{best,last}.pt. The best checkpoint minimizes validation
    total loss.
    """
    config.validate()
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "checkpoints").mkdir(exist_ok=True)

    per_split = load_split_samples(samples, splits)
    if not per_split.get("train") or not per_split.get("val"):
        raise ValueError("train and val splits must both be nonempty")

    to_balance = {k: v for k, v in per_split.items() if k in config.balance_splits}
    if to_balance:
        balanced = balance_and_augment(
            to_balance,
            config.augmentation,
            target_ratio=config.balance_ratio,
            rng_seed=config.seed,
            majority_multiplier=config.majority_multiplier,
        )
        per_split.update(balanced)

    train_samples = per_split["train"]
    val_samples = per_split["val"]
    labels = [s.label for s in train_samples]
    if len(set(labels)) < 2:
        raise ValueError("training split must contain both classes")

    weights = config.loss
    if config.pos_weight_mode == "auto":
        n_pos = sum(labels)
        weights = LossWeights(
            alpha=weights.alpha,
            beta=weights.beta,
            pos_weight=(len(labels) - n_pos) / n_pos,
            epsilon=weights.epsilon,
        )

    torch.manual_seed(config.seed)
    model = build_model(config.network, seed=config.seed)
    optimizer = torch.optim.Adam(
        _decay_param_groups(model, config.weight_decay),
        lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
    )

    config_doc = asdict(config)
    config_doc["loss_effective"] = asdict(weights)
    (run_dir / "config.json").write_text(json.dumps(config_doc, indent=2, default=str))

    best_val = float("inf")
    best_epoch = -1
    history: list[dict] = []
    t0 = time.time()
    val_order = np.arange(len(val_samples))
    with open(run_dir / "history.jsonl", "w") as hist_file:
        for epoch in range(config.epochs):
            order = np.random.default_rng([config.seed, epoch]).permutation(len(train_samples))
            tr = _epoch_pass(model, train_samples, order, config.batch_size, weights, optimizer, epoch)
            va = _epoch_pass(model, val_samples, val_order, config.batch_size, weights, None, epoch)
            entry = {"epoch": epoch, "train": tr, "val": va, "sec": round(time.time() - t0, 3)}
            history.append(entry)
            hist_file.write(json.dumps(entry) + "\n")
            hist_file.flush()
            if va["total"] < best_val:
                best_val = va["total"]
                best_epoch = epoch
                save_checkpoint(
                    model,
                    run_dir / "checkpoints" / "best.pt",
                    extra={"epoch": epoch, "val_loss": best_val},
                )
    save_checkpoint(
        model,
        run_dir / "checkpoints" / "last.pt",
        extra={"epoch": config.epochs - 1, "val_loss": history[-1]["val"]["total"]},
    )

    record = RunRecord(
        config=config_doc,
        history=history,
        best_epoch=best_epoch,
        best_val_loss=best_val,
        checkpoint_best=str(run_dir / "checkpoints" / "best.pt"),
        checkpoint_last=str(run_dir / "checkpoints" / "last.pt"),
        wall_clock_sec=round(time.time() - t0, 3),
    )
    record.save(run_dir / "run.json")
    return record


def evaluate(
    checkpoint,
    samples: list[Sample],
    threshold: float = 0.5,
    batch_size: int = 8,
) -> tuple[MetricsReport, list[dict]]:
    """Metrics of a checkpoint over a sample list; no parameter is touched.

    Returns the report plus per-image rows (id, label, score, prediction,
    IoU) for delimited output. AUC is absent when only one class is present.
    """
    if not samples:
        raise ValueError("evaluate needs a nonempty split")
    if isinstance(checkpoint, MultiTaskUNet):
        model = checkpoint
    else:
        model, _ = load_checkpoint(checkpoint)
    model.eval()

    rows: list[dict] = []
    ious: list[float] = []
    scores: list[float] = []
    labels: list[int] = []
    with torch.no_grad():
        for start in range(0, len(samples), batch_size):
            batch = samples[start : start + batch_size]
            images, _, _ = _batch_tensors(batch)
            out = model(images)
            seg = (out.seg_probs[:, 0].numpy() >= 0.5).astype(np.uint8)
            probs = out.cls_probs.numpy()
            for s, pred_mask, p in zip(batch, seg, probs):
                sample_iou = iou(s.mask, pred_mask)
                ious.append(sample_iou)
                scores.append(float(p))
                labels.append(s.label)
                rows.append(
                    {
                        "id": s.sample_id,
                        "label": s.label,
                        "score": float(p),
                        "prediction": int(p >= threshold),
                        "iou": sample_iou,
                    }
                )

    report = confusion_and_rates(labels, scores, threshold=threshold)
    report.mean_iou = float(np.mean(ious))
    report.iou_sd = float(np.std(ious))
    if len(set(labels)) == 2:
        report.auc = roc_auc(labels, scores)
    return report, rows


def overfit_probe(
    samples: list[Sample],
    network: NetworkConfig | None = None,
    weights: LossWeights | None = None,
    steps: int = 200,
    learning_rate: float = 2e-3,
    seed: int = 0,
) -> dict:
    """Sanity run: drive one fixed batch until the network memorizes it.

    Returns per-step losses plus final classification correctness.
    """
    network = network or NetworkConfig.desk()
    weights = weights or LossWeights()
    torch.manual_seed(seed)
    model = build_model(network, seed=seed)
    model.train()
    optimizer = torch.optim.Adam(_decay_param_groups(model, 0.0), lr=learning_rate)
    images, masks, labels = _batch_tensors(samples)

    losses = []
    for step in range(steps):
        out = model(images)
        total, seg, cls = total_loss(masks, out.seg_probs, labels, out.cls_probs, weights)
        _check_finite(total, 0, step)
        optimizer.zero_grad()
        total.backward()
        optimizer.step()
        losses.append({"total": total.item(), "seg": seg.item(), "cls": cls.item()})

    model.eval()
    with torch.no_grad():
        out = model(images)
    predictions = (out.cls_probs >= 0.5).int().tolist()
    return {
        "losses": losses,
        "final_seg_loss": losses[-1]["seg"],
        "predictions": predictions,
        "labels": [s.label for s in samples],
        "all_correct": predictions == [s.label for s in samples],
    }
