"""Training loop: Adam over the combined loss with a linear alpha ramp,
per-epoch checkpointing, and deterministic resume.

Each epoch derives its own generator from (seed, epoch), so shuffling and
augmentation draws are identical whether the run was interrupted or not.
Batches are accumulated one patch at a time; each example's backward pass
is seeded with 1/B so the summed gradient is the batch mean.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .checkpoint import save_checkpoint, load_checkpoint
from .dataset import dataset_from_config
from .losses import (
    LossSchedule,
    chamfer_distance,
    density_aware_chamfer,
    total_loss,
)
from .network import ModelConfig, ModelParams, pumfa_forward
from .optim import Adam
from .patches import augment


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainResult:
    history: list = field(default_factory=list)   # one dict per optimizer step
    initial_metrics: dict = field(default_factory=dict)
    final_metrics: dict = field(default_factory=dict)
    checkpoint_path: str = ""
    epochs_run: int = 0
    params: object = None


def _epoch_rng(seed, epoch):
    return np.random.default_rng([int(seed), int(epoch)])


def _has_norm_stats(params):
    return all(int(block.bn.num_batches[0]) > 0 for block in params.gcr)


def inference_mode(params):
    """Batch-norm mode for forward passes outside training: running stats
    once any exist, per-cloud stats for a never-trained model."""
    return "eval" if _has_norm_stats(params) else "batch"


def evaluate_on_pairs(params, pairs):
    """Mean patch-space metrics of the current model over a pair list."""
    cd_qp, cd_q, dcd_q = 0.0, 0.0, 0.0
    mode = inference_mode(params)
    with T.no_grad():
        for pair in pairs:
            res = pumfa_forward(pair.input, params, mode=mode)
            q = np.asarray(res.q.data, dtype=np.float64)
            qp = np.asarray(res.q_prime.data, dtype=np.float64)
            cd_qp += chamfer_distance(qp, pair.target)
            cd_q += chamfer_distance(q, pair.target)
            dcd_q += density_aware_chamfer(q, pair.target)
    n = len(pairs)
    return {"cd_qp_d": cd_qp / n, "cd_q_d": cd_q / n, "dcd_q_d": dcd_q / n}


def _checkpoint_config(config):
    out = {f"model.{k}": str(v) for k, v in config.model.to_dict().items()}
    out["train.seed"] = str(config.seed)
    out["train.learning_rate"] = repr(config.learning_rate)
    out["train.alpha_start"] = repr(config.alpha_start)
    out["train.alpha_end"] = repr(config.alpha_end)
    return out


def _write_checkpoint(config, params, opt, epoch_done, step):
    arrays = params.to_arrays()
    arrays.update(opt.state_arrays())
    arrays["trainer.epoch"] = np.array([epoch_done], dtype=np.float32)
    arrays["trainer.step"] = np.array([step], dtype=np.float32)
    save_checkpoint(config.checkpoint_path, arrays, _checkpoint_config(config))


def load_model(path):
    """Rebuild a ModelParams from a checkpoint written by train()."""
    config, arrays = load_checkpoint(path)
    model_kw = {k.split(".", 1)[1]: v for k, v in config.items()
                if k.startswith("model.")}
    if not model_kw:
        raise TrainingError(f"{path} carries no model configuration")
    cfg = ModelConfig.from_dict(model_kw)
    params = ModelParams(cfg, np.random.default_rng(0))
    params.load_arrays(arrays)
    return params


def train(config, dataset=None, resume=False, log=None):
    if dataset is None:
        dataset = dataset_from_config(config)
    if not dataset:
        raise TrainingError("empty dataset")
    for pair in dataset:
        if len(pair.input) != config.model.n or pair.ratio != config.model.r:
            raise TrainingError(
                f"dataset pair is {len(pair.input)}x{pair.ratio}, model wants "
                f"{config.model.n}x{config.model.r}"
            )

    params = ModelParams(
        config.model,
        np.random.default_rng(config.seed),
        zero_residual_heads=config.zero_residual_heads,
    )
    opt = Adam(list(params.named_parameters()), lr=config.learning_rate)
    steps_per_epoch = math.ceil(len(dataset) / config.batch_size)
    schedule = LossSchedule(
        total_steps=config.epochs * steps_per_epoch,
        alpha_start=config.alpha_start,
        alpha_end=config.alpha_end,
    )

    start_epoch = 0
    if resume and os.path.exists(config.checkpoint_path):
        stored, arrays = load_checkpoint(config.checkpoint_path)
        expect = _checkpoint_config(config)
        for key, val in expect.items():
            if key.startswith("model.") and stored.get(key) != val:
                raise TrainingError(
                    f"checkpoint {key}={stored.get(key)} conflicts with "
                    f"configured {val}"
                )
        params.load_arrays(arrays)
        opt.load_state_arrays(arrays)
        start_epoch = int(arrays["trainer.epoch"][0])
        schedule.step = int(arrays["trainer.step"][0])

    result = TrainResult(checkpoint_path=config.checkpoint_path, params=params)
    result.epochs_run = start_epoch
    result.initial_metrics = evaluate_on_pairs(params, dataset)

    for epoch in range(start_epoch, config.epochs):
        rng = _epoch_rng(config.seed, epoch)
        order = rng.permutation(len(dataset))
        epoch_rows = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            opt.zero_grad()
            loss_sum = cd_qp = cd_q = dcd_q = 0.0
            for idx in batch:
                pair = augment(dataset[int(idx)], rng, config.augment)
                res = pumfa_forward(pair.input, params, mode="train")
                loss = total_loss(res.q_prime, res.q, pair.target, schedule)
                value = float(loss.data)
                if not np.isfinite(value):
                    raise TrainingError(
                        f"non-finite loss {value} at step {schedule.step} "
                        f"(epoch {epoch}, pair {int(idx)})"
                    )
                T.backward(loss, seed=1.0 / len(batch))
                loss_sum += value
                q = np.asarray(res.q.data, dtype=np.float64)
                qp = np.asarray(res.q_prime.data, dtype=np.float64)
                cd_qp += chamfer_distance(qp, pair.target)
                cd_q += chamfer_distance(q, pair.target)
                dcd_q += density_aware_chamfer(q, pair.target)
            row = {
                "step": schedule.step,
                "epoch": epoch,
                "alpha": schedule.alpha(),
                "loss": loss_sum / len(batch),
                "cd_qp_d": cd_qp / len(batch),
                "cd_q_d": cd_q / len(batch),
                "dcd_q_d": dcd_q / len(batch),
            }
            opt.step()
            schedule.advance()
            result.history.append(row)
            epoch_rows.append(row)

        _write_checkpoint(config, params, opt, epoch + 1, schedule.step)
        result.epochs_run = epoch + 1
        if log is not None:
            mean = {k: float(np.mean([r[k] for r in epoch_rows]))
                    for k in ("loss", "cd_qp_d", "cd_q_d", "dcd_q_d")}
            log(
                f"epoch {epoch + 1}/{config.epochs} step {schedule.step} "
                f"alpha {schedule.alpha():.3f} loss {mean['loss']:.6f} "
                f"cd_qp {mean['cd_qp_d']:.6f} cd_q {mean['cd_q_d']:.6f} "
                f"dcd_q {mean['dcd_q_d']:.6f}"
            )

    result.final_metrics = evaluate_on_pairs(params, dataset)
    return result
