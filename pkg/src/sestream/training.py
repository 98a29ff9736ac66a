"""Desk-scale training loop: adaptive-moment updates with an EMA of the weights.

Every stochastic choice (batch indices, crop offsets, schedules, noise) is
derived from (seed, global step), so a run is bit-reproducible and resuming
from a checkpoint continues the exact same trajectory.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import read_manifest
from .errors import ConfigError, NumericError
from .grad import ParamStore
from .losses import build_batch, dp_loss, dsm_loss, mse_loss
from .sde import BbedParams
from .spectral import StftConfig, analyze_stream, compress
from .unet import BlockCausalUNet, UNetConfig
from .wavio import read_wav


class Adam:
    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: ParamStore) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for name, p in params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m = self.m.setdefault(name, np.zeros_like(p.data))
            v = self.v.setdefault(name, np.zeros_like(p.data))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


class EMA:
    """Exponential moving average of the parameters; decay 0 tracks them exactly."""

    def __init__(self, decay: float, params: ParamStore):
        self.decay = decay
        self.shadow = {name: p.data.copy() for name, p in params}

    def update(self, params: ParamStore) -> None:
        for name, p in params:
            self.shadow[name] *= self.decay
            self.shadow[name] += (1.0 - self.decay) * p.data


@dataclass
class TrainConfig:
    loss: str = "dp"
    steps: int = 500
    batch_size: int = 4
    lr: float = 1e-4
    ema_decay: float = 0.999
    K: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.loss not in ("dsm", "dp", "mse"):
            raise ConfigError(f"loss must be dsm|dp|mse, got {self.loss!r}")


def load_pairs(manifest, stft_cfg: StftConfig) -> list[tuple[np.ndarray, np.ndarray]]:
    """Load manifest WAV pairs as compressed complex spectrograms."""
    pairs = []
    for row in read_manifest(manifest):
        clean, _ = read_wav(row["clean_path"])
        noisy, _ = read_wav(row["noisy_path"])
        spec_c = compress(analyze_stream(clean, stft_cfg), stft_cfg)
        spec_n = compress(analyze_stream(noisy, stft_cfg), stft_cfg)
        pairs.append((spec_c.data, spec_n.data))
    return pairs


def write_curve(path, curve: list[tuple[int, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "ema_loss"])
        for row in curve:
            writer.writerow([row[0], f"{row[1]:.8e}", f"{row[2]:.8e}"])


def train_toy(
    manifest,
    unet_cfg: UNetConfig,
    train_cfg: TrainConfig,
    out_ckpt,
    stft_cfg: StftConfig | None = None,
    p: BbedParams | None = None,
    curve_path=None,
    resume=None,
    log_every: int = 0,
) -> tuple[Path, list[tuple[int, float, float]]]:
    """Train on a manifest of WAV pairs; returns (checkpoint path, loss curve)."""
    stft_cfg = stft_cfg or StftConfig()
    p = p or BbedParams()
    if train_cfg.loss in ("dsm", "dp") and unet_cfg.mode != "diffusion":
        raise ConfigError("dsm/dp losses need a diffusion-mode network")
    if train_cfg.loss == "mse" and unet_cfg.mode != "predictive":
        raise ConfigError("mse loss needs a predictive-mode network")
    pairs = load_pairs(manifest, stft_cfg)
    B = unet_cfg.buffer_len if unet_cfg.mode == "diffusion" else min(train_cfg.K, unet_cfg.global_stride)

    model = BlockCausalUNet(unet_cfg, seed=train_cfg.seed)
    adam = Adam(lr=train_cfg.lr)
    ema = EMA(train_cfg.ema_decay, model.params)
    start_step = 0
    if resume is not None:
        cfg_r, params_r, extra, meta = load_checkpoint(resume)
        if cfg_r.to_dict() != unet_cfg.to_dict():
            raise ConfigError("resume checkpoint was trained with a different configuration")
        model.params.load_state_dict(params_r)
        start_step = int(extra["train_step"][()])
        adam.t = int(extra["adam_t"][()])
        for name, _ in model.params:
            adam.m[name] = extra[f"adam_m/{name}"].copy()
            adam.v[name] = extra[f"adam_v/{name}"].copy()
            ema.shadow[name] = extra[f"ema/{name}"].copy()

    curve: list[tuple[int, float, float]] = []
    ema_loss = None
    for step in range(start_step, train_cfg.steps):
        rng = np.random.default_rng([train_cfg.seed & 0x7FFFFFFF, 101, step])
        idx = rng.integers(0, len(pairs), size=train_cfg.batch_size)
        batch = build_batch([pairs[i] for i in idx], train_cfg.K, B, p, rng)
        model.params.zero_grad()
        if train_cfg.loss == "mse":
            out = model.forward_batch_predictive(batch.y)
            loss = mse_loss(out, batch.x0)
        else:
            out = model.forward_batch(batch.v, batch.y, batch.schedules)
            loss = dsm_loss(out, batch.z, batch.sigma) if train_cfg.loss == "dsm" else dp_loss(out, batch.a)
        loss_val = float(loss.data)
        if not math.isfinite(loss_val):
            if curve_path is not None:
                write_curve(curve_path, curve)
            raise NumericError(f"training diverged (non-finite loss) at step {step}")
        loss.backward()
        adam.step(model.params)
        model.invalidate_cache()
        ema.update(model.params)
        ema_loss = loss_val if ema_loss is None else 0.98 * ema_loss + 0.02 * loss_val
        curve.append((step, loss_val, ema_loss))
        if log_every and (step % log_every == 0 or step == train_cfg.steps - 1):
            print(f"step {step}: loss {loss_val:.5f} (ema {ema_loss:.5f})", flush=True)

    extra = {"train_step": np.float64(train_cfg.steps), "adam_t": np.float64(adam.t)}
    for name, _ in model.params:
        extra[f"adam_m/{name}"] = adam.m.get(name, np.zeros(1))
        extra[f"adam_v/{name}"] = adam.v.get(name, np.zeros(1))
        extra[f"ema/{name}"] = ema.shadow[name]
    meta = {"loss": train_cfg.loss, "seed": train_cfg.seed, "steps": train_cfg.steps, "K": train_cfg.K}
    save_checkpoint(out_ckpt, model, extra=extra, meta=meta)
    if curve_path is not None:
        write_curve(curve_path, curve)
    return Path(out_ckpt), curve


def load_model_for_inference(ckpt_path, use_ema: bool = True) -> BlockCausalUNet:
    """Rebuild the network from a checkpoint, preferring the EMA weights."""
    cfg, params, extra, _ = load_checkpoint(ckpt_path)
    model = BlockCausalUNet(cfg, seed=0)
    state = dict(params)
    if use_ema:
        ema_state = {k[4:]: v for k, v in extra.items() if k.startswith("ema/")}
        if set(ema_state) == set(params):
            state = ema_state
    model.params.load_state_dict(state)
    model.invalidate_cache()
    return model
