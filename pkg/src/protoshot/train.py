"""Episodic meta-training: sample episode -> gradients -> optimizer step,
with periodic validation on frozen parameters.

The whole run is a pure function of (datasets, configs, seed); wall time is
the only nondeterministic field in the history.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .embed import EmbeddingNetwork, loss_gradients
from .episodes import EpisodeConfig, sample_episode
from .errors import ShapeMismatch
from .rng import Rng, derive_seed

# fixed stream tags so training and validation never share draws
_TRAIN_STREAM = 0x7E1
_VAL_STREAM = 0x7E2


@dataclass(frozen=True)
class TrainConfig:
    episodes_total: int = 1000
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    val_every: int = 100
    val_episodes: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.episodes_total < 1:
            raise ValueError("episodes_total must be >= 1")
        if self.learning_rate < 0:
            # lr = 0 is allowed as an explicit no-op probe
            raise ValueError("learning_rate must be >= 0")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("adam betas must lie in (0, 1)")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class OptimizerState:
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


@dataclass
class HistoryRecord:
    episode: int
    loss: float
    val_accuracy: float
    elapsed_s: float


def optimizer_step(params, grads, state: OptimizerState, config: TrainConfig):
    """One sgd or adam update; returns (new params, new state)."""
    if len(params) != len(grads) or any(
        p.shape != g.shape for p, g in zip(params, grads)
    ):
        raise ShapeMismatch("gradient shapes do not match parameters")
    lr = config.learning_rate
    if config.optimizer == "sgd":
        new_params = [p - lr * g for p, g in zip(params, grads)]
        return new_params, OptimizerState(step=state.step + 1, m=state.m, v=state.v)
    # adam
    if not state.m:
        state = OptimizerState(
            step=state.step,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )
    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    new_m, new_v, new_params = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + config.eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, OptimizerState(step=t, m=new_m, v=new_v)


def validation_seed(master_seed: int) -> int:
    """The fixed seed used for every validation pass of a run."""
    return derive_seed(master_seed, _VAL_STREAM)


def meta_train(
    train_dataset,
    val_dataset,
    episode_config: EpisodeConfig,
    config: TrainConfig,
    network: EmbeddingNetwork,
):
    """Run the episodic training loop; returns (trained network, history)."""
    from .evaluate import evaluate  # local import avoids a module cycle

    rng = Rng(derive_seed(config.seed, _TRAIN_STREAM))
    val_seed = validation_seed(config.seed)
    state = OptimizerState()
    history = []
    t0 = time.perf_counter()
    loss = float("nan")
    for ep in range(1, config.episodes_total + 1):
        episode = sample_episode(train_dataset, episode_config, rng)
        grads, loss = loss_gradients(network, episode)
        if grads:
            params, state = optimizer_step(network.params(), grads, state, config)
            network = network.with_params(params)
        if ep % config.val_every == 0 or ep == config.episodes_total:
            row, _ = evaluate(
                val_dataset, network, episode_config, config.val_episodes, val_seed
            )
            history.append(
                HistoryRecord(
                    episode=ep,
                    loss=loss,
                    val_accuracy=row.accuracy_mean,
                    elapsed_s=time.perf_counter() - t0,
                )
            )
    return network, history


def save_history_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "loss", "val_accuracy", "elapsed_s"])
        for rec in history:
            writer.writerow(
                [rec.episode, repr(rec.loss), repr(rec.val_accuracy), f"{rec.elapsed_s:.3f}"]
            )
