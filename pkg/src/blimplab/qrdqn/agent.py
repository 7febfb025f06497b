"""Quantile-regression DQN: loss, Bellman targets, replay, optimizer, training loop."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..env import N_ACTIONS, OBS_DIM
from .network import (
    PARAM_NAMES, QuantileTable, backward, copy_params, forward_batch, init_params,
    quantile_midpoints,
)

log = logging.getLogger(__name__)

METRICS_COLUMNS = ("episode", "env_step", "return", "mean_loss", "epsilon")


@dataclass(frozen=True)
class AgentConfig:
    n_quantiles: int = 12
    hidden: int = 64
    learning_rate: float = 1e-4
    gamma: float = 0.99
    kappa: float = 1.0
    target_sync: int = 1000  # optimizer steps between target-network copies
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_grad_norm: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.n_quantiles <= 12:
            raise ValueError("n_quantiles must be in [2, 12]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if self.kappa <= 0 or self.learning_rate <= 0 or self.target_sync < 1:
            raise ValueError("kappa, learning_rate and target_sync must be positive")

    def config_hash(self):
        d = asdict(self)
        d.pop("seed")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class TrainSchedule:
    total_steps: int = 200_000
    warmup_steps: int = 1_000
    batch_size: int = 64
    buffer_capacity: int = 100_000
    train_every: int = 1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int | None = None  # None: half of total_steps
    eval_interval: int = 0  # checkpoint every this many env steps, 0 = never
    seed: int = 0

    def __post_init__(self):
        if self.train_every < 1:
            raise ValueError("train_every must be >= 1")
        if self.total_steps < 0 or self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("invalid step counts or buffer size")
        if not 0 <= self.epsilon_end <= self.epsilon_start <= 1:
            raise ValueError("epsilon schedule must be non-increasing within [0, 1]")

    def epsilon(self, step):
        n = self.epsilon_decay_steps
        if n is None:
            n = max(1, self.total_steps // 2)
        frac = min(1.0, step / n) if n > 0 else 1.0
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray

    def __len__(self):
        return len(self.actions)


class ReplayBuffer:
    def __init__(self, capacity, obs_dim=OBS_DIM):
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim))
        self.next_obs = np.zeros((self.capacity, obs_dim))
        self.actions = np.zeros(self.capacity, dtype=np.int64)
        self.rewards = np.zeros(self.capacity)
        self.dones = np.zeros(self.capacity, dtype=bool)
        self.pos = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, obs, action, reward, next_obs, done):
        i = self.pos
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = done
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size, rng):
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} transitions, need {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return Batch(self.obs[idx], self.actions[idx], self.rewards[idx],
                     self.next_obs[idx], self.dones[idx])


def select_action(q, epsilon, rng):
    """Epsilon-greedy over quantile means; ties go to the lowest index."""
    values = q.values if isinstance(q, QuantileTable) else np.asarray(q)
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(values.shape[0]))
    return int(np.argmax(values.mean(axis=1)))


def td_targets(batch, target_params, gamma, n_actions=N_ACTIONS):
    """Bellman target quantiles, shape (B, N)."""
    q_next = forward_batch(target_params, batch.next_obs, n_actions)
    best = np.argmax(q_next.mean(axis=2), axis=1)
    chosen = q_next[np.arange(len(best)), best]
    live = (~np.asarray(batch.dones, dtype=bool)).astype(float)
    return np.asarray(batch.rewards, dtype=float)[:, None] + gamma * live[:, None] * chosen


def quantile_huber_loss(pred, targets, taus, kappa=1.0):
    """Mean over all (pred_i, target_j) pairs; returns (loss, dloss/dpred).

    Accepts N-vectors or (B, N) arrays; the batch loss is the mean of the
    per-sample losses.
    """
    pred = np.asarray(pred, dtype=float)
    targets = np.asarray(targets, dtype=float)
    single = pred.ndim == 1
    p = np.atleast_2d(pred)
    t = np.atleast_2d(targets)
    n = p.shape[1]
    u = t[:, None, :] - p[:, :, None]  # (B, i, j)
    au = np.abs(u)
    huber = np.where(au <= kappa, 0.5 * u * u, kappa * (au - 0.5 * kappa))
    weight = np.abs(np.asarray(taus)[None, :, None] - (u < 0.0))
    per_sample = (weight * huber).sum(axis=(1, 2)) / (kappa * n * t.shape[1])
    dhuber = np.clip(u, -kappa, kappa)
    grad = -(weight * dhuber).sum(axis=2) / (kappa * n * t.shape[1])
    if single:
        return float(per_sample[0]), grad[0]
    b = p.shape[0]
    return float(per_sample.mean()), grad / b


def loss_and_grads(params, batch, targets, taus, kappa, n_actions=N_ACTIONS):
    out, cache = forward_batch(params, batch.obs, n_actions, keep_cache=True)
    rows = np.arange(len(batch))
    pred = out[rows, batch.actions]
    loss, dpred = quantile_huber_loss(pred, targets, taus, kappa)
    d_out = np.zeros_like(out)
    d_out[rows, batch.actions] = dpred
    return loss, backward(params, cache, d_out)


class QRDQNAgent:
    def __init__(self, config=None, n_actions=N_ACTIONS, obs_dim=OBS_DIM):
        self.config = config or AgentConfig()
        self.n_actions = n_actions
        self.obs_dim = obs_dim
        self.rng = np.random.default_rng(self.config.seed)
        self.params = init_params(self.rng, obs_dim, self.config.hidden, n_actions,
                                  self.config.n_quantiles)
        self.target_params = copy_params(self.params)
        self.adam_m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_v = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_t = 0
        self.update_count = 0
        self.env_steps = 0
        self.config_mismatch = False

    @property
    def taus(self):
        return quantile_midpoints(self.config.n_quantiles)

    def quantiles(self, obs):
        vec = obs.vector if hasattr(obs, "vector") else obs
        return QuantileTable(forward_batch(self.params, vec, self.n_actions)[0])

    def act(self, obs, epsilon=0.0):
        return select_action(self.quantiles(obs), epsilon, self.rng)

    def greedy(self, obs):
        return select_action(self.quantiles(obs), 0.0, self.rng)

    def sync_target(self):
        self.target_params = copy_params(self.params)

    def update(self, batch):
        c = self.config
        targets = td_targets(batch, self.target_params, c.gamma, self.n_actions)
        loss, grads = loss_and_grads(self.params, batch, targets, self.taus, c.kappa,
                                     self.n_actions)
        norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
        if not np.isfinite(norm) or not np.isfinite(loss):
            log.warning("non-finite gradient at update %d; update skipped", self.update_count)
            return {"loss": loss, "grad_norm": norm, "skipped": True}
        if c.max_grad_norm and norm > c.max_grad_norm:
            scale = c.max_grad_norm / norm
            grads = {k: g * scale for k, g in grads.items()}
        self._adam_step(grads)
        self.update_count += 1
        if self.update_count % c.target_sync == 0:
            self.sync_target()
        return {"loss": loss, "grad_norm": norm, "skipped": False}

    def _adam_step(self, grads):
        c = self.config
        self.adam_t += 1
        b1, b2 = c.adam_beta1, c.adam_beta2
        corr1 = 1.0 - b1 ** self.adam_t
        corr2 = 1.0 - b2 ** self.adam_t
        for k in PARAM_NAMES:
            g = grads[k]
            m = self.adam_m[k]
            v = self.adam_v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            self.params[k] -= c.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + c.adam_eps)


@dataclass
class TrainResult:
    agent: QRDQNAgent
    metrics: list = field(default_factory=list)  # rows of METRICS_COLUMNS
    losses: list = field(default_factory=list)
    skipped_updates: int = 0


def train(env, agent, schedule, metrics_path=None, checkpoint_dir=None, progress=None):
    """Epsilon-greedy interaction with replay updates after warmup.

    Episodes end on the env's time limit. That is a truncation, not a
    terminal state, so stored transitions keep ``done=False`` and the
    Bellman target bootstraps through the reset boundary's last step.
    """
    result = TrainResult(agent)
    if schedule.total_steps == 0:
        if metrics_path is not None:
            write_metrics_csv(metrics_path, [])
        return result

    env_seed, agent_seed = np.random.SeedSequence(schedule.seed).spawn(2)
    agent.rng = np.random.default_rng(agent_seed)
    buffer = ReplayBuffer(schedule.buffer_capacity, agent.obs_dim)
    obs = env.reset(seed=env_seed).vector
    episode, ep_return, ep_losses = 0, 0.0, []
    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir else None

    for step in range(schedule.total_steps):
        eps = schedule.epsilon(step)
        a = agent.act(obs, eps)
        next_obs, reward, done, _ = env.step(a)
        next_vec = next_obs.vector
        buffer.add(obs, a, reward.total, next_vec, False)
        ep_return += reward.total
        agent.env_steps += 1
        obs = next_vec

        if (step >= schedule.warmup_steps and len(buffer) >= schedule.batch_size
                and step % schedule.train_every == 0):
            stats = agent.update(buffer.sample(schedule.batch_size, agent.rng))
            if stats["skipped"]:
                result.skipped_updates += 1
            else:
                result.losses.append(stats["loss"])
                ep_losses.append(stats["loss"])

        if done:
            mean_loss = float(np.mean(ep_losses)) if ep_losses else float("nan")
            result.metrics.append((episode, step + 1, ep_return, mean_loss, eps))
            if progress:
                progress(result.metrics[-1])
            episode += 1
            ep_return, ep_losses = 0.0, []
            obs = env.reset().vector

        if ckpt_dir and schedule.eval_interval and (step + 1) % schedule.eval_interval == 0:
            from .checkpoint import save_checkpoint
            ckpt_dir.mkdir(parents=True, exist_ok=True)
            save_checkpoint(agent, ckpt_dir / f"step_{step + 1:08d}.ckpt")

    if metrics_path is not None:
        write_metrics_csv(metrics_path, result.metrics)
    return result


def write_metrics_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        w.writerows(rows)
