"""Shared interaction/training loop and greedy evaluation.

Both algorithms interact for ``total_steps`` environment steps, filling the
replay buffer with uniform-random grid actions during warmup, then training
once per environment step.  Greedy evaluation runs every ``eval_every`` steps
on a fresh environment instance with seeds derived from the run seed, so a
rerun with the same configuration reproduces the metric rows exactly.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .envs import make_env
from .replay import ReplayBuffer, Transition


@dataclass
class MetricsRow:
    env_step: int
    eval_return_mean: float
    eval_return_std: float
    alpha: float
    entropy: float
    critic_loss: float
    policy_loss: float
    wall_clock_s: float


def evaluate(agent, env_id: str, episodes: int, seed_base: int) -> tuple[float, float]:
    """Mean and population std of greedy episode returns."""
    env = make_env(env_id)
    returns = []
    for ep in range(episodes):
        state = env.reset(seed=seed_base + ep)
        total = 0.0
        while True:
            action, _, _ = agent.act(state, explore=False, rng=None)
            result = env.step(action)
            total += result.reward
            state = result.next_state
            if result.terminal or result.truncated:
                break
        returns.append(total)
    arr = np.asarray(returns)
    return float(arr.mean()), float(arr.std())


def run_training(agent, env, cfg, rng: np.random.Generator,
                 checkpoint_fn: Callable[[int], None] | None = None,
                 stop_fn: Callable[[list[MetricsRow]], bool] | None = None,
                 ) -> list[MetricsRow]:
    start = time.perf_counter()
    obs_dim = env.spec.state_dim
    m = env.spec.action_dim
    buffer = ReplayBuffer(cfg.buffer_capacity, obs_dim, m)
    grid = agent.grid
    n = grid.n_bins
    uniform_p = float(n) ** (-m)

    rows: list[MetricsRow] = []
    recent_entropy: deque[float] = deque(maxlen=500)
    recent_critic: deque[float] = deque(maxlen=200)
    recent_policy: deque[float] = deque(maxlen=200)

    state = env.reset(seed=cfg.seed)
    episode_id = 0
    step_in_episode = 0

    for t in range(1, cfg.total_steps + 1):
        if t <= cfg.warmup_steps:
            indices = rng.integers(0, n, size=m)
            action = grid.actions(indices)
            p_joint = uniform_p
        else:
            action, p_joint, indices = agent.act(state, explore=True, rng=rng)
        result = env.step(action)
        buffer.push(Transition(
            state=state,
            action=action,
            indices=indices,
            p_old=p_joint,
            reward=result.reward,
            next_state=result.next_state,
            terminal=result.terminal,
            truncated=result.truncated,
            episode_id=episode_id,
            step_id=step_in_episode,
        ))
        if result.terminal or result.truncated:
            state = env.reset()
            episode_id += 1
            step_in_episode = 0
        else:
            state = result.next_state
            step_in_episode += 1

        if t > cfg.warmup_steps and len(buffer) >= cfg.batch_size:
            stats = agent.train_step(buffer, rng)
            recent_entropy.append(stats["entropy"])
            recent_critic.append(stats["critic_loss"])
            recent_policy.append(stats["policy_loss"])

        if t % cfg.eval_every == 0:
            mean, std = evaluate(
                agent, cfg.env, cfg.eval_episodes,
                seed_base=cfg.seed * 1_000_003 + t,
            )
            if recent_entropy:
                entropy = float(np.mean(recent_entropy))
            else:
                entropy = float(agent.state_entropy(state))
            rows.append(MetricsRow(
                env_step=t,
                eval_return_mean=mean,
                eval_return_std=std,
                alpha=agent.temperature.alpha,
                entropy=entropy,
                critic_loss=float(np.mean(recent_critic)) if recent_critic else 0.0,
                policy_loss=float(np.mean(recent_policy)) if recent_policy else 0.0,
                wall_clock_s=time.perf_counter() - start,
            ))
        if checkpoint_fn is not None and t % cfg.checkpoint_every == 0:
            checkpoint_fn(t)
        if stop_fn is not None and rows and t % cfg.eval_every == 0:
            if stop_fn(rows):
                break
    return rows
