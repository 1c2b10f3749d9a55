"""Finite MDPs with factored discrete actions, plus JSON load/save.

A joint action is the tuple of one grid index per action dimension, flattened
row-major with the first dimension most significant:
``joint = n_0 * N^(M-1) + n_1 * N^(M-2) + ... + n_{M-1}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MAX_JOINT_ACTIONS = 10_000


@dataclass
class TabularMdp:
    """Transition and reward tables over S states and N^M joint actions."""

    transitions: np.ndarray  # [S, A, S]
    rewards: np.ndarray      # [S, A]
    gamma: float
    action_dims: int         # M
    actions_per_dim: int     # N
    initial_state: int = 0
    terminal_states: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        n_joint = self.actions_per_dim ** self.action_dims
        if n_joint > MAX_JOINT_ACTIONS:
            raise ValueError(
                f"N^M = {n_joint} exceeds the desk-scale cap {MAX_JOINT_ACTIONS}"
            )
        s, a = self.rewards.shape
        if self.transitions.shape != (s, a, s) or a != n_joint:
            raise ValueError(
                f"table shapes inconsistent: transitions {self.transitions.shape}, "
                f"rewards {self.rewards.shape}, expected A = {n_joint}"
            )
        row_sums = self.transitions.sum(axis=2)
        if not np.allclose(row_sums, 1.0, atol=1e-12):
            raise ValueError("transition rows must sum to 1 within 1e-12")
        if np.any(self.transitions < 0.0):
            raise ValueError("transition probabilities must be non-negative")
        self.terminal_states = tuple(int(t) for t in self.terminal_states)

    @property
    def num_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_joint_actions(self) -> int:
        return self.rewards.shape[1]

    def joint_index(self, dim_indices: np.ndarray) -> int:
        """Flatten per-dimension grid indices into one joint action index."""
        idx = 0
        for n in np.asarray(dim_indices).reshape(-1):
            idx = idx * self.actions_per_dim + int(n)
        return idx

    def dim_indices(self, joint: int) -> np.ndarray:
        """Inverse of joint_index."""
        out = np.empty(self.action_dims, dtype=np.int64)
        for m in range(self.action_dims - 1, -1, -1):
            out[m] = joint % self.actions_per_dim
            joint //= self.actions_per_dim
        return out


def save_mdp_json(mdp: TabularMdp, path, max_episode_steps: int = 50) -> None:
    doc = {
        "gamma": mdp.gamma,
        "num_states": mdp.num_states,
        "action_dims": mdp.action_dims,
        "actions_per_dim": mdp.actions_per_dim,
        "transitions": mdp.transitions.tolist(),
        "rewards": mdp.rewards.tolist(),
        "initial_state": mdp.initial_state,
        "terminal_states": list(mdp.terminal_states),
        "max_episode_steps": max_episode_steps,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def load_mdp_json(path) -> tuple[TabularMdp, int]:
    """Load a tabular MDP; returns (mdp, max_episode_steps)."""
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    try:
        mdp = TabularMdp(
            transitions=np.asarray(doc["transitions"], dtype=np.float64),
            rewards=np.asarray(doc["rewards"], dtype=np.float64),
            gamma=float(doc["gamma"]),
            action_dims=int(doc["action_dims"]),
            actions_per_dim=int(doc["actions_per_dim"]),
            initial_state=int(doc.get("initial_state", 0)),
            terminal_states=tuple(doc.get("terminal_states", ())),
        )
    except KeyError as exc:
        raise ValueError(f"tabular MDP file {path} is missing field {exc}") from exc
    return mdp, int(doc.get("max_episode_steps", 50))


def chain_mdp() -> TabularMdp:
    """Built-in 5-state chain with M=2 dimensions and N=3 actions per dim.

    The first dimension steers movement along the chain (left/stay/right with
    some slip), the second trades reward against a control cost.  Tables are
    fixed constants so every run sees the same MDP.
    """
    s_count, m, n = 5, 2, 3
    a_count = n ** m
    transitions = np.zeros((s_count, a_count, s_count))
    rewards = np.zeros((s_count, a_count))
    moves = (-1, 0, 1)
    for s in range(s_count):
        for n0 in range(n):
            for n1 in range(n):
                a = n0 * n + n1
                target = min(max(s + moves[n0], 0), s_count - 1)
                stay = s
                transitions[s, a, target] += 0.8
                transitions[s, a, stay] += 0.15
                # slip opposite to the intended move
                slip = min(max(s - moves[n0], 0), s_count - 1)
                transitions[s, a, slip] += 0.05
                rewards[s, a] = (
                    1.0 * (s == s_count - 1)
                    - 0.1 * abs(moves[n0])
                    + 0.2 * moves[n1] * (s / (s_count - 1) - 0.5)
                )
    return TabularMdp(
        transitions=transitions,
        rewards=rewards,
        gamma=0.95,
        action_dims=m,
        actions_per_dim=n,
    )
