"""Ring-buffer transition storage with consecutive-window sampling.

Transitions are pushed in environment order, so chronological successors sit
in adjacent slots.  Windows of up to three consecutive steps from a single
episode back the multi-step TD targets; a window may be shorter than the
requested width only when its episode terminates inside it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    indices: np.ndarray
    p_old: float
    reward: float
    next_state: np.ndarray
    terminal: bool
    truncated: bool
    episode_id: int
    step_id: int


@dataclass
class Batch:
    state: np.ndarray       # [B, obs]
    action: np.ndarray      # [B, M]
    indices: np.ndarray     # [B, M]
    p_old: np.ndarray       # [B]
    reward: np.ndarray      # [B]
    next_state: np.ndarray  # [B, obs]
    terminal: np.ndarray    # [B] bool
    truncated: np.ndarray   # [B] bool


@dataclass
class WindowBatch:
    """B windows of width up to W, padded; valid[b, k] marks real steps."""

    state: np.ndarray       # [B, W, obs]
    action: np.ndarray      # [B, W, M]
    indices: np.ndarray     # [B, W, M]
    p_old: np.ndarray       # [B, W]
    reward: np.ndarray      # [B, W]
    next_state: np.ndarray  # [B, W, obs]
    valid: np.ndarray       # [B, W] bool
    length: np.ndarray      # [B] int
    terminal_last: np.ndarray  # [B] bool; True when the last step terminates


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._size = 0
        self._pos = 0
        self._state = np.empty((capacity, obs_dim))
        self._action = np.empty((capacity, action_dim))
        self._indices = np.empty((capacity, action_dim), dtype=np.int64)
        self._p_old = np.empty(capacity)
        self._reward = np.empty(capacity)
        self._next_state = np.empty((capacity, obs_dim))
        self._terminal = np.empty(capacity, dtype=bool)
        self._truncated = np.empty(capacity, dtype=bool)
        self._episode = np.empty(capacity, dtype=np.int64)
        self._step = np.empty(capacity, dtype=np.int64)

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        if not 0.0 < t.p_old <= 1.0:
            raise ValueError(f"behavior probability must lie in (0, 1], got {t.p_old}")
        k = self._pos
        self._state[k] = t.state
        self._action[k] = t.action
        self._indices[k] = t.indices
        self._p_old[k] = t.p_old
        self._reward[k] = t.reward
        self._next_state[k] = t.next_state
        self._terminal[k] = t.terminal
        self._truncated[k] = t.truncated
        self._episode[k] = t.episode_id
        self._step[k] = t.step_id
        self._pos = (k + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def get(self, slot: int) -> Transition:
        if not 0 <= slot < self._size:
            raise IndexError("slot out of range")
        return Transition(
            state=self._state[slot].copy(),
            action=self._action[slot].copy(),
            indices=self._indices[slot].copy(),
            p_old=float(self._p_old[slot]),
            reward=float(self._reward[slot]),
            next_state=self._next_state[slot].copy(),
            terminal=bool(self._terminal[slot]),
            truncated=bool(self._truncated[slot]),
            episode_id=int(self._episode[slot]),
            step_id=int(self._step[slot]),
        )

    def _gather(self, idx: np.ndarray) -> Batch:
        return Batch(
            state=self._state[idx],
            action=self._action[idx],
            indices=self._indices[idx],
            p_old=self._p_old[idx],
            reward=self._reward[idx],
            next_state=self._next_state[idx],
            terminal=self._terminal[idx],
            truncated=self._truncated[idx],
        )

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform sampling with replacement."""
        if self._size < batch_size:
            raise RuntimeError(
                f"buffer holds {self._size} transitions, need {batch_size}"
            )
        idx = rng.integers(0, self._size, size=batch_size)
        return self._gather(idx)

    # -- consecutive windows ------------------------------------------------

    def _successor(self, slots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Chronological successor slot of each slot, with validity mask."""
        nxt = (slots + 1) % self.capacity
        if self._size < self.capacity:
            ok = nxt < self._size
        else:
            ok = nxt != self._pos
        same_ep = self._episode[nxt] == self._episode[slots]
        consecutive = self._step[nxt] == self._step[slots] + 1
        return nxt, ok & same_ep & consecutive

    def _build_windows(self, starts: np.ndarray, width: int):
        """Vectorized window construction; returns (slots, valid, ok)."""
        B = starts.shape[0]
        slots = np.zeros((B, width), dtype=np.int64)
        valid = np.zeros((B, width), dtype=bool)
        slots[:, 0] = starts
        valid[:, 0] = True
        ok = np.ones(B, dtype=bool)
        for k in range(1, width):
            prev = slots[:, k - 1]
            need_more = valid[:, k - 1] & ~self._terminal[prev]
            nxt, has_next = self._successor(prev)
            # a window must either reach full width or stop at a terminal
            ok &= ~need_more | has_next
            take = need_more & has_next
            slots[:, k] = np.where(take, nxt, prev)
            valid[:, k] = take
        return slots, valid, ok

    def sample_windows(self, batch_size: int, rng: np.random.Generator,
                       width: int = 3) -> WindowBatch:
        """Sample windows of consecutive same-episode steps, resampling starts
        whose successors are missing (evicted or not yet collected)."""
        if self._size < width:
            raise RuntimeError(
                f"buffer holds {self._size} transitions, need at least {width}"
            )
        collected_slots = []
        collected_valid = []
        remaining = batch_size
        for _ in range(200):
            draws = rng.integers(0, self._size, size=max(2 * remaining, 16))
            slots, valid, ok = self._build_windows(draws, width)
            if ok.any():
                collected_slots.append(slots[ok])
                collected_valid.append(valid[ok])
                remaining -= int(ok.sum())
            if remaining <= 0:
                break
        else:
            raise RuntimeError("could not find enough valid window starts")
        slots = np.concatenate(collected_slots)[:batch_size]
        valid = np.concatenate(collected_valid)[:batch_size]
        flat = slots.reshape(-1)
        length = valid.sum(axis=1)
        last = slots[np.arange(batch_size), length - 1]
        obs = self._state.shape[1]
        m = self._action.shape[1]
        return WindowBatch(
            state=self._state[flat].reshape(batch_size, width, obs),
            action=self._action[flat].reshape(batch_size, width, m),
            indices=self._indices[flat].reshape(batch_size, width, m),
            p_old=self._p_old[flat].reshape(batch_size, width),
            reward=self._reward[flat].reshape(batch_size, width),
            next_state=self._next_state[flat].reshape(batch_size, width, obs),
            valid=valid,
            length=length,
            terminal_last=self._terminal[last],
        )
