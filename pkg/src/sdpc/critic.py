"""Twin continuous soft Q-networks with soft-updated targets and TD targets.

The critics score (state, action) pairs; bootstrap values always take the
minimum of the two target networks.  Targets add the temperature-weighted
policy entropy of the successor state and are cut off at true terminals;
time-limit truncation bootstraps normally.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .nn import Adam, Mlp, soft_mix
from .policy import ActionGrid, normalized_entropy, sample_indices
from .replay import Batch, WindowBatch


class SoftCriticPair:
    """Q1/Q2 online networks, their targets, optimizers and the mix rate."""

    def __init__(self, obs_dim: int, action_dim: int, hidden_dims, tau: float,
                 lr: float, rng: np.random.Generator):
        if not 0.0 < tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        widths = (obs_dim + action_dim, *hidden_dims, 1)
        self.q1 = Mlp(widths, rng)
        self.q2 = Mlp(widths, rng)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.opt1 = Adam(self.q1.n_params, lr)
        self.opt2 = Adam(self.q2.n_params, lr)
        self.tau = float(tau)

    def q_min(self, x: np.ndarray) -> np.ndarray:
        """Pointwise min of the online critics; used by policy objectives."""
        return np.minimum(self.q1.forward(x)[:, 0], self.q2.forward(x)[:, 0])

    def target_q_min(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(
            self.q1_target.forward(x)[:, 0], self.q2_target.forward(x)[:, 0]
        )

    def update(self, x: np.ndarray, y: np.ndarray,
               weights: np.ndarray) -> tuple[float, float]:
        """One Adam step per critic on the weighted mean squared error.

        Both critics regress the same targets y with per-sample weights
        (all ones for the single-step algorithm).
        """
        weights = np.asarray(weights, dtype=np.float64)
        if np.any(weights < 0.0):
            raise ValueError("importance weights must be non-negative")
        batch = x.shape[0]
        losses = []
        for net, opt in ((self.q1, self.opt1), (self.q2, self.opt2)):
            q, tape = net.forward_tape(x)
            err = q[:, 0] - y
            loss = float(np.sum(weights * err * err) / batch)
            if not np.isfinite(loss):
                raise FloatingPointError("critic loss is not finite")
            out_grad = (2.0 * weights * err / batch)[:, None]
            grads = net.backward(tape, out_grad)
            opt.step(net.params, grads)
            losses.append(loss)
        return losses[0], losses[1]

    def soft_update(self) -> None:
        soft_mix(self.q1_target.params, self.q1.params, self.tau)
        soft_mix(self.q2_target.params, self.q2.params, self.tau)


def soft_td_target(pair: SoftCriticPair, batch: Batch, next_probs: np.ndarray,
                   grid: ActionGrid, alpha: float, gamma: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Single-step soft TD target.

    y = r + gamma * (alpha * H(s') + min_j Q'_j(s', a')) with a' drawn from
    the supplied successor-state distributions; entropy and bootstrap are
    masked out on terminal transitions.
    """
    idx = sample_indices(next_probs, rng)
    a_next = grid.actions(idx)
    h_next = normalized_entropy(next_probs).sum(axis=-1)
    x_next = np.concatenate([batch.next_state, a_next], axis=1)
    q_next = pair.target_q_min(x_next)
    alive = ~batch.terminal
    return batch.reward + gamma * alive * (alpha * h_next + q_next)


def multistep_td_target(pair: SoftCriticPair, windows: WindowBatch,
                        probs_fn: Callable[[np.ndarray], np.ndarray],
                        grid: ActionGrid, alpha: float, gamma: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Three-step soft TD target over terminal-shortened windows.

    For a window of length L starting at t,
    y = sum_{k<L} gamma^k r_{t+k} + sum_{1<=k<L} gamma^k alpha H(s_{t+k})
      + [not terminal] gamma^L (alpha H(s_{t+L}) + min_j Q'_j(s_{t+L}, a~)),
    where states s_{t+k} are the successor states stored in the window and
    a~ is drawn from the target policy at the bootstrap state.  ``probs_fn``
    maps a state batch to its [B, M, N] action distributions; the caller
    chooses which temperature that policy uses.
    """
    B, W = windows.reward.shape
    # one distribution per (window, position); padded rows are harmless
    flat_next = windows.next_state.reshape(B * W, -1)
    probs = probs_fn(flat_next).reshape(B, W, grid.action_dim, grid.n_bins)
    h = normalized_entropy(probs).sum(axis=-1)  # [B, W]

    y = windows.reward[:, 0].copy()
    for k in range(1, W):
        has_step = windows.valid[:, k]
        y += (gamma ** k) * has_step * (alpha * h[:, k - 1] + windows.reward[:, k])

    length = windows.length
    rows = np.arange(B)
    boot_state = windows.next_state[rows, length - 1]
    boot_probs = probs[rows, length - 1]
    idx = sample_indices(boot_probs, rng)
    x_boot = np.concatenate([boot_state, grid.actions(idx)], axis=1)
    q_boot = pair.target_q_min(x_boot)
    alive = ~windows.terminal_last
    y += alive * (gamma ** length) * (alpha * h[rows, length - 1] + q_boot)
    return y
